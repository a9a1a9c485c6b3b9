// wlsurf: interest-point detection over reduced-word-length integral images.
//
// Subcommands:
//   detect         run the detector on PGM images and write point files
//   compare        run several reduction methods and emit comparison CSVs
//   tables         emit storage-sizing and word-length-reduction CSVs
//   fetch-dataset  download a benchmark scene into the local cache

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wlsurf/analysis.hpp"
#include "wlsurf/dataset.hpp"
#include "wlsurf/detector.hpp"
#include "wlsurf/error.hpp"
#include "wlsurf/image.hpp"
#include "wlsurf/reduction.hpp"

namespace {

using namespace wlsurf;

const std::map<std::string, Method> kMethodNames = {
    {"full", Method::Full},
    {"exact", Method::Exact},
    {"modified-exact", Method::ModifiedExact},
    {"approximate", Method::Approximate},
    {"even", Method::EvenImage},
};

ReductionConfig parse_method_spec(const std::string& spec) {
  ReductionConfig cfg;
  std::string name = spec;
  const std::size_t colon = spec.find(':');
  if (colon != std::string::npos) {
    name = spec.substr(0, colon);
    try {
      cfg.shift = std::stoi(spec.substr(colon + 1));
    } catch (const std::exception&) {
      raise(errc::usage_error, "--methods entry '" + spec +
                                   "' has a malformed shift; use name:p");
    }
  }
  const auto it = kMethodNames.find(name);
  if (it == kMethodNames.end())
    raise(errc::usage_error,
          "--methods entry '" + spec +
              "' is unknown; use full, exact, modified-exact, approximate or "
              "even, optionally with :p");
  cfg.method = it->second;
  return cfg;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    raise(errc::io_error, "cannot write " + path.string());
}

std::filesystem::path ensure_out_dir(const std::string& dir) {
  std::filesystem::path out(dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec)
    raise(errc::io_error, "cannot create --out directory " + out.string() +
                              ": " + ec.message());
  return out;
}

std::vector<Size> parse_sizes(const std::vector<std::string>& tokens) {
  std::vector<Size> sizes;
  for (const std::string& tok : tokens) {
    Size s;
    char extra = 0;
    if (std::sscanf(tok.c_str(), "%dx%d%c", &s.width, &s.height, &extra) != 2 ||
        s.width < 1 || s.height < 1)
      raise(errc::usage_error,
            "--sizes entry '" + tok + "' is not of the form WxH");
    sizes.push_back(s);
  }
  return sizes;
}

struct DetectOptions {
  std::vector<std::string> inputs;
  std::string method = "full";
  int shift = 0;
  double threshold = 50000.0;
  int octaves = 4;
  int bits = 0;  // 0 = use the method's computed word length
  std::string out_dir = ".";
};

int cmd_detect(const DetectOptions& opt) {
  ReductionConfig cfg;
  cfg.method = kMethodNames.at(opt.method);
  cfg.shift = opt.shift;
  const std::filesystem::path out_dir = ensure_out_dir(opt.out_dir);
  for (const std::string& input : opt.inputs) {
    const GrayImage img = load_pgm(input);
    PlannedImage planned = plan(img, cfg);
    if (opt.bits != 0) {
      if (opt.bits < planned.plan.effective_bits_per_pixel || opt.bits > 64)
        raise(errc::usage_error,
              "--bits " + std::to_string(opt.bits) + " must lie in [" +
                  std::to_string(planned.plan.effective_bits_per_pixel) +
                  ", 64] for this input");
      if (opt.bits < planned.plan.word_bits)
        std::cerr << "WARNING: --bits " << opt.bits
                  << " is below the method's bound of " << planned.plan.word_bits
                  << "; box sums may wrap and detections may be wrong\n";
      planned.plan.word_bits = opt.bits;
    }
    DetectStats stats;
    const std::vector<InterestPoint> points = detect_planned(
        planned.prepared, planned.plan, opt.threshold, opt.octaves, &stats);

    const std::string stem = std::filesystem::path(input).stem().string();
    const std::filesystem::path txt = out_dir / (stem + "_points.txt");
    const std::filesystem::path csv = out_dir / (stem + "_points.csv");
    write_text_file(txt, points_to_text(points));
    write_text_file(csv, points_to_csv(points));

    std::cout << "input=" << input << " method=" << method_name(cfg.method)
              << " shift=" << cfg.shift << " l_ii=" << planned.plan.word_bits
              << " threshold=" << opt.threshold << " octaves=" << opt.octaves
              << "\n"
              << points.size() << " points (candidates=" << stats.candidates
              << ", rejected_offset=" << stats.rejected_offset
              << ", rejected_singular=" << stats.rejected_singular << ") -> "
              << txt.string() << ", " << csv.string() << "\n";
  }
  return 0;
}

struct CompareOptions {
  std::vector<std::string> inputs;
  std::string methods;
  double threshold = 50000.0;
  int octaves = 4;
  std::string out_dir = ".";
};

int cmd_compare(const CompareOptions& opt) {
  std::vector<std::string> specs;
  for (std::size_t pos = 0; pos <= opt.methods.size();) {
    const std::size_t comma = std::min(opt.methods.find(',', pos),
                                       opt.methods.size());
    if (comma > pos) specs.push_back(opt.methods.substr(pos, comma - pos));
    pos = comma + 1;
  }
  if (specs.size() < 2)
    raise(errc::usage_error, "--methods needs at least two entries; the first "
                             "is the baseline");
  std::vector<ReductionConfig> configs;
  for (const std::string& spec : specs)
    configs.push_back(parse_method_spec(spec));

  std::vector<GrayImage> images;
  std::vector<std::string> ids;
  bool load_failed = false;
  for (const std::string& input : opt.inputs) {
    try {
      images.push_back(load_pgm(input));
      ids.push_back(std::filesystem::path(input).stem().string());
    } catch (const Error& e) {
      std::cerr << "error: skipping " << input << ": " << e.what() << "\n";
      load_failed = true;
    }
  }
  if (images.empty())
    raise(errc::io_error, "no readable input images");

  const ComparisonReport report =
      compare_methods(images, ids, configs, opt.threshold, opt.octaves);
  const std::filesystem::path out_dir = ensure_out_dir(opt.out_dir);
  const std::filesystem::path grid = out_dir / "compare_grid.csv";
  const std::filesystem::path counts = out_dir / "compare_counts.csv";
  write_text_file(grid, comparison_grid_csv(report));
  write_text_file(counts, comparison_counts_csv(report));
  std::cout << comparison_text(report) << "wrote " << grid.string() << ", "
            << counts.string() << "\n";
  return load_failed ? static_cast<int>(errc::io_error) : 0;
}

struct TablesOptions {
  std::vector<std::string> sizes;
  std::string out_dir = ".";
};

int cmd_tables(const TablesOptions& opt) {
  std::vector<Size> sizes;
  if (opt.sizes.empty())
    sizes = {{320, 240}, {640, 480}, {800, 640}, {1024, 768}, {1280, 1024}};
  else
    sizes = parse_sizes(opt.sizes);

  const std::filesystem::path out_dir = ensure_out_dir(opt.out_dir);
  const auto sizing = sizing_table(sizes, 8);
  write_text_file(out_dir / "sizing.csv", sizing_table_csv(sizing));
  std::cout << "wrote " << (out_dir / "sizing.csv").string() << "\n";

  const auto emit = [&](const std::string& name, Method method, int shift) {
    const auto rows = reduction_table(sizes, method, shift);
    write_text_file(out_dir / name, reduction_table_csv(rows));
    std::cout << "wrote " << (out_dir / name).string() << "\n";
  };
  emit("reduction_exact.csv", Method::Exact, 0);
  emit("reduction_modified_exact.csv", Method::ModifiedExact, 0);
  for (int p = 1; p <= 4; ++p)
    emit("reduction_even_p" + std::to_string(p) + ".csv", Method::EvenImage, p);
  return 0;
}

struct FetchOptions {
  std::string scene;
  std::string base_url = kDefaultBaseUrl;
  std::string cache_dir;
};

int cmd_fetch(const FetchOptions& opt) {
  std::filesystem::path cache(opt.cache_dir);
  if (cache.empty()) {
    if (const char* env = std::getenv("WLSURF_CACHE_DIR"))
      cache = env;
    else
      cache = "wlsurf-cache";
  }
  const FetchResult result = fetch_dataset(opt.scene, opt.base_url, cache);
  if (result.from_cache)
    std::cout << "cache hit: " << result.scene_dir.string() << " ("
              << result.images.size() << " images)\n";
  else
    std::cout << "downloaded " << result.downloaded_bytes << " bytes, cached "
              << result.images.size() << " images in "
              << result.scene_dir.string() << "\n";
  for (const std::string& name : result.images)
    std::cout << "  " << name << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SURF interest points over reduced-word-length integral images"};
  app.require_subcommand(1);

  DetectOptions detect_opt;
  CLI::App* detect = app.add_subcommand("detect", "Detect interest points");
  detect->add_option("inputs", detect_opt.inputs, "Input PGM images")
      ->required()
      ->expected(-1);
  detect->add_option("--method", detect_opt.method, "Reduction method")
      ->check(CLI::IsMember(
          {"full", "exact", "modified-exact", "approximate", "even"}))
      ->capture_default_str();
  detect->add_option("--shift", detect_opt.shift,
                     "Right-shift p for approximate/even methods");
  detect->add_option("--threshold", detect_opt.threshold, "Response threshold")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  detect->add_option("--octaves", detect_opt.octaves, "Octave count")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  detect->add_option("--bits", detect_opt.bits,
                     "Override the integral-image word length");
  detect->add_option("--out", detect_opt.out_dir, "Output directory")
      ->capture_default_str();

  CompareOptions compare_opt;
  CLI::App* compare =
      app.add_subcommand("compare", "Compare reduction methods");
  compare->add_option("inputs", compare_opt.inputs, "Input PGM images")
      ->required()
      ->expected(-1);
  compare
      ->add_option("--methods", compare_opt.methods,
                   "Comma-separated method list, e.g. full,exact,even:2; the "
                   "first entry is the baseline")
      ->required();
  compare->add_option("--threshold", compare_opt.threshold, "Response threshold")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  compare->add_option("--octaves", compare_opt.octaves, "Octave count")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  compare->add_option("--out", compare_opt.out_dir, "Output directory")
      ->capture_default_str();

  TablesOptions tables_opt;
  CLI::App* tables =
      app.add_subcommand("tables", "Emit sizing and reduction CSV tables");
  tables
      ->add_option("--sizes", tables_opt.sizes,
                   "Comma-separated image sizes as WxH")
      ->delimiter(',');
  tables->add_option("--out", tables_opt.out_dir, "Output directory")
      ->capture_default_str();

  FetchOptions fetch_opt;
  CLI::App* fetch =
      app.add_subcommand("fetch-dataset", "Download a benchmark scene");
  fetch->add_option("scene", fetch_opt.scene, "Scene name, e.g. graffiti")
      ->required();
  fetch->add_option("--base-url", fetch_opt.base_url, "Archive base URL")
      ->capture_default_str();
  fetch->add_option("--cache-dir", fetch_opt.cache_dir,
                    "Cache directory (default: $WLSURF_CACHE_DIR or "
                    "./wlsurf-cache)");

  try {
    app.parse(argc, argv);
    if (detect->parsed()) return cmd_detect(detect_opt);
    if (compare->parsed()) return cmd_compare(compare_opt);
    if (tables->parsed()) return cmd_tables(tables_opt);
    if (fetch->parsed()) return cmd_fetch(fetch_opt);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return static_cast<int>(wlsurf::errc::usage_error);
  } catch (const wlsurf::Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }
  return 0;
}
