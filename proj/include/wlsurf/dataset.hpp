#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <zlib.h>

#include "wlsurf/error.hpp"
#include "wlsurf/image.hpp"

namespace wlsurf {

/// Scenes of the affine covariant regions benchmark and their archive names.
struct SceneArchive {
  const char* scene;
  const char* archive;
};

inline std::span<const SceneArchive> known_scenes() {
  static constexpr SceneArchive table[] = {
      {"graffiti", "graf.tar.gz"}, {"wall", "wall.tar.gz"},
      {"boat", "boat.tar.gz"},     {"bark", "bark.tar.gz"},
      {"bikes", "bikes.tar.gz"},   {"trees", "trees.tar.gz"},
      {"leuven", "leuven.tar.gz"}, {"ubc", "ubc.tar.gz"},
  };
  return table;
}

inline constexpr const char* kDefaultBaseUrl =
    "https://www.robots.ox.ac.uk/~vgg/research/affine/det_eval_files";

inline std::string archive_for_scene(const std::string& scene) {
  for (const SceneArchive& s : known_scenes())
    if (scene == s.scene) return s.archive;
  std::string known;
  for (const SceneArchive& s : known_scenes()) {
    if (!known.empty()) known += ", ";
    known += s.scene;
  }
  raise(errc::usage_error, "unknown scene '" + scene + "' (known: " + known + ")");
}

namespace detail {

inline std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> in) {
  if (in.size() < 2 || in[0] != 0x1f || in[1] != 0x8b)
    raise(errc::archive_error, "archive is not gzip data");
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    raise(errc::archive_error, "inflate initialization failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      raise(errc::archive_error, "corrupt gzip stream");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

struct TarEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

inline std::vector<TarEntry> untar(std::span<const std::uint8_t> bytes) {
  std::vector<TarEntry> entries;
  std::size_t pos = 0;
  while (pos + 512 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    if (std::all_of(hdr, hdr + 512, [](std::uint8_t b) { return b == 0; }))
      break;
    std::string name(reinterpret_cast<const char*>(hdr),
                     strnlen(reinterpret_cast<const char*>(hdr), 100));
    std::uint64_t size = 0;
    for (int i = 124; i < 136; ++i) {
      const char c = static_cast<char>(hdr[i]);
      if (c == '\0' || c == ' ') break;
      if (c < '0' || c > '7')
        raise(errc::archive_error, "tar header has a malformed size field");
      size = size * 8 + static_cast<std::uint64_t>(c - '0');
    }
    const char type = static_cast<char>(hdr[156]);
    pos += 512;
    if (pos + size > bytes.size())
      raise(errc::archive_error, "tar entry '" + name + "' is truncated");
    if (type == '0' || type == '\0')
      entries.push_back(
          {std::move(name), {bytes.data() + pos, bytes.data() + pos + size}});
    pos += (size + 511) / 512 * 512;
  }
  return entries;
}

inline GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2'))
    return read_pgm(bytes);
  PnmTokenizer tok(bytes);
  if (tok.next_token("magic number") != "P6")
    raise(errc::parse_error, "image is neither PGM nor binary PPM");
  const int width = tok.next_int("width", 1, 1 << 20);
  const int height = tok.next_int("height", 1, 1 << 20);
  const int maxval = tok.next_int("maxval", 1, 255);
  std::span<const std::uint8_t> rgb = tok.binary_rest();
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (rgb.size() < need)
    raise(errc::parse_error, "PPM payload is shorter than width*height*3");
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const std::uint32_t r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
    std::uint32_t y = (299 * r + 587 * g + 114 * b + 500) / 1000;
    if (maxval != 255) y = (y * 255 + maxval / 2) / maxval;
    gray[i] = static_cast<std::uint8_t>(std::min<std::uint32_t>(y, 255));
  }
  return GrayImage(width, height, std::move(gray));
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

struct FetchResult {
  std::filesystem::path scene_dir;
  std::vector<std::string> images;  // sorted PGM filenames inside scene_dir
  bool from_cache = false;
  std::uint64_t downloaded_bytes = 0;
};

/// Downloads one benchmark scene, converts its images to 8-bit PGM and places
/// them under cache_dir/<scene>/. A scene already present is not re-fetched.
inline FetchResult fetch_dataset(const std::string& scene,
                                 const std::string& base_url,
                                 const std::filesystem::path& cache_dir) {
  const std::string archive = archive_for_scene(scene);
  FetchResult result;
  result.scene_dir = cache_dir / scene;

  std::error_code ec;
  if (std::filesystem::is_directory(result.scene_dir, ec)) {
    for (const auto& entry :
         std::filesystem::directory_iterator(result.scene_dir, ec))
      if (entry.path().extension() == ".pgm")
        result.images.push_back(entry.path().filename().string());
    if (!result.images.empty()) {
      std::sort(result.images.begin(), result.images.end());
      result.from_cache = true;
      return result;
    }
  }

  const std::size_t path_start = base_url.find("://");
  const std::size_t origin_end =
      base_url.find('/', path_start == std::string::npos ? 0 : path_start + 3);
  const std::string origin = base_url.substr(0, origin_end);
  std::string prefix =
      origin_end == std::string::npos ? "" : base_url.substr(origin_end);
  if (prefix.empty() || prefix.back() != '/') prefix += '/';

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (origin.rfind("https://", 0) == 0)
    raise(errc::network_error,
          "TLS support is not built in; pass an http:// base url");
#endif

  httplib::Client client(origin);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  client.set_follow_location(true);
  httplib::Result res = client.Get(prefix + archive);
  if (!res)
    raise(errc::network_error,
          "could not fetch " + origin + prefix + archive + ": " +
              httplib::to_string(res.error()));
  if (res->status != 200)
    raise(errc::network_error, "server returned status " +
                                   std::to_string(res->status) + " for " +
                                   prefix + archive);
  if (res->has_header("Content-Length")) {
    const auto declared = res->get_header_value_u64("Content-Length");
    if (declared != res->body.size())
      raise(errc::archive_error,
            "declared size " + std::to_string(declared) + " but received " +
                std::to_string(res->body.size()) + " bytes");
  }
  result.downloaded_bytes = res->body.size();

  const std::vector<std::uint8_t> tar = detail::gunzip(std::span(
      reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
  const std::vector<detail::TarEntry> entries = detail::untar(tar);

  std::filesystem::create_directories(result.scene_dir, ec);
  if (ec)
    raise(errc::cache_error,
          "cannot create " + result.scene_dir.string() + ": " + ec.message());
  for (const detail::TarEntry& entry : entries) {
    if (!detail::has_suffix(entry.name, ".ppm") &&
        !detail::has_suffix(entry.name, ".pgm"))
      continue;
    const GrayImage gray = detail::decode_pnm(entry.data);
    std::filesystem::path out = result.scene_dir /
                                std::filesystem::path(entry.name)
                                    .filename()
                                    .replace_extension(".pgm");
    try {
      save_pgm(gray, out);
    } catch (const Error& e) {
      raise(errc::cache_error, std::string("cannot write into cache: ") + e.what());
    }
    result.images.push_back(out.filename().string());
  }
  if (result.images.empty())
    raise(errc::archive_error, "archive held no PPM or PGM images");
  std::sort(result.images.begin(), result.images.end());
  return result;
}

}  // namespace wlsurf
