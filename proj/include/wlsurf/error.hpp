#pragma once

#include <stdexcept>
#include <string>

namespace wlsurf {

/// Error categories. Each maps to a distinct nonzero process exit status in
/// the CLI (see tools/), so scripted callers can tell failure classes apart.
enum class errc {
  parse_error = 1,        // malformed input file (PGM header/payload)
  unsupported_depth,      // pixel depth outside what an operation accepts
  config_error,           // invalid parameter combination
  bounds_error,           // rect or coordinate outside the image
  validation_error,       // mismatched image/integral pair
  schedule_error,         // image too small for any scale-space layer
  layout_error,           // invalid filter geometry
  arity_error,            // wrong number of response maps for NMS
  io_error,               // file system failure
  usage_error,            // bad command line
  network_error,          // dataset download failure
  archive_error,          // dataset archive damaged or size mismatch
  cache_error,            // dataset cache directory not writable
};

class Error : public std::runtime_error {
public:
  Error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

inline const char* errc_name(errc code) {
  switch (code) {
    case errc::parse_error: return "parse error";
    case errc::unsupported_depth: return "unsupported depth";
    case errc::config_error: return "configuration error";
    case errc::bounds_error: return "bounds error";
    case errc::validation_error: return "validation error";
    case errc::schedule_error: return "schedule error";
    case errc::layout_error: return "layout error";
    case errc::arity_error: return "arity error";
    case errc::io_error: return "i/o error";
    case errc::usage_error: return "usage error";
    case errc::network_error: return "network error";
    case errc::archive_error: return "archive error";
    case errc::cache_error: return "cache error";
  }
  return "error";
}

}  // namespace wlsurf
