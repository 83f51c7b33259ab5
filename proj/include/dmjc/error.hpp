#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmjc {

enum class Errc {
  invalid_argument,
  shape_mismatch,
  non_finite,       // numerical: NaN/Inf produced during computation
  divergence,       // training loss became non-finite
  config,
  io,               // unreadable / unwritable path
  bad_magic,
  ragged_rows,
  parse,
  data_non_finite,  // NaN/Inf found in an input file
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::divergence: return "divergence";
    case Errc::config: return "config";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::ragged_rows: return "ragged_rows";
    case Errc::parse: return "parse";
    case Errc::data_non_finite: return "data_non_finite";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

/// Process exit code for the CLI: 1 config, 2 data, 3 numerical divergence.
constexpr int exit_code_for(Errc c) noexcept {
  switch (c) {
    case Errc::config:
    case Errc::invalid_argument:
      return 1;
    case Errc::io:
    case Errc::bad_magic:
    case Errc::ragged_rows:
    case Errc::parse:
    case Errc::data_non_finite:
    case Errc::shape_mismatch:
      return 2;
    case Errc::non_finite:
    case Errc::divergence:
      return 3;
  }
  return 1;
}

}  // namespace dmjc
