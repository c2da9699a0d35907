#pragma once

#include <stdexcept>
#include <string>

namespace fbtc {

/// Error categories raised by the library. The names returned by
/// errc_name() are stable and appear verbatim in CLI error reports.
enum class Errc {
  length_mismatch,
  too_short,
  non_monotone_times,
  non_finite_value,
  degenerate_time_spread,
  midpoint_out_of_range,
  all_columns_constant,
  invalid_k,
  isolated_point,
  eigen_failure,
  parse_error,
  io_error,
  invalid_parameter,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::too_short: return "TooShort";
    case Errc::non_monotone_times: return "NonMonotoneTimes";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::degenerate_time_spread: return "DegenerateTimeSpread";
    case Errc::midpoint_out_of_range: return "MidpointOutOfRange";
    case Errc::all_columns_constant: return "AllColumnsConstant";
    case Errc::invalid_k: return "InvalidK";
    case Errc::isolated_point: return "IsolatedPoint";
    case Errc::eigen_failure: return "EigenFailure";
    case Errc::parse_error: return "ParseError";
    case Errc::io_error: return "IoError";
    case Errc::invalid_parameter: return "InvalidParameter";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }
  const char* code_name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace fbtc
