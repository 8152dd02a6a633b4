#ifndef IMLMM_ERRORS_HPP
#define IMLMM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace imlmm {

// Values are part of the C ABI (imlmm_status) and the CLI exit codes.
enum class ErrorCode : int {
  Usage = 2,
  Io = 3,
  Parse = 4,
  MissingColumn = 5,
  NonNumeric = 6,
  EmptyGroup = 7,
  RankDeficientDesign = 8,
  DimensionMismatch = 9,
  DegenerateSpectrum = 10,
  DegenerateData = 11,
  Domain = 12,
  Estimation = 13,
  UnboundedDenominator = 14,
  EmptyCut = 15,
  Bracket = 16,
  Internal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace imlmm

#endif
