#ifndef IMLMM_REPORT_HPP
#define IMLMM_REPORT_HPP

#include "model.hpp"

#include <map>
#include <string>
#include <vector>

namespace imlmm {

/// One prediction interval with the numbers needed to audit it.
struct IntervalReport {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::string method;
  TargetKind kind = TargetKind::GroupMean;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;

  double length() const { return upper - lower; }
  bool contains(double value) const { return lower <= value && value <= upper; }
};

const char* target_kind_tag(TargetKind kind) noexcept;

}  // namespace imlmm

#endif
