#ifndef IMLMM_REPORT_IO_HPP
#define IMLMM_REPORT_IO_HPP

#include "baselines.hpp"
#include "generalized_im.hpp"
#include "joint_im.hpp"
#include "simulation.hpp"

#include <string>
#include <utility>
#include <vector>

namespace imlmm {

std::string interval_report_json(const IntervalReport& r);
std::string dataset_summary_json(const PredictionProblem& problem);
std::string fit_json(const PredictionProblem& problem, const VarianceEstimate& fit);
std::string sim_report_json(const SimReport& report);
std::string sim_report_csv(const SimReport& report);

struct ContourRow {
  double theta = 0.0;
  double plausibility = 0.0;
  double argmax_rho = -1.0;  // negative: not applicable
};

std::string contour_csv(const std::vector<ContourRow>& rows);
std::string joint_contour_diagnostics_json(const JointContour& c);
std::string gen_contour_diagnostics_json(const GenContour& c, const std::string& mode,
                                         double eta_hat, double delta);

}  // namespace imlmm

#endif
