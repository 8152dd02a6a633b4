#ifndef IMLMM_METHODS_HPP
#define IMLMM_METHODS_HPP

#include "baselines.hpp"
#include "errors.hpp"
#include "generalized_im.hpp"
#include "intervals.hpp"
#include "joint_im.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace imlmm {

enum class Method {
  Oracle,
  StudentT,
  Satterthwaite,
  GenSatterthwaite,
  ParamBoot,
  NonparamBoot,
  Joint,
  AdjJoint,
  Gen,
  AdjGen,
  IidNormal,
};

const char* method_tag(Method m) noexcept;
std::optional<Method> parse_method(std::string_view tag);
const std::vector<Method>& all_methods();

struct MethodOptions {
  std::vector<double> rho_grid = default_rho_grid();
  std::size_t joint_m = 5000;
  SamplerOptions sampler;
  std::size_t param_boot_B = 500;
  std::size_t nonparam_boot_B = 500;
  std::size_t delta_B = 100;
  std::optional<VariancePair> truth;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CutFailure {
  ErrorCode code = ErrorCode::Internal;
  std::string message;
};

/// Intervals of one method for each alpha, or the error that stopped it.
/// When only some levels fail (an empty joint cut, say), `ok` stays true and
/// `cut_failures[i]` is set for each failed level; its interval is NaN.
struct MethodResult {
  Method method = Method::Oracle;
  std::vector<IntervalReport> intervals;
  std::vector<std::optional<CutFailure>> cut_failures;
  bool ok = true;
  ErrorCode error = ErrorCode::Internal;
  std::string message;
};

/// Evaluates several methods on one problem. The REML fit, the joint contour
/// and the bootstrap distributions are computed once and reused across
/// methods and alpha levels. Each method draws from its own substream of
/// `options.seed`, so results do not depend on which other methods run.
std::vector<MethodResult> compute_methods(const std::vector<Method>& methods,
                                          const PredictionProblem& problem,
                                          const std::vector<double>& alphas,
                                          const MethodOptions& options);

/// Single method, single alpha; throws on failure.
IntervalReport compute_interval(Method method, const PredictionProblem& problem, double alpha,
                                const MethodOptions& options);

JointContour build_joint_contour(const PredictionProblem& problem, const MethodOptions& options);

/// Generalized contour for Gen (Sup) or AdjGen; `delta_out` receives the
/// bootstrap standard error for AdjGen.
GenContour build_gen_contour(Method method, const PredictionProblem& problem,
                             const MethodOptions& options, const VarianceEstimate* fit = nullptr,
                             double* delta_out = nullptr);

Contour as_contour(const JointContour& c);
Contour as_contour(const GenContour& c);

}  // namespace imlmm

#endif
