#ifndef IMLMM_MODEL_HPP
#define IMLMM_MODEL_HPP

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace imlmm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Observed side of the two-stage model y = X beta + Z alpha + eps.
///
/// Random-effect designs are stored row-wise: row j of `Z` belongs to group
/// `group[j]`, so the block Z_i is the set of rows of group i. Groups are
/// numbered 0..N-1 in first-appearance order.
struct Dataset {
  VectorXd y;
  MatrixXd X;
  MatrixXd Z;
  MatrixXd A;
  std::vector<int> group;
  std::vector<std::string> group_labels;
  std::vector<int> group_sizes;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }
  Eigen::Index a() const { return Z.cols(); }
  int num_groups() const { return static_cast<int>(group_sizes.size()); }
  bool is_random_intercept() const;
  bool is_intercept_only() const;
};

/// Builds and validates a dataset. Group labels are assigned in first-appearance
/// order of `group_ids`. Throws imlmm::Error on any invariant violation.
Dataset make_dataset(VectorXd y, MatrixXd X, MatrixXd Z, MatrixXd A,
                     const std::vector<std::string>& group_ids);

/// Random-intercept model y_ij = mu + alpha_i + eps_ij with the given sizes.
Dataset random_intercept_dataset(const VectorXd& y, const std::vector<int>& group_sizes);

void validate_dataset(const Dataset& d);

/// Block-diagonal G with blocks Z_i A Z_i^T.
MatrixXd assemble_g(const Dataset& d);

/// Orthonormal basis K of the residual space: K^T K = I, K^T X = 0.
MatrixXd projection_basis(const MatrixXd& X);

/// Distinct eigenvalues of H = K^T G K with their eigenspaces, plus the design
/// quantities every statistic needs.
struct Spectrum {
  std::vector<double> lambdas;  // decreasing
  std::vector<int> mults;
  std::vector<MatrixXd> blocks;  // (n-p) x r_l, columns orthonormal
  MatrixXd K;
  MatrixXd XtX_inv;  // B B^T
  MatrixXd BGBt;

  int L() const { return static_cast<int>(lambdas.size()); }
  int residual_dof() const;
};

inline constexpr double kDefaultClusterTol = 1e-8;

Spectrum eigen_structure(const Dataset& d, const MatrixXd& K,
                         double tol_cluster = kDefaultClusterTol);
Spectrum eigen_structure(const Dataset& d);

struct SuffStats {
  VectorXd By;
  std::vector<double> S;
  std::shared_ptr<const Spectrum> spectrum;

  const MatrixXd& BBt() const { return spectrum->XtX_inv; }
  const MatrixXd& BGBt() const { return spectrum->BGBt; }
  int L() const { return spectrum->L(); }
  double lambda(int l) const { return spectrum->lambdas[l]; }
  int mult(int l) const { return spectrum->mults[l]; }
};

SuffStats sufficient_stats(const Dataset& d, std::shared_ptr<const Spectrum> spectrum);

enum class TargetKind { GroupMean, NewObservation };

struct PredictionTarget {
  VectorXd x;
  VectorXd z;
  TargetKind kind = TargetKind::GroupMean;
};

/// Default target for intercept-only random-intercept data: x = 1, z = 1.
PredictionTarget default_target(const Dataset& d, TargetKind kind);

/// Var(target - x^T B Y) = c1 sigma_alpha^2 + c2 sigma_eps^2.
struct PredictionConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

PredictionConstants prediction_constants(const Dataset& d, const SuffStats& stats,
                                         const PredictionTarget& target);
PredictionConstants prediction_constants(const Dataset& d, const PredictionTarget& target);

/// Everything a prediction method needs, computed once per dataset.
struct PredictionProblem {
  Dataset data;
  SuffStats stats;
  PredictionTarget target;
  PredictionConstants consts;
  double center = 0.0;
};

/// Reuses `spectrum` when given (designs repeated across replications).
PredictionProblem make_problem(Dataset d, PredictionTarget target,
                               std::shared_ptr<const Spectrum> spectrum = nullptr);

/// Point prediction x^T B y.
inline double prediction_center(const SuffStats& stats, const PredictionTarget& target) {
  return target.x.dot(stats.By);
}

}  // namespace imlmm

#endif
