#include "model.hpp"

#include "errors.hpp"
#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace imlmm {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kSymTol = 1e-10;
constexpr double kZeroStatTol = 1e-12;

Eigen::Index numerical_rank(const MatrixXd& X) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  qr.setThreshold(kRankTol);
  return qr.rank();
}

}  // namespace

bool Dataset::is_random_intercept() const {
  return a() == 1 && A.rows() == 1 && A(0, 0) == 1.0 && (Z.array() == 1.0).all();
}

bool Dataset::is_intercept_only() const {
  return p() == 1 && (X.array() == 1.0).all();
}

void validate_dataset(const Dataset& d) {
  const Eigen::Index n = d.n();
  if (n == 0) fail(ErrorCode::DimensionMismatch, "dataset has no observations");
  if (d.X.rows() != n || d.Z.rows() != n ||
      static_cast<Eigen::Index>(d.group.size()) != n)
    fail(ErrorCode::DimensionMismatch, "y, X, Z and group must have the same number of rows");
  if (d.A.rows() != d.a() || d.A.cols() != d.a())
    fail(ErrorCode::DimensionMismatch, "A must be a x a where a = columns of Z");
  if (d.a() == 0) fail(ErrorCode::DimensionMismatch, "Z has no columns");
  if (d.p() == 0) fail(ErrorCode::DimensionMismatch, "X has no columns");
  if (!d.y.allFinite() || !d.X.allFinite() || !d.Z.allFinite() || !d.A.allFinite())
    fail(ErrorCode::NonNumeric, "dataset contains non-finite values");

  const int N = d.num_groups();
  std::vector<int> counts(N, 0);
  for (int g : d.group) {
    if (g < 0 || g >= N) fail(ErrorCode::DimensionMismatch, "group index out of range");
    ++counts[g];
  }
  for (int i = 0; i < N; ++i) {
    if (counts[i] == 0 || counts[i] != d.group_sizes[i]) {
      const std::string label =
          i < static_cast<int>(d.group_labels.size()) ? d.group_labels[i] : std::to_string(i);
      fail(ErrorCode::EmptyGroup, "group '" + label + "' is empty or has an inconsistent size");
    }
  }

  const double scale = std::max(1.0, d.A.cwiseAbs().maxCoeff());
  if ((d.A - d.A.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale)
    fail(ErrorCode::DimensionMismatch, "A is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(d.A, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= kSymTol * std::max(1.0, eig.eigenvalues().maxCoeff()))
    fail(ErrorCode::DimensionMismatch, "A is not positive definite");

  if (d.p() >= n)
    fail(ErrorCode::RankDeficientDesign, "no residual degrees of freedom (p >= n)");
  if (numerical_rank(d.X) < d.p())
    fail(ErrorCode::RankDeficientDesign, "fixed-effects design X is rank deficient");
}

Dataset make_dataset(VectorXd y, MatrixXd X, MatrixXd Z, MatrixXd A,
                     const std::vector<std::string>& group_ids) {
  Dataset d;
  d.y = std::move(y);
  d.X = std::move(X);
  d.Z = std::move(Z);
  d.A = std::move(A);
  std::unordered_map<std::string, int> index;
  d.group.reserve(group_ids.size());
  for (const auto& id : group_ids) {
    if (id.empty()) fail(ErrorCode::EmptyGroup, "blank group label");
    auto [it, inserted] = index.emplace(id, static_cast<int>(d.group_labels.size()));
    if (inserted) {
      d.group_labels.push_back(id);
      d.group_sizes.push_back(0);
    }
    d.group.push_back(it->second);
    ++d.group_sizes[it->second];
  }
  validate_dataset(d);
  return d;
}

Dataset random_intercept_dataset(const VectorXd& y, const std::vector<int>& group_sizes) {
  const int n = std::accumulate(group_sizes.begin(), group_sizes.end(), 0);
  if (n != y.size()) fail(ErrorCode::DimensionMismatch, "group sizes do not sum to n");
  Dataset d;
  d.y = y;
  d.X = MatrixXd::Ones(n, 1);
  d.Z = MatrixXd::Ones(n, 1);
  d.A = MatrixXd::Identity(1, 1);
  d.group_sizes = group_sizes;
  d.group.reserve(n);
  for (int i = 0; i < static_cast<int>(group_sizes.size()); ++i) {
    d.group_labels.push_back(std::to_string(i + 1));
    for (int j = 0; j < group_sizes[i]; ++j) d.group.push_back(i);
  }
  validate_dataset(d);
  return d;
}

MatrixXd assemble_g(const Dataset& d) {
  const Eigen::Index n = d.n();
  MatrixXd G = MatrixXd::Zero(n, n);
  const MatrixXd ZA = d.Z * d.A;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      if (d.group[i] == d.group[j]) {
        const double v = ZA.row(i).dot(d.Z.row(j));
        G(i, j) = v;
        G(j, i) = v;
      }
  return G;
}

MatrixXd projection_basis(const MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (p >= n) fail(ErrorCode::RankDeficientDesign, "no residual degrees of freedom (p >= n)");
  if (numerical_rank(X) < p)
    fail(ErrorCode::RankDeficientDesign, "fixed-effects design X is rank deficient");

  Eigen::HouseholderQR<MatrixXd> qr(X);
  const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, p);
  MatrixXd M = MatrixXd::Identity(n, n) - Q * Q.transpose();
  M = 0.5 * (M + M.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
  if (eig.info() != Eigen::Success) fail(ErrorCode::Internal, "projector eigensolver failed");
  // Eigenvalues are ascending: p zeros followed by n - p ones.
  const VectorXd& w = eig.eigenvalues();
  const Eigen::Index ones = (w.array() > 0.5).count();
  if (ones != n - p) fail(ErrorCode::RankDeficientDesign, "projector rank differs from n - p");
  return eig.eigenvectors().rightCols(n - p);
}

int Spectrum::residual_dof() const {
  return std::accumulate(mults.begin(), mults.end(), 0);
}

Spectrum eigen_structure(const Dataset& d, const MatrixXd& K, double tol_cluster) {
  if (K.rows() != d.n()) fail(ErrorCode::DimensionMismatch, "K rows must equal n");
  const MatrixXd G = assemble_g(d);
  MatrixXd H = K.transpose() * G * K;
  H = 0.5 * (H + H.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(H);
  if (eig.info() != Eigen::Success) fail(ErrorCode::Internal, "eigensolver failed on H");
  const Eigen::Index m = H.rows();
  const VectorXd& w = eig.eigenvalues();
  const MatrixXd& V = eig.eigenvectors();

  Spectrum s;
  const double top = w(m - 1);
  const double gap = tol_cluster * std::max(1.0, top);
  Eigen::Index i = m - 1;
  while (i >= 0) {
    Eigen::Index j = i;
    while (j - 1 >= 0 && w(j) - w(j - 1) <= gap) --j;
    const Eigen::Index r = i - j + 1;
    double value = w.segment(j, r).mean();
    if (std::abs(value) <= gap) value = 0.0;
    s.lambdas.push_back(value);
    s.mults.push_back(static_cast<int>(r));
    // Decreasing order within the block as well, for reproducible layout.
    s.blocks.push_back(V.middleCols(j, r).rowwise().reverse());
    i = j - 1;
  }
  if (s.L() < 2) {
    std::ostringstream msg;
    msg << "H has a single distinct eigenvalue (" << s.lambdas.front()
        << "); variance components are not separately identifiable";
    fail(ErrorCode::DegenerateSpectrum, msg.str());
  }

  s.K = K;
  s.XtX_inv = (d.X.transpose() * d.X).inverse();
  const MatrixXd B = s.XtX_inv * d.X.transpose();
  s.BGBt = B * G * B.transpose();
  s.BGBt = 0.5 * (s.BGBt + s.BGBt.transpose());
  return s;
}

Spectrum eigen_structure(const Dataset& d) {
  return eigen_structure(d, projection_basis(d.X));
}

SuffStats sufficient_stats(const Dataset& d, std::shared_ptr<const Spectrum> spectrum) {
  if (!spectrum) fail(ErrorCode::Usage, "missing spectrum");
  if (spectrum->K.rows() != d.n())
    fail(ErrorCode::DimensionMismatch, "spectrum was built for a different design");
  SuffStats st;
  st.By = spectrum->XtX_inv * (d.X.transpose() * d.y);
  const VectorXd ky = spectrum->K.transpose() * d.y;
  double total = 0.0;
  st.S.reserve(spectrum->L());
  for (const auto& P : spectrum->blocks) {
    const double s = (P.transpose() * ky).squaredNorm();
    st.S.push_back(s);
    total += s;
  }
  // Residuals at roundoff level relative to y mean y lies in the column space of X.
  if (!(total > 1e-24 * std::max(1.0, d.y.squaredNorm())))
    fail(ErrorCode::DegenerateData, "residual sum of squares is zero");
  for (int l = 0; l < spectrum->L(); ++l) {
    if (st.S[l] < kZeroStatTol * total) {
      std::ostringstream msg;
      msg << "sufficient statistic S_" << l + 1 << " is numerically zero";
      fail(ErrorCode::DegenerateData, msg.str());
    }
  }
  st.spectrum = std::move(spectrum);
  return st;
}

PredictionTarget default_target(const Dataset& d, TargetKind kind) {
  PredictionTarget t;
  t.kind = kind;
  if (d.p() != 1 || d.a() != 1)
    fail(ErrorCode::Usage, "covariate vectors x and z are required when p > 1 or a > 1");
  t.x = VectorXd::Ones(1);
  t.z = VectorXd::Ones(1);
  return t;
}

namespace {

PredictionConstants constants_from(const MatrixXd& BBt, const MatrixXd& BGBt, const MatrixXd& A,
                                   const PredictionTarget& target) {
  if (target.x.size() != BBt.rows())
    fail(ErrorCode::DimensionMismatch, "target x has the wrong length");
  if (target.z.size() != A.rows())
    fail(ErrorCode::DimensionMismatch, "target z has the wrong length");
  PredictionConstants c;
  c.c1 = target.x.dot(BGBt * target.x) + target.z.dot(A * target.z);
  c.c2 = target.x.dot(BBt * target.x);
  if (target.kind == TargetKind::NewObservation) c.c2 += 1.0;
  return c;
}

}  // namespace

PredictionConstants prediction_constants(const Dataset& d, const SuffStats& stats,
                                         const PredictionTarget& target) {
  return constants_from(stats.BBt(), stats.BGBt(), d.A, target);
}

PredictionConstants prediction_constants(const Dataset& d, const PredictionTarget& target) {
  const MatrixXd XtX_inv = (d.X.transpose() * d.X).inverse();
  const MatrixXd B = XtX_inv * d.X.transpose();
  const MatrixXd BGBt = B * assemble_g(d) * B.transpose();
  return constants_from(XtX_inv, BGBt, d.A, target);
}

PredictionProblem make_problem(Dataset d, PredictionTarget target,
                               std::shared_ptr<const Spectrum> spectrum) {
  if (!spectrum) spectrum = std::make_shared<const Spectrum>(eigen_structure(d));
  PredictionProblem p;
  p.stats = sufficient_stats(d, std::move(spectrum));
  p.consts = prediction_constants(d, p.stats, target);
  p.center = prediction_center(p.stats, target);
  p.target = std::move(target);
  p.data = std::move(d);
  return p;
}

const char* target_kind_tag(TargetKind kind) noexcept {
  return kind == TargetKind::GroupMean ? "group-mean" : "new-obs";
}

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Usage: return "UsageError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumeric: return "NonNumericCell";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::Domain: return "DomainError";
    case ErrorCode::Estimation: return "EstimationError";
    case ErrorCode::UnboundedDenominator: return "UnboundedDenominator";
    case ErrorCode::EmptyCut: return "EmptyCut";
    case ErrorCode::Bracket: return "BracketError";
    case ErrorCode::Internal: return "InternalError";
  }
  return "UnknownError";
}

}  // namespace imlmm
