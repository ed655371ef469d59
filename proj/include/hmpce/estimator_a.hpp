#pragma once

// Module A: per-subcarrier LMMSE with a row-orthonormal sensing operator and
// extrinsic extraction with a shared scalar variance.

#include <concepts>
#include <stdexcept>

#include <Eigen/Dense>

#include "hmpce/channel_lab.hpp"
#include "hmpce/dist_kernel.hpp"

namespace hmpce {

/// Linear operator with orthonormal rows (A A^H = I).
template <class Op>
concept SensingOperator = requires(const Op& op, const CVector& v) {
  { op.rows() } -> std::convertible_to<int>;
  { op.cols() } -> std::convertible_to<int>;
  { op.apply(v) } -> std::convertible_to<CVector>;
  { op.adjoint(v) } -> std::convertible_to<CVector>;
};

struct IdentityOperator {
  int n;
  int rows() const { return n; }
  int cols() const { return n; }
  CVector apply(const CVector& h) const { return h; }
  CVector adjoint(const CVector& y) const { return y; }
};

/// Explicit matrix; the caller guarantees orthonormal rows.
struct DenseOperator {
  Eigen::MatrixXcd A;
  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
  CVector apply(const CVector& h) const { return A * h; }
  CVector adjoint(const CVector& y) const { return A.adjoint() * y; }
};

static_assert(SensingOperator<PilotMatrix>);
static_assert(SensingOperator<IdentityOperator>);
static_assert(SensingOperator<DenseOperator>);

/// Gaussian message on a length-N vector with a shared variance.
struct ExtrinsicPair {
  CVector mean;
  double variance{1.0};
};

class NumericGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LMMSE posterior for y = A h + w, h ~ CN(pri.mean, pri.variance I),
/// w ~ CN(0, sigma2 I). The returned variance is the antenna average
/// v - (M/N) v^2 / (v + sigma2), floored at kVarianceFloor.
template <SensingOperator Op>
ExtrinsicPair lmmse_update(const CVector& y, const Op& A, const ExtrinsicPair& pri, double sigma2) {
  const int m = A.rows();
  const int n = A.cols();
  if (y.size() != m || pri.mean.size() != n) throw ConfigError("lmmse_update: dimension mismatch");
  if (!(pri.variance > 0.0) || !std::isfinite(pri.variance)) {
    throw DomainError("lmmse_update: prior variance must be positive and finite");
  }
  if (sigma2 < 0.0) throw DomainError("lmmse_update: negative noise variance");
  const double v = pri.variance;
  const double denom = v + sigma2;
  const CVector residual = y - A.apply(pri.mean);
  if (!(denom > 0.0)) {
    if (residual.norm() > 1e-9 * (1.0 + y.norm())) {
      throw NumericGuardError("lmmse_update: zero prior and noise variance with inconsistent measurement");
    }
    return {pri.mean, kVarianceFloor};
  }
  const double ratio = static_cast<double>(m) / n;
  ExtrinsicPair post;
  post.mean = pri.mean + (v / denom) * A.adjoint(residual);
  post.variance = std::max(v * (sigma2 + (1.0 - ratio) * v) / denom, kVarianceFloor);
  return post;
}

struct ExtrinsicResult {
  ExtrinsicPair pair;
  bool clamped{false};
};

/// Divides the posterior by the prior elementwise with the common variance;
/// the variance is capped at `cap` per the clamped-extrinsic policy.
inline ExtrinsicResult extrinsic_a(const ExtrinsicPair& post, const ExtrinsicPair& pri,
                                   double cap = kDefaultExtrinsicCap) {
  if (post.mean.size() != pri.mean.size()) throw ConfigError("extrinsic_a: length mismatch");
  ExtrinsicResult out;
  out.pair.mean.resize(post.mean.size());
  for (Eigen::Index i = 0; i < post.mean.size(); ++i) {
    const auto r = gaussian_extrinsic_clamped(GaussianMsg{post.mean[i], post.variance},
                                              GaussianMsg{pri.mean[i], pri.variance}, cap);
    out.pair.mean[i] = r.msg.mean;
    out.pair.variance = r.msg.variance;
    out.clamped = out.clamped || r.clamped;
  }
  if (post.mean.size() == 0) {
    out.pair.variance = gaussian_extrinsic_clamped(GaussianMsg{0.0, post.variance},
                                                   GaussianMsg{0.0, pri.variance}, cap)
                            .msg.variance;
  }
  return out;
}

}  // namespace hmpce
