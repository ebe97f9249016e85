#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ggen/common.hpp"

namespace ggen {

struct GaussianStats {
  Vec mean;
  Mat cov;  // sample covariance (n - 1 divisor)
};

inline GaussianStats gaussian_stats(const Mat& samples) {
  if (samples.rows() < 2) throw input_error("stats: need at least two samples");
  GaussianStats s;
  s.mean = samples.colwise().mean();
  const Mat centered = samples.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  return s;
}

// Symmetric square root of a positive semidefinite matrix. Small negative
// eigenvalues from roundoff are clamped to zero.
inline Mat sqrtm_psd(const Mat& a) {
  if (a.rows() != a.cols()) throw input_error("sqrtm: matrix is not square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + a.cwiseAbs().maxCoeff()))
    throw input_error("sqrtm: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(a);
  if (eig.info() != Eigen::Success) throw internal_error("sqrtm: eigendecomposition failed");
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

namespace detail {

// Factor of a PSD matrix from its eigendecomposition: F * F^T reproduces the
// matrix with negative roundoff modes clamped away.
inline Mat psd_factor(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(a);
  if (eig.info() != Eigen::Success) throw internal_error("fgd: eigendecomposition failed");
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

// Squared Frechet distance between two Gaussians. The cross term
// tr sqrt(C1 C2) equals the nuclear norm of F1^T F2 for any factors with
// Fi Fi^T = Ci, which needs one singular value decomposition instead of a
// square root of an unsymmetric product. Identical inputs cancel to zero at
// roundoff level even in high dimension.
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) throw input_error("fgd: dimension mismatch");
  const Mat fa = detail::psd_factor(a.cov);
  const Mat fb = detail::psd_factor(b.cov);
  const Mat cross = fa.transpose() * fb;
  Eigen::BDCSVD<Mat> svd(cross);
  const double trace_sqrt = svd.singularValues().sum();
  const double mean_term = (a.mean - b.mean).squaredNorm();
  return mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
}

// Frechet gesture distance over feature rows: fit a Gaussian to each set and
// compare. Rows are per-frame feature vectors.
inline double frechet_gesture_distance(const Mat& real, const Mat& generated) {
  if (real.cols() != generated.cols()) throw input_error("fgd: feature width mismatch");
  return frechet_distance(gaussian_stats(real), gaussian_stats(generated));
}

// Mean over sample pairs of the squared Frobenius distance.
inline double mean_squared_error(const std::vector<Mat>& real, const std::vector<Mat>& generated) {
  if (real.size() != generated.size() || real.empty())
    throw input_error("mse: sample lists must be non-empty and equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i].rows() != generated[i].rows() || real[i].cols() != generated[i].cols())
      throw input_error("mse: sample shape mismatch");
    total += (real[i] - generated[i]).squaredNorm();
  }
  return total / static_cast<double>(real.size());
}

}  // namespace ggen
