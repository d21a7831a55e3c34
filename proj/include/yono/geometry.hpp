#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "yono/errors.hpp"
#include "yono/random.hpp"

namespace yono {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;

/// Norms below this are treated as zero vectors.
inline constexpr double kZeroNormTol = 1e-12;

/// Default truncation half-width multiplier for cosine sampling.
inline constexpr double kDefaultKappa = 1.96;

/// v / ||v||. Throws ZeroVectorError when the norm is numerically zero.
inline Vector normalize(const Vector& v) {
  const double n = v.norm();
  if (n <= kZeroNormTol) {
    throw ZeroVectorError("normalize: vector norm below 1e-12");
  }
  return v / n;
}

/// Cosine similarity, clamped to [-1, 1] so downstream arccos stays finite.
inline double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= kZeroNormTol || nb <= kZeroNormTol) {
    throw ZeroVectorError("cosine: vector norm below 1e-12");
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Proper rotation R with R*u = p, acting as the identity on the orthogonal
/// complement of span{u, p}.
///
/// Two-plane construction: with q the Gram-Schmidt orthonormalization of p
/// against u and theta the angle between u and p,
///   R = I + (cos t - 1)(u u^T + q q^T) + sin t (q u^T - u q^T).
/// Near-parallel inputs return the identity; antipodal inputs have no
/// defined rotation plane and throw.
inline Matrix rotation_from_axis(const Vector& p, const Vector& u) {
  if (p.size() != u.size()) {
    throw DimensionMismatchError("rotation_from_axis: dimension mismatch");
  }
  const double c = cosine(p, u);
  const Index m = u.size();
  if (c > 1.0 - 1e-9) {
    return Matrix::Identity(m, m);
  }
  if (c < -1.0 + 1e-9) {
    throw AntipodalAxisError("rotation_from_axis: axes are antipodal");
  }
  const Vector un = normalize(u);
  const Vector pn = normalize(p);
  const Vector q = normalize(pn - c * un);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  Matrix r = Matrix::Identity(m, m);
  r.noalias() += (c - 1.0) * (un * un.transpose() + q * q.transpose());
  r.noalias() += s * (q * un.transpose() - un * q.transpose());
  return r;
}

/// Parameters of a symmetric truncated Gaussian over cosine values:
/// support [mean - half_width*stddev, mean + half_width*stddev].
struct TruncatedGaussianSpec {
  double mean = 0.0;
  double stddev = 0.0;
  double half_width = kDefaultKappa;  // kappa

  double lower() const { return mean - half_width * stddev; }
  double upper() const { return mean + half_width * stddev; }

  /// Support must stay strictly inside (-1, 1) so samples are valid cosines.
  void validate() const {
    if (!(stddev > 0.0) || !(half_width > 0.0)) {
      throw InvalidSpecError("TruncatedGaussianSpec: stddev and half_width must be positive");
    }
    if (!(lower() > -1.0) || !(upper() < 1.0)) {
      throw InvalidSpecError("TruncatedGaussianSpec: support escapes (-1, 1)");
    }
  }
};

/// Rejection sampling from the untruncated normal (acceptance ~95% at
/// kappa = 1.96). Exact: the accepted draws follow the truncated law.
inline std::vector<double> sample_truncated_gaussian(const TruncatedGaussianSpec& spec,
                                                     Rng& rng, std::size_t n) {
  spec.validate();
  const double lo = spec.lower();
  const double hi = spec.upper();
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x;
    int attempts = 100000;
    do {
      x = rng.normal(spec.mean, spec.stddev);
    } while ((x < lo || x > hi) && --attempts > 0);
    if (x < lo || x > hi) {
      throw InvalidSpecError("sample_truncated_gaussian: rejection limit reached");
    }
    out.push_back(x);
  }
  return out;
}

/// Unit vector v = [a, e_2, ..., e_m] with v[0] = a exactly and the tail
/// drawn standard-normal then rescaled so that the tail's squared norm is
/// 1 - a^2 (isotropic direction on the radius-sqrt(1-a^2) subsphere).
inline Vector sample_sphere_neighbor(double first_coord, Index dim, Rng& rng) {
  if (!(std::abs(first_coord) < 1.0)) {
    throw InvalidCosineError("sample_sphere_neighbor: |first coordinate| must be < 1");
  }
  if (dim < 2) {
    throw InvalidSpecError("sample_sphere_neighbor: dimension must be >= 2");
  }
  Vector v(dim);
  v[0] = first_coord;
  double sq = 0.0;
  do {
    sq = 0.0;
    for (Index i = 1; i < dim; ++i) {
      v[i] = rng.normal();
      sq += v[i] * v[i];
    }
  } while (sq <= kZeroNormTol);  // astronomically rare redraw
  const double scale = std::sqrt((1.0 - first_coord * first_coord) / sq);
  v.tail(dim - 1) *= scale;
  return v;
}

}  // namespace yono
