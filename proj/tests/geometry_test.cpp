#include <catch2/catch_amalgamated.hpp>

#include "yono/geometry.hpp"

using namespace yono;
using Catch::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector random_unit(Index m, Rng& rng) {
  Vector v(m);
  for (Index i = 0; i < m; ++i) v[i] = rng.normal();
  return normalize(v);
}

}  // namespace

TEST_CASE("normalize known values", "[geometry]") {
  const Vector v = normalize(vec({3.0, 4.0}));
  CHECK(v[0] == Approx(0.6).margin(1e-12));
  CHECK(v[1] == Approx(0.8).margin(1e-12));

  const Vector e1 = normalize(vec({1.0, 0.0, 0.0}));
  CHECK(e1[0] == 1.0);
  CHECK(e1.norm() == Approx(1.0).margin(1e-9));

  CHECK_THROWS_AS(normalize(vec({1e-15, 0.0})), ZeroVectorError);
}

TEST_CASE("cosine known values and properties", "[geometry]") {
  const Vector e1 = vec({1.0, 0.0});
  const Vector e2 = vec({0.0, 1.0});
  CHECK(cosine(e1, e1) == Approx(1.0).margin(1e-12));
  CHECK(cosine(e1, e2) == Approx(0.0).margin(1e-12));
  CHECK(cosine(vec({1.0, 1.0}), e1) == Approx(std::sqrt(0.5)).margin(1e-12));
  CHECK_THROWS_AS(cosine(vec({0.0, 0.0}), e1), ZeroVectorError);

  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    Vector a(5), b(5);
    for (Index i = 0; i < 5; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const double c = cosine(a, b);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(cosine(b, a) == Approx(c).margin(1e-12));
    CHECK(cosine(3.7 * a, 0.2 * b) == Approx(c).margin(1e-9));
  }
}

TEST_CASE("rotation_from_axis special cases", "[geometry]") {
  const Vector e1 = vec({1.0, 0.0});
  const Vector e2 = vec({0.0, 1.0});

  // zero angle
  const Matrix id = rotation_from_axis(e1, e1);
  CHECK((id - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

  // 90 degrees in the plane: p = e2, u = e1 -> [[0,-1],[1,0]]
  const Matrix r = rotation_from_axis(e2, e1);
  CHECK(r(0, 0) == Approx(0.0).margin(1e-12));
  CHECK(r(0, 1) == Approx(-1.0).margin(1e-12));
  CHECK(r(1, 0) == Approx(1.0).margin(1e-12));
  CHECK(r(1, 1) == Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(rotation_from_axis(vec({-1.0, 0.0}), e1), AntipodalAxisError);
}

TEST_CASE("rotation_from_axis maps u to p and is orthogonal", "[geometry]") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Index m = 8;
    const Vector p = random_unit(m, rng);
    const Vector u = random_unit(m, rng);
    const Matrix r = rotation_from_axis(p, u);

    CHECK(((r * u) - p).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((r.transpose() * r - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-8);

    // inner products are preserved
    const Vector x = random_unit(m, rng);
    const Vector y = random_unit(m, rng);
    CHECK((r * x).dot(r * y) == Approx(x.dot(y)).margin(1e-8));
  }
}

TEST_CASE("rotation acts as identity off the rotation plane", "[geometry]") {
  Rng rng(11);
  const Index m = 6;
  const Vector p = random_unit(m, rng);
  const Vector u = random_unit(m, rng);
  const Matrix r = rotation_from_axis(p, u);

  // build w orthogonal to both u and p
  Vector w = random_unit(m, rng);
  w -= w.dot(u) * u;
  const Vector q = normalize(p - p.dot(u) * u);
  w -= w.dot(q) * q;
  w = normalize(w);
  CHECK(((r * w) - w).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("truncated gaussian sampler", "[geometry]") {
  SECTION("spec validation") {
    CHECK_THROWS_AS((TruncatedGaussianSpec{0.9, 0.2, 1.96}.validate()), InvalidSpecError);
    CHECK_THROWS_AS((TruncatedGaussianSpec{0.5, 0.0, 1.96}.validate()), InvalidSpecError);
    CHECK_NOTHROW((TruncatedGaussianSpec{0.9, 0.05, 1.96}.validate()));
  }

  SECTION("degenerate spread collapses to the mean") {
    Rng rng(1);
    const auto xs = sample_truncated_gaussian({0.7, 1e-12, 1.96}, rng, 100);
    for (double x : xs) CHECK(x == Approx(0.7).margin(1e-9));
  }

  SECTION("mean and support, mu=0.9 sigma=0.05") {
    Rng rng(123);
    const TruncatedGaussianSpec spec{0.9, 0.05, 1.96};
    const std::size_t n = 100000;
    const auto xs = sample_truncated_gaussian(spec, rng, n);
    double sum = 0.0;
    for (double x : xs) {
      REQUIRE(x >= spec.lower());
      REQUIRE(x <= spec.upper());
      sum += x;
    }
    // symmetric truncation preserves the mean
    const double se = spec.stddev / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum / static_cast<double>(n) - 0.9) < 3.0 * se);
  }

  SECTION("one million draws stay inside the kappa window") {
    Rng rng(321);
    const TruncatedGaussianSpec spec{0.5, 0.1, 1.96};
    const auto xs = sample_truncated_gaussian(spec, rng, 1000000);
    std::size_t violations = 0;
    double sum = 0.0;
    for (double x : xs) {
      violations += (x < spec.lower() || x > spec.upper());
      sum += x;
    }
    CHECK(violations == 0);
    const double se = spec.stddev / std::sqrt(1e6);
    CHECK(std::abs(sum / 1e6 - 0.5) < 4.0 * se);
  }

  SECTION("determinism given the seed") {
    Rng a(9), b(9);
    const auto xs = sample_truncated_gaussian({0.2, 0.1, 1.96}, a, 50);
    const auto ys = sample_truncated_gaussian({0.2, 0.1, 1.96}, b, 50);
    CHECK(xs == ys);
  }
}

TEST_CASE("sample_sphere_neighbor", "[geometry]") {
  Rng rng(5);

  SECTION("first coordinate is exact, norm is 1") {
    for (int trial = 0; trial < 200; ++trial) {
      const double a = rng.uniform(-0.999, 0.999);
      const Vector v = sample_sphere_neighbor(a, 8, rng);
      CHECK(v[0] == a);  // exact by construction
      CHECK(std::abs(v.norm() - 1.0) < 1e-9);
      Vector u = Vector::Zero(8);
      u[0] = 1.0;
      CHECK(cosine(v, u) == Approx(a).margin(1e-12));
    }
  }

  SECTION("m=2 leaves only two solutions") {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector v = sample_sphere_neighbor(0.0, 2, rng);
      CHECK(v[0] == 0.0);
      CHECK(std::abs(std::abs(v[1]) - 1.0) < 1e-12);
    }
  }

  SECTION("boundary and errors") {
    CHECK_NOTHROW(sample_sphere_neighbor(1.0 - 1e-12, 4, rng));  // |a| < 1 still valid
    CHECK_THROWS_AS(sample_sphere_neighbor(1.0, 4, rng), InvalidCosineError);
    CHECK_THROWS_AS(sample_sphere_neighbor(-1.5, 4, rng), InvalidCosineError);
    CHECK_THROWS_AS(sample_sphere_neighbor(0.5, 1, rng), InvalidSpecError);
  }
}
