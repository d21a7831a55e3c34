#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>

#include "yono/synthesis.hpp"

using namespace yono;
using Catch::Approx;

namespace {

Prototype make_proto(int cls, const Vector& dir, double mu, double sigma, int n = 100) {
  Prototype p;
  p.class_id = cls;
  p.task_id = 0;
  p.n_samples = n;
  p.cos_mean = mu;
  p.cos_std = sigma;
  p.direction = normalize(dir);
  return p;
}

Vector random_dir(Index m, Rng& rng) {
  Vector v(m);
  for (Index i = 0; i < m; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("sampling_spec regularization", "[synthesis]") {
  const Vector e1 = (Vector(4) << 1, 0, 0, 0).finished();

  SECTION("measured sigma is used as-is") {
    const auto spec = sampling_spec(make_proto(0, e1, 0.9, 0.03), 1.96);
    CHECK(spec.mean == 0.9);
    CHECK(spec.stddev == 0.03);
    CHECK_NOTHROW(spec.validate());
  }

  SECTION("tiny sigma survives") {
    const auto spec = sampling_spec(make_proto(0, e1, 0.7, 1e-12), 1.96);
    CHECK(spec.stddev == 1e-12);
    CHECK_NOTHROW(spec.validate());
  }

  SECTION("single-sample class (mu = 1, sigma = 0) gets a usable spec") {
    const auto spec = sampling_spec(make_proto(0, e1, 1.0, 0.0, 1), 1.96);
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.stddev >= kSigmaFloor * 0.5);
    CHECK(spec.upper() < 1.0);
  }

  SECTION("support escaping (-1, 1) shrinks sigma, not the mean") {
    const auto spec = sampling_spec(make_proto(0, e1, 0.99999, 1e-3), 1.96);
    CHECK(spec.mean == 0.99999);
    CHECK(spec.upper() < 1.0);
    CHECK_NOTHROW(spec.validate());
  }
}

TEST_CASE("synthesize: cosine distribution around each prototype", "[synthesis]") {
  Rng setup(3);

  SECTION("degenerate spread pins the cosine at mu") {
    PrototypeMemory mem(8);
    mem.save(make_proto(0, random_dir(8, setup), 0.8, 1e-12));
    Rng rng(10);
    const auto batch = synthesize(mem, 200, 1.96, rng);
    for (Index i = 0; i < batch.size(); ++i) {
      CHECK(cosine(batch.embeddings.row(i).transpose(), mem.at(0).direction) ==
            Approx(0.8).margin(1e-8));
    }
  }

  SECTION("prototype on the canonical axis: identity rotation, raw sampler output") {
    const Index m = 6;
    Vector e1 = Vector::Zero(m);
    e1[0] = 1.0;
    PrototypeMemory mem(m);
    mem.save(make_proto(0, e1, 0.9, 0.02));

    Rng rng_a(42);
    const auto batch = Synthesizer(mem, 1.96).per_class(5, rng_a);

    // replicate by hand with the same stream
    Rng rng_b(42);
    const auto spec = sampling_spec(mem.at(0), 1.96);
    for (Index i = 0; i < 5; ++i) {
      const double a = sample_truncated_gaussian(spec, rng_b, 1)[0];
      const Vector v = sample_sphere_neighbor(a, m, rng_b);
      CHECK((batch.embeddings.row(i).transpose() - v).cwiseAbs().maxCoeff() < 1e-15);
    }
  }

  SECTION("monte carlo mean of cosines, m=16, mu=0.92, sigma=0.03") {
    PrototypeMemory mem(16);
    mem.save(make_proto(0, random_dir(16, setup), 0.92, 0.03));
    Rng rng(77);
    const std::size_t n = 10000;
    const auto batch = synthesize(mem, n, 1.96, rng);
    double sum = 0.0;
    for (Index i = 0; i < batch.size(); ++i) {
      sum += cosine(batch.embeddings.row(i).transpose(), mem.at(0).direction);
    }
    const double se = 0.03 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum / static_cast<double>(n) - 0.92) < 3.0 * se);
  }
}

TEST_CASE("synthesize: rotation preserves the drawn cosine and unit norm", "[synthesis]") {
  Rng setup(5);
  PrototypeMemory mem(12);
  for (int cls = 0; cls < 3; ++cls) {
    mem.save(make_proto(cls, random_dir(12, setup), 0.85 + 0.03 * cls, 0.02 + 0.01 * cls));
  }
  Rng rng(8);
  const auto batch = synthesize(mem, 300, 1.96, rng);
  REQUIRE(batch.size() == 900);
  for (Index i = 0; i < batch.size(); ++i) {
    const Vector z = batch.embeddings.row(i).transpose();
    CHECK(std::abs(z.norm() - 1.0) < 1e-9);
    const auto& proto = mem.at(batch.class_ids[static_cast<std::size_t>(i)]);
    const auto spec = sampling_spec(proto, 1.96);
    const double c = cosine(z, proto.direction);
    CHECK(c >= spec.lower() - 1e-8);
    CHECK(c <= spec.upper() + 1e-8);
  }
}

TEST_CASE("synthesize: orthogonal component is isotropic", "[synthesis]") {
  Rng setup(4);
  const Index m = 10;
  PrototypeMemory mem(m);
  const Vector p = normalize(random_dir(m, setup));
  mem.save(make_proto(0, p, 0.9, 0.03));
  Rng rng(6);
  const auto batch = synthesize(mem, 100000, 1.96, rng);
  Vector mean_orth = Vector::Zero(m);
  for (Index i = 0; i < batch.size(); ++i) {
    const Vector z = batch.embeddings.row(i).transpose();
    mean_orth += z - z.dot(p) * p;
  }
  mean_orth /= static_cast<double>(batch.size());
  CHECK(mean_orth.norm() < 0.02);
}

TEST_CASE("synthesize_minibatch", "[synthesis]") {
  Rng setup(9);

  SECTION("single stored class labels everything") {
    PrototypeMemory mem(4);
    mem.save(make_proto(3, random_dir(4, setup), 0.9, 0.02));
    Rng rng(1);
    const auto batch = synthesize_minibatch(mem, 8, rng);
    REQUIRE(batch.size() == 8);
    for (int id : batch.class_ids) CHECK(id == 3);
  }

  SECTION("four classes: binomial concentration of label counts") {
    PrototypeMemory mem(4);
    for (int cls = 0; cls < 4; ++cls) {
      mem.save(make_proto(cls, random_dir(4, setup), 0.9, 0.02));
    }
    Rng rng(2);
    const auto batch = synthesize_minibatch(mem, 4000, rng);
    std::map<int, int> counts;
    for (int id : batch.class_ids) counts[id]++;
    const double bound = 4.0 * std::sqrt(4000.0 * 0.25 * 0.75);
    for (int cls = 0; cls < 4; ++cls) {
      CHECK(std::abs(counts[cls] - 1000.0) < bound);
    }
  }

  SECTION("fixed seed reproduces the batch") {
    PrototypeMemory mem(4);
    for (int cls = 0; cls < 2; ++cls) {
      mem.save(make_proto(cls, random_dir(4, setup), 0.9, 0.02));
    }
    Rng a(5), b(5);
    const auto x = synthesize_minibatch(mem, 32, a);
    const auto y = synthesize_minibatch(mem, 32, b);
    CHECK(x.class_ids == y.class_ids);
    CHECK((x.embeddings - y.embeddings).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("empty memory") {
    PrototypeMemory mem(4);
    Rng rng(1);
    CHECK_THROWS_AS(synthesize_minibatch(mem, 8, rng), EmptyMemoryError);
    CHECK_THROWS_AS(synthesize(mem, 8, 1.96, rng), EmptyMemoryError);
  }
}

TEST_CASE("embedding csv round trip", "[synthesis]") {
  Rng setup(12);
  PrototypeMemory mem(5);
  mem.save(make_proto(1, random_dir(5, setup), 0.9, 0.02));
  mem.save(make_proto(4, random_dir(5, setup), 0.88, 0.04));
  Rng rng(3);
  const auto batch = synthesize(mem, 7, 1.96, rng);

  std::stringstream ss;
  write_embedding_csv_header(ss, 5);
  write_embedding_csv_rows(ss, batch.embeddings, batch.class_ids, "synthetic");
  const auto dump = read_embedding_csv(ss);
  REQUIRE(dump.embeddings.rows() == batch.size());
  CHECK(dump.class_ids == batch.class_ids);
  for (const auto& kind : dump.kinds) CHECK(kind == "synthetic");
  CHECK((dump.embeddings - batch.embeddings).cwiseAbs().maxCoeff() == 0.0);
}
