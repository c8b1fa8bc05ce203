#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"
#include "curvlens/models.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace curvlens;

namespace {

Dataset blobs(std::size_t n, std::size_t d, std::size_t c, std::uint64_t seed, double sep = 3.0) {
  DatasetSpec spec;
  spec.n_samples = n;
  spec.d_in = d;
  spec.n_classes = c;
  spec.blob_separation = sep;
  spec.seed = seed;
  return make_blobs(spec).train;
}

void randomize(Model& m, SeedStream& s, double scale) {
  Vector p(m.num_params());
  for (double& x : p) x = scale * s.normal();
  m.set_params(p);
}

std::function<Vector(const Vector&)> gradient_at(const Model& m, const Batch& b) {
  return [&m, &b](const Vector& p) {
    auto c = m.clone();
    c->set_params(p);
    return c->loss_and_gradient(b).gradient;
  };
}

Vector hvp(const Model& m, const Batch& b, const Vector& v) {
  Vector out(v.size());
  m.hessian_vector_product(b, v, out);
  return out;
}

Vector ggnvp(const Model& m, const Batch& b, const Vector& v) {
  Vector out(v.size());
  m.ggn_vector_product(b, v, out);
  return out;
}

Vector current(const Model& m) { return {m.params().begin(), m.params().end()}; }

void check_gradient_fd(Model& m, const Batch& b, SeedStream& s) {
  const Vector g = m.loss_and_gradient(b).gradient;
  const Vector p = current(m);
  Vector fd, an;
  for (int i = 0; i < 20; ++i) {
    const std::size_t j = s.below(m.num_params());
    auto c = m.clone();
    Vector q = p;
    q[j] += 1e-5;
    c->set_params(q);
    const double up = c->loss(b);
    q[j] -= 2e-5;
    c->set_params(q);
    const double down = c->loss(b);
    fd.push_back((up - down) / 2e-5);
    an.push_back(g[j]);
  }
  CHECK(oracle::relative_error(an, fd) < 1e-5);
}

void check_hvp_fd(Model& m, const Batch& b, SeedStream& s, int pairs) {
  for (int t = 0; t < pairs; ++t) {
    randomize(m, s, 0.3);
    const Vector v = probe_vector(s, m.num_params(), ProbeKind::gaussian);
    const Vector fd = oracle::central_difference(gradient_at(m, b), current(m), v, 1e-5);
    CHECK(oracle::relative_error(hvp(m, b, v), fd) < 1e-4);
  }
}

std::size_t numerical_rank(const DenseSymmetric& a) {
  const EigenDecomposition e = dense_eigendecomposition(a, false);
  const double top = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
  return static_cast<std::size_t>(
      std::count_if(e.values.begin(), e.values.end(), [&](double v) { return std::abs(v) > 1e-8 * top; }));
}

}  // namespace

TEST_CASE("datasets") {
  DatasetSpec spec;
  spec.n_samples = 90;
  spec.d_in = 4;
  spec.n_classes = 3;
  spec.n_test = 30;
  spec.seed = 5;
  const BlobData d = make_blobs(spec);
  CHECK_NOTHROW(d.train.validate());
  CHECK(d.train.inputs.size() == 360);
  CHECK(d.test.n_samples == 30);
  CHECK(std::count(d.train.labels.begin(), d.train.labels.end(), 2) == 30);
  const DatasetSpec back = DatasetSpec::from_json(spec.to_json());
  CHECK(back.n_samples == 90);
  CHECK(back.n_classes == 3);
  CHECK(back.n_test == 30);
  CHECK(make_blobs(back).train.inputs == d.train.inputs);

  SeedStream s(1);
  const Batch b = sample_batch(d.train, 40, s);
  std::vector<std::size_t> rows = b.rows;
  std::sort(rows.begin(), rows.end());
  CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
  CHECK(full_batch(d.train).size() == 90);
  CHECK_THROWS_AS(sample_batch(d.train, 91, s), InvalidArgument);

  DatasetSpec shifted = back;
  shifted.input_offset = 4.0;
  const Dataset moved = make_blobs(DatasetSpec::from_json(shifted.to_json())).train;
  for (std::size_t i = 0; i < moved.inputs.size(); ++i) {
    CHECK(moved.inputs[i] - d.train.inputs[i] == doctest::Approx(4.0).epsilon(1e-12));
  }

  Dataset bad = d.train;
  bad.labels[0] = 7;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("logistic regression loss and gradient") {
  SUBCASE("zero weights give ln 2 on a binary problem") {
    const Dataset d = blobs(20, 3, 2, 1);
    const LogisticRegression m(3, 2, 0.0);
    CHECK(m.loss(full_batch(d)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("gradient against finite differences") {
    const Dataset d = blobs(60, 5, 3, 2);
    LogisticRegression m(5, 3, 0.01);
    SeedStream s(2);
    randomize(m, s, 0.5);
    check_gradient_fd(m, full_batch(d), s);
  }
  SUBCASE("weight decay adds 2 gamma w exactly") {
    const Dataset d = blobs(30, 4, 3, 3);
    LogisticRegression a(4, 3, 0.0), b(4, 3, 0.05);
    SeedStream s(3);
    randomize(a, s, 1.0);
    b.set_params(a.params());
    const Vector ga = a.loss_and_gradient(full_batch(d)).gradient;
    const Vector gb = b.loss_and_gradient(full_batch(d)).gradient;
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(gb[i] - ga[i] == doctest::Approx(0.1 * a.params()[i]).epsilon(1e-10));
  }
  SUBCASE("non-finite inputs are reported") {
    Dataset d = blobs(10, 2, 2, 4);
    d.inputs[0] = std::numeric_limits<double>::infinity();
    LogisticRegression m(2, 2, 0.0);
    SeedStream s(4);
    randomize(m, s, 1.0);
    CHECK_THROWS_AS(m.loss_and_gradient(full_batch(d)), NumericalError);
  }
}

TEST_CASE("MLP gradient against finite differences") {
  const Dataset d = blobs(40, 4, 3, 5);
  SeedStream s(5);
  MLP m({4, 6, 5, 3}, 0.01, s);
  CHECK(m.num_params() == 6 * 4 + 6 + 5 * 6 + 5 + 3 * 5 + 3);
  CHECK(m.num_layers() == 3);
  check_gradient_fd(m, full_batch(d), s);
}

TEST_CASE("Hessian-vector products") {
  const Dataset d = blobs(40, 4, 3, 6);
  const Batch b = full_batch(d);
  SeedStream s(6);
  LogisticRegression lr(4, 3, 0.01);
  MLP mlp({4, 6, 3}, 0.01, s);
  for (Model* m : std::initializer_list<Model*>{&lr, &mlp}) {
    CAPTURE(m->kind());
    randomize(*m, s, 0.4);
    const std::size_t n = m->num_params();
    const Vector zero = hvp(*m, b, Vector(n, 0.0));
    CHECK(kernels::norm2(zero) == 0.0);

    const Vector v1 = probe_vector(s, n, ProbeKind::gaussian), v2 = probe_vector(s, n, ProbeKind::gaussian);
    Vector sum(n);
    for (std::size_t i = 0; i < n; ++i) sum[i] = v1[i] + v2[i];
    const Vector h1 = hvp(*m, b, v1), h2 = hvp(*m, b, v2), hs = hvp(*m, b, sum);
    Vector split(n);
    for (std::size_t i = 0; i < n; ++i) split[i] = h1[i] + h2[i];
    CHECK(oracle::relative_error(hs, split) < 1e-8);
    CHECK(kernels::dot(v1, h2) == doctest::Approx(kernels::dot(v2, h1)).epsilon(1e-10));
    const Vector g1 = ggnvp(*m, b, v1), g2 = ggnvp(*m, b, v2);
    CHECK(kernels::dot(v1, g2) == doctest::Approx(kernels::dot(v2, g1)).epsilon(1e-10));

    check_hvp_fd(*m, b, s, 10);
    CHECK_THROWS_AS(hvp(*m, b, Vector(n + 1, 0.0)), InvalidArgument);
  }
}

TEST_CASE("GGN structure") {
  SUBCASE("logistic GGN equals its Hessian") {
    const Dataset d = blobs(50, 5, 3, 7);
    LogisticRegression m(5, 3, 0.01);
    SeedStream s(7);
    randomize(m, s, 0.5);
    const DenseSymmetric h = dense_curvature(m, full_batch(d), CurvatureKind::hessian);
    const DenseSymmetric g = dense_curvature(m, full_batch(d), CurvatureKind::ggn);
    double worst = 0.0;
    for (std::size_t i = 0; i < h.entries().size(); ++i) worst = std::max(worst, std::abs(h.entries()[i] - g.entries()[i]));
    CHECK(worst < 1e-8);
  }
  SUBCASE("MLP GGN is positive semi-definite") {
    const Dataset d = blobs(30, 4, 3, 8);
    SeedStream s(8);
    MLP m({4, 8, 3}, 0.0, s);
    const Batch b = full_batch(d);
    for (int i = 0; i < 1000; ++i) {
      const Vector v = probe_vector(s, m.num_params(), ProbeKind::gaussian);
      CHECK(kernels::dot(v, ggnvp(m, b, v)) >= -1e-10);
    }
  }
  SUBCASE("rank at most n_c T") {
    const Dataset d = blobs(40, 4, 3, 9);
    SeedStream s(9);
    MLP m({4, 8, 3}, 0.0, s);
    for (std::size_t t = 1; t <= 10; ++t) {
      const Batch b = sample_batch(d, t, s);
      CHECK(numerical_rank(dense_curvature(m, b, CurvatureKind::ggn)) <= 3 * t);
    }
  }
}

TEST_CASE("curvature operators") {
  SUBCASE("absolute Hessian flips negative eigenvalues") {
    // Rotated diag(-1, 2).
    const double c = std::cos(0.3), sn = std::sin(0.3);
    DenseSymmetric a(2);
    a.set(0, 0, -c * c + 2 * sn * sn);
    a.set(1, 1, -sn * sn + 2 * c * c);
    a.set(0, 1, -c * sn - 2 * c * sn);
    const QuadraticModel q(a, Vector{0.0, 0.0});
    const Dataset d = blobs(4, 1, 2, 1);
    const Batch b = full_batch(d);
    const SymmetricOperator abs_h = curvature_operator(q, b, CurvatureKind::abs_hessian);
    const EigenDecomposition e = dense_eigendecomposition(to_dense(abs_h), true);
    CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(2.0).epsilon(1e-12));
    const SymmetricOperator h = curvature_operator(q, b, CurvatureKind::hessian);
    const Vector u{-sn, c};  // eigenvector of +2
    const Vector x = abs_h.apply(u), y = h.apply(u);
    CHECK(std::abs(x[0] - y[0]) < 1e-8);
    CHECK(std::abs(x[1] - y[1]) < 1e-8);
  }
  SUBCASE("MLP absolute Hessian agrees on positive eigenvectors") {
    const Dataset d = blobs(30, 3, 3, 10);
    SeedStream s(10);
    MLP m({3, 5, 3}, 0.01, s);
    const Batch b = full_batch(d);
    const DenseSymmetric h = dense_curvature(m, b, CurvatureKind::hessian);
    const EigenDecomposition e = dense_eigendecomposition(h, true);
    const SymmetricOperator abs_h = curvature_operator(m, b, CurvatureKind::abs_hessian);
    const SymmetricOperator hop = curvature_operator(m, b, CurvatureKind::hessian);
    const std::size_t n = e.dim;
    const Vector top(e.vectors.begin() + static_cast<std::ptrdiff_t>((n - 1) * n), e.vectors.end());
    const Vector x = abs_h.apply(top), y = hop.apply(top);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x[i] - y[i]) < 1e-8);
  }
  SUBCASE("GGN operator passes the symmetry probe") {
    const Dataset d = blobs(30, 3, 3, 11);
    SeedStream s(11);
    MLP m({3, 5, 3}, 0.01, s);
    CHECK(symmetry_defect(curvature_operator(m, full_batch(d), CurvatureKind::ggn), s) < 1e-12);
  }
  SUBCASE("absolute Hessian is limited to oracle scale") {
    const Dataset d = blobs(40, 60, 40, 12);
    const LogisticRegression m(60, 40, 0.0);
    CHECK_THROWS_AS(curvature_operator(m, full_batch(d), CurvatureKind::abs_hessian), InvalidArgument);
  }
  SUBCASE("kind names") {
    CHECK(parse_curvature_kind("abs_hessian") == CurvatureKind::abs_hessian);
    CHECK(to_string(CurvatureKind::ggn) == "ggn");
    CHECK_THROWS_AS(parse_curvature_kind("fisher"), InvalidArgument);
  }
}

TEST_CASE("logistic curvature bounds") {
  SUBCASE("zero inputs") {
    Dataset d = blobs(10, 3, 2, 13);
    std::fill(d.inputs.begin(), d.inputs.end(), 0.0);
    const CurvatureBounds b = lipschitz_bounds_logreg(d, 0.01);
    CHECK(b.lipschitz == doctest::Approx(0.02));
    CHECK(b.strong_convexity == doctest::Approx(0.02));
  }
  SUBCASE("identity inputs") {
    Dataset d;
    d.n_samples = 2;
    d.d_in = 2;
    d.n_classes = 2;
    d.inputs = {1.0, 0.0, 0.0, 1.0};
    d.labels = {0, 1};
    const CurvatureBounds b = lipschitz_bounds_logreg(d, 0.01);
    CHECK(b.strong_convexity == doctest::Approx(0.02));
    CHECK(b.lipschitz == doctest::Approx(0.5 * 1.0 / 2.0 + 0.02));
  }
  SUBCASE("Hessian spectrum lies inside [mu, L] across weights") {
    const Dataset d = blobs(80, 4, 3, 14);
    const CurvatureBounds bounds = lipschitz_bounds_logreg(d, 0.01);
    LogisticRegression m(4, 3, 0.01);
    SeedStream s(14);
    for (double scale : {0.0, 0.1, 1.0, 5.0}) {
      for (int rep = 0; rep < 5; ++rep) {
        randomize(m, s, scale);
        const EigenDecomposition e = dense_eigendecomposition(dense_curvature(m, full_batch(d), CurvatureKind::hessian), false);
        CHECK(e.values.front() >= bounds.strong_convexity - 1e-10);
        CHECK(e.values.back() <= bounds.lipschitz + 1e-10);
      }
    }
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(lipschitz_bounds_logreg(Dataset{}, 0.01), InvalidArgument);
  }
}

TEST_CASE("gradient noise") {
  const Dataset d = blobs(400, 5, 3, 15);
  LogisticRegression m(5, 3, 0.01);
  SeedStream s(15);
  randomize(m, s, 0.3);
  const GradientNoise a = gradient_noise_stats(m, d, 20, 500, s);
  CHECK(a.mean_norm_squared >= 0.7 * a.predicted_norm_squared);
  CHECK(a.mean_norm_squared <= 1.3 * a.predicted_norm_squared);
  CHECK(a.predicted_norm_squared ==
        doctest::Approx(15.0 * a.mean_coordinate_variance / 20.0).epsilon(1e-12));
  const GradientNoise b = gradient_noise_stats(m, d, 40, 500, s);
  CHECK(b.mean_norm_squared / a.mean_norm_squared == doctest::Approx(0.5).epsilon(0.2));
  CHECK_THROWS_AS(gradient_noise_stats(m, d, 400, 10, s), InvalidArgument);
}

TEST_CASE("checkpoints round trip") {
  SeedStream s(16);
  const MLP m({3, 4, 2}, 0.02, s);
  const std::unique_ptr<Model> back = load_checkpoint(save_checkpoint(m));
  CHECK(back->kind() == "mlp");
  CHECK(back->weight_decay() == 0.02);
  CHECK(std::equal(m.params().begin(), m.params().end(), back->params().begin(), back->params().end()));

  LogisticRegression lr(3, 2, 0.1);
  randomize(lr, s, 1.0);
  const std::unique_ptr<Model> lb = load_checkpoint(save_checkpoint(lr));
  CHECK(std::equal(lr.params().begin(), lr.params().end(), lb->params().begin(), lb->params().end()));

  const QuadraticModel q(DenseSymmetric::diagonal(Vector{1.0, 3.0}), Vector{0.5, -1.0});
  const std::unique_ptr<Model> qb = load_checkpoint(save_checkpoint(q));
  CHECK(dynamic_cast<const QuadraticModel&>(*qb).center() == Vector{0.5, -1.0});

  CHECK_THROWS_AS(load_checkpoint("{\"kind\": \"cnn\"}"), FormatError);
  CHECK_THROWS_AS(load_checkpoint("]"), FormatError);
}
