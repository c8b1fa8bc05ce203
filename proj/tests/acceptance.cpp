// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "curvlens/bulk.hpp"
#include "curvlens/cli.hpp"
#include "curvlens/io.hpp"
#include "curvlens/kernels.hpp"
#include "curvlens/lanczos.hpp"
#include "curvlens/models.hpp"
#include "curvlens/optim.hpp"
#include "curvlens/rmt.hpp"
#include "curvlens/spectral_density.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace curvlens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string g(double x) { return fmt("%.4g", x); }

double round_sig2(double x) {
  if (x == 0.0) return 0.0;
  const double e = std::floor(std::log10(std::abs(x)));
  const double s = std::pow(10.0, e - 1.0);
  return std::round(x / s) * s;
}

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "curvlens_acceptance";
  fs::create_directories(p);
  return p;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

double sample_variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// 1. Lanczos vs power-iteration bound factors.
Outcome bounds_table() {
  const fs::path out = scratch() / "bounds";
  if (cli({"--out", out.string(), "--format", "json", "bounds-table"}) != 0) return {false, "cli failed"};
  const auto doc = nlohmann::json::parse(read_text_file(out.string() + ".json"));
  // Rows of the printed table: gap, m, L, R.
  const double table[12][4] = {
      {1.5, 5, 1.1e-4, 3.9e-2},   {1.5, 10, 2.0e-10, 6.8e-4}, {1.5, 15, 3.9e-16, 1.2e-5},
      {1.5, 20, 7.4e-22, 2.0e-7}, {1.1, 5, 2.7e-2, 4.7e-1},   {1.1, 10, 5.5e-5, 1.8e-1},
      {1.1, 15, 1.1e-7, 6.9e-2},  {1.1, 20, 2.1e-10, 2.7e-2}, {1.01, 5, 5.6e-1, 9.2e-1},
      {1.01, 10, 1.0e-1, 8.4e-1}, {1.01, 15, 1.5e-2, 7.6e-1}, {1.01, 20, 2.0e-3, 6.9e-1}};
  const auto& rows = doc;
  int matched = 0;
  for (const auto& row : table) {
    for (const auto& r : rows) {
      if (r.at("gap").get<double>() != row[0] || r.at("m").get<double>() != row[1]) continue;
      const double l = round_sig2(r.at("L").get<double>()), rr = round_sig2(r.at("R").get<double>());
      if (std::abs(l - row[2]) <= 1e-9 * row[2] && std::abs(rr - row[3]) <= 1e-9 * row[3]) ++matched;
    }
  }
  return {matched == 12, std::to_string(matched) + "/12 cells match to 2 significant figures"};
}

// 2. Semicircle moments from one Lanczos run.
Outcome wigner_moments() {
  SeedStream s(2001);
  const DenseSymmetric w = sample_wigner(2000, s);
  const RitzDecomposition r =
      ritz_decompose(lanczos_run(as_operator(w, "wigner"), 30, probe_vector(s, 2000, ProbeKind::gaussian)), false);
  const DiracMixture d = DiracMixture::from_ritz(r);
  const double m2 = mixture_moment(d, 2), m4 = mixture_moment(d, 4);
  const double edge = std::max(std::abs(d.min_value()), std::abs(d.max_value()));
  const bool ok = m2 >= 0.9 && m2 <= 1.1 && m4 >= 1.8 && m4 <= 2.2 && edge >= 1.9 && edge <= 2.2;
  return {ok, "<l^2>=" + g(m2) + " <l^4>=" + g(m4) + " edge=" + g(edge)};
}

// 3. Marcenko-Pastur zero atom and edges.
Outcome mp_zero_atom() {
  SeedStream s(2002);
  const DenseSymmetric y = sample_wishart(1000, 500, s);
  const RitzDecomposition r =
      ritz_decompose(lanczos_run(as_operator(y, "wishart"), 30, probe_vector(s, 1000, ProbeKind::gaussian)), false);
  const DiracMixture d = DiracMixture::from_ritz(r);
  const double scale = std::max(std::abs(d.min_value()), std::abs(d.max_value()));
  double zero = 0.0, lo = INFINITY, hi = -INFINITY;
  for (const Atom& a : d.atoms()) {
    if (std::abs(a.value) <= 1e-8 * scale) {
      zero += a.weight;
    } else {
      lo = std::min(lo, a.value);
      hi = std::max(hi, a.value);
    }
  }
  const MPParams mp(1.0, 2.0);
  const bool ok = zero >= 0.45 && zero <= 0.55 && lo >= 0.9 * mp.lower_edge() && hi <= 1.1 * mp.upper_edge();
  return {ok, "zero weight=" + g(zero) + " bulk=[" + g(lo) + ", " + g(hi) + "] MP edges=[" + g(mp.lower_edge()) +
                  ", " + g(mp.upper_edge()) + "]"};
}

// 4. Bulk-mean table on the 3000-dim planted spectrum.
Outcome bulk_mean_table() {
  PlantedSpectrumSpec spec;
  spec.dim = 3000;
  spec.groups = {{2500, SpectrumGroup::Kind::constant, 0.0, 0.0},
                 {480, SpectrumGroup::Kind::uniform, 0.0, 10.0},
                 {20, SpectrumGroup::Kind::uniform, 0.0, 300.0}};
  spec.rotation_seed = 3000;
  SeedStream s(2004);
  const PlantedMatrix p = planted_matrix(spec, s);
  const SymmetricOperator op = as_operator(p.matrix, "planted");

  const std::size_t trials = 100, chunk = 10, m = 200, layers = 20;
  std::vector<double> weighted, median;
  for (std::size_t start = 0; start < trials; start += chunk) {
    std::vector<Vector> seeds;
    for (std::size_t i = 0; i < chunk; ++i) seeds.push_back(probe_vector(s, spec.dim, ProbeKind::gaussian));
    const auto runs = lanczos_run_batch(op, m, seeds);
    for (const LanczosRun& run : runs) {
      const RitzDecomposition r = ritz_decompose(run, false);
      weighted.push_back(bulk_mean_random_vector(DiracMixture::from_ritz(r), layers).lambda_b);
      median.push_back(bulk_median_gradient(r.values, layers).lambda_b);
    }
  }
  const double mw = std::accumulate(weighted.begin(), weighted.end(), 0.0) / trials;
  const double mm = std::accumulate(median.begin(), median.end(), 0.0) / trials;
  const double vw = sample_variance(weighted), vm = sample_variance(median);
  const bool ok = mw >= 4.7 && mw <= 5.4 && mm >= 4.8 && mm <= 5.5 && vm < vw;
  return {ok, "random vector mean=" + g(mw) + " var=" + g(vw) + "; median mean=" + g(mm) + " var=" + g(vm)};
}

// 5. Gauss quadrature reproduces v'H^k v for k <= 2m - 1.
Outcome quadrature_exactness() {
  SeedStream s(2005);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 20 + s.below(81);
    const std::size_t m = 3 + s.below(8);
    const DenseSymmetric h = t % 2 == 0 ? sample_wigner(n, s) : sample_wishart(n, n / 2 + 1, s);
    const std::vector<double> a(h.entries().begin(), h.entries().end());
    const Vector v = probe_vector(s, n, ProbeKind::rademacher);
    const RitzDecomposition r = ritz_decompose(lanczos_run(as_operator(h, "h"), m, v), false);
    double radius = 0.0;
    for (double x : dense_eigendecomposition(h, false).values) radius = std::max(radius, std::abs(x));
    const double vv = kernels::dot(v, v);
    for (int k = 0; k <= static_cast<int>(2 * r.steps - 1); ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < r.values.size(); ++i) q += r.weights[i] * std::pow(r.values[i], k);
      const double exact = oracle::quadratic_power(a, n, v, k) / vv;
      // Odd moments of indefinite spectra can cancel; measure against the moment scale.
      worst = std::max(worst, std::abs(q - exact) / std::max(std::abs(exact), std::pow(radius, k)));
    }
  }
  return {worst < 1e-7, "worst relative error " + g(worst)};
}

// 6. Ritz values of -H + mu I.
Outcome shift_invert() {
  SeedStream s(2006);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20 + s.below(181);
    const DenseSymmetric h = sample_wigner(n, s);
    const double mu = s.uniform(-5.0, 5.0);
    const std::size_t m = 5 + s.below(16);
    const Vector seed = probe_vector(s, n, ProbeKind::gaussian);
    const SymmetricOperator op = as_operator(h, "h");
    const RitzDecomposition a = ritz_decompose(lanczos_run(op, m, seed), false);
    const RitzDecomposition b = ritz_decompose(lanczos_run(apply_shifted(op, mu, true), m, seed), false);
    if (a.values.size() != b.values.size()) return {false, "step counts differ"};
    const std::size_t k = a.values.size();
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(b.values[k - 1 - i] - (mu - a.values[i])));
  }
  return {worst < 1e-10, "worst deviation " + g(worst)};
}

// 7. Closed-form kernel-smoothed moments against numerical quadrature.
Outcome kernel_smoothing() {
  SeedStream s(2007);
  std::vector<Atom> atoms;
  for (int i = 0; i < 8; ++i) atoms.push_back({s.uniform(0.0, 4.0), s.uniform(0.1, 1.0)});
  const DiracMixture d(atoms);
  double worst = 0.0, worst_m2 = 0.0;
  bool positive = true;
  for (double sigma : {0.1, 0.5, 1.0}) {
    const KernelSpec k(sigma);
    for (int m = 0; m <= 6; ++m) {
      double numeric = 0.0;
      for (const Atom& a : d.atoms()) {
        const auto f = [&](double x) {
          const double z = (x - a.value) / sigma;
          return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi)) * std::pow(x, m);
        };
        const double lo = a.value - 12.0 * sigma, hi = a.value + 12.0 * sigma;
        const int panels = 20000;
        const double h = (hi - lo) / panels;
        double acc = f(lo) + f(hi);
        for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
        numeric += a.weight * acc * h / 3.0;
      }
      worst = std::max(worst, std::abs(smoothed_moment(d, k, m) - numeric) / std::max(1.0, std::abs(numeric)));
      if (m >= 2 && !(smoothing_bias(d, k, m) > 0.0)) positive = false;
    }
    worst_m2 = std::max(worst_m2, std::abs(smoothing_bias(d, k, 2) - sigma * sigma));
  }
  const bool ok = worst < 1e-8 && worst_m2 <= 1e-14 && positive;
  return {ok, "worst relative error " + g(worst) + ", m=2 bias error " + g(worst_m2) +
                  (positive ? ", bias positive" : ", bias not positive")};
}

// 8. Pearlmutter Hvp against finite differences of gradients.
Outcome hvp_correctness() {
  DatasetSpec spec;
  spec.n_samples = 80;
  spec.d_in = 6;
  spec.n_classes = 4;
  spec.seed = 2008;
  const Dataset data = make_blobs(spec).train;
  const Batch b = full_batch(data);
  SeedStream s(2008);
  LogisticRegression lr(6, 4, 0.01);
  MLP mlp({6, 10, 8, 4}, 0.01, s);
  double worst = 0.0;
  int kinks = 0;
  for (Model* m : std::initializer_list<Model*>{&lr, &mlp}) {
    const auto grad = [&](const Vector& q) {
      auto c = m->clone();
      c->set_params(q);
      return c->loss_and_gradient(b).gradient;
    };
    for (int t = 0; t < 50;) {
      Vector p(m->num_params());
      for (double& x : p) x = 0.4 * s.normal();
      m->set_params(p);
      const Vector v = probe_vector(s, p.size(), ProbeKind::gaussian);
      const Vector fd = oracle::central_difference(grad, p, v, 1e-5);
      // A ReLU kink inside [p - hv, p + hv] makes the difference quotient scale like 1/h.
      if (oracle::relative_error(oracle::central_difference(grad, p, v, 5e-6), fd) > 1e-6) {
        ++kinks;
        continue;
      }
      Vector hv(p.size());
      m->hessian_vector_product(b, v, hv);
      worst = std::max(worst, oracle::relative_error(hv, fd));
      ++t;
    }
  }
  return {worst < 1e-4, "worst relative error " + g(worst) + " over 100 pairs (" + std::to_string(kinks) +
                            " kink-straddling draws redrawn)"};
}

// 9. Rank of the dense MLP GGN.
Outcome ggn_rank() {
  DatasetSpec spec;
  spec.n_samples = 60;
  spec.d_in = 5;
  spec.n_classes = 3;
  spec.seed = 2009;
  const Dataset data = make_blobs(spec).train;
  SeedStream s(2009);
  const MLP m({5, 12, 3}, 0.0, s);
  std::string ranks;
  bool ok = true;
  for (std::size_t t = 1; t <= 10; ++t) {
    const Batch b = sample_batch(data, t, s);
    const EigenDecomposition e = dense_eigendecomposition(dense_curvature(m, b, CurvatureKind::ggn), false);
    const double top = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    const auto rank = std::count_if(e.values.begin(), e.values.end(), [&](double x) { return std::abs(x) > 1e-8 * top; });
    ok = ok && static_cast<std::size_t>(rank) <= 3 * t;
    ranks += (t > 1 ? "," : "") + std::to_string(rank);
  }
  return {ok, "ranks for T=1..10: " + ranks + " (P=" + std::to_string(m.num_params()) + ")"};
}

// 10. Heavy-ball contraction on a [1, 9] spectrum.
Outcome heavy_ball_rate() {
  Vector d(50);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = 1.0 + 8.0 * static_cast<double>(i) / 49.0;
  const SpectralSchedule sched = ssgdm_schedule(9.0, 1.0);
  Vector p(d.size(), 1.0), grad(d.size());
  HeavyBall hb(p);
  double e100 = 0.0;
  for (int it = 1; it <= 200; ++it) {
    for (std::size_t i = 0; i < d.size(); ++i) grad[i] = d[i] * p[i];
    hb.step(p, grad, sched);
    if (it == 100) e100 = kernels::norm2(p);
  }
  const double rate = std::pow(kernels::norm2(p) / e100, 1.0 / 100.0);
  return {rate >= 0.45 && rate <= 0.55, "contraction " + g(rate) + " (sqrt(beta)=" + g(std::sqrt(sched.beta)) + ")"};
}

// 11. ssgdm <= ssgd < sgd_theoretical on the synthetic logistic problem.
Outcome optimizer_ordering() {
  int good = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    DatasetSpec spec;
    spec.n_samples = 1000;
    spec.d_in = 20;
    spec.n_classes = 10;
    spec.blob_separation = 3.0;
    spec.input_offset = 10.0;
    spec.seed = seed;
    const Dataset data = make_blobs(spec).train;
    TrainConfig cfg;
    cfg.batch_size = 1000;
    cfg.steps = 2000;
    cfg.lanczos_steps = 30;
    cfg.refresh_interval = 100;
    cfg.seed = seed;
    cfg.bounds = lipschitz_bounds_logreg(data, 0.01);
    double loss[3];
    const TrainVariant variants[3] = {TrainVariant::ssgdm, TrainVariant::ssgd, TrainVariant::sgd_theoretical};
    for (int v = 0; v < 3; ++v) {
      LogisticRegression model(20, 10, 0.01);
      loss[v] = train(model, data, nullptr, cfg, variants[v]).final_train_loss;
    }
    if (loss[0] <= loss[1] && loss[1] < loss[2]) ++good;
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + ": " + g(loss[0]) + " / " +
              g(loss[1]) + " / " + g(loss[2]);
  }
  return {good == 3, std::to_string(good) + "/3 seeds ordered (ssgdm / ssgd / sgd_theoretical) " + detail};
}

// 12. Gap outlier count and block heuristic.
Outcome outlier_detection() {
  PlantedSpectrumSpec spec;
  spec.dim = 1000;
  spec.groups = {{982, SpectrumGroup::Kind::uniform, 0.0, 1.0}, {18, SpectrumGroup::Kind::uniform, 10.0, 12.0}};
  spec.rotation_seed = 2012;
  SeedStream s(2012);
  const PlantedMatrix p = planted_matrix(spec, s);
  const RitzDecomposition r =
      ritz_decompose(lanczos_run(as_operator(p.matrix, "planted"), 80, probe_vector(s, 1000, ProbeKind::gaussian)), false);
  const std::size_t count = count_outliers_gap(r.values, 0.1).count;

  double worst = 0.0;
  bool separated = true;
  const LayerBlockSpec constructions[2] = {
      {{100, 0.5, 0.1}, {200, 0.3, 0.1}},
      {{50, 1.0, 0.1}, {80, 0.5, 0.1}, {100, 0.45, 0.1}, {120, 0.6, 0.1}, {150, 0.2, 0.1}}};
  for (const LayerBlockSpec& blocks : constructions) {
    const OutlierReport pred = predict_outliers_from_blocks(blocks);
    separated = separated && pred.separated && pred.count == blocks.size();
    const EigenDecomposition e = dense_eigendecomposition(block_diagonal_matrix(blocks, s), false);
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
      const double actual = e.values[e.values.size() - 1 - i];
      worst = std::max(worst, std::abs(actual - pred.values[i]) / pred.values[i]);
    }
  }
  const bool ok = count == 18 && separated && worst < 0.1;
  return {ok, "gap count=" + std::to_string(count) + ", block predictions worst relative error " + g(worst)};
}

// 13. Diagonal entries miss the support; Lanczos finds the top.
Outcome diagonal_inadequacy() {
  const fs::path dir = scratch();
  write_text_file((dir / "planted.json").string(),
                  R"({"dim": 1000, "groups": [{"count": 500, "dist": "const", "lo": 0},)"
                  R"( {"count": 470, "dist": "uniform", "lo": 0, "hi": 15},)"
                  R"( {"count": 20, "dist": "uniform", "lo": 0, "hi": 60},)"
                  R"( {"count": 10, "dist": "uniform", "lo": -10, "hi": 0}], "seed": 13})");
  const std::vector<std::vector<std::string>> cases = {
      {"--seed", "13", "--out", (dir / "diag_w").string(), "--format", "json", "compare-diag", "--source", "wigner",
       "--dim", "500", "--steps", "30"},
      {"--seed", "13", "--out", (dir / "diag_p").string(), "--format", "json", "compare-diag", "--source",
       "planted", "--spec", (dir / "planted.json").string(), "--steps", "30"}};
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cli(cases[i]) != 0) return {false, "cli failed"};
    const auto doc = nlohmann::json::parse(read_text_file(cases[i][3] + ".json")).at("summary");
    const double diag = doc.at("max_abs_diagonal_over_lambda_max").get<double>();
    const double lz = doc.at("lanczos_max_over_lambda_max").get<double>();
    ok = ok && diag < 0.5 && std::abs(lz - 1.0) <= 0.02;
    detail += (i ? "; " : "") + std::string(i ? "planted" : "wigner") + ": max|diag|/lmax=" + g(diag) +
              " lanczos/lmax=" + g(lz);
  }
  return {ok, detail};
}

// 14. Two probe seeds agree on the logistic GGN top eigenvalue.
Outcome seed_stability() {
  DatasetSpec spec;
  spec.seed = 2014;
  const Dataset data = make_blobs(spec).train;
  LogisticRegression model(spec.d_in, spec.n_classes, 0.01);
  TrainConfig cfg;
  cfg.steps = 200;
  train(model, data, nullptr, cfg, TrainVariant::sgd_fixed);
  const SymmetricOperator op = curvature_operator(model, full_batch(data), CurvatureKind::ggn);
  double top[2];
  for (int i = 0; i < 2; ++i) {
    SeedStream s(100 + static_cast<std::uint64_t>(i));
    top[i] = ritz_decompose(lanczos_run(op, 30, probe_vector(s, op.dim())), false).values.back();
  }
  const double rel = std::abs(top[0] - top[1]) / std::max(top[0], top[1]);
  return {rel < 0.01, "lambda_max " + fmt("%.6f", top[0]) + " vs " + fmt("%.6f", top[1]) + " (relative " + g(rel) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"bounds table", bounds_table},
      {"Wigner semicircle moments", wigner_moments},
      {"Marcenko-Pastur zero atom", mp_zero_atom},
      {"bulk-mean table", bulk_mean_table},
      {"Gauss quadrature exactness", quadrature_exactness},
      {"shift-invert", shift_invert},
      {"kernel smoothing moments", kernel_smoothing},
      {"Hessian-vector products", hvp_correctness},
      {"GGN rank bound", ggn_rank},
      {"heavy-ball rate", heavy_ball_rate},
      {"optimizer ordering", optimizer_ordering},
      {"outlier detection", outlier_detection},
      {"diagonal inadequacy", diagonal_inadequacy},
      {"seed stability", seed_stability},
  };
  // Optional arguments select criteria by number.
  std::vector<std::size_t> chosen;
  for (int a = 1; a < argc; ++a) chosen.push_back(std::stoul(argv[a]));
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), i + 1) == chosen.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  fs::remove_all(scratch());
  return failed == 0 ? 0 : 1;
}
