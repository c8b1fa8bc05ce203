#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>

#include "curvlens/bulk.hpp"
#include "curvlens/io.hpp"
#include "curvlens/lanczos.hpp"
#include "curvlens/models.hpp"
#include "curvlens/optim.hpp"
#include "curvlens/rmt.hpp"
#include "curvlens/spectral_density.hpp"
#include "json.hpp"

namespace curvlens::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Collects artifacts for one command and writes its manifest.
class Run {
 public:
  Run(const Context& ctx, std::string command)
      : ctx_(ctx), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.flags = ctx.flags;
    manifest_.seed = ctx.seed;
    const fs::path parent = fs::path(ctx.out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
  }

  std::string path(const std::string& suffix) const { return ctx_.out + suffix; }

  void write(const std::string& suffix, const std::string& content) {
    const std::string p = path(suffix);
    write_text_file(p, content);
    manifest_.artifacts.push_back(p);
  }

  void artifact(const std::string& p) { manifest_.artifacts.push_back(p); }

  void warn(const std::string& message) {
    manifest_.warnings.push_back(message);
    if (ctx_.log) *ctx_.log << "warning: " << message << "\n";
  }

  void report(const std::string& key, const std::string& value) {
    if (ctx_.log) *ctx_.log << key << ": " << value << "\n";
  }
  void report(const std::string& key, double value) { report(key, format_double(value)); }

  RunManifest& manifest() { return manifest_; }

  void finish() {
    manifest_.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::string p = path(".manifest.json");
    write_text_file(p, manifest_.to_json());
    if (ctx_.log) {
      for (const std::string& a : manifest_.artifacts) *ctx_.log << "wrote " << a << "\n";
      *ctx_.log << "wrote " << p << "\n";
    }
  }

 private:
  const Context& ctx_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

Format table_format(const Context& ctx) { return ctx.format.value_or(Format::csv); }

std::vector<Vector> draw_probes(SeedStream& stream, std::size_t dim, std::size_t count, ProbeKind kind) {
  if (count == 0) throw UsageError("--seeds must be at least 1");
  std::vector<Vector> probes;
  for (std::size_t i = 0; i < count; ++i) probes.push_back(probe_vector(stream, dim, kind));
  return probes;
}

std::vector<RitzDecomposition> lanczos_decompositions(const SymmetricOperator& op, std::size_t steps,
                                                     const std::vector<Vector>& probes,
                                                     bool keep_first_vectors) {
  if (steps == 0) throw UsageError("--steps must be at least 1");
  LanczosOptions options;
  options.keep_basis = keep_first_vectors;
  const std::vector<LanczosRun> runs =
      lanczos_run_batch(op, std::min(steps, op.dim()), probes, options);
  std::vector<RitzDecomposition> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out.push_back(ritz_decompose(runs[i], keep_first_vectors && i == 0));
  }
  return out;
}

double zero_atom_weight(const DiracMixture& d) {
  double scale = 0.0;
  for (const Atom& a : d.atoms()) scale = std::max(scale, std::abs(a.value));
  double w = 0.0;
  for (const Atom& a : d.atoms()) {
    if (std::abs(a.value) <= 1e-8 * scale) w += a.weight;
  }
  return w;
}

SpectrumFile make_spectrum_file(const DiracMixture& mixture, const std::string& kind, std::size_t dim,
                                std::size_t steps, std::size_t seeds, ProbeKind probe) {
  SpectrumFile f;
  f.op = {kind, dim, mixture.info().label};
  f.lanczos = {steps, seeds, std::string(to_string(probe))};
  f.atoms = mixture.atoms();
  f.analysis.lambda_max = mixture.max_value();
  return f;
}

void add_outliers(SpectrumFile& f, const RitzDecomposition& ritz, double gap, Run& run) {
  if (!(ritz.values.back() > 0.0)) {
    run.warn("largest Ritz value is not positive; gap outlier count skipped");
    return;
  }
  const OutlierReport r = count_outliers_gap(ritz.values, gap);
  f.analysis.outliers = SpectrumFile::OutlierInfo{r.count, r.threshold, r.values};
  run.report("gap_outliers", std::to_string(r.count));
}

BlobData load_data(const DatasetOptions& o, std::uint64_t seed) {
  DatasetSpec spec;
  if (!o.spec_file.empty()) {
    spec = DatasetSpec::from_json(read_text_file(o.spec_file));
  } else {
    spec.n_samples = o.n_samples;
    spec.d_in = o.d_in;
    spec.n_classes = o.n_classes;
    spec.blob_separation = o.separation;
    spec.n_test = o.n_test;
    spec.input_offset = o.input_offset;
    spec.seed = seed;
  }
  return make_blobs(spec);
}

std::unique_ptr<Model> load_model(const ModelOptions& o, const Dataset& data, SeedStream& stream) {
  if (!o.checkpoint.empty()) return load_checkpoint(read_text_file(o.checkpoint));
  if (o.kind == "logistic") {
    return std::make_unique<LogisticRegression>(data.d_in, data.n_classes, o.weight_decay);
  }
  if (o.kind == "mlp") {
    std::vector<std::size_t> sizes{data.d_in};
    sizes.insert(sizes.end(), o.hidden.begin(), o.hidden.end());
    sizes.push_back(data.n_classes);
    return std::make_unique<MLP>(sizes, o.weight_decay, stream);
  }
  throw UsageError("unknown model '" + o.kind + "'");
}

}  // namespace

void cmd_rmt(const Context& ctx, const RmtOptions& o) {
  Run run(ctx, "rmt");
  SeedStream root(ctx.seed);
  SeedStream matrix_stream = root.split();
  SeedStream probe_stream = root.split();
  const ProbeKind probe = parse_probe_kind(o.probe);

  DenseSymmetric m;
  std::string label;
  std::optional<double> ratio;
  if (o.ensemble == "wigner") {
    if (o.dim < 2) throw UsageError("--dim must be at least 2 for wigner");
    m = sample_wigner(o.dim, matrix_stream);
    label = "wigner(P=" + std::to_string(o.dim) + ")";
  } else if (o.ensemble == "wishart") {
    if (!(o.ratio > 0.0)) throw UsageError("--ratio must be positive");
    const auto samples = static_cast<std::size_t>(
        std::max(1.0, std::round(static_cast<double>(o.dim) / o.ratio)));
    m = sample_wishart(o.dim, samples, matrix_stream);
    ratio = static_cast<double>(o.dim) / static_cast<double>(samples);
    label = "wishart(P=" + std::to_string(o.dim) + ",T=" + std::to_string(samples) + ")";
  } else if (o.ensemble == "planted") {
    if (o.spec_file.empty()) throw UsageError("planted ensemble needs --spec");
    const PlantedSpectrumSpec spec = PlantedSpectrumSpec::from_json(read_text_file(o.spec_file));
    m = planted_matrix(spec, matrix_stream).matrix;
    label = "planted(P=" + std::to_string(spec.dim) + ")";
  } else {
    throw UsageError("unknown ensemble '" + o.ensemble + "'");
  }

  const std::size_t dim = m.dim();
  auto shared = std::make_shared<const DenseSymmetric>(std::move(m));
  const SymmetricOperator op = as_operator(shared, label);
  const auto probes = draw_probes(probe_stream, dim, o.seeds, probe);
  const auto ritz = lanczos_decompositions(op, o.steps, probes, false);
  const DiracMixture mixture = average_over_seeds(ritz);

  SpectrumFile f = make_spectrum_file(mixture, o.ensemble, dim, ritz.front().requested_steps, o.seeds, probe);
  add_outliers(f, ritz.front(), o.gap, run);
  run.report("lambda_max", mixture.max_value());
  run.report("lambda_min", mixture.min_value());
  if (ratio) {
    const double zero = zero_atom_weight(mixture);
    run.report("zero_atom_weight", zero);
    try {
      f.analysis.mp_fit = to_fit(fit_mp_to_bulk(mixture, 0, zero > 0.0 ? 1 : 0));
      run.report("mp_fit_variance", f.analysis.mp_fit->variance);
      run.report("mp_fit_ratio", f.analysis.mp_fit->ratio);
    } catch (const InvalidArgument& e) {
      run.warn(std::string("MP fit skipped: ") + e.what());
    }
  }

  run.write(".json", f.to_json());
  run.write(".stem.csv", stem_csv(mixture));
  if (dim <= kOracleMaxDim) {
    const EigenDecomposition eig = dense_eigendecomposition(*shared, false);
    run.report("oracle_lambda_max", eig.values.back());
    run.write(".hist.csv", histogram_csv(eig.values, o.bins));
  }
  run.finish();
}

void cmd_spectrum(const Context& ctx, const SpectrumOptions& o) {
  Run run(ctx, "spectrum");
  SeedStream root(ctx.seed);
  SeedStream model_stream = root.split();
  SeedStream batch_stream = root.split();
  SeedStream probe_stream = root.split();
  const ProbeKind probe = parse_probe_kind(o.probe);
  const CurvatureKind kind = parse_curvature_kind(o.curvature);

  const BlobData data = load_data(o.data, ctx.seed);
  const std::unique_ptr<Model> model = load_model(o.model, data.train, model_stream);
  const Batch batch = o.batch == 0 || o.batch >= data.train.n_samples
                          ? full_batch(data.train)
                          : sample_batch(data.train, o.batch, batch_stream);
  const SymmetricOperator op = curvature_operator(*model, batch, kind);
  const auto probes = draw_probes(probe_stream, op.dim(), o.seeds, probe);
  const auto ritz = lanczos_decompositions(op, o.steps, probes, o.keep_vectors);
  const DiracMixture mixture = average_over_seeds(ritz);

  SpectrumFile f = make_spectrum_file(mixture, std::string(to_string(kind)), op.dim(),
                                      ritz.front().requested_steps, o.seeds, probe);
  const std::size_t layers = o.layers.value_or(model->num_layers());
  run.report("lambda_max", mixture.max_value());
  try {
    f.analysis.lambda_b_random_vector = bulk_mean_random_vector(mixture, layers).lambda_b;
    run.report("lambda_b_random_vector", *f.analysis.lambda_b_random_vector);
  } catch (const InvalidArgument& e) {
    run.warn(std::string("random-vector bulk estimate skipped: ") + e.what());
  }
  const Vector gradient = model->loss_and_gradient(batch).gradient;
  if (std::any_of(gradient.begin(), gradient.end(), [](double g) { return g != 0.0; })) {
    const auto gradient_ritz = lanczos_decompositions(op, o.steps, {gradient}, false);
    try {
      f.analysis.lambda_b_gradient_median =
          bulk_median_gradient(gradient_ritz.front().values, layers).lambda_b;
      run.report("lambda_b_gradient_median", *f.analysis.lambda_b_gradient_median);
    } catch (const InvalidArgument& e) {
      run.warn(std::string("gradient bulk estimate skipped: ") + e.what());
    }
  } else {
    run.warn("gradient is zero; gradient bulk estimate skipped");
  }
  add_outliers(f, ritz.front(), o.gap, run);

  if (o.keep_vectors) {
    const std::string p = run.path(".ritz.bin");
    write_ritz_vectors(p, ritz.front());
    run.artifact(p);
    f.ritz_vectors = fs::path(p).filename().string();
  }
  run.write(".json", f.to_json());
  run.write(".stem.csv", stem_csv(mixture));
  run.finish();
}

void cmd_compare_diag(const Context& ctx, const CompareDiagOptions& o) {
  Run run(ctx, "compare-diag");
  SeedStream root(ctx.seed);
  SeedStream matrix_stream = root.split();
  SeedStream probe_stream = root.split();
  const ProbeKind probe = parse_probe_kind(o.probe);

  DenseSymmetric m;
  if (o.source == "wigner") {
    if (o.dim < 2) throw UsageError("--dim must be at least 2 for wigner");
    m = sample_wigner(o.dim, matrix_stream, false);
  } else if (o.source == "planted") {
    if (o.spec_file.empty()) throw UsageError("planted source needs --spec");
    m = planted_matrix(PlantedSpectrumSpec::from_json(read_text_file(o.spec_file)), matrix_stream).matrix;
  } else if (o.source == "diagonal") {
    if (o.values.empty()) throw UsageError("diagonal source needs --values");
    m = DenseSymmetric::diagonal(o.values);
  } else {
    throw UsageError("unknown source '" + o.source + "'");
  }
  if (m.dim() > kOracleMaxDim) throw UsageError("compare-diag needs an oracle-scale matrix");

  const EigenDecomposition eig = dense_eigendecomposition(m, false);
  Vector diag = m.diagonal();
  std::sort(diag.begin(), diag.end());
  auto shared = std::make_shared<const DenseSymmetric>(std::move(m));
  const SymmetricOperator op = as_operator(shared, o.source);
  const auto ritz = lanczos_decompositions(op, o.steps, draw_probes(probe_stream, op.dim(), 1, probe), false);
  const RitzDecomposition& r = ritz.front();

  const double lambda_max = eig.values.back();
  double max_diag = 0.0;
  for (double d : diag) max_diag = std::max(max_diag, std::abs(d));
  const double diag_ratio = max_diag / lambda_max;
  const double lanczos_ratio = r.values.back() / lambda_max;
  run.report("oracle_lambda_max", lambda_max);
  run.report("max_abs_diagonal_over_lambda_max", diag_ratio);
  run.report("lanczos_max_over_lambda_max", lanczos_ratio);

  if (table_format(ctx) == Format::csv) {
    std::string s = "index,oracle_eigenvalue,diagonal_entry,lanczos_value,lanczos_weight\n";
    for (std::size_t i = 0; i < eig.values.size(); ++i) {
      s += std::to_string(i) + "," + format_double(eig.values[i]) + "," + format_double(diag[i]) + ",";
      if (i < r.values.size()) s += format_double(r.values[i]) + "," + format_double(r.weights[i]);
      else s += ",";
      s += "\n";
    }
    s += "# max_abs_diagonal_over_lambda_max=" + format_double(diag_ratio) +
         " lanczos_max_over_lambda_max=" + format_double(lanczos_ratio) + "\n";
    run.write(".csv", s);
  } else {
    ordered_json j;
    j["oracle_eigenvalues"] = eig.values;
    j["diagonal"] = diag;
    j["lanczos"] = {{"values", r.values}, {"weights", r.weights}};
    j["summary"] = {{"max_abs_diagonal_over_lambda_max", diag_ratio},
                    {"lanczos_max_over_lambda_max", lanczos_ratio}};
    run.write(".json", j.dump(2) + "\n");
  }
  run.finish();
}

void cmd_train(const Context& ctx, const TrainOptions& o) {
  Run run(ctx, "train");
  SeedStream root(ctx.seed);
  SeedStream model_stream = root.split();
  const TrainVariant variant = parse_train_variant(o.variant);

  const BlobData data = load_data(o.data, ctx.seed);
  const std::unique_ptr<Model> model = load_model(o.model, data.train, model_stream);

  TrainConfig config;
  config.batch_size = o.batch;
  config.steps = o.steps;
  config.lanczos_steps = o.lanczos_steps;
  config.refresh_interval = o.refresh;
  config.curvature_batch = o.curvature_batch;
  config.curvature = parse_curvature_kind(o.curvature);
  config.bulk_seed = parse_bulk_seed(o.bulk_seed);
  config.layers = o.layers;
  config.alpha = o.alpha;
  config.beta = o.beta;
  config.seed = root.next_u64();
  if (variant == TrainVariant::sgd_theoretical || variant == TrainVariant::sgdm_theoretical) {
    if (model->kind() != "logistic") {
      throw UsageError("theoretical variants need the logistic model (analytic bounds)");
    }
    config.bounds = lipschitz_bounds_logreg(data.train, model->weight_decay());
    run.report("bound_L", config.bounds->lipschitz);
    run.report("bound_mu", config.bounds->strong_convexity);
  }

  const TrainTrace trace = train(*model, data.train, data.test.n_samples > 0 ? &data.test : nullptr,
                                 config, variant);
  for (const std::string& w : trace.warnings) run.warn(w);
  run.manifest().diverged = trace.diverged;
  run.report("final_train_loss", trace.final_train_loss);
  run.report("diverged", trace.diverged ? "true" : "false");

  if (table_format(ctx) == Format::csv) {
    run.write(".csv", train_trace_csv(trace));
  } else {
    ordered_json rows = ordered_json::array();
    for (const StepRecord& r : trace.steps) {
      rows.push_back({{"step", r.step}, {"loss", r.loss}, {"alpha", r.alpha}, {"beta", r.beta},
                      {"lambda_max", std::isnan(r.lambda_max) ? ordered_json() : ordered_json(r.lambda_max)},
                      {"lambda_b", std::isnan(r.lambda_b) ? ordered_json() : ordered_json(r.lambda_b)}});
    }
    ordered_json j;
    j["variant"] = std::string(to_string(variant));
    j["final_train_loss"] = trace.final_train_loss;
    j["diverged"] = trace.diverged;
    j["steps"] = std::move(rows);
    j["validation_loss"] = trace.validation_loss;
    run.write(".json", j.dump(2) + "\n");
  }
  if (!trace.validation_loss.empty()) {
    std::string s = "epoch,validation_loss\n";
    for (std::size_t e = 0; e < trace.validation_loss.size(); ++e) {
      s += std::to_string(e + 1) + "," + format_double(trace.validation_loss[e]) + "\n";
    }
    run.write(".validation.csv", s);
  }
  if (!trace.diverged) run.write(".checkpoint.json", save_checkpoint(*model));
  run.finish();
}

void cmd_landscape(const Context& ctx, const LandscapeOptions& o) {
  Run run(ctx, "landscape");
  if (o.checkpoint.empty()) throw UsageError("landscape needs --checkpoint");
  if (o.spectrum.empty()) throw UsageError("landscape needs --spectrum");
  const std::unique_ptr<Model> model = load_checkpoint(read_text_file(o.checkpoint));
  const SpectrumFile f = SpectrumFile::from_json(read_text_file(o.spectrum));
  if (!f.ritz_vectors) {
    throw Error("spectrum file '" + o.spectrum +
                "' has no Ritz vectors; re-run `curvlens spectrum` with --keep-vectors");
  }
  const fs::path sidecar = fs::path(o.spectrum).parent_path() / *f.ritz_vectors;
  const RitzDecomposition ritz = read_ritz_vectors(sidecar.string());
  const BlobData data = load_data(o.data, ctx.seed);

  const LossLandscape land = loss_landscape(*model, data.train, data.test.n_samples > 0 ? &data.test : nullptr,
                                            ritz, o.dist, o.points, o.directions);
  run.report("directions", std::to_string(land.directions.size()));
  run.report("base_train_loss", land.train_loss[o.points / 2]);
  if (table_format(ctx) == Format::csv) {
    run.write(".csv", landscape_csv(land));
  } else {
    ordered_json j;
    j["distances"] = land.distances;
    ordered_json dirs = ordered_json::array();
    for (std::size_t d = 0; d < land.directions.size(); ++d) {
      const auto b = land.train_loss.begin() + static_cast<std::ptrdiff_t>(d * o.points);
      const auto t = land.test_loss.begin() + static_cast<std::ptrdiff_t>(d * o.points);
      ordered_json test = ordered_json::array();
      for (auto it = t; it != t + static_cast<std::ptrdiff_t>(o.points); ++it) {
        test.push_back(std::isnan(*it) ? ordered_json() : ordered_json(*it));
      }
      dirs.push_back({{"direction_index", land.directions[d].ritz_index},
                      {"eigenvalue", land.directions[d].eigenvalue},
                      {"train_loss", std::vector<double>(b, b + static_cast<std::ptrdiff_t>(o.points))},
                      {"test_loss", std::move(test)}});
    }
    j["directions"] = std::move(dirs);
    run.write(".json", j.dump(2) + "\n");
  }
  run.finish();
}

void cmd_bounds_table(const Context& ctx, const BoundsOptions& o) {
  Run run(ctx, "bounds-table");
  if (o.gaps.empty() || o.steps.empty()) throw UsageError("bounds-table needs gaps and steps");
  for (double g : o.gaps) {
    if (!(g > 1.0)) throw UsageError("every gap must exceed 1");
  }
  std::string csv = "gap,m,L,R,L_over_R\n";
  ordered_json rows = ordered_json::array();
  for (double g : o.gaps) {
    for (std::size_t m : o.steps) {
      const BoundRatio b = chebyshev_bound_ratio(g, m);
      csv += format_double(g) + "," + std::to_string(m) + "," + format_double(b.lanczos) + "," +
             format_double(b.power) + "," + format_double(b.lanczos / b.power) + "\n";
      rows.push_back({{"gap", g}, {"m", m}, {"L", b.lanczos}, {"R", b.power},
                      {"L_over_R", b.lanczos / b.power}});
    }
  }
  if (table_format(ctx) == Format::csv) run.write(".csv", csv);
  else run.write(".json", rows.dump(2) + "\n");
  run.report("cells", std::to_string(o.gaps.size() * o.steps.size()));
  run.finish();
}

}  // namespace curvlens::cli
