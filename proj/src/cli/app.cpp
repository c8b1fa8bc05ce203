#include <algorithm>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "curvlens/cli.hpp"
#include "curvlens/kernels.hpp"

namespace curvlens {

namespace {

void add_dataset_flags(CLI::App* cmd, cli::DatasetOptions& d) {
  cmd->add_option("--dataset", d.spec_file, "Dataset spec JSON {n_samples, d_in, n_c, blob_separation, seed}");
  cmd->add_option("--n-samples", d.n_samples, "Training samples")->capture_default_str();
  cmd->add_option("--d-in", d.d_in, "Input dimension")->capture_default_str();
  cmd->add_option("--n-classes", d.n_classes, "Number of classes")->capture_default_str();
  cmd->add_option("--separation", d.separation, "Blob separation")->capture_default_str();
  cmd->add_option("--n-test", d.n_test, "Held-out samples")->capture_default_str();
  cmd->add_option("--input-offset", d.input_offset, "Constant added to every input coordinate")
      ->capture_default_str();
}

void add_model_flags(CLI::App* cmd, cli::ModelOptions& m) {
  cmd->add_option("--checkpoint", m.checkpoint, "Model checkpoint JSON (overrides --model)");
  cmd->add_option("--model", m.kind, "Fresh model kind")
      ->check(CLI::IsMember({"logistic", "mlp"}))
      ->capture_default_str();
  cmd->add_option("--hidden", m.hidden, "Hidden layer widths for mlp")->delimiter(',');
  cmd->add_option("--weight-decay", m.weight_decay, "gamma in gamma ||p||^2")->capture_default_str();
}

std::string joined(const std::vector<std::string>& parts) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s;
}

void collect_flags(const CLI::App* app, std::map<std::string, std::string>& flags) {
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const std::string name = opt->get_lnames().front();
    if (opt->count() > 0) {
      flags[name] = opt->get_type_size() == 0 ? "true" : joined(opt->results());
    } else if (opt->get_type_size() == 0) {
      flags[name] = "false";
    } else {
      flags[name] = opt->get_default_str();
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"curvlens: Lanczos curvature spectroscopy", "curvlens"};
  app.require_subcommand(1);
  app.fallthrough();

  cli::Context ctx;
  std::string out_stem;
  std::string format;
  app.add_option("--seed", ctx.seed, "RNG seed")->capture_default_str();
  app.add_option("--out", out_stem, "Output path stem (default: the command name)");
  app.add_option("--format", format, "Table encoding")->check(CLI::IsMember({"json", "csv"}));

  cli::RmtOptions rmt;
  auto* c_rmt = app.add_subcommand("rmt", "Random-matrix spectra (wigner, wishart, planted)");
  c_rmt->add_option("--ensemble", rmt.ensemble, "Ensemble")
      ->required()
      ->check(CLI::IsMember({"wigner", "wishart", "planted"}));
  c_rmt->add_option("--dim", rmt.dim, "Matrix dimension P")->capture_default_str();
  c_rmt->add_option("--ratio", rmt.ratio, "q = P/T for wishart")->capture_default_str();
  c_rmt->add_option("--spec", rmt.spec_file, "Planted spectrum JSON");
  c_rmt->add_option("--steps", rmt.steps, "Lanczos steps m")->capture_default_str();
  c_rmt->add_option("--seeds", rmt.seeds, "Probe vectors n_v")->capture_default_str();
  c_rmt->add_option("--probe", rmt.probe, "Probe distribution")
      ->check(CLI::IsMember({"gaussian", "rademacher"}))
      ->capture_default_str();
  c_rmt->add_option("--bins", rmt.bins, "Oracle histogram bins")->capture_default_str();
  c_rmt->add_option("--gap", rmt.gap, "Relative gap threshold c")->capture_default_str();

  cli::SpectrumOptions spec;
  auto* c_spec = app.add_subcommand("spectrum", "Curvature spectrum of a model on a dataset");
  add_dataset_flags(c_spec, spec.data);
  add_model_flags(c_spec, spec.model);
  c_spec->add_option("--curvature", spec.curvature, "Curvature operator")
      ->check(CLI::IsMember({"hessian", "ggn", "abs_hessian"}))
      ->capture_default_str();
  c_spec->add_option("--steps", spec.steps, "Lanczos steps m")->capture_default_str();
  c_spec->add_option("--seeds", spec.seeds, "Probe vectors n_v")->capture_default_str();
  c_spec->add_option("--probe", spec.probe, "Probe distribution")
      ->check(CLI::IsMember({"gaussian", "rademacher"}))
      ->capture_default_str();
  c_spec->add_option("--batch", spec.batch, "Curvature batch size (0 = full data)")->capture_default_str();
  c_spec->add_option("--layers", spec.layers, "Outliers dropped by the bulk estimators");
  c_spec->add_option("--gap", spec.gap, "Relative gap threshold c")->capture_default_str();
  c_spec->add_flag("--keep-vectors", spec.keep_vectors, "Write Ritz vectors for landscape");

  cli::CompareDiagOptions diag;
  auto* c_diag = app.add_subcommand("compare-diag", "Oracle spectrum vs diagonal vs Lanczos");
  c_diag->add_option("--source", diag.source, "Matrix source")
      ->check(CLI::IsMember({"wigner", "planted", "diagonal"}))
      ->capture_default_str();
  c_diag->add_option("--dim", diag.dim, "Dimension for wigner")->capture_default_str();
  c_diag->add_option("--spec", diag.spec_file, "Planted spectrum JSON");
  c_diag->add_option("--values", diag.values, "Diagonal entries")->delimiter(',');
  c_diag->add_option("--steps", diag.steps, "Lanczos steps m")->capture_default_str();
  c_diag->add_option("--probe", diag.probe, "Probe distribution")
      ->check(CLI::IsMember({"gaussian", "rademacher"}))
      ->capture_default_str();

  cli::TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "Train with spectral or baseline schedules");
  add_dataset_flags(c_train, tr.data);
  add_model_flags(c_train, tr.model);
  c_train->add_option("--variant", tr.variant, "Optimizer variant")
      ->check(CLI::IsMember({"ssgd", "ssgdm", "sgd_fixed", "sgdm_fixed", "sgd_theoretical",
                             "sgdm_theoretical"}))
      ->capture_default_str();
  c_train->add_option("--steps", tr.steps, "Training steps")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "Minibatch size")->capture_default_str();
  c_train->add_option("--lanczos-steps", tr.lanczos_steps, "Lanczos steps per refresh")->capture_default_str();
  c_train->add_option("--refresh", tr.refresh, "Steps between spectral refreshes")->capture_default_str();
  c_train->add_option("--curvature-batch", tr.curvature_batch, "Curvature batch size (0 = full data)")
      ->capture_default_str();
  c_train->add_option("--curvature", tr.curvature, "Curvature operator for refreshes")
      ->check(CLI::IsMember({"ggn", "abs_hessian"}))
      ->capture_default_str();
  c_train->add_option("--bulk-seed", tr.bulk_seed, "Seed for the bulk estimate")
      ->check(CLI::IsMember({"random", "gradient"}))
      ->capture_default_str();
  c_train->add_option("--layers", tr.layers, "Outliers dropped by the bulk estimators");
  c_train->add_option("--alpha", tr.alpha, "Learning rate for fixed variants")->capture_default_str();
  c_train->add_option("--beta", tr.beta, "Momentum for sgdm_fixed")->capture_default_str();

  cli::LandscapeOptions land;
  auto* c_land = app.add_subcommand("landscape", "Loss along Ritz directions");
  add_dataset_flags(c_land, land.data);
  c_land->add_option("--checkpoint", land.checkpoint, "Model checkpoint JSON")->required();
  c_land->add_option("--spectrum", land.spectrum, "Spectrum JSON written with --keep-vectors")->required();
  c_land->add_option("--dist", land.dist, "Largest perturbation")->capture_default_str();
  c_land->add_option("--points", land.points, "Grid points (odd)")->capture_default_str();
  c_land->add_option("--directions", land.directions, "Directions per end of the spectrum")
      ->capture_default_str();

  cli::BoundsOptions bounds;
  auto* c_bounds = app.add_subcommand("bounds-table", "Lanczos vs power-iteration bound factors");
  c_bounds->add_option("--gaps", bounds.gaps, "lambda_1 / lambda_2 values")->delimiter(',')->capture_default_str();
  c_bounds->add_option("--steps", bounds.steps, "Iteration counts m")->delimiter(',')->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  ctx.out = out_stem.empty() ? chosen->get_name() : out_stem;
  if (format == "json") ctx.format = cli::Format::json;
  if (format == "csv") ctx.format = cli::Format::csv;
  ctx.log = &out;
  collect_flags(&app, ctx.flags);
  collect_flags(chosen, ctx.flags);
  ctx.flags["subcommand"] = chosen->get_name();

  try {
    kernels::configure_threads_from_env();
    if (chosen == c_rmt) cli::cmd_rmt(ctx, rmt);
    else if (chosen == c_spec) cli::cmd_spectrum(ctx, spec);
    else if (chosen == c_diag) cli::cmd_compare_diag(ctx, diag);
    else if (chosen == c_train) cli::cmd_train(ctx, tr);
    else if (chosen == c_land) cli::cmd_landscape(ctx, land);
    else cli::cmd_bounds_table(ctx, bounds);
  } catch (const cli::UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace curvlens
