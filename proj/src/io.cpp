#include "curvlens/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "curvlens/error.hpp"
#include "json.hpp"

namespace curvlens {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

DiracMixture SpectrumFile::mixture() const {
  MixtureInfo info;
  info.seeds = lanczos.seeds;
  info.steps = lanczos.steps;
  info.label = op.label;
  return DiracMixture(atoms, info);
}

std::string SpectrumFile::to_json() const {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["operator"] = {{"kind", op.kind}, {"dim", op.dim}, {"label", op.label}};
  j["lanczos"] = {{"steps", lanczos.steps}, {"seeds", lanczos.seeds}, {"probe_kind", lanczos.probe_kind}};
  ordered_json atom_list = ordered_json::array();
  for (const Atom& a : atoms) atom_list.push_back({{"value", a.value}, {"weight", a.weight}});
  j["atoms"] = std::move(atom_list);

  ordered_json an = ordered_json::object();
  if (analysis.lambda_max) an["lambda_max"] = *analysis.lambda_max;
  if (analysis.lambda_b_random_vector || analysis.lambda_b_gradient_median) {
    ordered_json lb = ordered_json::object();
    if (analysis.lambda_b_random_vector) lb["random_vector"] = *analysis.lambda_b_random_vector;
    if (analysis.lambda_b_gradient_median) lb["gradient_median"] = *analysis.lambda_b_gradient_median;
    an["lambda_b"] = std::move(lb);
  }
  if (analysis.outliers) {
    an["outliers"] = {{"count", analysis.outliers->count},
                      {"threshold", analysis.outliers->threshold},
                      {"values", analysis.outliers->values}};
  }
  if (analysis.mp_fit) {
    const MPFit& f = *analysis.mp_fit;
    an["mp_fit"] = {{"variance", f.variance}, {"ratio", f.ratio}, {"lower_edge", f.lower_edge},
                    {"upper_edge", f.upper_edge}, {"zero_mass", f.zero_mass}};
  }
  j["analysis"] = std::move(an);
  if (ritz_vectors) j["ritz_vectors"] = *ritz_vectors;
  return j.dump(2) + "\n";
}

SpectrumFile SpectrumFile::from_json(const std::string& text) {
  SpectrumFile f;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw FormatError("spectrum file: unsupported schema_version " + std::to_string(version));
    }
    const auto& op = j.at("operator");
    f.op.kind = op.at("kind").get<std::string>();
    f.op.dim = op.at("dim").get<std::size_t>();
    f.op.label = op.at("label").get<std::string>();
    const auto& lz = j.at("lanczos");
    f.lanczos.steps = lz.at("steps").get<std::size_t>();
    f.lanczos.seeds = lz.at("seeds").get<std::size_t>();
    f.lanczos.probe_kind = lz.at("probe_kind").get<std::string>();
    for (const auto& a : j.at("atoms")) {
      f.atoms.push_back({a.at("value").get<double>(), a.at("weight").get<double>()});
    }
    const auto& an = j.at("analysis");
    if (an.contains("lambda_max")) f.analysis.lambda_max = an["lambda_max"].get<double>();
    if (an.contains("lambda_b")) {
      const auto& lb = an["lambda_b"];
      if (lb.contains("random_vector")) f.analysis.lambda_b_random_vector = lb["random_vector"].get<double>();
      if (lb.contains("gradient_median")) {
        f.analysis.lambda_b_gradient_median = lb["gradient_median"].get<double>();
      }
    }
    if (an.contains("outliers")) {
      const auto& o = an["outliers"];
      f.analysis.outliers = OutlierInfo{o.at("count").get<std::size_t>(), o.at("threshold").get<double>(),
                                        o.at("values").get<std::vector<double>>()};
    }
    if (an.contains("mp_fit")) {
      const auto& m = an["mp_fit"];
      f.analysis.mp_fit = MPFit{m.at("variance").get<double>(), m.at("ratio").get<double>(),
                                m.at("lower_edge").get<double>(), m.at("upper_edge").get<double>(),
                                m.at("zero_mass").get<double>()};
    }
    if (j.contains("ritz_vectors")) f.ritz_vectors = j["ritz_vectors"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("spectrum file: ") + e.what());
  }

  double total = 0.0;
  for (std::size_t i = 0; i < f.atoms.size(); ++i) {
    if (i > 0 && !(f.atoms[i - 1].value < f.atoms[i].value)) {
      throw FormatError("spectrum file: atoms are not sorted ascending");
    }
    if (f.atoms[i].weight < 0.0) throw FormatError("spectrum file: negative atom weight");
    total += f.atoms[i].weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw FormatError("spectrum file: atom weights sum to " + format_double(total));
  }
  return f;
}

SpectrumFile::MPFit to_fit(const MPParams& params) {
  return {params.variance(), params.ratio(), params.lower_edge(), params.upper_edge(),
          params.zero_mass()};
}

namespace {

constexpr char kRitzMagic[8] = {'C', 'L', 'R', 'I', 'T', 'Z', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& in, std::span<double> v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void write_ritz_vectors(const std::string& path, const RitzDecomposition& ritz) {
  if (!ritz.vectors) throw InvalidArgument("write_ritz_vectors: decomposition has no vectors");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(kRitzMagic, sizeof kRitzMagic);
  put_u64(out, ritz.vectors->dim());
  put_u64(out, ritz.values.size());
  put_u64(out, ritz.steps);
  put_u64(out, ritz.requested_steps);
  put_doubles(out, ritz.values);
  put_doubles(out, ritz.weights);
  put_doubles(out, ritz.vectors->data());
  if (!out) throw Error("failed writing '" + path + "'");
}

RitzDecomposition read_ritz_vectors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open Ritz vector file '" + path + "'");
  char magic[sizeof kRitzMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kRitzMagic, sizeof magic) != 0) {
    throw FormatError("'" + path + "' is not a Ritz vector file");
  }
  const std::uint64_t dim = get_u64(in);
  const std::uint64_t count = get_u64(in);
  RitzDecomposition r;
  r.steps = get_u64(in);
  r.requested_steps = get_u64(in);
  if (!in || dim == 0 || count == 0 || count > dim) throw FormatError("'" + path + "': bad header");
  r.values.resize(count);
  r.weights.resize(count);
  get_doubles(in, r.values);
  get_doubles(in, r.weights);
  Basis basis(dim, count);
  basis.resize(count);
  for (std::size_t i = 0; i < count; ++i) get_doubles(in, basis.column(i));
  if (!in) throw FormatError("'" + path + "': truncated");
  r.vectors = std::move(basis);
  return r;
}

std::string stem_csv(const DiracMixture& d) {
  std::string s = "value,weight\n";
  for (const Atom& a : d.atoms()) s += format_double(a.value) + "," + format_double(a.weight) + "\n";
  return s;
}

std::string histogram_csv(const std::vector<double>& eigenvalues, std::size_t bins) {
  if (eigenvalues.empty() || bins == 0) throw InvalidArgument("histogram_csv: empty input");
  const auto [mn, mx] = std::minmax_element(eigenvalues.begin(), eigenvalues.end());
  double lo = *mn, hi = *mx;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double x : eigenvalues) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    ++counts[std::min(b, bins - 1)];
  }
  std::string s = "bin_lo,bin_hi,count,density\n";
  const auto n = static_cast<double>(eigenvalues.size());
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b);
    s += format_double(a) + "," + format_double(a + width) + "," + std::to_string(counts[b]) + "," +
         format_double(static_cast<double>(counts[b]) / (n * width)) + "\n";
  }
  return s;
}

std::string train_trace_csv(const TrainTrace& trace) {
  std::string s = "step,loss,alpha,beta,lambda_max,lambda_b\n";
  for (const StepRecord& r : trace.steps) {
    s += std::to_string(r.step) + "," + format_double(r.loss) + "," + format_double(r.alpha) + "," +
         format_double(r.beta) + "," + format_double(r.lambda_max) + "," + format_double(r.lambda_b) +
         "\n";
  }
  return s;
}

std::string landscape_csv(const LossLandscape& landscape) {
  std::string s = "direction_index,eigenvalue,t,train_loss,test_loss\n";
  const std::size_t n = landscape.distances.size();
  for (std::size_t d = 0; d < landscape.directions.size(); ++d) {
    const auto& dir = landscape.directions[d];
    for (std::size_t j = 0; j < n; ++j) {
      s += std::to_string(dir.ritz_index) + "," + format_double(dir.eigenvalue) + "," +
           format_double(landscape.distances[j]) + "," + format_double(landscape.train_loss[d * n + j]) +
           "," + format_double(landscape.test_loss[d * n + j]) + "\n";
    }
  }
  return s;
}

std::string RunManifest::to_json() const {
  ordered_json j;
  j["command"] = command;
  ordered_json f = ordered_json::object();
  for (const auto& [k, v] : flags) f[k] = v;
  j["flags"] = std::move(f);
  j["seed"] = seed;
  j["wall_time_seconds"] = wall_time_seconds;
  j["artifacts"] = artifacts;
  j["warnings"] = warnings;
  j["diverged"] = diverged;
  return j.dump(2) + "\n";
}

}  // namespace curvlens
