#include "curvlens/rmt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "curvlens/error.hpp"
#include "curvlens/kernels.hpp"
#include "json.hpp"

namespace curvlens {

MPParams::MPParams(double variance, double ratio) : variance_(variance), ratio_(ratio) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidArgument("MPParams: variance must be positive");
  }
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) {
    throw InvalidArgument("MPParams: ratio must be non-negative");
  }
}

double MPParams::lower_edge() const noexcept {
  const double s = 1.0 - std::sqrt(ratio_);
  return variance_ * s * s;
}

double MPParams::upper_edge() const noexcept {
  const double s = 1.0 + std::sqrt(ratio_);
  return variance_ * s * s;
}

double MPParams::zero_mass() const noexcept {
  return ratio_ > 1.0 ? 1.0 - 1.0 / ratio_ : 0.0;
}

double mp_density(double x, const MPParams& params) {
  const double lo = params.lower_edge();
  const double hi = params.upper_edge();
  if (params.ratio() == 0.0 || x <= lo || x >= hi || x <= 0.0) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) /
         (2.0 * std::numbers::pi * params.variance() * params.ratio() * x);
}

double wigner_density(double x) {
  if (std::abs(x) >= 2.0) return 0.0;
  return std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi);
}

DenseSymmetric sample_wigner(std::size_t dim, SeedStream& stream, bool normalized) {
  if (dim < 2) throw InvalidArgument("sample_wigner: dimension must be at least 2");
  const double scale = normalized ? 1.0 / std::sqrt(static_cast<double>(dim)) : 1.0;
  std::vector<double> a(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      const double x = stream.normal() * scale;
      a[i * dim + j] = x;
      a[j * dim + i] = x;
    }
  }
  return DenseSymmetric::from_row_major(dim, std::move(a));
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

DenseSymmetric symmetrized(const Eigen::MatrixXd& m) {
  const std::size_t n = static_cast<std::size_t>(m.rows());
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = 0.5 * (m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                              m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
      a[i * n + j] = s;
      a[j * n + i] = s;
    }
  }
  return DenseSymmetric::from_row_major(n, std::move(a));
}

}  // namespace

DenseSymmetric sample_wishart(std::size_t dim, std::size_t samples, SeedStream& stream) {
  if (dim < 1 || samples < 1) throw InvalidArgument("sample_wishart: dimensions must be positive");
  RowMatrix x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = stream.normal();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  y.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / static_cast<double>(samples));
  y.triangularView<Eigen::StrictlyUpper>() = y.transpose();
  return symmetrized(y);
}

void PlantedSpectrumSpec::validate() const {
  std::size_t total = 0;
  for (const SpectrumGroup& g : groups) {
    if (g.kind == SpectrumGroup::Kind::uniform && g.hi < g.lo) {
      throw InvalidArgument("planted spectrum: group has hi < lo");
    }
    total += g.count;
  }
  if (total != dim) {
    throw InvalidArgument("planted spectrum: group counts sum to " + std::to_string(total) +
                          " but dim is " + std::to_string(dim));
  }
  if (dim == 0 || dim > kOracleMaxDim) {
    throw InvalidArgument("planted spectrum: dim must lie in [1, " +
                          std::to_string(kOracleMaxDim) + "]");
  }
}

PlantedSpectrumSpec PlantedSpectrumSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("planted spectrum JSON: ") + e.what());
  }
  PlantedSpectrumSpec spec;
  try {
    spec.dim = j.at("dim").get<std::size_t>();
    spec.rotation_seed = j.value("seed", std::uint64_t{0});
    for (const auto& g : j.at("groups")) {
      SpectrumGroup group;
      group.count = g.at("count").get<std::size_t>();
      const std::string dist = g.value("dist", std::string("uniform"));
      if (dist == "uniform") {
        group.kind = SpectrumGroup::Kind::uniform;
        group.lo = g.at("lo").get<double>();
        group.hi = g.at("hi").get<double>();
      } else if (dist == "const") {
        group.kind = SpectrumGroup::Kind::constant;
        group.lo = g.contains("value") ? g.at("value").get<double>() : g.at("lo").get<double>();
        group.hi = group.lo;
      } else {
        throw FormatError("planted spectrum JSON: unknown dist '" + dist + "'");
      }
      spec.groups.push_back(group);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("planted spectrum JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string PlantedSpectrumSpec::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = dim;
  j["groups"] = nlohmann::ordered_json::array();
  for (const SpectrumGroup& g : groups) {
    nlohmann::ordered_json e;
    e["count"] = g.count;
    e["dist"] = g.kind == SpectrumGroup::Kind::uniform ? "uniform" : "const";
    e["lo"] = g.lo;
    e["hi"] = g.hi;
    j["groups"].push_back(e);
  }
  j["seed"] = rotation_seed;
  return j.dump(2);
}

std::vector<double> random_orthonormal(std::size_t n, std::size_t k, SeedStream& stream) {
  if (k > n) throw InvalidArgument("random_orthonormal: more columns than rows");
  std::vector<double> q(n * k);
  for (double& x : q) x = stream.normal();
  Eigen::Map<Eigen::MatrixXd> qm(q.data(), static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(k));

  constexpr std::size_t kBlock = 64;
  Vector coeffs(k);
  for (std::size_t s = 0; s < k; s += kBlock) {
    const auto b = static_cast<Eigen::Index>(std::min(kBlock, k - s));
    const auto si = static_cast<Eigen::Index>(s);
    auto block = qm.middleCols(si, b);
    if (s > 0) {
      const auto done = qm.leftCols(si);
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::MatrixXd c = done.transpose() * block;
        block.noalias() -= done * c;
      }
    }
    for (Eigen::Index j = 0; j < b; ++j) {
      const std::size_t col = s + static_cast<std::size_t>(j);
      for (int attempt = 0;; ++attempt) {
        std::span<double> v(q.data() + col * n, n);
        const double before = kernels::norm2(v);
        // A fresh draw has not seen the earlier blocks yet.
        const std::size_t from = attempt == 0 ? s : 0;
        const std::span<const double> basis(q.data() + from * n, (col - from) * n);
        for (int pass = 0; pass < 2; ++pass) {
          kernels::project(basis, n, col - from, v, coeffs);
          kernels::subtract_combination(basis, n, col - from, coeffs, v);
        }
        const double after = kernels::norm2(v);
        if (after > 1e-8 * before && after > 0.0) {
          kernels::scale(1.0 / after, v);
          break;
        }
        if (attempt > 16) throw ConvergenceError("random_orthonormal: repeated rank deficiency");
        for (double& x : v) x = stream.normal();
      }
    }
  }
  return q;
}

PlantedMatrix planted_matrix(const PlantedSpectrumSpec& spec, SeedStream& stream, bool rotate) {
  spec.validate();
  const std::size_t n = spec.dim;
  Vector d;
  d.reserve(n);
  for (const SpectrumGroup& g : spec.groups) {
    for (std::size_t i = 0; i < g.count; ++i) {
      d.push_back(g.kind == SpectrumGroup::Kind::uniform ? stream.uniform(g.lo, g.hi) : g.lo);
    }
  }

  PlantedMatrix out;
  if (!rotate) {
    out.matrix = DenseSymmetric::diagonal(d);
  } else {
    SeedStream rotation(spec.rotation_seed);
    std::vector<double> u = random_orthonormal(n, n, rotation);
    const Eigen::Map<const Eigen::MatrixXd> um(u.data(), static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::VectorXd> dm(d.data(), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd scaled = um * dm.asDiagonal();
    Eigen::MatrixXd h(um.rows(), um.rows());
    h.noalias() = scaled * um.transpose();
    out.matrix = symmetrized(h);
  }
  out.spectrum = std::move(d);
  std::sort(out.spectrum.begin(), out.spectrum.end());
  return out;
}

MPParams fit_mp_to_bulk(const DiracMixture& d, std::size_t outliers, std::size_t zero_modes) {
  std::vector<Atom> atoms = d.atoms();
  if (zero_modes + outliers >= atoms.size()) {
    throw InvalidArgument("fit_mp_to_bulk: exclusions remove every atom");
  }
  for (std::size_t z = 0; z < zero_modes; ++z) {
    auto it = std::min_element(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
      return std::abs(a.value) < std::abs(b.value);
    });
    atoms.erase(it);
  }
  // Atoms stay sorted ascending, so the outliers are the tail.
  atoms.resize(atoms.size() - outliers);

  double mass = 0.0, mean = 0.0;
  for (const Atom& a : atoms) {
    mass += a.weight;
    mean += a.weight * a.value;
  }
  if (!(mass > 0.0)) throw InvalidArgument("fit_mp_to_bulk: remaining bulk has no mass");
  mean /= mass;
  if (!(mean > 0.0)) throw InvalidArgument("fit_mp_to_bulk: bulk mean must be positive");
  const double edge = std::max(atoms.back().value, mean);
  const double root = std::sqrt(edge / mean) - 1.0;
  return MPParams(mean, root * root);
}

OverlapCleaning rie_clean(const DenseSymmetric& truth, const DenseSymmetric& empirical) {
  if (truth.dim() != empirical.dim()) throw InvalidArgument("rie_clean: dimension mismatch");
  constexpr std::size_t kMaxDim = 500;
  if (truth.dim() > kMaxDim) throw InvalidArgument("rie_clean: dimension exceeds 500");
  const std::size_t n = truth.dim();
  const EigenDecomposition t = dense_eigendecomposition(truth);
  const EigenDecomposition e = dense_eigendecomposition(empirical);
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::Map<const Eigen::MatrixXd> ut(t.vectors.data(), ni, ni);
  const Eigen::Map<const Eigen::MatrixXd> ue(e.vectors.data(), ni, ni);
  const Eigen::MatrixXd dots = ut.transpose() * ue;

  OverlapCleaning out;
  out.dim = n;
  out.overlap.resize(n * n);
  out.cleaned.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double o = dots(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out.overlap[i * n + j] = o * o;
      out.cleaned[i] += o * o * e.values[j];
    }
  }
  return out;
}

}  // namespace curvlens
