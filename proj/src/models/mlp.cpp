#include <cmath>

#include "curvlens/error.hpp"
#include "curvlens/models.hpp"
#include "sample_reduce.hpp"

namespace curvlens {

MLP::MLP(std::vector<std::size_t> sizes, double weight_decay, SeedStream& stream)
    : sizes_(std::move(sizes)), gamma_(weight_decay) {
  if (sizes_.size() < 2) throw InvalidArgument("MLP: need at least input and output sizes");
  for (std::size_t s : sizes_) {
    if (s == 0) throw InvalidArgument("MLP: zero-width layer");
  }
  if (sizes_.back() < 2) throw InvalidArgument("MLP: need at least two classes");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("MLP: negative weight decay");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  p_.assign(total, 0.0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double scale = std::sqrt(2.0 / static_cast<double>(sizes_[l]));
    const std::size_t n = sizes_[l + 1] * sizes_[l];
    for (std::size_t k = 0; k < n; ++k) p_[offsets_[l] + k] = scale * stream.normal();
  }
}

void MLP::set_params(std::span<const double> p) {
  if (p.size() != p_.size()) throw InvalidArgument("MLP: parameter length mismatch");
  for (double x : p) {
    if (!std::isfinite(x)) throw InvalidArgument("MLP: non-finite parameter");
  }
  p_.assign(p.begin(), p.end());
}

void MLP::check_batch(const Batch& batch) const {
  if (batch.data == nullptr || batch.empty()) throw InvalidArgument("MLP: empty batch");
  if (batch.data->d_in != sizes_.front()) throw InvalidArgument("MLP: input dimension mismatch");
  if (batch.data->n_classes > sizes_.back()) {
    throw InvalidArgument("MLP: dataset has more classes than the output layer");
  }
}

namespace {

// Per-sample buffers. a[l] is the input of layer l, z[l] its pre-activation;
// the r* arrays hold directional derivatives along the parameter direction v.
struct Pass {
  const std::vector<std::size_t>& sizes;
  const std::vector<std::size_t>& offsets;
  std::size_t layers;
  std::vector<Vector> a, z, ra, rz;
  Vector delta, rdelta, prev, rprev, prob;

  Pass(const std::vector<std::size_t>& s, const std::vector<std::size_t>& o)
      : sizes(s), offsets(o), layers(s.size() - 1), a(layers), z(layers), ra(layers), rz(layers) {
    for (std::size_t l = 0; l < layers; ++l) {
      a[l].resize(sizes[l]);
      ra[l].resize(sizes[l]);
      z[l].resize(sizes[l + 1]);
      rz[l].resize(sizes[l + 1]);
    }
    prob.resize(sizes.back());
  }

  std::size_t in(std::size_t l) const { return sizes[l]; }
  std::size_t out(std::size_t l) const { return sizes[l + 1]; }
  std::size_t bias(std::size_t l) const { return offsets[l] + out(l) * in(l); }

  // y = W_l x + b_l for the parameter vector p.
  void affine(const double* p, std::size_t l, std::span<const double> x, std::span<double> y,
              bool with_bias) const {
    const double* w = p + offsets[l];
    for (std::size_t o = 0; o < out(l); ++o) {
      double s = with_bias ? p[bias(l) + o] : 0.0;
      const double* wo = w + o * in(l);
      for (std::size_t i = 0; i < in(l); ++i) s += wo[i] * x[i];
      y[o] = s;
    }
  }

  // y = W_l' d (or y += when accumulate).
  void affine_transpose(const double* p, std::size_t l, std::span<const double> d,
                        std::span<double> y, bool accumulate) const {
    if (!accumulate) std::fill(y.begin(), y.end(), 0.0);
    const double* w = p + offsets[l];
    for (std::size_t o = 0; o < out(l); ++o) {
      const double* wo = w + o * in(l);
      for (std::size_t i = 0; i < in(l); ++i) y[i] += wo[i] * d[o];
    }
  }

  void forward(const double* p, std::span<const double> x) {
    std::copy(x.begin(), x.end(), a[0].begin());
    for (std::size_t l = 0; l < layers; ++l) {
      affine(p, l, a[l], z[l], true);
      if (l + 1 < layers) {
        for (std::size_t o = 0; o < out(l); ++o) a[l + 1][o] = std::max(z[l][o], 0.0);
      }
    }
  }

  // Directional derivative of every pre-activation along v.
  void forward_r(const double* p, const double* v) {
    std::fill(ra[0].begin(), ra[0].end(), 0.0);
    Vector tmp;
    for (std::size_t l = 0; l < layers; ++l) {
      affine(v, l, a[l], rz[l], true);
      if (l > 0) {
        tmp.resize(out(l));
        affine(p, l, ra[l], tmp, false);
        for (std::size_t o = 0; o < out(l); ++o) rz[l][o] += tmp[o];
      }
      if (l + 1 < layers) {
        for (std::size_t o = 0; o < out(l); ++o) ra[l + 1][o] = z[l][o] > 0.0 ? rz[l][o] : 0.0;
      }
    }
  }

  // acc_W += d a' for layer l.
  void accumulate(std::size_t l, std::span<const double> d, std::span<const double> input,
                  double* acc) const {
    double* w = acc + offsets[l];
    for (std::size_t o = 0; o < out(l); ++o) {
      double* wo = w + o * in(l);
      for (std::size_t i = 0; i < in(l); ++i) wo[i] += d[o] * input[i];
    }
  }

  void mask(std::size_t l, std::span<double> y) const {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(z[l - 1][i] > 0.0)) y[i] = 0.0;
    }
  }

  // Back-propagates delta from the output layer, accumulating J' delta.
  void backward(const double* p, double* acc) {
    for (std::size_t l = layers; l-- > 0;) {
      accumulate(l, delta, a[l], acc);
      for (std::size_t o = 0; o < out(l); ++o) acc[bias(l) + o] += delta[o];
      if (l == 0) break;
      prev.resize(in(l));
      affine_transpose(p, l, delta, prev, false);
      mask(l, prev);
      delta.swap(prev);
    }
  }
};

}  // namespace

LossGradient MLP::loss_and_gradient(const Batch& batch) const {
  check_batch(batch);
  const Dataset& data = *batch.data;
  const std::size_t n = p_.size();
  Vector acc(n + 1);
  detail::reduce_samples(batch.size(), acc, [&](std::size_t b, std::size_t e, std::span<double> out) {
    Pass pass(sizes_, offsets_);
    for (std::size_t s = b; s < e; ++s) {
      const std::size_t r = batch.rows[s];
      pass.forward(p_.data(), data.row(r));
      const Vector& logits = pass.z.back();
      const double lse = detail::softmax(logits, pass.prob);
      const auto y = static_cast<std::size_t>(data.labels[r]);
      out[n] += lse - logits[y];
      pass.delta = pass.prob;
      pass.delta[y] -= 1.0;
      pass.backward(p_.data(), out.data());
    }
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossGradient r;
  r.gradient.resize(n);
  double reg = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    r.gradient[j] = acc[j] * inv + 2.0 * gamma_ * p_[j];
    reg += p_[j] * p_[j];
  }
  r.loss = acc[n] * inv + gamma_ * reg;
  if (!std::isfinite(r.loss)) throw NumericalError("MLP: non-finite loss");
  return r;
}

// Pearlmutter's R-operator applied to the hand-written backward pass. ReLU is
// piecewise linear, so its second derivative contributes nothing.
void MLP::hessian_vector_product(const Batch& batch, std::span<const double> v,
                                 std::span<double> out) const {
  check_vector(v, out);
  check_batch(batch);
  const Dataset& data = *batch.data;
  detail::reduce_samples(batch.size(), out, [&](std::size_t b, std::size_t e, std::span<double> acc) {
    Pass pass(sizes_, offsets_);
    for (std::size_t s = b; s < e; ++s) {
      const std::size_t r = batch.rows[s];
      pass.forward(p_.data(), data.row(r));
      pass.forward_r(p_.data(), v.data());
      detail::softmax(pass.z.back(), pass.prob);
      const auto y = static_cast<std::size_t>(data.labels[r]);
      pass.delta = pass.prob;
      pass.delta[y] -= 1.0;
      pass.rdelta = pass.rz.back();
      detail::softmax_hessian_apply(pass.prob, pass.rdelta);

      for (std::size_t l = pass.layers; l-- > 0;) {
        pass.accumulate(l, pass.rdelta, pass.a[l], acc.data());
        pass.accumulate(l, pass.delta, pass.ra[l], acc.data());
        for (std::size_t o = 0; o < pass.out(l); ++o) acc[pass.bias(l) + o] += pass.rdelta[o];
        if (l == 0) break;
        pass.prev.resize(pass.in(l));
        pass.rprev.resize(pass.in(l));
        pass.affine_transpose(p_.data(), l, pass.delta, pass.prev, false);
        pass.affine_transpose(v.data(), l, pass.delta, pass.rprev, false);
        pass.affine_transpose(p_.data(), l, pass.rdelta, pass.rprev, true);
        pass.mask(l, pass.prev);
        pass.mask(l, pass.rprev);
        pass.delta.swap(pass.prev);
        pass.rdelta.swap(pass.rprev);
      }
    }
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] * inv + 2.0 * gamma_ * v[j];
}

void MLP::ggn_vector_product(const Batch& batch, std::span<const double> v,
                             std::span<double> out) const {
  check_vector(v, out);
  check_batch(batch);
  const Dataset& data = *batch.data;
  detail::reduce_samples(batch.size(), out, [&](std::size_t b, std::size_t e, std::span<double> acc) {
    Pass pass(sizes_, offsets_);
    for (std::size_t s = b; s < e; ++s) {
      pass.forward(p_.data(), data.row(batch.rows[s]));
      pass.forward_r(p_.data(), v.data());
      detail::softmax(pass.z.back(), pass.prob);
      pass.delta = pass.rz.back();
      detail::softmax_hessian_apply(pass.prob, pass.delta);
      pass.backward(p_.data(), acc.data());
    }
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] * inv + 2.0 * gamma_ * v[j];
}

std::unique_ptr<Model> MLP::clone() const { return std::make_unique<MLP>(*this); }

}  // namespace curvlens
