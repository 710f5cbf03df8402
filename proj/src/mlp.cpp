#include "dmps/mlp.hpp"

#include <cmath>

namespace dmps {

namespace {

// tanh through the vectorized exp; Eigen evaluates double tanh one scalar at
// a time, which dominated update cost.
Matrix fast_tanh(const Matrix& z) {
  return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

}  // namespace

void Mlp::Gradients::set_zero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

Mlp::Mlp(std::vector<int> sizes, OutputKind kind, Vec out_center, Vec out_scale)
    : sizes_(std::move(sizes)),
      kind_(kind),
      out_center_(std::move(out_center)),
      out_scale_(std::move(out_scale)) {
  if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
  for (int n : sizes_) {
    if (n < 1) throw ConfigError("MLP layer sizes must be positive");
  }
  const auto out = static_cast<std::size_t>(sizes_.back());
  if (kind_ == OutputKind::ScaledTanh) {
    if (out_center_.empty()) out_center_.assign(out, 0.0);
    if (out_scale_.empty()) out_scale_.assign(out, 1.0);
    if (out_center_.size() != out || out_scale_.size() != out) {
      throw ConfigError("output center/scale must match the output size");
    }
  }
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    layers_.push_back({Matrix::Zero(sizes_[i + 1], sizes_[i]), Vector::Zero(sizes_[i + 1])});
  }
}

void Mlp::init(Rng& rng, double output_scale) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.w.cols()));
    const double scale = (l + 1 == layers_.size()) ? output_scale : 1.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < layer.w.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.w.rows(); ++i) layer.w(i, j) = scale * dist(rng);
    }
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = scale * dist(rng);
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  Tape tape;
  return forward(x, tape);
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  if (x.rows() != sizes_.front()) {
    throw EnvError("MLP input has " + std::to_string(x.rows()) + " rows, expected " +
                   std::to_string(sizes_.front()));
  }
  tape.inputs.resize(layers_.size());
  Matrix a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    tape.inputs[l] = a;
    Matrix z = layers_[l].w * a;
    z.colwise() += layers_[l].b;
    if (l + 1 < layers_.size()) {
      a = fast_tanh(z);
    } else {
      tape.output_pre = z;
    }
  }
  if (kind_ == OutputKind::Linear) {
    tape.output = tape.output_pre;
  } else {
    tape.output = fast_tanh(tape.output_pre);
    for (Eigen::Index i = 0; i < tape.output.rows(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      tape.output.row(i) =
          (tape.output.row(i).array() * out_scale_[k] + out_center_[k]).matrix();
    }
  }
  return tape.output;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& d_output, Gradients& grads) const {
  Matrix delta = d_output;
  if (kind_ == OutputKind::ScaledTanh) {
    // d/dz [c + s * tanh z] = s * (1 - tanh^2 z)
    const Matrix t = fast_tanh(tape.output_pre);
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
      const double s = out_scale_[static_cast<std::size_t>(i)];
      delta.row(i) = (delta.row(i).array() * s * (1.0 - t.row(i).array().square())).matrix();
    }
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Matrix& in = tape.inputs[l];
    grads.w[l].noalias() += delta * in.transpose();
    grads.b[l] += delta.rowwise().sum();
    Matrix d_in = layers_[l].w.transpose() * delta;
    if (l > 0) {
      // `in` is tanh of the previous pre-activation.
      d_in.array() *= (1.0 - in.array().square());
    }
    delta = std::move(d_in);
  }
  return delta;
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.w.push_back(Matrix::Zero(layer.w.rows(), layer.w.cols()));
    g.b.push_back(Vector::Zero(layer.b.size()));
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.w.size() + layer.b.size());
  return n;
}

Vec Mlp::flat_parameters() const {
  Vec flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.w.data(), layer.w.data() + layer.w.size());
    flat.insert(flat.end(), layer.b.data(), layer.b.data() + layer.b.size());
  }
  return flat;
}

void Mlp::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw EnvError("flat parameter size mismatch");
  std::size_t k = 0;
  for (auto& layer : layers_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), layer.w.size(), layer.w.data());
    k += static_cast<std::size_t>(layer.w.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), layer.b.size(), layer.b.data());
    k += static_cast<std::size_t>(layer.b.size());
  }
}

bool Mlp::parameters_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.w.allFinite() || !layer.b.allFinite()) return false;
  }
  return true;
}

void Mlp::soft_update_from(const Mlp& source, double tau) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (tau == 1.0) {
      layers_[l].w = source.layers_[l].w;
      layers_[l].b = source.layers_[l].b;
      continue;
    }
    layers_[l].w = tau * source.layers_[l].w + (1.0 - tau) * layers_[l].w;
    layers_[l].b = tau * source.layers_[l].b + (1.0 - tau) * layers_[l].b;
  }
}

Vec mlp_forward(const Mlp& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.input_size()) {
    throw EnvError("MLP input has size " + std::to_string(x.size()) + ", expected " +
                   std::to_string(net.input_size()));
  }
  Matrix in(net.input_size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) in(static_cast<Eigen::Index>(i), 0) = x[i];
  const Matrix out = net.forward(in);
  return Vec(out.data(), out.data() + out.size());
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(net.zero_gradients()),
      v_(net.zero_gradients()) {}

void Adam::step(Mlp& net, const Mlp::Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto apply = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    apply(layers[l].w, grads.w[l], m_.w[l], v_.w[l]);
    apply(layers[l].b, grads.b[l], m_.b[l], v_.b[l]);
  }
}

}  // namespace dmps
