#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "dmps/core.hpp"

namespace dmps {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OutputKind { Linear, ScaledTanh };

/// Fully connected network with tanh hidden layers. The output is either
/// linear or center + scale * tanh(z) (for bounded actions). Batched inputs
/// are column-major: one sample per column.
class Mlp {
 public:
  struct Layer {
    Matrix w;  // out x in
    Vector b;  // out
  };

  /// Saved intermediate values of a batched forward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    Matrix output_pre;           // last layer before the output map
    Matrix output;
  };

  struct Gradients {
    std::vector<Matrix> w;
    std::vector<Vector> b;
    void set_zero();
  };

  Mlp() = default;
  Mlp(std::vector<int> sizes, OutputKind kind, Vec out_center = {}, Vec out_scale = {});

  /// Uniform(+-1/sqrt(fan_in)) hidden layers; the output layer is scaled by
  /// `output_scale` (0 gives an all-zero output layer).
  void init(Rng& rng, double output_scale);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  OutputKind kind() const { return kind_; }
  const Vec& out_center() const { return out_center_; }
  const Vec& out_scale() const { return out_scale_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Tape& tape) const;

  /// Accumulates parameter gradients of a scalar loss into `grads` given
  /// dLoss/dOutput, and returns dLoss/dInput.
  Matrix backward(const Tape& tape, const Matrix& d_output, Gradients& grads) const;

  Gradients zero_gradients() const;

  std::size_t parameter_count() const;
  Vec flat_parameters() const;
  void set_flat_parameters(std::span<const double> flat);
  bool parameters_finite() const;

  /// target <- tau * source + (1 - tau) * target, layer by layer.
  void soft_update_from(const Mlp& source, double tau);

 private:
  std::vector<int> sizes_;
  OutputKind kind_ = OutputKind::Linear;
  Vec out_center_;
  Vec out_scale_;
  std::vector<Layer> layers_;
};

/// Single-sample forward pass; a size mismatch is an EnvError.
Vec mlp_forward(const Mlp& net, std::span<const double> x);

/// Adam with bias correction, one instance per network.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Mlp& net, const Mlp::Gradients& grads);

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  Mlp::Gradients m_, v_;
};

}  // namespace dmps
