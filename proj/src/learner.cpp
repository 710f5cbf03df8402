#include "dmps/learner.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dmps/text.hpp"

namespace dmps {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity_ == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(TransitionRecord record) {
  if (!record.next) record.done = true;
  if (records_.size() < capacity_) {
    records_.push_back(std::move(record));
    return;
  }
  records_[head_] = std::move(record);
  head_ = (head_ + 1) % capacity_;
}

std::vector<const TransitionRecord*> ReplayBuffer::sample(std::size_t batch_size) {
  if (records_.size() < batch_size || batch_size == 0) {
    throw std::logic_error("replay buffer holds " + std::to_string(records_.size()) +
                           " records, cannot sample " + std::to_string(batch_size));
  }
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  std::vector<const TransitionRecord*> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out.push_back(&records_[pick(rng_)]);
  return out;
}

const TransitionRecord& ReplayBuffer::at(std::size_t i) const {
  if (i >= records_.size()) throw std::out_of_range("replay buffer index");
  return records_[(head_ + i) % records_.size()];
}

void validate(const LearnerConfig& cfg) {
  Discount{cfg.gamma};
  if (!(cfg.actor_lr > 0.0 && cfg.critic_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw ConfigError("learner.tau must lie in (0, 1]");
  if (cfg.policy_delay < 1) throw ConfigError("learner.policy_delay must be >= 1");
  if (!(cfg.smoothing_sigma >= 0.0 && cfg.smoothing_clip >= 0.0)) {
    throw ConfigError("smoothing parameters must be non-negative");
  }
  if (cfg.batch_size < 1) throw ConfigError("learner.batch_size must be >= 1");
  if (cfg.hidden.empty()) throw ConfigError("learner.hidden needs at least one layer");
  for (int h : cfg.hidden) {
    if (h < 1) throw ConfigError("hidden sizes must be positive");
  }
  if (cfg.buffer_capacity == 0) throw ConfigError("learner.buffer_capacity must be positive");
  if (!(cfg.exploration_sigma >= 0.0)) throw ConfigError("exploration sigma must be >= 0");
  if (cfg.warmup_steps < 0) throw ConfigError("learner.warmup_steps must be >= 0");
}

namespace {

Matrix stack_inputs(const Matrix& s, const Matrix& a) {
  Matrix x(s.rows() + a.rows(), s.cols());
  x.topRows(s.rows()) = s;
  x.bottomRows(a.rows()) = a;
  return x;
}

}  // namespace

double critic_loss(const Mlp& critic, const Batch& batch, const Matrix& targets,
                   Mlp::Gradients* grads) {
  Mlp::Tape tape;
  const Matrix q = critic.forward(stack_inputs(batch.s, batch.a), tape);
  const Matrix err = q - targets;
  const double n = static_cast<double>(q.cols());
  if (grads) critic.backward(tape, (2.0 / n) * err, *grads);
  return err.squaredNorm() / n;
}

double actor_loss(const Mlp& actor, const Mlp& critic, const Batch& batch,
                  Mlp::Gradients* grads) {
  Mlp::Tape actor_tape;
  const Matrix a = actor.forward(batch.s, actor_tape);
  Mlp::Tape critic_tape;
  const Matrix q = critic.forward(stack_inputs(batch.s, a), critic_tape);
  const double n = static_cast<double>(q.cols());
  if (grads) {
    Mlp::Gradients scratch = critic.zero_gradients();
    const Matrix d_q = Matrix::Constant(1, q.cols(), -1.0 / n);
    const Matrix d_in = critic.backward(critic_tape, d_q, scratch);
    actor.backward(actor_tape, d_in.bottomRows(a.rows()), *grads);
  }
  return -q.sum() / n;
}

double q_value(const Mlp& critic, std::span<const double> features, std::span<const double> a) {
  Vec x(features.begin(), features.end());
  x.insert(x.end(), a.begin(), a.end());
  return mlp_forward(critic, x)[0];
}

Td3Learner::Td3Learner(FeatureMap features, std::size_t feature_dim, ActionBox box,
                       LearnerConfig cfg, std::uint64_t seed)
    : features_(std::move(features)),
      feature_dim_(feature_dim),
      box_(std::move(box)),
      cfg_(std::move(cfg)),
      rng_(seed) {
  validate(cfg_);
  const int in = static_cast<int>(feature_dim_);
  const int act = static_cast<int>(box_.dim());
  std::vector<int> actor_sizes{in};
  std::vector<int> critic_sizes{in + act};
  for (int h : cfg_.hidden) {
    actor_sizes.push_back(h);
    critic_sizes.push_back(h);
  }
  actor_sizes.push_back(act);
  critic_sizes.push_back(1);
  actor_ = Mlp(actor_sizes, OutputKind::ScaledTanh, box_.center(), box_.half_range());
  critic1_ = Mlp(critic_sizes, OutputKind::Linear);
  critic2_ = Mlp(critic_sizes, OutputKind::Linear);
  actor_.init(rng_, 3e-3);
  // Zero output layers: every Q estimate starts at exactly 0.
  critic1_.init(rng_, 0.0);
  critic2_.init(rng_, 0.0);
  actor_target_ = actor_;
  critic1_target_ = critic1_;
  critic2_target_ = critic2_;
  actor_opt_ = Adam(actor_, cfg_.actor_lr);
  critic1_opt_ = Adam(critic1_, cfg_.critic_lr);
  critic2_opt_ = Adam(critic2_, cfg_.critic_lr);
}

Action Td3Learner::act(const State& s) const {
  return mlp_forward(actor_, features_(s));
}

double Td3Learner::q_value(const State& s, const Action& a) const {
  return dmps::q_value(critic1_, features_(s), a);
}

Batch Td3Learner::make_batch(const std::vector<const TransitionRecord*>& records) const {
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto fd = static_cast<Eigen::Index>(feature_dim_);
  const auto ad = static_cast<Eigen::Index>(box_.dim());
  Batch b{Matrix(fd, n), Matrix(ad, n), Matrix(1, n), Matrix::Zero(fd, n), Matrix(1, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& rec = *records[static_cast<std::size_t>(j)];
    const Vec f = features_(rec.s);
    for (Eigen::Index i = 0; i < fd; ++i) b.s(i, j) = f[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < ad; ++i) b.a(i, j) = rec.a[static_cast<std::size_t>(i)];
    b.r(0, j) = rec.r;
    if (rec.next) {
      const Vec f2 = features_(*rec.next);
      for (Eigen::Index i = 0; i < fd; ++i) b.s_next(i, j) = f2[static_cast<std::size_t>(i)];
    }
    b.not_done(0, j) = (rec.done || !rec.next) ? 0.0 : 1.0;
  }
  return b;
}

Matrix Td3Learner::td_targets(const Batch& batch, Rng& rng) const {
  Matrix a_next = actor_target_.forward(batch.s_next);
  const Vec half = box_.half_range();
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index j = 0; j < a_next.cols(); ++j) {
    for (Eigen::Index i = 0; i < a_next.rows(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double limit = cfg_.smoothing_clip * half[k];
      const double eps = std::clamp(cfg_.smoothing_sigma * half[k] * noise(rng), -limit, limit);
      a_next(i, j) = std::clamp(a_next(i, j) + eps, box_[k].lo, box_[k].hi);
    }
  }
  const Matrix x_next = stack_inputs(batch.s_next, a_next);
  const Matrix q1 = critic1_target_.forward(x_next);
  const Matrix q2 = critic2_target_.forward(x_next);
  const Matrix q_min = q1.cwiseMin(q2);
  Matrix y = batch.r;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    // Terminal records take r exactly; no bootstrap term is added at all.
    if (batch.not_done(0, j) != 0.0) y(0, j) += cfg_.gamma * q_min(0, j);
  }
  return y;
}

void Td3Learner::update(ReplayBuffer& buffer) {
  update_on(make_batch(buffer.sample(static_cast<std::size_t>(cfg_.batch_size))));
}

void Td3Learner::update_on(const Batch& batch) {
  const Matrix y = td_targets(batch, rng_);
  Mlp::Gradients g1 = critic1_.zero_gradients();
  Mlp::Gradients g2 = critic2_.zero_gradients();
  critic_loss(critic1_, batch, y, &g1);
  critic_loss(critic2_, batch, y, &g2);
  critic1_opt_.step(critic1_, g1);
  critic2_opt_.step(critic2_, g2);

  if (updates_ % cfg_.policy_delay == 0) {
    Mlp::Gradients ga = actor_.zero_gradients();
    actor_loss(actor_, critic1_, batch, &ga);
    actor_opt_.step(actor_, ga);
    actor_target_.soft_update_from(actor_, cfg_.tau);
    critic1_target_.soft_update_from(critic1_, cfg_.tau);
    critic2_target_.soft_update_from(critic2_, cfg_.tau);
  }
  ++updates_;
}

bool Td3Learner::parameters_finite() const {
  return actor_.parameters_finite() && critic1_.parameters_finite() &&
         critic2_.parameters_finite() && actor_target_.parameters_finite() &&
         critic1_target_.parameters_finite() && critic2_target_.parameters_finite();
}

// Checkpoint layout (text, LF line endings):
//   dmps-checkpoint 1
//   tensor <name> <rows> <cols>
//   <rows lines of cols space-separated values, shortest round-trip decimal>
//   ... repeated for every tensor ...
//   end
// Tensor names are <net>.<layer>.w and <net>.<layer>.b for the nets actor,
// critic1, critic2, actor_target, critic1_target, critic2_target.
namespace {

constexpr const char* kMagic = "dmps-checkpoint 1";

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(i, j));
    out << '\n';
  }
}

void write_net(std::ostream& out, const std::string& name, const Mlp& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    write_tensor(out, name + "." + std::to_string(l) + ".w", layer.w);
    write_tensor(out, name + "." + std::to_string(l) + ".b", Matrix(layer.b));
  }
}

void read_tensor(std::istream& in, const std::string& expected, Eigen::Index rows,
                 Eigen::Index cols, double* dst) {
  std::string tag, name;
  Eigen::Index r = 0, c = 0;
  if (!(in >> tag >> name >> r >> c) || tag != "tensor") {
    throw ConfigError("checkpoint: expected tensor header for " + expected);
  }
  if (name != expected || r != rows || c != cols) {
    throw ConfigError("checkpoint: tensor " + name + " has shape " + std::to_string(r) + "x" +
                      std::to_string(c) + ", expected " + expected + " " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  }
  // Row-major on disk, column-major in memory.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::string token;
      if (!(in >> token)) throw ConfigError("checkpoint: truncated tensor " + name);
      dst[j * rows + i] = parse_double(token);
    }
  }
}

void read_net(std::istream& in, const std::string& name, Mlp& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    read_tensor(in, name + "." + std::to_string(l) + ".w", layer.w.rows(), layer.w.cols(),
                layer.w.data());
    read_tensor(in, name + "." + std::to_string(l) + ".b", layer.b.size(), 1, layer.b.data());
  }
}

}  // namespace

void Td3Learner::save(std::ostream& out) const {
  out << kMagic << '\n';
  write_net(out, "actor", actor_);
  write_net(out, "critic1", critic1_);
  write_net(out, "critic2", critic2_);
  write_net(out, "actor_target", actor_target_);
  write_net(out, "critic1_target", critic1_target_);
  write_net(out, "critic2_target", critic2_target_);
  out << "end\n";
}

void Td3Learner::load(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw ConfigError("not a dmps checkpoint (bad header)");
  read_net(in, "actor", actor_);
  read_net(in, "critic1", critic1_);
  read_net(in, "critic2", critic2_);
  read_net(in, "actor_target", actor_target_);
  read_net(in, "critic1_target", critic1_target_);
  read_net(in, "critic2_target", critic2_target_);
  std::string tail;
  if (!(in >> tail) || tail != "end") throw ConfigError("checkpoint: missing end marker");
}

void Td3Learner::save_file(const std::string& path) const {
  std::ostringstream ss;
  save(ss);
  write_file_atomic(path, ss.str());
}

void Td3Learner::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  load(in);
}

}  // namespace dmps
