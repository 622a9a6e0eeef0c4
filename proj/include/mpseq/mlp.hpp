#ifndef MPSEQ_MLP_HPP_
#define MPSEQ_MLP_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpseq/contact.hpp"

namespace mpseq {

/// Fully connected tanh network with a linear output layer. All weights and
/// biases live in one flat vector so optimizers and finite-difference checks
/// can treat the net as a single parameter block.
class Mlp {
 public:
  Mlp() = default;

  /// `sizes` = {in, hidden..., out}. Hidden layers get scaled orthogonal-ish
  /// Gaussian init (std sqrt(1/fan_in)); the output layer is scaled by
  /// `out_gain`.
  Mlp(std::vector<int> sizes, Rng& rng, double out_gain = 1.0) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
    for (int s : sizes_)
      if (s < 1) throw std::invalid_argument("mlp: layer sizes must be >= 1");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += (sizes_[l] + 1) * sizes_[l + 1];
    theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    std::normal_distribution<double> g(0.0, 1.0);
    for (int l = 0; l < layers(); ++l) {
      const double gain = l + 1 == layers() ? out_gain : 1.0;
      const double sd = gain / std::sqrt(static_cast<double>(sizes_[l]));
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * g(rng);
    }
  }

  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::Index parameter_count() const { return theta_.size(); }

  const Eigen::VectorXd& parameters() const { return theta_; }
  Eigen::VectorXd& parameters() { return theta_; }
  void set_parameters(const Eigen::VectorXd& p) {
    if (p.size() != theta_.size()) throw std::invalid_argument("mlp: parameter size mismatch");
    theta_ = p;
  }

  Eigen::Map<Eigen::MatrixXd> weight(int l) {
    return {theta_.data() + offset(l), sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Eigen::MatrixXd> weight(int l) const {
    return {theta_.data() + offset(l), sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Eigen::VectorXd> bias(int l) {
    return {theta_.data() + offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int l) const {
    return {theta_.data() + offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }

  // Post-activation values of every layer, input first.
  struct Cache {
    std::vector<Eigen::VectorXd> a;
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    Cache c;
    return forward(x, c);
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache& c) const {
    if (x.size() != input_size()) throw std::invalid_argument("mlp: input size mismatch");
    c.a.resize(sizes_.size());
    c.a[0] = x;
    for (int l = 0; l < layers(); ++l) {
      Eigen::VectorXd z = weight(l) * c.a[l] + bias(l);
      if (l + 1 < layers()) z = z.array().tanh().matrix();
      c.a[l + 1] = std::move(z);
    }
    return c.a.back();
  }

  /// Accumulates d(loss)/d(theta) into `grad` given d(loss)/d(output).
  void backward(const Cache& c, const Eigen::VectorXd& grad_out, Eigen::VectorXd& grad) const {
    if (grad.size() != theta_.size()) grad = Eigen::VectorXd::Zero(theta_.size());
    Eigen::VectorXd delta = grad_out;
    for (int l = layers() - 1; l >= 0; --l) {
      if (l + 1 < layers()) delta = delta.cwiseProduct((1.0 - c.a[l + 1].array().square()).matrix());
      Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offset(l), sizes_[l + 1], sizes_[l]);
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
      gw.noalias() += delta * c.a[l].transpose();
      gb += delta;
      if (l > 0) delta = weight(l).transpose() * delta;
    }
  }

 private:
  Eigen::Index offset(int l) const {
    Eigen::Index o = 0;
    for (int k = 0; k < l; ++k) o += (sizes_[k] + 1) * sizes_[k + 1];
    return o;
  }

  std::vector<int> sizes_;
  Eigen::VectorXd theta_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  void reset(Eigen::Index n) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
    t = 0;
  }
};

inline void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& s,
                      const AdamConfig& cfg) {
  if (s.m.size() != theta.size()) s.reset(theta.size());
  ++s.t;
  s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * grad;
  s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
  theta.array() -= cfg.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + cfg.eps);
}

/// Per-component running mean and variance (parallel Welford merge).
struct RunningMeanStd {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;

  RunningMeanStd() = default;
  explicit RunningMeanStd(int n) : mean(Eigen::VectorXd::Zero(n)), var(Eigen::VectorXd::Ones(n)) {}

  void update(const std::vector<Eigen::VectorXd>& xs) {
    if (xs.empty()) return;
    const double n = static_cast<double>(xs.size());
    Eigen::VectorXd bm = Eigen::VectorXd::Zero(mean.size());
    for (const auto& x : xs) bm += x;
    bm /= n;
    Eigen::VectorXd bv = Eigen::VectorXd::Zero(mean.size());
    for (const auto& x : xs) bv += (x - bm).cwiseAbs2();
    bv /= n;
    if (count == 0.0) {
      mean = bm;
      var = bv;
      count = n;
      return;
    }
    const double tot = count + n;
    const Eigen::VectorXd delta = bm - mean;
    mean += delta * (n / tot);
    var = (var * count + bv * n + delta.cwiseAbs2() * (count * n / tot)) / tot;
    count = tot;
  }

  Eigen::VectorXd normalize(const Eigen::VectorXd& x, double clip = 10.0) const {
    Eigen::VectorXd z = (x - mean).array() / (var.array() + 1e-8).sqrt();
    return z.cwiseMax(-clip).cwiseMin(clip);
  }
};

}  // namespace mpseq

#endif  // MPSEQ_MLP_HPP_
