#include "latent_steer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "latent_steer/errors.hpp"

namespace latent_steer {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

Matrix tanh_of(const Matrix& z) { return z.array().tanh().matrix(); }

template <typename Dst>
Eigen::Index copy_in(Dst& dst, const Vector& flat, Eigen::Index offset) {
  const Eigen::Index n = dst.size();
  std::copy(flat.data() + offset, flat.data() + offset + n, dst.data());
  return offset + n;
}

template <typename Src>
Eigen::Index copy_out(const Src& src, Vector& flat, Eigen::Index offset) {
  std::copy(src.data(), src.data() + src.size(), flat.data() + offset);
  return offset + src.size();
}

}  // namespace

Mlp Mlp::zeros(int input_dim, int hidden, int output_dim) {
  Mlp m;
  m.W1 = Matrix::Zero(hidden, input_dim);
  m.b1 = Vector::Zero(hidden);
  m.W2 = Matrix::Zero(hidden, hidden);
  m.b2 = Vector::Zero(hidden);
  m.W3 = Matrix::Zero(output_dim, hidden);
  m.b3 = Vector::Zero(output_dim);
  return m;
}

Eigen::Index Mlp::parameter_count() const {
  return W1.size() + b1.size() + W2.size() + b2.size() + W3.size() + b3.size();
}

Vector Mlp::forward(const Vector& x) const {
  if (x.size() != input_dim()) throw DimensionError("mlp: input length mismatch");
  const Vector h1 = (W1 * x + b1).array().tanh().matrix();
  const Vector h2 = (W2 * h1 + b2).array().tanh().matrix();
  return W3 * h2 + b3;
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.rows() != input_dim()) throw DimensionError("mlp: input rows mismatch");
  const Matrix h1 = tanh_of((W1 * x).colwise() + b1);
  const Matrix h2 = tanh_of((W2 * h1).colwise() + b2);
  return (W3 * h2).colwise() + b3;
}

Vector Mlp::flatten() const {
  Vector flat(parameter_count());
  Eigen::Index o = 0;
  o = copy_out(W1, flat, o);
  o = copy_out(b1, flat, o);
  o = copy_out(W2, flat, o);
  o = copy_out(b2, flat, o);
  o = copy_out(W3, flat, o);
  copy_out(b3, flat, o);
  return flat;
}

void Mlp::assign(const Vector& flat) {
  if (flat.size() != parameter_count()) throw DimensionError("mlp: flat parameter length mismatch");
  Eigen::Index o = 0;
  o = copy_in(W1, flat, o);
  o = copy_in(b1, flat, o);
  o = copy_in(W2, flat, o);
  o = copy_in(b2, flat, o);
  o = copy_in(W3, flat, o);
  copy_in(b3, flat, o);
}

bool Mlp::all_finite() const {
  return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite() && W3.allFinite() &&
         b3.allFinite();
}

namespace {

Matrix orthogonal(int rows, int cols, double gain, Rng& rng) {
  const int n = std::max(rows, cols);
  const int m = std::min(rows, cols);
  Matrix a(n, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, m);
  const Matrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (int j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Matrix w = rows >= cols ? q : Matrix(q.transpose());
  return gain * w;
}

}  // namespace

Mlp init_mlp(int input_dim, int hidden, int output_dim, double head_gain, Rng& rng) {
  Mlp m = Mlp::zeros(input_dim, hidden, output_dim);
  m.W1 = orthogonal(hidden, input_dim, std::sqrt(2.0), rng);
  m.W2 = orthogonal(hidden, hidden, std::sqrt(2.0), rng);
  m.W3 = orthogonal(output_dim, hidden, head_gain, rng);
  return m;
}

MlpParams init_policy(int d, Rng& rng) {
  if (d < 1) throw DimensionError("init_policy: d must be >= 1");
  MlpParams p;
  p.net = init_mlp(3 * d, kHiddenWidth, d + 2, 0.01, rng);
  p.log_std = Vector::Zero(d + 2);
  return p;
}

ValueParams init_value(int d, Rng& rng) {
  if (d < 1) throw DimensionError("init_value: d must be >= 1");
  return ValueParams{init_mlp(3 * d, kHiddenWidth, 1, 1.0, rng)};
}

double input_scale(int d) { return 1.0 / std::sqrt(static_cast<double>(d)); }

Vector build_input(const LatentVector& s_t, const Goal& goal, double scale) {
  const Eigen::Index d = s_t.size();
  if (goal.base.size() != d || goal.C.size() != d) throw DimensionError("build_input: length mismatch");
  Vector x(3 * d);
  x.segment(0, d) = scale * s_t;
  x.segment(d, d) = scale * goal.base;
  x.segment(2 * d, d) = goal.C;
  return x;
}

Vector forward_policy(const MlpParams& params, const Vector& x) {
  if (params.net.output_dim() != params.log_std.size()) {
    throw DimensionError("forward_policy: head and log_std lengths differ");
  }
  return params.net.forward(x);
}

double forward_value(const ValueParams& params, const Vector& x) { return params.net.forward(x)[0]; }

SampledAction sample_action(const Vector& mean, const Vector& log_std, Rng& rng) {
  if (mean.size() != log_std.size()) throw DimensionError("sample_action: length mismatch");
  SampledAction out;
  out.action.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    out.action[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  }
  out.log_prob = gaussian_log_prob(mean, log_std, out.action);
  return out;
}

double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action) {
  if (mean.size() != log_std.size() || action.size() != mean.size()) {
    throw DimensionError("gaussian_log_prob: length mismatch");
  }
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

double entropy(const Vector& log_std) {
  return log_std.sum() + kHalfLog2PiE * static_cast<double>(log_std.size());
}

// ---------------------------------------------------------------------------

namespace {

struct Activations {
  Matrix h1;
  Matrix h2;
  Matrix out;
};

Activations forward_cached(const Mlp& net, const Matrix& x) {
  Activations a;
  a.h1 = tanh_of((net.W1 * x).colwise() + net.b1);
  a.h2 = tanh_of((net.W2 * a.h1).colwise() + net.b2);
  a.out = (net.W3 * a.h2).colwise() + net.b3;
  return a;
}

/// Backpropagates d(loss)/d(out) through the cached forward pass.
Mlp backward(const Mlp& net, const Matrix& x, const Activations& a, const Matrix& d_out) {
  Mlp g;
  g.W3 = d_out * a.h2.transpose();
  g.b3 = d_out.rowwise().sum();
  const Matrix d_z2 = ((net.W3.transpose() * d_out).array() * (1.0 - a.h2.array().square())).matrix();
  g.W2 = d_z2 * a.h1.transpose();
  g.b2 = d_z2.rowwise().sum();
  const Matrix d_z1 = ((net.W2.transpose() * d_z2).array() * (1.0 - a.h1.array().square())).matrix();
  g.W1 = d_z1 * x.transpose();
  g.b1 = d_z1.rowwise().sum();
  return g;
}

Mlp zeros_like(const Mlp& m) {
  return Mlp::zeros(static_cast<int>(m.input_dim()), static_cast<int>(m.W1.rows()),
                    static_cast<int>(m.output_dim()));
}

}  // namespace

ParamGrads gradients(const MlpParams& policy, const ValueParams& value, const PolicyBatch& batch,
                     const LossSpec& spec) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw UsageError("gradients: empty batch");
  ParamGrads g;
  g.policy_net = zeros_like(policy.net);
  g.log_std = Vector::Zero(policy.log_std.size());
  g.value_net = zeros_like(value.net);
  const double inv_n = 1.0 / static_cast<double>(n);

  switch (spec.kind) {
    case LossKind::entropy: {
      g.loss = entropy(policy.log_std);
      g.log_std.setOnes();
      return g;
    }
    case LossKind::value_mse: {
      if (batch.returns.size() != n) throw DimensionError("gradients: returns length mismatch");
      const Activations act = forward_cached(value.net, batch.inputs);
      const Vector err = act.out.row(0).transpose() - batch.returns;
      g.loss = err.squaredNorm() * inv_n;
      const Matrix d_out = (2.0 * inv_n) * err.transpose();
      g.value_net = backward(value.net, batch.inputs, act, d_out);
      return g;
    }
    case LossKind::policy_surrogate:
      break;
  }

  const Eigen::Index k = policy.log_std.size();
  if (batch.actions.rows() != k || batch.actions.cols() != n || batch.advantages.size() != n) {
    throw DimensionError("gradients: batch shapes disagree with the policy");
  }
  const bool clipped = spec.form == SurrogateForm::clipped_ratio;
  if (clipped && batch.old_log_probs.size() != n) {
    throw DimensionError("gradients: old_log_probs length mismatch");
  }

  const Activations act = forward_cached(policy.net, batch.inputs);
  const Vector inv_var = (-2.0 * policy.log_std).array().exp().matrix();
  const Matrix diff = batch.actions - act.out;                       // a − μ
  const Matrix zsq = (diff.array().square().colwise() * inv_var.array()).matrix();
  const Vector log_probs =
      (-0.5 * zsq.colwise().sum().transpose()).array() - (policy.log_std.sum() + kHalfLog2Pi * static_cast<double>(k));

  // coeff_i = d(loss_i)/d(log π_i)
  Vector coeff(n);
  double loss = 0.0;
  int clipped_count = 0;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double adv = batch.advantages[i];
    if (!clipped) {
      loss += -log_probs[i] * adv;
      coeff[i] = -adv;
      continue;
    }
    const double log_ratio = log_probs[i] - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    kl += -log_ratio;
    const double bounded = std::clamp(ratio, 1.0 - spec.clip, 1.0 + spec.clip);
    if (std::abs(ratio - 1.0) > spec.clip) ++clipped_count;
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = bounded * adv;
    if (unclipped_obj <= clipped_obj) {
      loss += -unclipped_obj;
      coeff[i] = -unclipped_obj;  // d(−ρA)/d log π = −ρA
    } else {
      loss += -clipped_obj;
      coeff[i] = 0.0;
    }
  }
  g.loss = loss * inv_n;
  g.clip_fraction = static_cast<double>(clipped_count) * inv_n;
  g.approx_kl = kl * inv_n;

  // d log π / d μ = (a − μ)/σ²;  d log π / d log σ = z² − 1
  const Matrix d_mean = ((diff.array().colwise() * inv_var.array()).rowwise() *
                         (coeff.transpose().array() * inv_n))
                            .matrix();
  g.log_std = ((zsq.array() - 1.0).rowwise() * (coeff.transpose().array() * inv_n)).rowwise().sum().matrix();
  g.policy_net = backward(policy.net, batch.inputs, act, d_mean);
  return g;
}

}  // namespace latent_steer
