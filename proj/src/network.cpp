#include "neupde/network.hpp"

#include <cmath>
#include <random>

#include "neupde/errors.hpp"

namespace neupde {

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "elu") return Activation::Elu;
  if (name == "paper_elu") return Activation::PaperElu;
  throw ConfigError("unknown activation: " + name);
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Elu: return "elu";
    case Activation::PaperElu: return "paper_elu";
  }
  return "?";
}

void activation_eval(Activation kind, double x, double& s, double& ds) {
  switch (kind) {
    case Activation::Tanh: {
      s = std::tanh(x);
      ds = 1.0 - s * s;
      return;
    }
    case Activation::Elu: {
      if (x >= 0.0) {
        s = x;
        ds = 1.0;
      } else {
        s = std::expm1(x);
        ds = std::exp(x);
      }
      return;
    }
    case Activation::PaperElu: {
      if (x >= 0.0) {
        s = std::expm1(x);
        ds = std::exp(x);
      } else {
        s = x;
        ds = 1.0;
      }
      return;
    }
  }
}

namespace {

void activation_arrays(Activation kind, const Eigen::MatrixXd& pre,
                       Eigen::MatrixXd& s, Eigen::MatrixXd& ds) {
  const auto a = pre.array();
  switch (kind) {
    case Activation::Tanh:
      s = a.tanh();
      ds = 1.0 - s.array().square();
      return;
    case Activation::Elu: {
      const Eigen::ArrayXXd e = a.min(0.0).exp();
      s = (a >= 0.0).select(a, e - 1.0);
      ds = (a >= 0.0).select(Eigen::ArrayXXd::Constant(pre.rows(), pre.cols(), 1.0), e);
      return;
    }
    case Activation::PaperElu: {
      const Eigen::ArrayXXd e = a.max(0.0).exp();
      s = (a >= 0.0).select(e - 1.0, a);
      ds = (a >= 0.0).select(e, Eigen::ArrayXXd::Constant(pre.rows(), pre.cols(), 1.0));
      return;
    }
  }
}

}  // namespace

Eigen::VectorXd MlpParams::pack() const {
  Eigen::VectorXd theta(size());
  long k = 0;
  for (int i = 0; i < A1.rows(); ++i)
    for (int j = 0; j < A1.cols(); ++j) theta[k++] = A1(i, j);
  for (int i = 0; i < b1.size(); ++i) theta[k++] = b1[i];
  for (int i = 0; i < A2.rows(); ++i)
    for (int j = 0; j < A2.cols(); ++j) theta[k++] = A2(i, j);
  for (int i = 0; i < b2.size(); ++i) theta[k++] = b2[i];
  return theta;
}

void MlpParams::unpack(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != size())
    throw ShapeMismatch("MlpParams::unpack: size mismatch");
  long k = 0;
  for (int i = 0; i < A1.rows(); ++i)
    for (int j = 0; j < A1.cols(); ++j) A1(i, j) = theta[k++];
  for (int i = 0; i < b1.size(); ++i) b1[i] = theta[k++];
  for (int i = 0; i < A2.rows(); ++i)
    for (int j = 0; j < A2.cols(); ++j) A2(i, j) = theta[k++];
  for (int i = 0; i < b2.size(); ++i) b2[i] = theta[k++];
}

long param_count(long n, long h, long o) { return h * n + h + o * h + o; }

MlpParams init_params(int n, int h, int o, Activation act, std::uint64_t seed) {
  if (n < 1 || h < 1 || o < 1)
    throw ConfigError("init_params: dimensions must be >= 1");
  MlpParams p;
  p.activation = act;
  p.A1.resize(h, n);
  p.b1 = Eigen::VectorXd::Zero(h);
  p.A2.resize(o, h);
  p.b2 = Eigen::VectorXd::Zero(o);
  std::mt19937_64 rng(seed);
  const double s1 = std::sqrt(1.0 / n);
  std::uniform_real_distribution<double> u1(-s1, s1);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < n; ++j) p.A1(i, j) = u1(rng);
  const double s2 = std::sqrt(1.0 / h);
  std::uniform_real_distribution<double> u2(-s2, s2);
  for (int i = 0; i < o; ++i)
    for (int j = 0; j < h; ++j) p.A2(i, j) = u2(rng);
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& z) {
  if (z.size() != p.n_in())
    throw ShapeMismatch("mlp_forward: input size mismatch");
  Eigen::VectorXd pre = p.A1 * z + p.b1;
  Eigen::VectorXd s(pre.size());
  double v = 0.0, dv = 0.0;
  for (int i = 0; i < pre.size(); ++i) {
    activation_eval(p.activation, pre[i], v, dv);
    s[i] = v;
  }
  return p.A2 * s + p.b2;
}

Eigen::MatrixXd mlp_jacobian_input(const MlpParams& p,
                                   const Eigen::VectorXd& z) {
  if (z.size() != p.n_in())
    throw ShapeMismatch("mlp_jacobian_input: input size mismatch");
  Eigen::VectorXd pre = p.A1 * z + p.b1;
  Eigen::VectorXd ds(pre.size());
  double v = 0.0, dv = 0.0;
  for (int i = 0; i < pre.size(); ++i) {
    activation_eval(p.activation, pre[i], v, dv);
    ds[i] = dv;
  }
  return p.A2 * ds.asDiagonal() * p.A1;
}

Eigen::VectorXd mlp_vjp_params(const MlpParams& p, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& w) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.size());
  Eigen::VectorXd bar_z;
  mlp_vjp(p, z, w, bar_z, grad);
  return grad;
}

void mlp_vjp(const MlpParams& p, const Eigen::VectorXd& z,
             const Eigen::VectorXd& w, Eigen::VectorXd& bar_z,
             Eigen::Ref<Eigen::VectorXd> grad) {
  if (z.size() != p.n_in() || w.size() != p.n_out())
    throw ShapeMismatch("mlp_vjp: shape mismatch");
  if (grad.size() != p.size()) throw ShapeMismatch("mlp_vjp: grad size");
  const int n = p.n_in(), h = p.hidden(), o = p.n_out();
  Eigen::VectorXd pre = p.A1 * z + p.b1;
  Eigen::VectorXd s(h), ds(h);
  for (int i = 0; i < h; ++i) activation_eval(p.activation, pre[i], s[i], ds[i]);

  // delta = (A2^T w) .* sigma'(pre)
  Eigen::VectorXd delta = (p.A2.transpose() * w).cwiseProduct(ds);

  long k = 0;
  // dA1 = delta z^T
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < n; ++j) grad[k++] += delta[i] * z[j];
  // db1 = delta
  for (int i = 0; i < h; ++i) grad[k++] += delta[i];
  // dA2 = w s^T
  for (int i = 0; i < o; ++i)
    for (int j = 0; j < h; ++j) grad[k++] += w[i] * s[j];
  // db2 = w
  for (int i = 0; i < o; ++i) grad[k++] += w[i];

  bar_z = p.A1.transpose() * delta;
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& p,
                                  const Eigen::MatrixXd& Z) {
  if (Z.rows() != p.n_in())
    throw ShapeMismatch("mlp_forward_batch: input size mismatch");
  Eigen::MatrixXd pre = (p.A1 * Z).colwise() + p.b1;
  Eigen::MatrixXd s, ds;
  activation_arrays(p.activation, pre, s, ds);
  return (p.A2 * s).colwise() + p.b2;
}

void mlp_vjp_batch(const MlpParams& p, const Eigen::MatrixXd& Z,
                   const Eigen::MatrixXd& W, Eigen::MatrixXd& barZ,
                   Eigen::Ref<Eigen::VectorXd> grad) {
  if (Z.rows() != p.n_in() || W.rows() != p.n_out() || W.cols() != Z.cols())
    throw ShapeMismatch("mlp_vjp_batch: shape mismatch");
  if (grad.size() != p.size()) throw ShapeMismatch("mlp_vjp_batch: grad size");
  const int n = p.n_in(), h = p.hidden(), o = p.n_out();
  Eigen::MatrixXd pre = (p.A1 * Z).colwise() + p.b1;
  Eigen::MatrixXd s, ds;
  activation_arrays(p.activation, pre, s, ds);

  Eigen::MatrixXd delta = (p.A2.transpose() * W).cwiseProduct(ds);  // h x P

  Eigen::MatrixXd dA1 = delta * Z.transpose();     // h x n
  Eigen::VectorXd db1 = delta.rowwise().sum();     // h
  Eigen::MatrixXd dA2 = W * s.transpose();         // o x h
  Eigen::VectorXd db2 = W.rowwise().sum();         // o

  long k = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < n; ++j) grad[k++] += dA1(i, j);
  for (int i = 0; i < h; ++i) grad[k++] += db1[i];
  for (int i = 0; i < o; ++i)
    for (int j = 0; j < h; ++j) grad[k++] += dA2(i, j);
  for (int i = 0; i < o; ++i) grad[k++] += db2[i];

  barZ = p.A1.transpose() * delta;
}

}  // namespace neupde
