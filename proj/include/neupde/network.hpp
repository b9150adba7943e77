#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace neupde {

/// `Elu` is the standard exponential linear unit (x for x >= 0, e^x - 1
/// below). `PaperElu` swaps the branches (e^x - 1 for x >= 0, x below).
/// Both are C^1 with unit slope at 0.
enum class Activation { Tanh, Elu, PaperElu };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation a);

/// Value and derivative of the activation at x.
void activation_eval(Activation kind, double x, double& s, double& ds);

/// Two-layer perceptron F(z) = A2 sigma(A1 z + b1) + b2.
struct MlpParams {
  Eigen::MatrixXd A1;  // h x n
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd A2;  // o x h
  Eigen::VectorXd b2;  // o
  Activation activation = Activation::Tanh;

  int n_in() const { return static_cast<int>(A1.cols()); }
  int hidden() const { return static_cast<int>(A1.rows()); }
  int n_out() const { return static_cast<int>(A2.rows()); }
  long size() const { return A1.size() + b1.size() + A2.size() + b2.size(); }

  /// Flat layout: A1 row-major, b1, A2 row-major, b2.
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::Ref<const Eigen::VectorXd>& theta);
};

long param_count(long n, long h, long o);

/// Weights uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)], biases zero.
/// Deterministic for a given seed.
MlpParams init_params(int n, int h, int o, Activation act, std::uint64_t seed);

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& z);

/// dF/dz = A2 diag(sigma'(A1 z + b1)) A1.
Eigen::MatrixXd mlp_jacobian_input(const MlpParams& p, const Eigen::VectorXd& z);

/// Gradient of w^T F(z, theta) over theta, in pack() order.
Eigen::VectorXd mlp_vjp_params(const MlpParams& p, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& w);

/// Combined reverse pass: bar_z gets dF/dz^T w, the parameter gradient is
/// accumulated (added) into grad in pack() order.
void mlp_vjp(const MlpParams& p, const Eigen::VectorXd& z,
             const Eigen::VectorXd& w, Eigen::VectorXd& bar_z,
             Eigen::Ref<Eigen::VectorXd> grad);

/// Batched forward over P points: Z is n x P, result o x P.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& Z);

/// Batched reverse pass with cotangents W (o x P); barZ gets the input
/// cotangents (n x P) and parameter gradients are added into grad.
void mlp_vjp_batch(const MlpParams& p, const Eigen::MatrixXd& Z,
                   const Eigen::MatrixXd& W, Eigen::MatrixXd& barZ,
                   Eigen::Ref<Eigen::VectorXd> grad);

}  // namespace neupde
