#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace neupde {

/// Global affine normalization N(x) = 2 (x - m) / (M - m) - 1, fitted once
/// over every component of every sample. Values outside [m, M] extrapolate
/// linearly; there is no clipping.
struct NormalizationBounds {
  double m = -1.0;
  double M = 1.0;

  double scale() const { return 2.0 / (M - m); }
  double apply(double v) const { return 2.0 * (v - m) / (M - m) - 1.0; }
};

/// Streaming min/max accumulator used by the various fit_bounds overloads.
class BoundsAccumulator {
 public:
  void add(double v);
  void add(const Eigen::Ref<const Eigen::MatrixXd>& values);
  bool empty() const { return count_ == 0; }
  /// Throws DegenerateData when max == min or nothing was added.
  NormalizationBounds finish() const;

 private:
  double lo_ = 0.0, hi_ = 0.0;
  long count_ = 0;
};

NormalizationBounds fit_bounds(const std::vector<Eigen::VectorXd>& samples);

Eigen::VectorXd normalize(const Eigen::VectorXd& x, const NormalizationBounds& b);

/// Monomial dictionary over (t, x1..xd): every term t^k x1^l1 ... xd^ld with
/// 0 < k + sum(l) <= degree, in graded lexicographic order (time variable
/// first). The constant term is excluded; the network bias covers it.
struct DictionarySpec {
  int dim = 0;
  int degree = 1;
  bool include_time = false;
  /// Exponent multi-indices of length n_vars(); time exponent first when
  /// include_time. The order is part of the serialized contract.
  std::vector<std::vector<int>> terms;

  static DictionarySpec make(int dim, int degree, bool include_time);

  int n_vars() const { return dim + (include_time ? 1 : 0); }
  int n_terms() const { return static_cast<int>(terms.size()); }

  /// Human-readable form of term j, e.g. "t^2*x1*x3".
  std::string term_string(int j) const;
};

/// C(d' + p, p) - 1 with d' = dim (+1 with time).
long term_count(int dim, int degree, bool include_time);

/// Feature vector in the spec's term order. `t` is ignored unless
/// include_time. `z` must have length spec.dim.
Eigen::VectorXd eval_dictionary(const DictionarySpec& spec, double t,
                                const Eigen::VectorXd& z);

/// n_terms x dim matrix of partials dD_j / dz_i.
Eigen::MatrixXd dictionary_jacobian(const DictionarySpec& spec, double t,
                                    const Eigen::VectorXd& z);

/// Column dD/dt; zero vector when the spec carries no time variable.
Eigen::VectorXd dictionary_time_partial(const DictionarySpec& spec, double t,
                                        const Eigen::VectorXd& z);

/// Batched evaluation over P points: Z is dim x P (already normalized),
/// ts is length P (ignored unless include_time). Returns n_terms x P.
Eigen::MatrixXd eval_dictionary_batch(const DictionarySpec& spec,
                                      const Eigen::VectorXd& ts,
                                      const Eigen::MatrixXd& Z);

/// Reverse-mode pullback of eval_dictionary_batch: given cotangents barD
/// (n_terms x P) returns barZ (dim x P). Time cotangent is not produced.
Eigen::MatrixXd dictionary_vjp_batch(const DictionarySpec& spec,
                                     const Eigen::VectorXd& ts,
                                     const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& barD);

double ipow(double base, int e);

}  // namespace neupde
