#include "neupde/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "neupde/errors.hpp"

namespace neupde {

double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

void BoundsAccumulator::add(double v) {
  if (count_ == 0) {
    lo_ = hi_ = v;
  } else {
    lo_ = std::min(lo_, v);
    hi_ = std::max(hi_, v);
  }
  ++count_;
}

void BoundsAccumulator::add(const Eigen::Ref<const Eigen::MatrixXd>& values) {
  if (values.size() == 0) return;
  if (count_ == 0) {
    lo_ = hi_ = values(0, 0);
  }
  lo_ = std::min(lo_, values.minCoeff());
  hi_ = std::max(hi_, values.maxCoeff());
  count_ += values.size();
}

NormalizationBounds BoundsAccumulator::finish() const {
  if (count_ == 0) throw DegenerateData("fit_bounds: empty dataset");
  if (hi_ == lo_) throw DegenerateData("fit_bounds: max equals min");
  return NormalizationBounds{lo_, hi_};
}

NormalizationBounds fit_bounds(const std::vector<Eigen::VectorXd>& samples) {
  BoundsAccumulator acc;
  for (const auto& s : samples) acc.add(s);
  return acc.finish();
}

Eigen::VectorXd normalize(const Eigen::VectorXd& x,
                          const NormalizationBounds& b) {
  return (2.0 * (x.array() - b.m) / (b.M - b.m) - 1.0).matrix();
}

namespace {

// Compositions of `total` into `slots` parts, lexicographically descending
// on the exponent vector.
void compositions(int slots, int total, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
  if (slots == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int e = total; e >= 0; --e) {
    cur.push_back(e);
    compositions(slots - 1, total - e, cur, out);
    cur.pop_back();
  }
}

}  // namespace

DictionarySpec DictionarySpec::make(int dim, int degree, bool include_time) {
  if (dim < 1 || degree < 1)
    throw ConfigError("DictionarySpec: dim and degree must be >= 1");
  DictionarySpec spec;
  spec.dim = dim;
  spec.degree = degree;
  spec.include_time = include_time;
  std::vector<int> cur;
  for (int g = 1; g <= degree; ++g)
    compositions(spec.n_vars(), g, cur, spec.terms);
  return spec;
}

std::string DictionarySpec::term_string(int j) const {
  const auto& e = terms.at(static_cast<size_t>(j));
  std::ostringstream os;
  bool first = true;
  auto emit = [&](const std::string& name, int exp) {
    if (exp == 0) return;
    if (!first) os << "*";
    os << name;
    if (exp > 1) os << "^" << exp;
    first = false;
  };
  int off = 0;
  if (include_time) {
    emit("t", e[0]);
    off = 1;
  }
  for (int i = 0; i < dim; ++i) emit("x" + std::to_string(i + 1), e[off + i]);
  return os.str();
}

long term_count(int dim, int degree, bool include_time) {
  const long dprime = dim + (include_time ? 1 : 0);
  // C(d' + p, p) - 1
  long c = 1;
  for (long i = 1; i <= degree; ++i) c = c * (dprime + i) / i;
  return c - 1;
}

Eigen::VectorXd eval_dictionary(const DictionarySpec& spec, double t,
                                const Eigen::VectorXd& z) {
  if (z.size() != spec.dim)
    throw ShapeMismatch("eval_dictionary: state dimension mismatch");
  const int nt = spec.n_terms();
  Eigen::VectorXd out(nt);
  const int off = spec.include_time ? 1 : 0;
  for (int j = 0; j < nt; ++j) {
    const auto& e = spec.terms[static_cast<size_t>(j)];
    double v = spec.include_time ? ipow(t, e[0]) : 1.0;
    for (int i = 0; i < spec.dim; ++i) v *= ipow(z[i], e[off + i]);
    out[j] = v;
  }
  return out;
}

Eigen::MatrixXd dictionary_jacobian(const DictionarySpec& spec, double t,
                                    const Eigen::VectorXd& z) {
  if (z.size() != spec.dim)
    throw ShapeMismatch("dictionary_jacobian: state dimension mismatch");
  const int nt = spec.n_terms();
  const int off = spec.include_time ? 1 : 0;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nt, spec.dim);
  for (int j = 0; j < nt; ++j) {
    const auto& e = spec.terms[static_cast<size_t>(j)];
    const double tf = spec.include_time ? ipow(t, e[0]) : 1.0;
    for (int i = 0; i < spec.dim; ++i) {
      const int ei = e[off + i];
      if (ei == 0) continue;
      double v = tf * ei * ipow(z[i], ei - 1);
      for (int r = 0; r < spec.dim; ++r)
        if (r != i) v *= ipow(z[r], e[off + r]);
      jac(j, i) = v;
    }
  }
  return jac;
}

Eigen::VectorXd dictionary_time_partial(const DictionarySpec& spec, double t,
                                        const Eigen::VectorXd& z) {
  const int nt = spec.n_terms();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nt);
  if (!spec.include_time) return out;
  if (z.size() != spec.dim)
    throw ShapeMismatch("dictionary_time_partial: state dimension mismatch");
  for (int j = 0; j < nt; ++j) {
    const auto& e = spec.terms[static_cast<size_t>(j)];
    const int k = e[0];
    if (k == 0) continue;
    double v = k * ipow(t, k - 1);
    for (int i = 0; i < spec.dim; ++i) v *= ipow(z[i], e[1 + i]);
    out[j] = v;
  }
  return out;
}

Eigen::MatrixXd eval_dictionary_batch(const DictionarySpec& spec,
                                      const Eigen::VectorXd& ts,
                                      const Eigen::MatrixXd& Z) {
  if (Z.rows() != spec.dim)
    throw ShapeMismatch("eval_dictionary_batch: channel count mismatch");
  const Eigen::Index P = Z.cols();
  const int nt = spec.n_terms();
  const int off = spec.include_time ? 1 : 0;
  if (spec.include_time && ts.size() != P)
    throw ShapeMismatch("eval_dictionary_batch: time array size mismatch");

  // Power tables: pw[v][e] is the elementwise e-th power of variable v.
  const int nv = spec.n_vars();
  std::vector<std::vector<Eigen::ArrayXd>> pw(static_cast<size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    Eigen::ArrayXd base = (spec.include_time && v == 0)
                              ? Eigen::ArrayXd(ts.array())
                              : Eigen::ArrayXd(Z.row(v - off).transpose().array());
    auto& col = pw[static_cast<size_t>(v)];
    col.resize(static_cast<size_t>(spec.degree) + 1);
    col[0] = Eigen::ArrayXd::Ones(P);
    for (int e = 1; e <= spec.degree; ++e) col[static_cast<size_t>(e)] = col[static_cast<size_t>(e - 1)] * base;
  }

  Eigen::MatrixXd D(nt, P);
  for (int j = 0; j < nt; ++j) {
    const auto& e = spec.terms[static_cast<size_t>(j)];
    Eigen::ArrayXd v = Eigen::ArrayXd::Ones(P);
    for (int i = 0; i < nv; ++i)
      if (e[i] > 0) v *= pw[static_cast<size_t>(i)][static_cast<size_t>(e[i])];
    D.row(j) = v.transpose();
  }
  return D;
}

Eigen::MatrixXd dictionary_vjp_batch(const DictionarySpec& spec,
                                     const Eigen::VectorXd& ts,
                                     const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& barD) {
  if (Z.rows() != spec.dim || barD.rows() != spec.n_terms() ||
      barD.cols() != Z.cols())
    throw ShapeMismatch("dictionary_vjp_batch: shape mismatch");
  const Eigen::Index P = Z.cols();
  const int nv = spec.n_vars();
  const int off = spec.include_time ? 1 : 0;

  std::vector<std::vector<Eigen::ArrayXd>> pw(static_cast<size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    Eigen::ArrayXd base = (spec.include_time && v == 0)
                              ? Eigen::ArrayXd(ts.array())
                              : Eigen::ArrayXd(Z.row(v - off).transpose().array());
    auto& col = pw[static_cast<size_t>(v)];
    col.resize(static_cast<size_t>(spec.degree) + 1);
    col[0] = Eigen::ArrayXd::Ones(P);
    for (int e = 1; e <= spec.degree; ++e) col[static_cast<size_t>(e)] = col[static_cast<size_t>(e - 1)] * base;
  }

  Eigen::MatrixXd barZ = Eigen::MatrixXd::Zero(spec.dim, P);
  for (int j = 0; j < spec.n_terms(); ++j) {
    const auto& e = spec.terms[static_cast<size_t>(j)];
    for (int i = 0; i < spec.dim; ++i) {
      const int ei = e[off + i];
      if (ei == 0) continue;
      Eigen::ArrayXd part =
          double(ei) * pw[static_cast<size_t>(off + i)][static_cast<size_t>(ei - 1)];
      for (int r = 0; r < nv; ++r)
        if (r != off + i && e[r] > 0)
          part *= pw[static_cast<size_t>(r)][static_cast<size_t>(e[r])];
      barZ.row(i).array() += barD.row(j).transpose().array() * part;
    }
  }
  return barZ;
}

}  // namespace neupde
