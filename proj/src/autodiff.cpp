#include "nspvi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <numbers>
#include <string>

#include "nspvi/error.hpp"

namespace nspvi::ad {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ArgumentError("Matrix: value count does not match shape");
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) {
    throw ArgumentError("softplus_inverse: argument must be positive");
  }
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ArgumentError(std::string("autodiff ") + op + ": shape mismatch (" +
                      std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                      std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
}

}  // namespace

std::vector<double> attention_weights(const Matrix& q, const Matrix& k, std::size_t r) {
  std::vector<double> w(k.rows);
  double top = -INFINITY;
  for (std::size_t t = 0; t < k.rows; ++t) {
    double s = 0.0;
    for (std::size_t d = 0; d < q.cols; ++d) s += q(r, d) * k(t, d);
    w[t] = s;
    top = std::max(top, s);
  }
  double total = 0.0;
  for (auto& v : w) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

Var Tape::push(Matrix value, const char* op, std::initializer_list<Var> parents,
               std::function<void(Tape&, std::uint32_t)> rule) {
  return push(std::move(value), op, std::span<const Var>(parents.begin(), parents.size()),
              std::move(rule));
}

Var Tape::push(Matrix value, const char* op, std::span<const Var> parents,
               std::function<void(Tape&, std::uint32_t)> rule) {
  for (double v : value.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("autodiff: non-finite value produced by ") + op);
    }
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (Var p : parents) {
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  if (n.needs_grad) {
    n.rule = std::move(rule);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Matrix& Tape::adj(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size()) {
    n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
  }
  return n.grad;
}

const Matrix& Tape::grad(Var v) { return adj(v.id); }

Var Tape::variable(Matrix value) {
  Var v = push(std::move(value), "variable", std::span<const Var>{}, nullptr);
  nodes_[v.id].needs_grad = true;
  return v;
}

Var Tape::constant(Matrix value) {
  return push(std::move(value), "constant", std::span<const Var>{}, nullptr);
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols != B.rows) shape_error("matmul", A, B);
  Matrix C(A.rows, B.cols, 0.0);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      const double* brow = &B.data[k * B.cols];
      double* crow = &C.data[i * C.cols];
      for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return push(std::move(C), "matmul", {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    if (t.wants(a)) {
      Matrix& GA = t.adj(a.id);
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < B.cols; ++j) {
          const double g = G(i, j);
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < A.cols; ++k) GA(i, k) += g * B(k, j);
        }
    }
    if (t.wants(b)) {
      Matrix& GB = t.adj(b.id);
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
          const double aik = A(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < B.cols; ++j) GB(k, j) += aik * G(i, j);
        }
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (!A.same_shape(B)) shape_error("add", A, B);
  Matrix C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  return push(std::move(C), "add", {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    for (Var p : {a, b}) {
      if (!t.wants(p)) continue;
      Matrix& GP = t.adj(p.id);
      for (std::size_t i = 0; i < G.size(); ++i) GP.data[i] += G.data[i];
    }
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& R = value(row);
  if (R.rows != 1 || R.cols != A.cols) shape_error("add_row", A, R);
  Matrix C = A;
  for (std::size_t i = 0; i < C.rows; ++i)
    for (std::size_t j = 0; j < C.cols; ++j) C(i, j) += R(0, j);
  return push(std::move(C), "add_row", {a, row}, [a, row](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.wants(a)) {
      Matrix& GA = t.adj(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i];
    }
    if (t.wants(row)) {
      Matrix& GR = t.adj(row.id);
      for (std::size_t i = 0; i < G.rows; ++i)
        for (std::size_t j = 0; j < G.cols; ++j) GR(0, j) += G(i, j);
    }
  });
}

Var Tape::add_scalar(Var a, double s) {
  Matrix C = value(a);
  for (auto& v : C.data) v += s;
  return push(std::move(C), "add_scalar", {a}, [a](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& GA = t.adj(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i];
  });
}

Var Tape::scale(Var a, double s) {
  Matrix C = value(a);
  for (auto& v : C.data) v *= s;
  return push(std::move(C), "scale", {a}, [a, s](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& GA = t.adj(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) GA.data[i] += s * G.data[i];
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("autodiff concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows;
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows != rows) shape_error("concat_cols", value(parts[0]), value(p));
    cols += value(p).cols;
  }
  Matrix C(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& P = value(p);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < P.cols; ++j) C(i, off + j) = P(i, j);
    off += P.cols;
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(C), "concat_cols", parts, [ids](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    std::size_t off = 0;
    for (Var p : ids) {
      const std::size_t pc = t.value(p).cols;
      if (t.wants(p)) {
        Matrix& GP = t.adj(p.id);
        for (std::size_t i = 0; i < G.rows; ++i)
          for (std::size_t j = 0; j < pc; ++j) GP(i, j) += G(i, off + j);
      }
      off += pc;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("autodiff concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols;
  Matrix C;
  C.cols = cols;
  for (Var p : parts) {
    const Matrix& P = value(p);
    if (P.cols != cols) shape_error("concat_rows", value(parts[0]), P);
    C.data.insert(C.data.end(), P.data.begin(), P.data.end());
    C.rows += P.rows;
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(C), "concat_rows", parts, [ids](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    std::size_t off = 0;
    for (Var p : ids) {
      const std::size_t n = t.value(p).size();
      if (t.wants(p)) {
        Matrix& GP = t.adj(p.id);
        for (std::size_t i = 0; i < n; ++i) GP.data[i] += G.data[off + i];
      }
      off += n;
    }
  });
}

Var Tape::select_row(Var a, std::size_t r) {
  const Matrix& A = value(a);
  if (r >= A.rows) throw ArgumentError("autodiff select_row: row out of range");
  Matrix C(1, A.cols);
  std::copy_n(&A.data[r * A.cols], A.cols, C.data.begin());
  return push(std::move(C), "select_row", {a}, [a, r](Tape& t, std::uint32_t self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& GA = t.adj(a.id);
    for (std::size_t j = 0; j < G.cols; ++j) GA(r, j) += G(0, j);
  });
}

namespace {

template <class F, class D>
Var elementwise(Tape& tape, Var a, const char* op, F f, D df) {
  Matrix C = tape.value(a);
  for (auto& v : C.data) v = f(v);
  Var in[] = {a};
  return tape.custom(
      std::span<const Var>(in), std::move(C),
      [&tape, a, df](const Matrix& G, std::span<Matrix* const> adj) {
        const Matrix& A = tape.value(a);
        for (std::size_t i = 0; i < G.size(); ++i) adj[0]->data[i] += G.data[i] * df(A.data[i]);
      },
      op);
}

}  // namespace

Var Tape::sin(Var a) {
  return elementwise(
      *this, a, "sin", [](double x) { return std::sin(x); },
      [](double x) { return std::cos(x); });
}

Var Tape::cos(Var a) {
  return elementwise(
      *this, a, "cos", [](double x) { return std::cos(x); },
      [](double x) { return -std::sin(x); });
}

Var Tape::exp(Var a) {
  return elementwise(
      *this, a, "exp", [](double x) { return std::exp(x); },
      [](double x) { return std::exp(x); });
}

Var Tape::gelu(Var a) {
  return elementwise(
      *this, a, "gelu", [](double x) { return ad::gelu(x); }, gelu_grad);
}

Var Tape::softplus(Var a) {
  return elementwise(
      *this, a, "softplus", [](double x) { return ad::softplus(x); },
      [](double x) { return sigmoid(x); });
}

Var Tape::dot(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (!A.same_shape(B)) shape_error("dot", A, B);
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A.data[i] * B.data[i];
  return push(Matrix::scalar(s), "dot", {a, b}, [a, b](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad.data[0];
    if (t.wants(a)) {
      Matrix& GA = t.adj(a.id);
      const Matrix& B = t.value(b);
      for (std::size_t i = 0; i < GA.size(); ++i) GA.data[i] += g * B.data[i];
    }
    if (t.wants(b)) {
      Matrix& GB = t.adj(b.id);
      const Matrix& A = t.value(a);
      for (std::size_t i = 0; i < GB.size(); ++i) GB.data[i] += g * A.data[i];
    }
  });
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data) s += v;
  return push(Matrix::scalar(s), "sum", {a}, [a](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad.data[0];
    Matrix& GA = t.adj(a.id);
    for (auto& v : GA.data) v += g;
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& X = value(x);
  const Matrix& Gn = value(gain);
  const Matrix& Bs = value(bias);
  if (Gn.rows != 1 || Gn.cols != X.cols) shape_error("layer_norm", X, Gn);
  if (!Gn.same_shape(Bs)) shape_error("layer_norm", Gn, Bs);
  const std::size_t c = X.cols;
  Matrix Y(X.rows, c);
  auto normalized = std::make_shared<Matrix>(X.rows, c);
  auto inv_std = std::make_shared<std::vector<double>>(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += X(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (X(i, j) - mean) * inv;
      (*normalized)(i, j) = xh;
      Y(i, j) = Gn(0, j) * xh + Bs(0, j);
    }
  }
  return push(std::move(Y), "layer_norm", {x, gain, bias},
              [x, gain, bias, normalized, inv_std](Tape& t, std::uint32_t self) {
                const Matrix& G = t.nodes_[self].grad;
                const Matrix& Gn = t.value(gain);
                const Matrix& Xh = *normalized;
                const std::size_t c = Xh.cols;
                if (t.wants(gain) || t.wants(bias)) {
                  for (std::size_t i = 0; i < G.rows; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                      if (t.wants(gain)) t.adj(gain.id)(0, j) += G(i, j) * Xh(i, j);
                      if (t.wants(bias)) t.adj(bias.id)(0, j) += G(i, j);
                    }
                }
                if (!t.wants(x)) return;
                Matrix& GX = t.adj(x.id);
                std::vector<double> dxh(c);
                for (std::size_t i = 0; i < G.rows; ++i) {
                  double mean_d = 0.0;
                  double mean_dx = 0.0;
                  for (std::size_t j = 0; j < c; ++j) {
                    dxh[j] = G(i, j) * Gn(0, j);
                    mean_d += dxh[j];
                    mean_dx += dxh[j] * Xh(i, j);
                  }
                  mean_d /= static_cast<double>(c);
                  mean_dx /= static_cast<double>(c);
                  for (std::size_t j = 0; j < c; ++j) {
                    GX(i, j) += (*inv_std)[i] * (dxh[j] - mean_d - Xh(i, j) * mean_dx);
                  }
                }
              });
}

Var Tape::attention(Var query, Var key, Var val) {
  const Matrix& Q = value(query);
  const Matrix& K = value(key);
  const Matrix& V = value(val);
  if (Q.cols != K.cols) shape_error("attention", Q, K);
  if (K.rows != V.rows) shape_error("attention", K, V);
  auto weights = std::make_shared<Matrix>(Q.rows, K.rows);
  Matrix out(Q.rows, V.cols, 0.0);
  for (std::size_t r = 0; r < Q.rows; ++r) {
    const auto w = attention_weights(Q, K, r);
    for (std::size_t t = 0; t < K.rows; ++t) {
      (*weights)(r, t) = w[t];
      for (std::size_t j = 0; j < V.cols; ++j) out(r, j) += w[t] * V(t, j);
    }
  }
  return push(std::move(out), "attention", {query, key, val},
              [query, key, val, weights](Tape& t, std::uint32_t self) {
                const Matrix& G = t.nodes_[self].grad;
                const Matrix& Q = t.value(query);
                const Matrix& K = t.value(key);
                const Matrix& V = t.value(val);
                const Matrix& A = *weights;
                if (t.wants(val)) {
                  Matrix& GV = t.adj(val.id);
                  for (std::size_t r = 0; r < A.rows; ++r)
                    for (std::size_t s = 0; s < A.cols; ++s)
                      for (std::size_t j = 0; j < V.cols; ++j) GV(s, j) += A(r, s) * G(r, j);
                }
                if (!t.wants(query) && !t.wants(key)) return;
                Matrix dS(A.rows, A.cols);
                for (std::size_t r = 0; r < A.rows; ++r) {
                  double inner = 0.0;
                  for (std::size_t s = 0; s < A.cols; ++s) {
                    double da = 0.0;
                    for (std::size_t j = 0; j < V.cols; ++j) da += G(r, j) * V(s, j);
                    dS(r, s) = da;
                    inner += da * A(r, s);
                  }
                  for (std::size_t s = 0; s < A.cols; ++s) dS(r, s) = A(r, s) * (dS(r, s) - inner);
                }
                if (t.wants(query)) {
                  Matrix& GQ = t.adj(query.id);
                  for (std::size_t r = 0; r < A.rows; ++r)
                    for (std::size_t s = 0; s < A.cols; ++s)
                      for (std::size_t d = 0; d < Q.cols; ++d) GQ(r, d) += dS(r, s) * K(s, d);
                }
                if (t.wants(key)) {
                  Matrix& GK = t.adj(key.id);
                  for (std::size_t r = 0; r < A.rows; ++r)
                    for (std::size_t s = 0; s < A.cols; ++s)
                      for (std::size_t d = 0; d < Q.cols; ++d) GK(s, d) += dS(r, s) * Q(r, d);
                }
              });
}

Var Tape::custom(std::span<const Var> inputs, Matrix value, CustomBackward backward,
                 std::string_view name) {
  std::vector<Var> ids(inputs.begin(), inputs.end());
  // The op name must outlive the node; custom names are interned here.
  static thread_local std::set<std::string, std::less<>> names;
  const char* op = "custom";
  if (!name.empty()) {
    auto it = names.find(name);
    if (it == names.end()) {
      it = names.emplace(name).first;
    }
    op = it->c_str();
  }
  return push(std::move(value), op, inputs,
              [ids, backward = std::move(backward)](Tape& t, std::uint32_t self) {
                std::vector<Matrix*> adjs;
                adjs.reserve(ids.size());
                for (Var p : ids) {
                  if (t.wants(p)) {
                    adjs.push_back(&t.adj(p.id));
                  } else {
                    adjs.push_back(nullptr);
                  }
                }
                // Inputs without gradient get a throwaway buffer.
                std::vector<Matrix> dummies(ids.size());
                for (std::size_t i = 0; i < ids.size(); ++i) {
                  if (adjs[i] == nullptr) {
                    const Matrix& v = t.value(ids[i]);
                    dummies[i] = Matrix(v.rows, v.cols, 0.0);
                    adjs[i] = &dummies[i];
                  }
                }
                backward(t.nodes_[self].grad, adjs);
              });
}

void Tape::backward(Var root) {
  if (value(root).rows != 1 || value(root).cols != 1) {
    throw ArgumentError("autodiff backward: root must be a 1x1 scalar");
  }
  for (auto& n : nodes_) {
    n.grad = Matrix();
  }
  adj(root.id).data[0] = 1.0;
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.rule || n.grad.size() == 0) continue;
    n.rule(*this, id);
  }
}

}  // namespace nspvi::ad
