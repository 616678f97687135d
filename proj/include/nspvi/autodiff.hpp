#ifndef NSPVI_AUTODIFF_HPP
#define NSPVI_AUTODIFF_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace nspvi::ad {

// Dense row-major matrix. Rows index events, columns index features.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

class Tape;

// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = 0;
};

// Reverse-mode tape. Nodes are appended in topological order; backward() runs
// their adjoint rules in reverse.
class Tape {
 public:
  // Receives the adjoint of the custom node and accumulates into the adjoints
  // of its inputs (same order as passed to custom()).
  using CustomBackward =
      std::function<void(const Matrix& out_adjoint, std::span<Matrix* const> input_adjoints)>;

  Var variable(Matrix value);  // leaf receiving a gradient
  Var constant(Matrix value);  // leaf without gradient

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Adjoint after backward(); zero matrix for nodes the root does not reach.
  const Matrix& grad(Var v);
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x c row over every row of a
  Var add_scalar(Var a, double s);
  Var scale(Var a, double s);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var select_row(Var a, std::size_t r);
  Var sin(Var a);
  Var cos(Var a);
  Var exp(Var a);
  Var gelu(Var a);
  Var softplus(Var a);
  Var dot(Var a, Var b);  // 1 x 1, elementwise product summed
  Var sum(Var a);         // 1 x 1
  // Row-wise normalization over the feature axis with learned gain/bias (1 x c).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  // Row r of the result: sum_t w_rt v_t / sum_t w_rt with w_rt = exp(q_r . k_t).
  Var attention(Var query, Var key, Var value);
  Var custom(std::span<const Var> inputs, Matrix value, CustomBackward backward,
             std::string_view name = "custom");

  // Root must be 1 x 1. Clears previous adjoints first.
  void backward(Var root);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    const char* op = "leaf";
    std::function<void(Tape&, std::uint32_t)> rule;
  };

  Var push(Matrix value, const char* op, std::initializer_list<Var> parents,
           std::function<void(Tape&, std::uint32_t)> rule);
  Var push(Matrix value, const char* op, std::span<const Var> parents,
           std::function<void(Tape&, std::uint32_t)> rule);
  Matrix& adj(std::uint32_t id);
  bool wants(Var v) const { return nodes_[v.id].needs_grad; }

  std::vector<Node> nodes_;
};

// Weights of the attention op for query row r (testing / inspection).
std::vector<double> attention_weights(const Matrix& query, const Matrix& key, std::size_t r);

double gelu(double x);
double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

}  // namespace nspvi::ad

#endif  // NSPVI_AUTODIFF_HPP
