#pragma once

// Small reverse-mode autodiff over dense Eigen matrices: a tape of recorded
// ops, named parameter sets, Adam, graph normalization and checkpoint I/O.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace grant::nn {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Owns parameters with stable addresses; insertion order is the
// serialization order.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  std::int64_t scalar_count() const;
  void zero_grad();
  void append(ParameterSet&& other);

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Xavier-uniform weights, zero bias.
void xavier_uniform(Parameter& w, std::mt19937_64& rng);

enum class Activation { identity, relu, tanh };

class Tape {
 public:
  struct Var {
    int id = -1;
  };

  Var constant(Matrix value);
  // Reads the parameter in place; it must outlive the tape.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var spmm(const SparseMatrix& a, Var x);  // a is a constant
  Var add(Var a, Var b);
  Var add_row(Var x, Var row);  // broadcast a 1 x c row over every row of x
  Var scale(Var x, double s);
  Var relu(Var x);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var activate(Var x, Activation a);
  Var softmax_rows(Var x);
  Var mean_rows(Var x);                   // r x c -> 1 x c
  Var sum(Var x);                         // -> 1 x 1
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
  Var gather_rows(Var x, const std::vector<int>& rows);
  Var scatter_rows(Var x, const std::vector<int>& rows, Eigen::Index total_rows);  // zero elsewhere
  Var flatten(Var x);                     // row-major, -> 1 x (r c)
  Var mse(Var pred, const Matrix& target);  // mean of squared errors, 1 x 1

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  // Hash of every ReLU on/off mask recorded so far; finite-difference
  // checks use it to detect perturbations that cross a kink.
  std::uint64_t activation_pattern() const { return relu_pattern_; }

  // Reverse sweep from a 1 x 1 output seeded with `seed`. Parameter leaves
  // accumulate into Parameter::grad.
  void backward(Var out, double seed = 1.0);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, const Node&)> back;
    Parameter* param = nullptr;
  };
  Var push(Matrix value, std::function<void(Tape&, const Node&)> back);
  Node& node(Var v);
  const Node& node(Var v) const;
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
  std::uint64_t relu_pattern_ = 14695981039346656037ULL;
};

// D^-1/2 (A + I) D^-1/2 for a binary symmetric adjacency with zero diagonal.
Matrix normalized_adjacency(const Matrix& a);
SparseMatrix normalized_adjacency(int n, const std::vector<std::pair<int, int>>& undirected_edges);

struct GcnLayerParams {
  Parameter* w = nullptr;
  Activation activation = Activation::relu;
};

// sigma(A_norm F W) on plain matrices.
Matrix gcn_forward(const Matrix& f, const Matrix& a_norm, const Matrix& w, Activation act);

// Numerically stable softmax of one vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

AdamState make_adam(const ParameterSet& params, double lr);
// One descent step on the accumulated gradients.
void adam_step(ParameterSet& params, AdamState& state);

inline constexpr char kCheckpointTag[9] = "GRNTCKP1";

// Tensors of all sets in order, each with its name and shape.
void save_checkpoint(const std::string& path, const std::vector<const ParameterSet*>& sets, const std::string& header);
// Loads values into already shaped sets; names and shapes must match.
void load_checkpoint(const std::string& path, const std::vector<ParameterSet*>& sets, std::string* header = nullptr);

}  // namespace grant::nn
