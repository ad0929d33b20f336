#include "grant/nn.hpp"

#include "grant/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace grant::nn {

Parameter& ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) throw DimensionError("parameter '" + name + "' already exists");
  index_.emplace(name, params_.size());
  params_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DimensionError("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DimensionError("unknown parameter '" + name + "'");
  return params_[it->second];
}

bool ParameterSet::contains(const std::string& name) const { return index_.contains(name); }

std::int64_t ParameterSet::scalar_count() const {
  std::int64_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.grad.setZero();
}

void ParameterSet::append(ParameterSet&& other) {
  for (Parameter& p : other.params_) {
    if (contains(p.name)) throw DimensionError("parameter '" + p.name + "' already exists");
    index_.emplace(p.name, params_.size());
    params_.push_back(std::move(p));
  }
  other.params_.clear();
  other.index_.clear();
}

void xavier_uniform(Parameter& w, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.value.rows() + w.value.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < w.value.cols(); ++j)
    for (Eigen::Index i = 0; i < w.value.rows(); ++i) w.value(i, j) = u(rng);
}

// ---- tape ------------------------------------------------------------------

Tape::Var Tape::push(Matrix value, std::function<void(Tape&, const Node&)> back) {
  if (!value.allFinite()) throw DomainError("non-finite value produced in the network");
  nodes_.push_back({std::move(value), Matrix(), std::move(back), nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw StateError("tape: unknown variable");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw StateError("tape: unknown variable");
  return nodes_[v.id];
}

const Matrix& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.param ? n.param->value : n.value;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.rows() != value(v).rows() || n.grad.cols() != value(v).cols())
    throw StateError("tape: backward has not been run");
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

Tape::Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Tape::Var Tape::param(Parameter& p) {
  nodes_.push_back({Matrix(), Matrix(), nullptr, &p});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) throw DimensionError("matmul: inner dimensions differ");
  return push(av * bv, [a, b](Tape& t, const Node& self) {
    t.accumulate(a, self.grad * t.value(b).transpose());
    t.accumulate(b, t.value(a).transpose() * self.grad);
  });
}

Tape::Var Tape::spmm(const SparseMatrix& s, Var x) {
  const Matrix& xv = value(x);
  if (s.cols() != xv.rows()) throw DimensionError("spmm: adjacency does not match feature rows");
  auto held = std::make_shared<SparseMatrix>(s);
  return push(*held * xv, [held, x](Tape& t, const Node& self) {
    t.accumulate(x, Matrix(held->transpose() * self.grad));
  });
}

Tape::Var Tape::add(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw DimensionError("add: shapes differ");
  return push(av + bv, [a, b](Tape& t, const Node& self) {
    t.accumulate(a, self.grad);
    t.accumulate(b, self.grad);
  });
}

Tape::Var Tape::add_row(Var x, Var row) {
  const Matrix& xv = value(x);
  const Matrix& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != xv.cols()) throw DimensionError("add_row: bias must be 1 x cols");
  Matrix out = xv.rowwise() + rv.row(0);
  return push(std::move(out), [x, row](Tape& t, const Node& self) {
    t.accumulate(x, self.grad);
    t.accumulate(row, self.grad.colwise().sum());
  });
}

Tape::Var Tape::scale(Var x, double s) {
  return push(value(x) * s, [x, s](Tape& t, const Node& self) { t.accumulate(x, self.grad * s); });
}

Tape::Var Tape::relu(Var x) {
  const Matrix& xv = value(x);
  for (Eigen::Index i = 0; i < xv.size(); ++i)  // FNV-1a over the on/off mask
    relu_pattern_ = (relu_pattern_ ^ static_cast<std::uint64_t>(xv.data()[i] > 0.0)) * 1099511628211ULL;
  return push(value(x).cwiseMax(0.0), [x](Tape& t, const Node& self) {
    t.accumulate(x, (self.value.array() > 0.0).select(self.grad, 0.0));
  });
}

Tape::Var Tape::tanh(Var x) {
  return push(value(x).array().tanh().matrix(), [x](Tape& t, const Node& self) {
    t.accumulate(x, (self.grad.array() * (1.0 - self.value.array().square())).matrix());
  });
}

Tape::Var Tape::sigmoid(Var x) {
  Matrix y = (1.0 / (1.0 + (-value(x).array()).exp())).matrix();
  return push(std::move(y), [x](Tape& t, const Node& self) {
    t.accumulate(x, (self.grad.array() * self.value.array() * (1.0 - self.value.array())).matrix());
  });
}

Tape::Var Tape::activate(Var x, Activation a) {
  switch (a) {
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::identity:
      break;
  }
  return x;
}

Tape::Var Tape::softmax_rows(Var x) {
  const Matrix& xv = value(x);
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) y.row(i) = softmax(xv.row(i).transpose()).transpose();
  return push(std::move(y), [x](Tape& t, const Node& self) {
    const Eigen::VectorXd dots = (self.grad.array() * self.value.array()).rowwise().sum();
    t.accumulate(x, (self.value.array() * (self.grad.colwise() - dots).array()).matrix());
  });
}

Tape::Var Tape::mean_rows(Var x) {
  const Matrix& xv = value(x);
  if (xv.rows() == 0) throw DimensionError("mean_rows: empty input");
  const Eigen::Index r = xv.rows();
  return push(xv.colwise().mean(), [x, r](Tape& t, const Node& self) {
    t.accumulate(x, self.grad.replicate(r, 1) / static_cast<double>(r));
  });
}

Tape::Var Tape::sum(Var x) {
  const Matrix& xv = value(x);
  const Eigen::Index r = xv.rows(), c = xv.cols();
  return push(Matrix::Constant(1, 1, xv.sum()), [x, r, c](Tape& t, const Node& self) {
    t.accumulate(x, Matrix::Constant(r, c, self.grad(0, 0)));
  });
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), [parts](Tape& t, const Node& self) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index c = t.value(p).cols();
      t.accumulate(p, self.grad.middleCols(at, c));
      at += c;
    }
  });
}

Tape::Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(out), [parts](Tape& t, const Node& self) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index r = t.value(p).rows();
      t.accumulate(p, self.grad.middleRows(at, r));
      at += r;
    }
  });
}

Tape::Var Tape::slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  const Matrix& xv = value(x);
  if (start < 0 || count < 0 || start + count > xv.cols()) throw DimensionError("slice_cols: out of range");
  const Eigen::Index r = xv.rows(), c = xv.cols();
  return push(xv.middleCols(start, count), [x, start, count, r, c](Tape& t, const Node& self) {
    Matrix g = Matrix::Zero(r, c);
    g.middleCols(start, count) = self.grad;
    t.accumulate(x, g);
  });
}

Tape::Var Tape::gather_rows(Var x, const std::vector<int>& rows) {
  const Matrix& xv = value(x);
  Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows()) throw DimensionError("gather_rows: index out of range");
    out.row(i) = xv.row(rows[i]);
  }
  const Eigen::Index r = xv.rows();
  return push(std::move(out), [x, rows, r](Tape& t, const Node& self) {
    Matrix g = Matrix::Zero(r, self.grad.cols());
    for (size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += self.grad.row(i);
    t.accumulate(x, g);
  });
}

Tape::Var Tape::scatter_rows(Var x, const std::vector<int>& rows, Eigen::Index total_rows) {
  const Matrix& xv = value(x);
  if (static_cast<Eigen::Index>(rows.size()) != xv.rows()) throw DimensionError("scatter_rows: one index per row");
  Matrix out = Matrix::Zero(total_rows, xv.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= total_rows) throw DimensionError("scatter_rows: index out of range");
    out.row(rows[i]) += xv.row(i);
  }
  return push(std::move(out), [x, rows](Tape& t, const Node& self) {
    Matrix g(static_cast<Eigen::Index>(rows.size()), self.grad.cols());
    for (size_t i = 0; i < rows.size(); ++i) g.row(i) = self.grad.row(rows[i]);
    t.accumulate(x, g);
  });
}

Tape::Var Tape::flatten(Var x) {
  const Matrix& xv = value(x);
  const Eigen::Index r = xv.rows(), c = xv.cols();
  Matrix out(1, r * c);
  for (Eigen::Index i = 0; i < r; ++i) out.block(0, i * c, 1, c) = xv.row(i);
  return push(std::move(out), [x, r, c](Tape& t, const Node& self) {
    Matrix g(r, c);
    for (Eigen::Index i = 0; i < r; ++i) g.row(i) = self.grad.block(0, i * c, 1, c);
    t.accumulate(x, g);
  });
}

Tape::Var Tape::mse(Var pred, const Matrix& target) {
  const Matrix& pv = value(pred);
  if (pv.rows() != target.rows() || pv.cols() != target.cols()) throw DimensionError("mse: shapes differ");
  const Matrix diff = pv - target;
  const double n = static_cast<double>(diff.size());
  return push(Matrix::Constant(1, 1, diff.squaredNorm() / n), [pred, diff, n](Tape& t, const Node& self) {
    t.accumulate(pred, diff * (2.0 * self.grad(0, 0) / n));
  });
}

void Tape::backward(Var out, double seed) {
  if (nodes_.empty()) throw StateError("backward: nothing has been recorded");
  if (value(out).rows() != 1 || value(out).cols() != 1) throw DimensionError("backward: output must be a scalar");
  for (int i = 0; i <= out.id; ++i) nodes_[i].grad.resize(0, 0);
  nodes_[out.id].grad = Matrix::Constant(1, 1, seed);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) {
      // Not on a path to the output.
      const Matrix& v = n.param ? n.param->value : n.value;
      n.grad = Matrix::Zero(v.rows(), v.cols());
      continue;
    }
    if (n.param) n.param->grad += n.grad;
    if (n.back) n.back(*this, n);
  }
}

// ---- graph helpers -----------------------------------------------------------

Matrix normalized_adjacency(const Matrix& a) {
  if (a.rows() != a.cols()) throw GraphError("adjacency must be square");
  if (a.size() > 0 && (a - a.transpose()).cwiseAbs().maxCoeff() > 0.0) throw GraphError("adjacency must be symmetric");
  if (a.size() > 0 && a.diagonal().cwiseAbs().maxCoeff() > 0.0) throw GraphError("adjacency must have a zero diagonal");
  const Matrix at = a + Matrix::Identity(a.rows(), a.cols());
  const Eigen::VectorXd d = at.rowwise().sum().array().rsqrt();
  return d.asDiagonal() * at * d.asDiagonal();
}

SparseMatrix normalized_adjacency(int n, const std::vector<std::pair<int, int>>& edges) {
  Eigen::VectorXd degree = Eigen::VectorXd::Ones(n);
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw GraphError("edge endpoint out of range");
    if (i == j) throw GraphError("adjacency must have a zero diagonal");
    degree(i) += 1.0;
    degree(j) += 1.0;
  }
  const Eigen::VectorXd s = degree.array().rsqrt();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n + 2 * edges.size());
  for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, s(i) * s(i));
  for (auto [i, j] : edges) {
    triplets.emplace_back(i, j, s(i) * s(j));
    triplets.emplace_back(j, i, s(i) * s(j));
  }
  SparseMatrix out(n, n);
  // Duplicate edges would be summed; callers pass a deduplicated list.
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Matrix gcn_forward(const Matrix& f, const Matrix& a_norm, const Matrix& w, Activation act) {
  if (a_norm.rows() != a_norm.cols() || a_norm.cols() != f.rows() || f.cols() != w.rows())
    throw DimensionError("gcn_forward: shape mismatch");
  Matrix out = a_norm * f * w;
  switch (act) {
    case Activation::relu:
      return out.cwiseMax(0.0);
    case Activation::tanh:
      return out.array().tanh().matrix();
    case Activation::identity:
      break;
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

// ---- optimizer -------------------------------------------------------------------

AdamState make_adam(const ParameterSet& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    s.v.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
  return s;
}

void adam_step(ParameterSet& params, AdamState& s) {
  if (s.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
  ++s.step_count;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * p.grad;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= s.lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
  }
}

// ---- checkpoints -------------------------------------------------------------------

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InputError(path + ": truncated checkpoint");
  return v;
}

std::string get_string(std::ifstream& in, const std::string& path) {
  const auto n = get<std::uint32_t>(in, path);
  if (n > (1u << 20)) throw InputError(path + ": corrupt checkpoint string");
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw InputError(path + ": truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const ParameterSet*>& sets, const std::string& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(kCheckpointTag, 8);
  put(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::uint32_t count = 0;
  for (const ParameterSet* ps : sets) count += static_cast<std::uint32_t>(ps->size());
  put(out, count);
  for (const ParameterSet* ps : sets) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      const Parameter& p = (*ps)[i];
      put(out, static_cast<std::uint32_t>(p.name.size()));
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put(out, static_cast<std::int64_t>(p.value.rows()));
      put(out, static_cast<std::int64_t>(p.value.cols()));
      out.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
  }
  if (!out) throw IoError(path + ": write failed");
}

void load_checkpoint(const std::string& path, const std::vector<ParameterSet*>& sets, std::string* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open checkpoint");
  char tag[8];
  if (!in.read(tag, 8) || std::memcmp(tag, kCheckpointTag, 8) != 0)
    throw InputError(path + ": not a checkpoint (format tag mismatch)");
  std::string h = get_string(in, path);
  if (header) *header = std::move(h);
  const auto count = get<std::uint32_t>(in, path);
  std::size_t expected = 0;
  for (ParameterSet* ps : sets) expected += ps->size();
  if (count != expected) throw InputError(path + ": parameter count does not match the model");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, path);
    const auto rows = get<std::int64_t>(in, path);
    const auto cols = get<std::int64_t>(in, path);
    Parameter* p = nullptr;
    for (ParameterSet* ps : sets)
      if (ps->contains(name)) p = &ps->at(name);
    if (!p) throw InputError(path + ": unknown tensor '" + name + "'");
    if (p->value.rows() != rows || p->value.cols() != cols) throw InputError(path + ": shape mismatch for '" + name + "'");
    if (!in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double))))
      throw InputError(path + ": truncated checkpoint");
  }
}

}  // namespace grant::nn
