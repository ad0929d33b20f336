#pragma once

// Shared helpers for the unit and acceptance tests: central finite-difference
// gradient checks and a small constellation scenario for network tests.

#include "grant/agent.hpp"
#include "grant/nn.hpp"
#include "grant/scenario.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <random>
#include <vector>

namespace grant::testing {

// |a - n| / max(|a|, |n|, floor): relative error, absolute below `floor`.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradientCheck {
  double worst = 0.0;  // largest relative error over checked entries
  int checked = 0;
  int skipped = 0;  // perturbation crossed a ReLU kink
};

// Compares Parameter::grad from one reverse sweep of `loss` with central
// differences. Checks at most `per_param` random entries of each parameter
// (all when <= 0). An entry whose +-eps perturbation changes any ReLU mask is
// not differentiable across the stencil and is skipped.
inline GradientCheck gradient_error(const std::vector<nn::Parameter*>& params,
                                    const std::function<nn::Tape::Var(nn::Tape&)>& loss, std::mt19937_64& rng,
                                    int per_param = 0, double eps = 1e-5) {
  for (nn::Parameter* p : params) p->grad.setZero();
  std::uint64_t pattern = 0;
  {
    nn::Tape t;
    t.backward(loss(t));
    pattern = t.activation_pattern();
  }
  auto eval = [&](bool& same) {
    nn::Tape t;
    const double v = t.value(loss(t))(0, 0);
    same = same && t.activation_pattern() == pattern;
    return v;
  };
  GradientCheck out;
  for (nn::Parameter* p : params) {
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    if (per_param > 0 && n > per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_param);
    }
    for (Eigen::Index i : idx) {
      double& x = p->value.data()[i];
      const double x0 = x;
      bool smooth = true;
      x = x0 + eps;
      const double up = eval(smooth);
      x = x0 - eps;
      const double down = eval(smooth);
      x = x0;
      if (!smooth) {
        ++out.skipped;
        continue;
      }
      ++out.checked;
      out.worst = std::max(out.worst, relative_error(p->grad.data()[i], (up - down) / (2.0 * eps)));
    }
  }
  return out;
}

// 8 x 8 shell with two sources: a few dozen involved satellites.
struct ToyScenario {
  Constellation c;
  WindowTopology topo;
  GraphContext graph;
  ActionShape shape;

  ToyScenario()
      : c(make_config()),
        topo(c, {c.flat({1, 1}), c.flat({4, 5})}, c.flat({6, 2}), 0.5, 0.0),
        graph(prune_involved(topo)) {
    shape.sources = topo.source_count();
    shape.transmitters = topo.transmitter_count();
  }

  static WalkerConfig make_config() {
    WalkerConfig w;
    w.planes = 8;
    w.sats_per_plane = 8;
    return w;
  }

  Observation random_observation(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Observation s;
    s.offloading = Eigen::MatrixXd::NullaryExpr(graph.size(), kOffloadFeatures, [&] { return u(rng); });
    s.outcome = Eigen::MatrixXd::NullaryExpr(graph.size(), kOutcomeFeatures, [&] { return u(rng); });
    return s;
  }

  RatioAction random_action(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    auto simplex = [&](int rows, int cols) {
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return u(rng); });
      return Eigen::MatrixXd(m.array().colwise() / m.rowwise().sum().array());
    };
    RatioAction a;
    a.offload = simplex(shape.sources, 5);
    a.subarray_to = simplex(shape.sources, 5);
    a.power_to = simplex(shape.sources, 4 * shape.subbands_to + 1);
    a.subarray_ot = Eigen::VectorXd::NullaryExpr(shape.transmitters, [&] { return u(rng); });
    a.power_ot = simplex(shape.transmitters, shape.subbands_ot + 1);
    return a;
  }
};

struct LayerCheck {
  std::string name;
  int instances = 0;
  double worst = 0.0;
  int checked = 0;
  int skipped = 0;
};

// Every tape op (and the dense / GCN compositions) on `instances` random
// shapes and values, each reduced to a scalar with an MSE against a random
// target so every output entry carries gradient.
inline std::vector<LayerCheck> layer_gradient_suite(std::mt19937_64& rng, int instances) {
  using nn::Matrix;
  using nn::Parameter;
  using Var = nn::Tape::Var;
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rand = [&](Eigen::Index r, Eigen::Index c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return u(rng); })); };
  auto make = [&](const std::string& n, Eigen::Index r, Eigen::Index c) {
    return Parameter{n, rand(r, c), Matrix::Zero(r, c)};
  };
  auto graph = [&](int n) {
    std::vector<std::pair<int, int>> edges;
    std::bernoulli_distribution coin(0.4);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (coin(rng)) edges.emplace_back(i, j);
    return nn::normalized_adjacency(n, edges);
  };

  using Builder = std::function<GradientCheck(int, int, int)>;  // one instance
  std::vector<std::pair<std::string, Builder>> cases;
  auto unary = [&](const std::string& name, std::function<Var(nn::Tape&, Var)> op) {
    cases.emplace_back(name, [&, op](int r, int c, int) {
      Parameter x = make("x", r, c);
      nn::Tape shape_tape;
      const Matrix out = shape_tape.value(op(shape_tape, shape_tape.param(x)));
      const Matrix target = rand(out.rows(), out.cols());
      return gradient_error({&x}, [&](nn::Tape& t) { return t.mse(op(t, t.param(x)), target); }, rng);
    });
  };
  auto binary = [&](const std::string& name, std::function<std::pair<Matrix, Matrix>(int, int, int)> shapes,
                    std::function<Var(nn::Tape&, Var, Var)> op) {
    cases.emplace_back(name, [&, shapes, op](int r, int c, int k) {
      auto [a0, b0] = shapes(r, c, k);
      Parameter a{"a", a0, Matrix::Zero(a0.rows(), a0.cols())};
      Parameter b{"b", b0, Matrix::Zero(b0.rows(), b0.cols())};
      nn::Tape shape_tape;
      const Matrix out = shape_tape.value(op(shape_tape, shape_tape.param(a), shape_tape.param(b)));
      const Matrix target = rand(out.rows(), out.cols());
      return gradient_error({&a, &b}, [&](nn::Tape& t) { return t.mse(op(t, t.param(a), t.param(b)), target); }, rng);
    });
  };

  binary("matmul", [&](int r, int c, int k) { return std::pair{rand(r, k), rand(k, c)}; },
         [](nn::Tape& t, Var a, Var b) { return t.matmul(a, b); });
  binary("add", [&](int r, int c, int) { return std::pair{rand(r, c), rand(r, c)}; },
         [](nn::Tape& t, Var a, Var b) { return t.add(a, b); });
  binary("add_row", [&](int r, int c, int) { return std::pair{rand(r, c), rand(1, c)}; },
         [](nn::Tape& t, Var a, Var b) { return t.add_row(a, b); });
  binary("concat_cols", [&](int r, int c, int k) { return std::pair{rand(r, c), rand(r, k)}; },
         [](nn::Tape& t, Var a, Var b) { return t.concat_cols({a, b, a}); });
  binary("concat_rows", [&](int r, int c, int k) { return std::pair{rand(r, c), rand(k, c)}; },
         [](nn::Tape& t, Var a, Var b) { return t.concat_rows({b, a}); });
  binary("dense", [&](int r, int c, int k) { return std::pair{rand(r, k), rand(k, c)}; },
         [&](nn::Tape& t, Var x, Var w) {
           const Matrix bias = Matrix::Constant(1, t.value(w).cols(), 0.1);
           return t.tanh(t.add_row(t.matmul(x, w), t.constant(bias)));
         });
  binary("gcn", [&](int r, int c, int k) { return std::pair{rand(r, k), rand(k, c)}; },
         [&](nn::Tape& t, Var f, Var w) {
           // Normalized adjacency depends only on the row count: a ring.
           const int n = static_cast<int>(t.value(f).rows());
           std::vector<std::pair<int, int>> ring;
           for (int i = 0; i + 1 < n; ++i) ring.emplace_back(i, i + 1);
           if (n > 2) ring.emplace_back(0, n - 1);
           return t.relu(t.spmm(nn::normalized_adjacency(n, ring), t.matmul(f, w)));
         });
  unary("spmm", [&, cache = std::make_shared<std::map<int, nn::SparseMatrix>>()](nn::Tape& t, Var x) {
    const int n = static_cast<int>(t.value(x).rows());
    if (!cache->contains(n)) cache->emplace(n, graph(n));
    return t.spmm(cache->at(n), x);
  });
  unary("scale", [](nn::Tape& t, Var x) { return t.scale(x, -1.7); });
  unary("relu", [](nn::Tape& t, Var x) { return t.relu(x); });
  unary("tanh", [](nn::Tape& t, Var x) { return t.tanh(x); });
  unary("sigmoid", [](nn::Tape& t, Var x) { return t.sigmoid(t.scale(x, 3.0)); });
  unary("softmax_rows", [](nn::Tape& t, Var x) { return t.softmax_rows(t.scale(x, 2.0)); });
  unary("mean_rows", [](nn::Tape& t, Var x) { return t.mean_rows(x); });
  unary("sum", [](nn::Tape& t, Var x) { return t.sum(x); });
  unary("slice_cols", [](nn::Tape& t, Var x) {
    const Eigen::Index c = t.value(x).cols();
    return t.slice_cols(x, c / 2, c - c / 2);
  });
  unary("gather_rows", [](nn::Tape& t, Var x) {
    const int r = static_cast<int>(t.value(x).rows());
    return t.gather_rows(x, {r - 1, 0, r - 1, r / 2});
  });
  unary("scatter_rows", [](nn::Tape& t, Var x) {
    const int r = static_cast<int>(t.value(x).rows());
    std::vector<int> rows(r);
    for (int i = 0; i < r; ++i) rows[i] = 2 * (r - 1 - i);
    return t.scatter_rows(x, rows, 2 * r);
  });
  unary("flatten", [](nn::Tape& t, Var x) { return t.flatten(x); });
  unary("mse", [](nn::Tape& t, Var x) { return t.mse(x, Matrix::Constant(t.value(x).rows(), t.value(x).cols(), 0.3)); });

  std::vector<LayerCheck> out;
  for (auto& [name, run] : cases) {
    LayerCheck lc{name};
    for (int i = 0; i < instances; ++i) {
      const GradientCheck g = run(dim(rng), dim(rng), dim(rng));
      lc.worst = std::max(lc.worst, g.worst);
      lc.checked += g.checked;
      lc.skipped += g.skipped;
      ++lc.instances;
    }
    out.push_back(lc);
  }
  return out;
}

inline std::vector<nn::Parameter*> all_params(nn::ParameterSet& ps) {
  std::vector<nn::Parameter*> out;
  for (std::size_t i = 0; i < ps.size(); ++i) out.push_back(&ps[i]);
  return out;
}

}  // namespace grant::testing
