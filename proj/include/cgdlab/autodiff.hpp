#pragma once

// Reverse-mode automatic differentiation on a recorded scalar tape, with
// forward-over-reverse second-order queries (Hessian-vector products that
// never materialize a Hessian).
//
// A Graph is immutable once built and safe to query from multiple threads;
// all per-query scratch state lives in an explicit Workspace.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cgdlab::autodiff {

// A named, fixed-size block of real parameters bound to a graph at query time.
struct ParamGroup {
  std::string name;
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
};

struct AutodiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A group name was missing, duplicated, or not declared by the graph.
struct UnknownGroupError : AutodiffError {
  explicit UnknownGroupError(const std::string& group, const std::string& what)
      : AutodiffError(what), group(group) {}
  std::string group;
};

// A bound vector's length disagrees with the declared group dimension.
struct DimensionMismatchError : AutodiffError {
  explicit DimensionMismatchError(const std::string& group, const std::string& what)
      : AutodiffError(what), group(group) {}
  std::string group;
};

// An intermediate value became NaN/Inf; carries the offending node.
struct NonFiniteError : AutodiffError {
  NonFiniteError(int node, const std::string& what) : AutodiffError(what), node(node) {}
  int node;
};

// An operation without the required derivative support was encountered.
struct UnsupportedOpError : AutodiffError {
  using AutodiffError::AutodiffError;
};

// A dense query exceeded the desk-scale size guard.
struct SizeGuardError : AutodiffError {
  using AutodiffError::AutodiffError;
};

using NodeId = std::int32_t;

enum class OpKind : std::uint8_t {
  kConst,   // c0
  kInput,   // a = group index, b = index within group
  kAffine,  // c0 + sum_i coefs[i] * args[i]
  kMul,     // a * b
  kAtan,    // atan(a)
  kExp,     // exp(a)
  kLog,     // log(a)
  kClamp,   // clamp(a, c0, c1); derivative 1 inside, 0 outside
  kMean,    // mean of args
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kConst: return "const";
    case OpKind::kInput: return "input";
    case OpKind::kAffine: return "affine";
    case OpKind::kMul: return "mul";
    case OpKind::kAtan: return "atan";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kClamp: return "clamp";
    case OpKind::kMean: return "mean";
  }
  return "?";
}

struct Node {
  OpKind kind;
  NodeId a = -1;
  NodeId b = -1;
  std::int32_t arg_start = 0;   // kAffine/kMean: slice into the arg pool
  std::int32_t arg_count = 0;
  std::int32_t coef_start = 0;  // kAffine: slice into the coef pool
  double c0 = 0.0;              // kConst value; kAffine bias; kClamp lower bound
  double c1 = 0.0;              // kClamp upper bound
};

struct GroupSpec {
  std::string name;
  int dim = 0;
  std::vector<NodeId> input_nodes;  // input_nodes[i] holds coordinate i
};

class GraphBuilder;

class Graph {
 public:
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_groups() const { return static_cast<int>(groups_.size()); }
  const GroupSpec& group(int g) const { return groups_[static_cast<std::size_t>(g)]; }
  const std::vector<GroupSpec>& groups() const { return groups_; }
  NodeId output() const { return output_; }

  int group_index(std::string_view name) const {
    for (int g = 0; g < num_groups(); ++g) {
      if (groups_[static_cast<std::size_t>(g)].name == name) return g;
    }
    return -1;
  }

  int group_index_checked(std::string_view name) const {
    int g = group_index(name);
    if (g < 0) {
      throw UnknownGroupError(std::string(name),
                              "unknown parameter group '" + std::string(name) + "'");
    }
    return g;
  }

 private:
  friend class GraphBuilder;
  friend class Workspace;
  friend struct detail_access;

  std::vector<Node> nodes_;
  std::vector<NodeId> args_;
  std::vector<double> coefs_;
  std::vector<GroupSpec> groups_;
  NodeId output_ = -1;
};

// Exposes the node arrays to the evaluation routines below without widening
// the public Graph surface.
struct detail_access {
  static const std::vector<Node>& nodes(const Graph& g) { return g.nodes_; }
  static const std::vector<NodeId>& args(const Graph& g) { return g.args_; }
  static const std::vector<double>& coefs(const Graph& g) { return g.coefs_; }
};

// Records a graph. All node-creating calls validate their operands eagerly so
// a finished graph never needs re-checking.
class GraphBuilder {
 public:
  std::vector<NodeId> add_group(std::string name, int dim) {
    if (dim <= 0) throw DimensionMismatchError(name, "group '" + name + "' must have dim > 0");
    for (const GroupSpec& g : groups_) {
      if (g.name == name) {
        throw UnknownGroupError(name, "duplicate parameter group '" + name + "'");
      }
    }
    GroupSpec spec;
    spec.name = std::move(name);
    spec.dim = dim;
    int group_id = static_cast<int>(groups_.size());
    std::vector<NodeId> ids;
    ids.reserve(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      Node n;
      n.kind = OpKind::kInput;
      n.a = group_id;
      n.b = i;
      ids.push_back(push(n));
    }
    spec.input_nodes = ids;
    groups_.push_back(std::move(spec));
    return ids;
  }

  NodeId constant(double v) {
    require_finite(v, "constant");
    Node n;
    n.kind = OpKind::kConst;
    n.c0 = v;
    return push(n);
  }

  NodeId affine(double bias, std::span<const std::pair<double, NodeId>> terms) {
    require_finite(bias, "affine bias");
    Node n;
    n.kind = OpKind::kAffine;
    n.c0 = bias;
    n.arg_start = static_cast<std::int32_t>(args_.size());
    n.arg_count = static_cast<std::int32_t>(terms.size());
    n.coef_start = static_cast<std::int32_t>(coefs_.size());
    for (const auto& [coef, id] : terms) {
      require_finite(coef, "affine coefficient");
      check_operand(id);
      args_.push_back(id);
      coefs_.push_back(coef);
    }
    return push(n);
  }

  NodeId affine(double bias, std::initializer_list<std::pair<double, NodeId>> terms) {
    return affine(bias, std::span<const std::pair<double, NodeId>>(terms.begin(), terms.size()));
  }

  NodeId add(NodeId x, NodeId y) { return affine(0.0, {{1.0, x}, {1.0, y}}); }
  NodeId sub(NodeId x, NodeId y) { return affine(0.0, {{1.0, x}, {-1.0, y}}); }
  NodeId scale(double k, NodeId x) { return affine(0.0, {{k, x}}); }

  NodeId mul(NodeId x, NodeId y) {
    check_operand(x);
    check_operand(y);
    Node n;
    n.kind = OpKind::kMul;
    n.a = x;
    n.b = y;
    return push(n);
  }

  NodeId atan(NodeId x) { return unary(OpKind::kAtan, x); }
  NodeId exp(NodeId x) { return unary(OpKind::kExp, x); }
  NodeId log(NodeId x) { return unary(OpKind::kLog, x); }

  NodeId clamp(NodeId x, double lo, double hi) {
    check_operand(x);
    require_finite(lo, "clamp bound");
    require_finite(hi, "clamp bound");
    if (lo > hi) throw AutodiffError("clamp bounds out of order");
    Node n;
    n.kind = OpKind::kClamp;
    n.a = x;
    n.c0 = lo;
    n.c1 = hi;
    return push(n);
  }

  NodeId mean(std::span<const NodeId> xs) {
    if (xs.empty()) throw AutodiffError("mean over an empty node list");
    Node n;
    n.kind = OpKind::kMean;
    n.arg_start = static_cast<std::int32_t>(args_.size());
    n.arg_count = static_cast<std::int32_t>(xs.size());
    for (NodeId id : xs) {
      check_operand(id);
      args_.push_back(id);
    }
    return push(n);
  }

  NodeId mean(std::initializer_list<NodeId> xs) {
    return mean(std::span<const NodeId>(xs.begin(), xs.size()));
  }

  void set_output(NodeId id) {
    check_operand(id);
    output_ = id;
  }

  Graph finish() && {
    if (output_ < 0) throw AutodiffError("graph has no output node");
    Graph g;
    g.nodes_ = std::move(nodes_);
    g.args_ = std::move(args_);
    g.coefs_ = std::move(coefs_);
    g.groups_ = std::move(groups_);
    g.output_ = output_;
    return g;
  }

 private:
  NodeId unary(OpKind k, NodeId x) {
    check_operand(x);
    Node n;
    n.kind = k;
    n.a = x;
    return push(n);
  }

  NodeId push(const Node& n) {
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void check_operand(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
      throw AutodiffError("operand node id out of range");
    }
  }

  static void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw AutodiffError(std::string(what) + " must be finite");
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> args_;
  std::vector<double> coefs_;
  std::vector<GroupSpec> groups_;
  NodeId output_ = -1;
};

// Per-query scratch state. Reusable across queries on graphs of any size;
// never shared between threads.
class Workspace {
 public:
  // Resolves the name->values binding for `graph`. Every declared group must
  // be supplied exactly once with the right dimension, and nothing else.
  void bind(const Graph& graph, std::span<const ParamGroup> at) {
    graph_ = &graph;
    bound_.assign(static_cast<std::size_t>(graph.num_groups()), nullptr);
    for (const ParamGroup& p : at) {
      int g = graph.group_index(p.name);
      if (g < 0) {
        throw UnknownGroupError(p.name, "group '" + p.name + "' is not declared by this graph");
      }
      if (bound_[static_cast<std::size_t>(g)] != nullptr) {
        throw UnknownGroupError(p.name, "group '" + p.name + "' supplied more than once");
      }
      if (p.dim() != graph.group(g).dim) {
        throw DimensionMismatchError(
            p.name, "group '" + p.name + "' has dim " + std::to_string(p.dim()) +
                        ", graph declares " + std::to_string(graph.group(g).dim));
      }
      bound_[static_cast<std::size_t>(g)] = p.values.data();
    }
    for (int g = 0; g < graph.num_groups(); ++g) {
      if (bound_[static_cast<std::size_t>(g)] == nullptr) {
        throw UnknownGroupError(graph.group(g).name,
                                "group '" + graph.group(g).name + "' was not supplied");
      }
    }
  }

  // Forward pass; fills val and returns the output value.
  double forward() {
    const auto& nodes = detail_access::nodes(*graph_);
    const auto& args = detail_access::args(*graph_);
    const auto& coefs = detail_access::coefs(*graph_);
    val_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      double v = 0.0;
      switch (n.kind) {
        case OpKind::kConst: v = n.c0; break;
        case OpKind::kInput: v = bound_[static_cast<std::size_t>(n.a)][n.b]; break;
        case OpKind::kAffine: {
          v = n.c0;
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            v += coefs[static_cast<std::size_t>(n.coef_start + k)] *
                 val_[static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)])];
          }
          break;
        }
        case OpKind::kMul:
          v = val_[static_cast<std::size_t>(n.a)] * val_[static_cast<std::size_t>(n.b)];
          break;
        case OpKind::kAtan: v = std::atan(val_[static_cast<std::size_t>(n.a)]); break;
        case OpKind::kExp: v = std::exp(val_[static_cast<std::size_t>(n.a)]); break;
        case OpKind::kLog: v = std::log(val_[static_cast<std::size_t>(n.a)]); break;
        case OpKind::kClamp:
          v = std::clamp(val_[static_cast<std::size_t>(n.a)], n.c0, n.c1);
          break;
        case OpKind::kMean: {
          double s = 0.0;
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            s += val_[static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)])];
          }
          v = s / static_cast<double>(n.arg_count);
          break;
        }
        default: throw UnsupportedOpError("unsupported op in forward pass");
      }
      if (!std::isfinite(v)) {
        throw NonFiniteError(static_cast<int>(i),
                             std::string("non-finite value at node ") + std::to_string(i) +
                                 " (" + op_name(n.kind) + ")");
      }
      val_[i] = v;
    }
    return val_[static_cast<std::size_t>(graph_->output())];
  }

  // Forward directional pass: d/de f(theta + e*dir) with dir = v on
  // from_group and zero elsewhere. Requires a prior forward().
  double forward_dot(int from_group, std::span<const double> v) {
    const auto& nodes = detail_access::nodes(*graph_);
    const auto& args = detail_access::args(*graph_);
    const auto& coefs = detail_access::coefs(*graph_);
    dot_.assign(nodes.size(), 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      double d = 0.0;
      switch (n.kind) {
        case OpKind::kConst: d = 0.0; break;
        case OpKind::kInput:
          d = (n.a == from_group) ? v[static_cast<std::size_t>(n.b)] : 0.0;
          break;
        case OpKind::kAffine: {
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            d += coefs[static_cast<std::size_t>(n.coef_start + k)] *
                 dot_[static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)])];
          }
          break;
        }
        case OpKind::kMul:
          d = dot_[static_cast<std::size_t>(n.a)] * val_[static_cast<std::size_t>(n.b)] +
              val_[static_cast<std::size_t>(n.a)] * dot_[static_cast<std::size_t>(n.b)];
          break;
        case OpKind::kAtan: {
          double x = val_[static_cast<std::size_t>(n.a)];
          d = dot_[static_cast<std::size_t>(n.a)] / (1.0 + x * x);
          break;
        }
        case OpKind::kExp: d = val_[i] * dot_[static_cast<std::size_t>(n.a)]; break;
        case OpKind::kLog:
          d = dot_[static_cast<std::size_t>(n.a)] / val_[static_cast<std::size_t>(n.a)];
          break;
        case OpKind::kClamp: {
          double x = val_[static_cast<std::size_t>(n.a)];
          d = (x >= n.c0 && x <= n.c1) ? dot_[static_cast<std::size_t>(n.a)] : 0.0;
          break;
        }
        case OpKind::kMean: {
          double s = 0.0;
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            s += dot_[static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)])];
          }
          d = s / static_cast<double>(n.arg_count);
          break;
        }
        default: throw UnsupportedOpError("unsupported op in forward tangent pass");
      }
      dot_[i] = d;
    }
    return dot_[static_cast<std::size_t>(graph_->output())];
  }

  // Reverse pass; fills bar (adjoints). Requires a prior forward().
  void reverse() {
    const auto& nodes = detail_access::nodes(*graph_);
    const auto& args = detail_access::args(*graph_);
    const auto& coefs = detail_access::coefs(*graph_);
    bar_.assign(nodes.size(), 0.0);
    bar_[static_cast<std::size_t>(graph_->output())] = 1.0;
    for (std::size_t ip1 = nodes.size(); ip1 > 0; --ip1) {
      std::size_t i = ip1 - 1;
      const Node& n = nodes[i];
      double w = bar_[i];
      if (w == 0.0) continue;
      switch (n.kind) {
        case OpKind::kConst:
        case OpKind::kInput: break;
        case OpKind::kAffine:
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            bar_[static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)])] +=
                coefs[static_cast<std::size_t>(n.coef_start + k)] * w;
          }
          break;
        case OpKind::kMul:
          bar_[static_cast<std::size_t>(n.a)] += val_[static_cast<std::size_t>(n.b)] * w;
          bar_[static_cast<std::size_t>(n.b)] += val_[static_cast<std::size_t>(n.a)] * w;
          break;
        case OpKind::kAtan: {
          double x = val_[static_cast<std::size_t>(n.a)];
          bar_[static_cast<std::size_t>(n.a)] += w / (1.0 + x * x);
          break;
        }
        case OpKind::kExp: bar_[static_cast<std::size_t>(n.a)] += w * val_[i]; break;
        case OpKind::kLog:
          bar_[static_cast<std::size_t>(n.a)] += w / val_[static_cast<std::size_t>(n.a)];
          break;
        case OpKind::kClamp: {
          double x = val_[static_cast<std::size_t>(n.a)];
          if (x >= n.c0 && x <= n.c1) bar_[static_cast<std::size_t>(n.a)] += w;
          break;
        }
        case OpKind::kMean: {
          double share = w / static_cast<double>(n.arg_count);
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            bar_[static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)])] +=
                share;
          }
          break;
        }
        default: throw UnsupportedOpError("unsupported op in reverse pass");
      }
    }
  }

  // Reverse pass differentiated along the forward tangent: propagates
  // (bar, bar_dot) jointly using d(adjoint) = d(local deriv)*bar +
  // local deriv*d(bar). Requires prior forward() and forward_dot().
  void reverse_dot() {
    const auto& nodes = detail_access::nodes(*graph_);
    const auto& args = detail_access::args(*graph_);
    const auto& coefs = detail_access::coefs(*graph_);
    bar_.assign(nodes.size(), 0.0);
    bar_dot_.assign(nodes.size(), 0.0);
    bar_[static_cast<std::size_t>(graph_->output())] = 1.0;
    for (std::size_t ip1 = nodes.size(); ip1 > 0; --ip1) {
      std::size_t i = ip1 - 1;
      const Node& n = nodes[i];
      double w = bar_[i];
      double wd = bar_dot_[i];
      if (w == 0.0 && wd == 0.0) continue;
      switch (n.kind) {
        case OpKind::kConst:
        case OpKind::kInput: break;
        case OpKind::kAffine:
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            std::size_t arg = static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)]);
            double c = coefs[static_cast<std::size_t>(n.coef_start + k)];
            bar_[arg] += c * w;
            bar_dot_[arg] += c * wd;
          }
          break;
        case OpKind::kMul: {
          std::size_t a = static_cast<std::size_t>(n.a);
          std::size_t b = static_cast<std::size_t>(n.b);
          bar_[a] += val_[b] * w;
          bar_dot_[a] += val_[b] * wd + dot_[b] * w;
          bar_[b] += val_[a] * w;
          bar_dot_[b] += val_[a] * wd + dot_[a] * w;
          break;
        }
        case OpKind::kAtan: {
          std::size_t a = static_cast<std::size_t>(n.a);
          double x = val_[a];
          double den = 1.0 + x * x;
          double d = 1.0 / den;
          double dd = -2.0 * x * dot_[a] / (den * den);
          bar_[a] += d * w;
          bar_dot_[a] += d * wd + dd * w;
          break;
        }
        case OpKind::kExp: {
          std::size_t a = static_cast<std::size_t>(n.a);
          bar_[a] += val_[i] * w;
          bar_dot_[a] += val_[i] * wd + dot_[i] * w;
          break;
        }
        case OpKind::kLog: {
          std::size_t a = static_cast<std::size_t>(n.a);
          double x = val_[a];
          double d = 1.0 / x;
          double dd = -dot_[a] / (x * x);
          bar_[a] += d * w;
          bar_dot_[a] += d * wd + dd * w;
          break;
        }
        case OpKind::kClamp: {
          std::size_t a = static_cast<std::size_t>(n.a);
          double x = val_[a];
          if (x >= n.c0 && x <= n.c1) {
            bar_[a] += w;
            bar_dot_[a] += wd;
          }
          break;
        }
        case OpKind::kMean: {
          double cnt = static_cast<double>(n.arg_count);
          for (std::int32_t k = 0; k < n.arg_count; ++k) {
            std::size_t arg = static_cast<std::size_t>(args[static_cast<std::size_t>(n.arg_start + k)]);
            bar_[arg] += w / cnt;
            bar_dot_[arg] += wd / cnt;
          }
          break;
        }
        default: throw UnsupportedOpError("unsupported op in second-order reverse pass");
      }
    }
  }

  void extract_bar(int group, std::span<double> out) const {
    const GroupSpec& g = graph_->group(group);
    for (int i = 0; i < g.dim; ++i) {
      out[static_cast<std::size_t>(i)] =
          bar_[static_cast<std::size_t>(g.input_nodes[static_cast<std::size_t>(i)])];
    }
  }

  void extract_bar_dot(int group, std::span<double> out) const {
    const GroupSpec& g = graph_->group(group);
    for (int i = 0; i < g.dim; ++i) {
      out[static_cast<std::size_t>(i)] =
          bar_dot_[static_cast<std::size_t>(g.input_nodes[static_cast<std::size_t>(i)])];
    }
  }

 private:
  const Graph* graph_ = nullptr;
  std::vector<const double*> bound_;
  std::vector<double> val_;
  std::vector<double> dot_;
  std::vector<double> bar_;
  std::vector<double> bar_dot_;
};

// --- Query surface ---------------------------------------------------------

inline double evaluate(const Graph& graph, std::span<const ParamGroup> at, Workspace& ws) {
  ws.bind(graph, at);
  return ws.forward();
}

inline double evaluate(const Graph& graph, std::span<const ParamGroup> at) {
  Workspace ws;
  return evaluate(graph, at, ws);
}

inline std::vector<double> gradient(const Graph& graph, std::span<const ParamGroup> at,
                                    std::string_view wrt, Workspace& ws) {
  int g = graph.group_index_checked(wrt);
  ws.bind(graph, at);
  ws.forward();
  ws.reverse();
  std::vector<double> out(static_cast<std::size_t>(graph.group(g).dim));
  ws.extract_bar(g, out);
  return out;
}

inline std::vector<double> gradient(const Graph& graph, std::span<const ParamGroup> at,
                                    std::string_view wrt) {
  Workspace ws;
  return gradient(graph, at, wrt, ws);
}

// Gradients with respect to every declared group from a single reverse pass;
// out[g] is indexed by the graph's group order.
inline std::vector<std::vector<double>> gradient_all(const Graph& graph,
                                                     std::span<const ParamGroup> at,
                                                     Workspace& ws) {
  ws.bind(graph, at);
  ws.forward();
  ws.reverse();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(graph.num_groups()));
  for (int g = 0; g < graph.num_groups(); ++g) {
    out[static_cast<std::size_t>(g)].resize(static_cast<std::size_t>(graph.group(g).dim));
    ws.extract_bar(g, out[static_cast<std::size_t>(g)]);
  }
  return out;
}

// Mixed Hessian-vector product D^2_{to,from} f * v, computed by
// differentiating the reverse pass along the direction v (forward-over-
// reverse); the mixed block itself is never materialized.
inline std::vector<double> mixed_hvp(const Graph& graph, std::span<const ParamGroup> at,
                                     std::span<const double> v, std::string_view from_group,
                                     std::string_view to_group, Workspace& ws) {
  int from = graph.group_index_checked(from_group);
  int to = graph.group_index_checked(to_group);
  if (static_cast<int>(v.size()) != graph.group(from).dim) {
    throw DimensionMismatchError(
        std::string(from_group),
        "direction has dim " + std::to_string(v.size()) + ", group '" + std::string(from_group) +
            "' declares " + std::to_string(graph.group(from).dim));
  }
  ws.bind(graph, at);
  ws.forward();
  ws.forward_dot(from, v);
  ws.reverse_dot();
  std::vector<double> out(static_cast<std::size_t>(graph.group(to).dim));
  ws.extract_bar_dot(to, out);
  return out;
}

inline std::vector<double> mixed_hvp(const Graph& graph, std::span<const ParamGroup> at,
                                     std::span<const double> v, std::string_view from_group,
                                     std::string_view to_group) {
  Workspace ws;
  return mixed_hvp(graph, at, v, from_group, to_group, ws);
}

inline constexpr int kHessianBlockGuard = 10000;

// Dense second-derivative block, assembled column-by-column from unit-vector
// Hessian-vector products. Guarded to desk scale.
inline Eigen::MatrixXd hessian_block(const Graph& graph, std::span<const ParamGroup> at,
                                     std::string_view row_group, std::string_view col_group,
                                     Workspace& ws) {
  int rg = graph.group_index_checked(row_group);
  int cg = graph.group_index_checked(col_group);
  int rows = graph.group(rg).dim;
  int cols = graph.group(cg).dim;
  if (rows * cols > kHessianBlockGuard) {
    throw SizeGuardError("hessian_block of " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " exceeds the size guard of " + std::to_string(kHessianBlockGuard));
  }
  Eigen::MatrixXd block(rows, cols);
  std::vector<double> unit(static_cast<std::size_t>(cols), 0.0);
  for (int j = 0; j < cols; ++j) {
    unit[static_cast<std::size_t>(j)] = 1.0;
    std::vector<double> col = mixed_hvp(graph, at, unit, col_group, row_group, ws);
    for (int i = 0; i < rows; ++i) block(i, j) = col[static_cast<std::size_t>(i)];
    unit[static_cast<std::size_t>(j)] = 0.0;
  }
  return block;
}

inline Eigen::MatrixXd hessian_block(const Graph& graph, std::span<const ParamGroup> at,
                                     std::string_view row_group, std::string_view col_group) {
  Workspace ws;
  return hessian_block(graph, at, row_group, col_group, ws);
}

}  // namespace cgdlab::autodiff
