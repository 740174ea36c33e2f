#include "canalplan/partition/partition.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <limits>
#include <map>
#include <string>

#include "canalplan/error.hpp"

namespace canalplan::partition {

using bqp::ProgramBuilder;
using bqp::Rational;
using bqp::Relation;
using bqp::Term;
using bqp::VarId;
using graph::CanalGraph;

int initial_subgraph_count(int edge_count, int K, int M) {
  if (edge_count < 1 || K < 1 || M < 1) throw UsageError("initial_subgraph_count: need edges, K, M >= 1");
  const int cap = K * M;
  return (edge_count + cap - 1) / cap;
}

namespace {

void check_spec(const PartitionSpec& spec) {
  if (spec.K < 1 || spec.M < 1) throw UsageError("partition: K and M must be at least 1");
  if (spec.size_lower_bound < 0) throw UsageError("partition: sizeLowerBound must be at least 1");
}

// Rows shared by both forms. Names carry the row family for LP dumps.
void add_partition_rows(ProgramBuilder& b, const CanalGraph& g, int S, int L, int U,
                        const PartitionProgram& p) {
  const int N = g.node_count();
  const int E = g.edge_count();
  for (int e = 0; e < E; ++e) {
    std::vector<Term> t;
    for (int s = 0; s < S; ++s) t.push_back({p.w(s, e), 1});
    b.add_constraint(std::move(t), Relation::Equal, 1, "cover_" + std::to_string(e));
  }
  for (int s = 0; s < S; ++s) {
    std::vector<Term> t;
    for (int e = 0; e < E; ++e) t.push_back({p.w(s, e), 1});
    b.add_constraint(t, Relation::GreaterEqual, L, "size_lo_" + std::to_string(s));
    b.add_constraint(std::move(t), Relation::LessEqual, U, "size_hi_" + std::to_string(s));
  }
  for (int s = 0; s < S; ++s) {
    std::vector<Term> t;
    for (int i = 0; i < N; ++i) t.push_back({p.x(s, i), 1});
    for (int e = 0; e < E; ++e) t.push_back({p.w(s, e), -1});
    b.add_constraint(std::move(t), Relation::Equal, 1, "tree_" + std::to_string(s));
  }
  for (int s = 0; s < S; ++s) {
    for (int e = 0; e < E; ++e) {
      const auto& ed = g.edge(e);
      b.add_constraint({{p.x(s, ed.a), 1}, {p.x(s, ed.b), 1}, {p.w(s, e), -2}}, Relation::GreaterEqual, 0,
                       "ends_" + std::to_string(s) + "_" + std::to_string(e));
    }
  }
}

void add_xw_vars(ProgramBuilder& b, const CanalGraph& g, int S) {
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < g.node_count(); ++i) b.add_var({"x", {s, i}});
  for (int s = 0; s < S; ++s)
    for (int e = 0; e < g.edge_count(); ++e) b.add_var({"w", {s, e}});
}

}  // namespace

PartitionProgram build_partition_program(const CanalGraph& canal, int S, const PartitionSpec& spec) {
  check_spec(spec);
  if (S < 1) throw UsageError("partition: S must be at least 1");
  PartitionProgram p;
  p.S_ = S;
  p.nodes_ = canal.node_count();
  p.edges_ = canal.edge_count();
  ProgramBuilder b;
  add_xw_vars(b, canal, S);
  // (sum_i x_i)^2 = sum_i x_i + 2 sum_{i<j} x_i x_j on binaries
  for (int s = 0; s < S; ++s) {
    for (int i = 0; i < p.nodes_; ++i) {
      b.add_linear(p.x(s, i), 1);
      for (int j = i + 1; j < p.nodes_; ++j) b.add_quadratic(p.x(s, i), p.x(s, j), 2);
    }
  }
  add_partition_rows(b, canal, S, spec.lower(), spec.upper(), p);
  p.program_ = std::move(b).build();

  const int rows = p.edges_ + 3 * S + S * p.edges_;
  if (p.program_.var_count() != S * (p.nodes_ + p.edges_) || p.program_.constraint_count() != rows)
    throw SolverError("partition program has unexpected shape");
  return p;
}

PartitionProgram build_size_indexed_program(const CanalGraph& canal, int S, const PartitionSpec& spec) {
  check_spec(spec);
  if (S < 1) throw UsageError("partition: S must be at least 1");
  const int L = spec.lower();
  const int U = spec.upper();
  PartitionProgram p;
  p.S_ = S;
  p.nodes_ = canal.node_count();
  p.edges_ = canal.edge_count();
  p.size_lo_ = L + 1;
  p.size_hi_ = U + 1;
  ProgramBuilder b;
  add_xw_vars(b, canal, S);
  std::vector<std::vector<VarId>> u(S);
  for (int s = 0; s < S; ++s) {
    for (int n = p.size_lo_; n <= p.size_hi_; ++n) {
      u[s].push_back(b.add_var({"u", {s, n}}));
      b.add_linear(u[s].back(), Rational(std::int64_t{n} * n));
    }
  }
  add_partition_rows(b, canal, S, L, U, p);
  for (int s = 0; s < S; ++s) {
    std::vector<Term> one;
    std::vector<Term> count;
    for (int i = 0; i < p.nodes_; ++i) count.push_back({p.x(s, i), 1});
    for (int k = 0; k < static_cast<int>(u[s].size()); ++k) {
      one.push_back({u[s][k], 1});
      count.push_back({u[s][k], -(p.size_lo_ + k)});
    }
    b.add_constraint(std::move(one), Relation::Equal, 1, "size_pick_" + std::to_string(s));
    b.add_constraint(std::move(count), Relation::Equal, 0, "size_link_" + std::to_string(s));
  }
  for (int s = 1; s < S; ++s) {
    for (int e = 0; e < p.edges_; ++e) {
      std::vector<Term> t{{p.w(s, e), 1}};
      for (int f = 0; f < e; ++f) t.push_back({p.w(s - 1, f), -1});
      b.add_constraint(std::move(t), Relation::LessEqual, 0, "order_" + std::to_string(s) + "_" + std::to_string(e));
    }
  }
  p.program_ = std::move(b).build();
  return p;
}

std::vector<std::uint8_t> PartitionProgram::encode(const CanalGraph& g, std::span<const int> edge_subgraph) const {
  if (static_cast<int>(edge_subgraph.size()) != edges_ || g.edge_count() != edges_)
    throw UsageError("partition: assignment does not match the graph");
  std::vector<std::uint8_t> a(program_.var_count(), 0);
  std::vector<int> count(S_, 0);
  for (int e = 0; e < edges_; ++e) {
    const int s = edge_subgraph[e];
    if (s < 0 || s >= S_) throw UsageError("partition: subgraph index out of range");
    a[w(s, e).index] = 1;
    a[x(s, g.edge(e).a).index] = 1;
    a[x(s, g.edge(e).b).index] = 1;
  }
  for (int s = 0; s < S_; ++s)
    for (int i = 0; i < nodes_; ++i) count[s] += a[x(s, i).index];
  if (size_indexed()) {
    const std::uint32_t base = static_cast<std::uint32_t>(S_ * (nodes_ + edges_));
    const int width = size_hi_ - size_lo_ + 1;
    for (int s = 0; s < S_; ++s) {
      if (count[s] >= size_lo_ && count[s] <= size_hi_) a[base + s * width + (count[s] - size_lo_)] = 1;
    }
  }
  return a;
}

std::vector<int> PartitionProgram::decode(std::span<const std::uint8_t> assignment) const {
  std::vector<int> out(edges_, -1);
  for (int s = 0; s < S_; ++s)
    for (int e = 0; e < edges_; ++e)
      if (assignment[w(s, e).index]) out[e] = s;
  return out;
}

// ---- tree split -----------------------------------------------------------

namespace {

constexpr std::int64_t kNoCost = std::numeric_limits<std::int64_t>::max() / 4;
constexpr int kMaxChildren = 12;

struct Cell {
  std::int64_t cost = kNoCost;
  int a = -1;
  int b = -1;
  int c = -1;
};

// Tables per node, indexed [size][closed]. "Open" pieces are the ones that
// continue upward through the node's parent edge.
class TreeSplitter {
 public:
  TreeSplitter(const CanalGraph& g, int S, int L, int U) : g_(g), S_(S), L_(L), U_(U) {}

  std::optional<std::vector<int>> run() {
    const int N = g_.node_count();
    parent_.assign(N, -1);
    parent_edge_.assign(N, -1);
    children_.assign(N, {});
    std::vector<int> order{0};
    std::vector<char> seen(N, 0);
    seen[0] = 1;
    for (std::size_t h = 0; h < order.size(); ++h) {
      const int v = order[h];
      for (const auto& inc : g_.incident(v)) {
        if (seen[inc.neighbor]) continue;
        seen[inc.neighbor] = 1;
        parent_[inc.neighbor] = v;
        parent_edge_[inc.neighbor] = inc.edge;
        children_[v].push_back(inc.neighbor);
        order.push_back(inc.neighbor);
      }
    }
    for (int v = 0; v < N; ++v)
      if (static_cast<int>(children_[v].size()) > kMaxChildren) return std::nullopt;

    tables_.assign(N, {});
    for (auto it = order.rbegin(); it != order.rend(); ++it) build(*it);
    const auto& root = tables_[0];
    const int full = (1 << children_[0].size()) - 1;
    if (root.P[full * (S_ + 1) + S_].cost >= kNoCost) return std::nullopt;

    assignment_.assign(g_.edge_count(), -1);
    next_ = 0;
    realize_P(0, full, S_);
    return assignment_;
  }

 private:
  struct Tables {
    std::vector<Cell> F;   // [o][k], o includes the parent edge
    std::vector<Cell> H;   // [mask][s][k]
    std::vector<Cell> CG;  // [mask][k]
    std::vector<Cell> P;   // [mask][k]
  };

  int sk(int s, int k) const { return s * (S_ + 1) + k; }
  int msk(int mask, int s, int k) const { return (mask * (U_ + 1) + s) * (S_ + 1) + k; }
  std::int64_t piece_cost(int edges) const { return std::int64_t{edges + 1} * (edges + 1) * 1000; }
  static int branch(int degree) { return degree >= 3 ? 1 : 0; }

  void build(int v) {
    Tables& t = tables_[v];
    const auto& ch = children_[v];
    const int d = static_cast<int>(ch.size());
    const int masks = 1 << d;
    const int SK = (U_ + 1) * (S_ + 1);
    t.H.assign(static_cast<std::size_t>(masks) * SK, {});
    t.CG.assign(static_cast<std::size_t>(masks) * (S_ + 1), {});
    t.P.assign(static_cast<std::size_t>(masks) * (S_ + 1), {});

    for (int mask = 1; mask < masks; ++mask) {
      const int low = std::countr_zero(static_cast<unsigned>(mask));
      const int rest = mask ^ (1 << low);
      const auto& Fc = tables_[ch[low]].F;
      for (int o = 1; o <= U_; ++o) {
        for (int k = 0; k <= S_; ++k) {
          const Cell& fc = Fc[sk(o, k)];
          if (fc.cost >= kNoCost) continue;
          if (rest == 0) {
            Cell& out = t.H[msk(mask, o, k)];
            if (fc.cost < out.cost) out = {fc.cost, o, k, -1};
            continue;
          }
          for (int s2 = 1; s2 + o <= U_; ++s2) {
            for (int k2 = 0; k + k2 <= S_; ++k2) {
              const Cell& h = t.H[msk(rest, s2, k2)];
              if (h.cost >= kNoCost) continue;
              Cell& out = t.H[msk(mask, o + s2, k + k2)];
              if (fc.cost + h.cost < out.cost) out = {fc.cost + h.cost, o, k, -1};
            }
          }
        }
      }
      const int pen = branch(std::popcount(static_cast<unsigned>(mask)));
      for (int k = 1; k <= S_; ++k) {
        Cell& out = t.CG[mask * (S_ + 1) + k];
        for (int s = L_; s <= U_; ++s) {
          const Cell& h = t.H[msk(mask, s, k - 1)];
          if (h.cost >= kNoCost) continue;
          const std::int64_t c = h.cost + piece_cost(s) + pen;
          if (c < out.cost) out = {c, s, -1, -1};
        }
      }
    }

    t.P[0] = {0, -1, -1, -1};
    for (int mask = 1; mask < masks; ++mask) {
      const int lowbit = mask & -mask;
      for (int g = mask; g > 0; g = (g - 1) & mask) {
        if (!(g & lowbit)) continue;
        const int rest = mask ^ g;
        for (int kg = 1; kg <= S_; ++kg) {
          const Cell& cg = t.CG[g * (S_ + 1) + kg];
          if (cg.cost >= kNoCost) continue;
          for (int kr = 0; kg + kr <= S_; ++kr) {
            const Cell& pr = t.P[rest * (S_ + 1) + kr];
            if (pr.cost >= kNoCost) continue;
            Cell& out = t.P[mask * (S_ + 1) + kg + kr];
            if (cg.cost + pr.cost < out.cost) out = {cg.cost + pr.cost, g, kg, -1};
          }
        }
      }
    }

    if (v == 0) return;
    t.F.assign(SK, {});
    const int full = masks - 1;
    for (int up = 0; up < masks; ++up) {
      const int rest = full ^ up;
      const int pen = branch(std::popcount(static_cast<unsigned>(up)) + 1);
      for (int s = 0; s + 1 <= U_; ++s) {
        if ((up == 0) != (s == 0)) continue;
        for (int k1 = 0; k1 <= S_; ++k1) {
          const std::int64_t hc = up == 0 ? (k1 == 0 ? 0 : kNoCost) : t.H[msk(up, s, k1)].cost;
          if (hc >= kNoCost) continue;
          for (int k2 = 0; k1 + k2 <= S_; ++k2) {
            const Cell& pr = t.P[rest * (S_ + 1) + k2];
            if (pr.cost >= kNoCost) continue;
            Cell& out = t.F[sk(s + 1, k1 + k2)];
            const std::int64_t c = hc + pr.cost + pen;
            if (c < out.cost) out = {c, up, s, k1};
          }
        }
      }
    }
  }

  void realize_F(int v, int o, int k, int piece) {
    assignment_[parent_edge_[v]] = piece;
    const Tables& t = tables_[v];
    const Cell& c = t.F[sk(o, k)];
    const int full = (1 << children_[v].size()) - 1;
    realize_H(v, c.a, c.b, c.c, piece);
    realize_P(v, full ^ c.a, k - c.c);
  }

  void realize_H(int v, int mask, int s, int k, int piece) {
    while (mask != 0) {
      const Cell& c = tables_[v].H[msk(mask, s, k)];
      const int low = std::countr_zero(static_cast<unsigned>(mask));
      realize_F(children_[v][low], c.a, c.b, piece);
      mask ^= 1 << low;
      s -= c.a;
      k -= c.b;
    }
  }

  void realize_P(int v, int mask, int k) {
    while (mask != 0) {
      const Cell& c = tables_[v].P[mask * (S_ + 1) + k];
      const int g = c.a;
      const int kg = c.b;
      const int size = tables_[v].CG[g * (S_ + 1) + kg].a;
      realize_H(v, g, size, kg - 1, next_++);
      mask ^= g;
      k -= kg;
    }
  }

  const CanalGraph& g_;
  int S_, L_, U_;
  std::vector<int> parent_, parent_edge_;
  std::vector<std::vector<int>> children_;
  std::vector<Tables> tables_;
  std::vector<int> assignment_;
  int next_ = 0;
};

// Relabels subgraphs in order of their lowest edge.
std::vector<int> canonical_labels(std::span<const int> edge_subgraph) {
  std::map<int, int> relabel;
  std::vector<int> out(edge_subgraph.size());
  for (std::size_t e = 0; e < edge_subgraph.size(); ++e) {
    auto [it, fresh] = relabel.try_emplace(edge_subgraph[e], static_cast<int>(relabel.size()));
    out[e] = it->second;
  }
  return out;
}

}  // namespace

std::optional<std::vector<int>> tree_split(const CanalGraph& canal, int S, int L, int U) {
  if (canal.edge_count() < 1 || S < 1 || L < 1 || U < L) return std::nullopt;
  if (static_cast<std::int64_t>(S) * L > canal.edge_count() || static_cast<std::int64_t>(S) * U < canal.edge_count())
    return std::nullopt;
  auto split = TreeSplitter(canal, S, L, U).run();
  if (!split) return std::nullopt;
  return canonical_labels(*split);
}

bool tree_split_applies(const CanalGraph& canal) {
  // rooted at node 0 the root keeps all its neighbours as children, every
  // other node loses one to its parent
  for (int v = 0; v < canal.node_count(); ++v) {
    const int children = static_cast<int>(canal.incident(v).size()) - (v == 0 ? 0 : 1);
    if (children > kMaxChildren) return false;
  }
  return canal.edge_count() >= 1;
}

Partition make_partition(const CanalGraph& canal, std::span<const int> edge_subgraph) {
  if (static_cast<int>(edge_subgraph.size()) != canal.edge_count())
    throw PartitionError("partition: assignment covers " + std::to_string(edge_subgraph.size()) + " of " +
                         std::to_string(canal.edge_count()) + " edges");
  for (int s : edge_subgraph)
    if (s < 0) throw PartitionError("partition: edge without subgraph");
  Partition p;
  p.edge_subgraph = canonical_labels(edge_subgraph);
  p.S = p.edge_subgraph.empty() ? 0 : *std::max_element(p.edge_subgraph.begin(), p.edge_subgraph.end()) + 1;
  p.subgraphs.resize(p.S);
  for (int e = 0; e < canal.edge_count(); ++e) {
    auto& sg = p.subgraphs[p.edge_subgraph[e]];
    sg.edges.push_back(e);
    sg.nodes.push_back(canal.edge(e).a);
    sg.nodes.push_back(canal.edge(e).b);
  }
  for (auto& sg : p.subgraphs) {
    std::sort(sg.nodes.begin(), sg.nodes.end());
    sg.nodes.erase(std::unique(sg.nodes.begin(), sg.nodes.end()), sg.nodes.end());
    p.objective += static_cast<std::int64_t>(sg.nodes.size()) * static_cast<std::int64_t>(sg.nodes.size());
  }
  return p;
}

void verify_partition(const CanalGraph& canal, const Partition& p, int L, int U) {
  const int E = canal.edge_count();
  if (static_cast<int>(p.edge_subgraph.size()) != E) throw PartitionError("partition: edge assignment has wrong length");
  if (static_cast<int>(p.subgraphs.size()) != p.S) throw PartitionError("partition: subgraph list does not match S");
  std::vector<int> seen(E, 0);
  for (int s = 0; s < p.S; ++s) {
    const auto& sg = p.subgraphs[s];
    const std::string tag = "subgraph " + std::to_string(s);
    for (int e : sg.edges) {
      if (e < 0 || e >= E) throw PartitionError(tag + ": edge index out of range");
      if (p.edge_subgraph[e] != s) throw PartitionError(tag + ": edge " + std::to_string(e) + " assigned elsewhere");
      ++seen[e];
    }
    const int m = static_cast<int>(sg.edges.size());
    if (m < L || m > U)
      throw PartitionError(tag + ": " + std::to_string(m) + " edges outside [" + std::to_string(L) + ", " +
                           std::to_string(U) + "]");
    if (static_cast<int>(sg.nodes.size()) != m + 1)
      throw PartitionError(tag + ": node count is not edge count + 1");
    std::vector<char> in_nodes(canal.node_count(), 0);
    for (int i : sg.nodes) in_nodes.at(i) = 1;
    std::vector<char> in_edges(E, 0);
    for (int e : sg.edges) {
      in_edges[e] = 1;
      if (!in_nodes[canal.edge(e).a] || !in_nodes[canal.edge(e).b])
        throw PartitionError(tag + ": edge " + std::to_string(e) + " endpoint missing from node set");
    }
    // Traverse inside the subgraph; a tree touches every node exactly once.
    std::vector<char> reached(canal.node_count(), 0);
    std::vector<int> stack{sg.nodes.front()};
    reached[sg.nodes.front()] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& inc : canal.incident(v)) {
        if (!in_edges[inc.edge] || reached[inc.neighbor]) continue;
        reached[inc.neighbor] = 1;
        ++count;
        stack.push_back(inc.neighbor);
      }
    }
    if (count != static_cast<int>(sg.nodes.size())) throw PartitionError(tag + ": not connected");
  }
  for (int e = 0; e < E; ++e)
    if (seen[e] != 1) throw PartitionError("partition: edge " + std::to_string(e) + " covered " + std::to_string(seen[e]) + " times");
}

PartitionResult partition_canal(const CanalGraph& canal, const PartitionSpec& spec, solver::SolveConfig base) {
  check_spec(spec);
  const int E = canal.edge_count();
  if (E < 1) throw UsageError("partition: canal graph has no edges");
  const int L = spec.lower();
  const int U = spec.upper();
  const int s0 = initial_subgraph_count(E, spec.K, spec.M);
  const int cap = spec.max_subgraphs > 0 ? spec.max_subgraphs : E;
  base.time_limit_s = spec.time_limit_s;

  const bool split_applies = tree_split_applies(canal);
  if (spec.engine == PartitionEngine::TreeSplit && !split_applies)
    throw UsageError("partition: tree split needs every node to have at most " + std::to_string(kMaxChildren) +
                     " children; use the program engine");
  const bool use_split = spec.engine == PartitionEngine::TreeSplit ||
                         (spec.engine == PartitionEngine::Auto && split_applies);
  PartitionResult result;
  int undecided = 0;
  for (int S = s0; S <= cap; ++S) {
    Probe probe;
    probe.S = S;
    const auto t0 = std::chrono::steady_clock::now();
    if (static_cast<std::int64_t>(S) * L > E) {
      // every larger S needs even more edges; nothing further can succeed
      result.probes.push_back(probe);
      break;
    }
    if (use_split) {
      probe.by_tree_split = true;
      const auto split = tree_split(canal, S, L, U);
      probe.status = split ? solver::SolveStatus::Optimal : solver::SolveStatus::Infeasible;
      probe.start_found = split.has_value();
      probe.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.probes.push_back(probe);
      if (split) {
        result.partition = make_partition(canal, *split);
        verify_partition(canal, result.partition, L, U);
        return result;
      }
      continue;
    }
    const PartitionProgram prog = build_size_indexed_program(canal, S, spec);
    solver::SolveConfig cfg = base;
    if (spec.use_tree_start && split_applies) {
      if (auto start = tree_split(canal, S, L, U)) {
        cfg.warm_start = prog.encode(canal, *start);
        probe.start_found = true;
      }
    }
    const auto r = solver::solve(prog.program(), cfg);
    probe.status = r.status;
    probe.nodes = r.stats.nodes;
    probe.undecided = r.status == solver::SolveStatus::TimedOut && !r.has_solution;
    probe.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.probes.push_back(probe);
    undecided += probe.undecided ? 1 : 0;
    if (r.has_solution) {
      result.partition = make_partition(canal, prog.decode(r.assignment));
      verify_partition(canal, result.partition, L, U);
      return result;
    }
  }

  std::string why;
  if (static_cast<std::int64_t>(s0) * L > E) {
    why = "size lower bound " + std::to_string(L) + " unsatisfiable: " + std::to_string(s0) + " subgraphs need at least " +
          std::to_string(s0 * L) + " edges but the tree has " + std::to_string(E) + "; lower sizeLowerBound";
  } else if (undecided > 0) {
    why = std::to_string(undecided) + " subgraph count(s) timed out undecided; raise the time limit";
  } else {
    why = "no connected split with " + std::to_string(L) + ".." + std::to_string(U) +
          " edges per subgraph for S in [" + std::to_string(s0) + ", " + std::to_string(cap) +
          "]; lower sizeLowerBound or raise maxSubgraphs";
  }
  throw PartitionError("partition infeasible: " + why);
}

nlohmann::json to_json(const CanalGraph& canal, const Partition& p) {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& sg : p.subgraphs) {
    nlohmann::json edges = nlohmann::json::array();
    for (int e : sg.edges) edges.push_back({canal.node(canal.edge(e).a).id, canal.node(canal.edge(e).b).id});
    nlohmann::json nodes = nlohmann::json::array();
    for (int i : sg.nodes) nodes.push_back(canal.node(i).id);
    subs.push_back({{"edges", std::move(edges)}, {"nodes", std::move(nodes)}});
  }
  return {{"S", p.S}, {"subgraphs", std::move(subs)}};
}

Partition partition_from_json(const CanalGraph& canal, const nlohmann::json& j) {
  const std::string src = "<partition>";
  if (!j.is_object()) throw ParseError(src, 0, "", "expected an object");
  if (!j.contains("S") || !j["S"].is_number_integer()) throw ParseError(src, 0, "S", "missing or not an integer");
  if (!j.contains("subgraphs") || !j["subgraphs"].is_array()) throw ParseError(src, 0, "subgraphs", "missing or not an array");
  const int S = j["S"].get<int>();
  if (S != static_cast<int>(j["subgraphs"].size())) throw ParseError(src, 0, "S", "does not match the subgraph list");
  std::vector<int> assign(canal.edge_count(), -1);
  for (int s = 0; s < S; ++s) {
    const auto& sg = j["subgraphs"][s];
    if (!sg.is_object() || !sg.contains("edges") || !sg["edges"].is_array())
      throw ParseError(src, 0, "subgraphs[" + std::to_string(s) + "].edges", "missing or not an array");
    for (const auto& pair : sg["edges"]) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
        throw ParseError(src, 0, "subgraphs[" + std::to_string(s) + "].edges", "expected [from, to] id pairs");
      const auto a = canal.index_of(pair[0].get<std::string>());
      const auto b = canal.index_of(pair[1].get<std::string>());
      const auto e = a && b ? canal.edge_between(*a, *b) : std::nullopt;
      if (!e) throw PartitionError("partition: unknown canal edge " + pair.dump());
      if (assign[*e] != -1) throw PartitionError("partition: edge " + pair.dump() + " listed twice");
      assign[*e] = s;
    }
  }
  Partition p = make_partition(canal, assign);
  if (p.S != S) throw PartitionError("partition: empty subgraph in input");
  return p;
}

}  // namespace canalplan::partition
