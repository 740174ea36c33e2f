#include "canalplan/graph/canal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "canalplan/error.hpp"

namespace canalplan::graph {

namespace {

// Node sequence a .. b inside an acyclic adjacency built so far.
std::vector<int> forest_path(const std::vector<std::vector<int>>& adj, int a, int b) {
  std::vector<int> parent(adj.size(), -2);
  std::queue<int> q;
  q.push(a);
  parent[a] = -1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    if (v == b) break;
    for (int w : adj[v]) {
      if (parent[w] == -2) {
        parent[w] = v;
        q.push(w);
      }
    }
  }
  std::vector<int> path;
  for (int v = b; v >= 0; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

CanalGraph CanalGraph::from_parts(std::vector<GeoNode> nodes, std::vector<CanalEdge> edges) {
  CanalGraph g;
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  const int n = g.node_count();

  for (int i = 0; i < n; ++i) {
    const GeoNode& node = g.nodes_[i];
    if (!valid_coordinates(node)) {
      throw ModelError("canal node '" + node.id + "' has coordinates out of range");
    }
    if (!g.by_id_.emplace(node.id, i).second) {
      throw ModelError("duplicate canal node id '" + node.id + "'");
    }
  }

  std::set<std::pair<int, int>> seen;
  for (const CanalEdge& e : g.edges_) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) {
      throw ModelError("canal edge references a node outside the graph");
    }
    if (e.a == e.b) {
      throw ModelError("canal edge '" + g.nodes_[e.a].id + "' -- '" + g.nodes_[e.a].id +
                       "' is a self-loop");
    }
    if (!(e.weight_m > 0.0) || !std::isfinite(e.weight_m)) {
      throw ModelError("canal edge '" + g.nodes_[e.a].id + "' -- '" + g.nodes_[e.b].id +
                       "' must have positive finite weight");
    }
    if (!seen.emplace(std::min(e.a, e.b), std::max(e.a, e.b)).second) {
      throw ModelError("duplicate canal edge '" + g.nodes_[e.a].id + "' -- '" +
                       g.nodes_[e.b].id + "'");
    }
  }

  // Cycle check by union-find; report the closing cycle by name.
  std::vector<int> root(n);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](int v) {
    while (root[v] != v) v = root[v] = root[root[v]];
    return v;
  };
  std::vector<std::vector<int>> adj(n);
  for (const CanalEdge& e : g.edges_) {
    const int ra = find(e.a);
    const int rb = find(e.b);
    if (ra == rb) {
      std::ostringstream msg;
      msg << "canal graph is not a tree: cycle through";
      for (int v : forest_path(adj, e.a, e.b)) msg << " '" << g.nodes_[v].id << "'";
      throw ModelError(msg.str());
    }
    root[ra] = rb;
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }

  if (n > 0) {
    const int r0 = find(0);
    for (int v = 1; v < n; ++v) {
      if (find(v) != r0) {
        const int comp = find(v);
        int size = 0;
        for (int w = 0; w < n; ++w) size += find(w) == comp ? 1 : 0;
        std::ostringstream msg;
        msg << "canal graph is disconnected: component containing '" << g.nodes_[v].id << "' ("
            << size << " nodes) is unreachable from '" << g.nodes_[0].id << "'";
        throw ModelError(msg.str());
      }
    }
  }

  g.index();
  return g;
}

void CanalGraph::index() {
  const int n = node_count();
  offsets_.assign(n + 1, 0);
  for (const CanalEdge& e : edges_) {
    ++offsets_[e.a + 1];
    ++offsets_[e.b + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  incidence_.assign(offsets_[n], {});
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (int e = 0; e < edge_count(); ++e) {
    incidence_[fill[edges_[e].a]++] = {edges_[e].b, e};
    incidence_[fill[edges_[e].b]++] = {edges_[e].a, e};
  }
  for (int v = 0; v < n; ++v) {
    std::sort(incidence_.begin() + offsets_[v], incidence_.begin() + offsets_[v + 1],
              [](const Incidence& x, const Incidence& y) { return x.neighbor < y.neighbor; });
  }
}

std::optional<int> CanalGraph::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> CanalGraph::edge_between(int a, int b) const {
  for (const Incidence& inc : incident(a)) {
    if (inc.neighbor == b) return inc.edge;
  }
  return std::nullopt;
}

double CanalGraph::total_weight() const {
  double total = 0.0;
  for (const CanalEdge& e : edges_) total += e.weight_m;
  return total;
}

std::vector<int> CanalGraph::leaves() const {
  std::vector<int> out;
  for (int v = 0; v < node_count(); ++v) {
    if (degree(v) == 1) out.push_back(v);
  }
  return out;
}

CanalGraph CanalGraph::edge_subgraph(std::span<const int> edge_indices) const {
  std::vector<int> remap(node_count(), -1);
  for (int e : edge_indices) {
    remap[edges_[e].a] = 0;
    remap[edges_[e].b] = 0;
  }
  std::vector<GeoNode> nodes;
  for (int v = 0; v < node_count(); ++v) {
    if (remap[v] == 0) {
      remap[v] = static_cast<int>(nodes.size());
      nodes.push_back(nodes_[v]);
    }
  }
  std::vector<int> sorted(edge_indices.begin(), edge_indices.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CanalEdge> edges;
  for (int e : sorted) {
    edges.push_back({remap[edges_[e].a], remap[edges_[e].b], edges_[e].weight_m});
  }
  return from_parts(std::move(nodes), std::move(edges));
}

CanalGraph normalize_canal_edges(const CanalGraph& g, double target_m) {
  if (!(target_m > 0.0)) throw UsageError("target edge weight must be positive");
  std::vector<GeoNode> nodes = g.nodes();
  std::vector<CanalEdge> edges;
  for (const CanalEdge& e : g.edges()) {
    const int pieces = std::max(1, static_cast<int>(std::ceil(e.weight_m / target_m - 1e-12)));
    const double piece_w = e.weight_m / pieces;
    int prev = e.a;
    const GeoNode& from = g.node(e.a);
    const GeoNode& to = g.node(e.b);
    for (int k = 1; k < pieces; ++k) {
      const double f = static_cast<double>(k) / pieces;
      GeoNode mid{from.id + "~" + to.id + "#" + std::to_string(k),
                  from.lat + f * (to.lat - from.lat), from.lon + f * (to.lon - from.lon)};
      const int idx = static_cast<int>(nodes.size());
      nodes.push_back(std::move(mid));
      edges.push_back({prev, idx, piece_w});
      prev = idx;
    }
    edges.push_back({prev, e.b, piece_w});
  }
  return CanalGraph::from_parts(std::move(nodes), std::move(edges));
}

}  // namespace canalplan::graph
