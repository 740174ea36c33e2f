#include "canalplan/graph/metrics.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "canalplan/error.hpp"

namespace canalplan::graph {

std::vector<int> BitMatrix::row_support(int r) const {
  std::vector<int> out;
  for (int c = 0; c < cols_; ++c) {
    if ((*this)(r, c)) out.push_back(c);
  }
  return out;
}

std::vector<int> BitMatrix::col_support(int c) const {
  std::vector<int> out;
  for (int r = 0; r < rows_; ++r) {
    if ((*this)(r, c)) out.push_back(r);
  }
  return out;
}

int BitMatrix::count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

AdjacencyMatrix canal_adjacency(const CanalGraph& g, bool self_loops) {
  AdjacencyMatrix a{BitMatrix(g.node_count(), g.node_count()), self_loops};
  for (const CanalEdge& e : g.edges()) {
    a.bits.set(e.a, e.b);
    a.bits.set(e.b, e.a);
  }
  if (self_loops) {
    for (int v = 0; v < g.node_count(); ++v) a.bits.set(v, v);
  }
  return a;
}

AdjacencyMatrix road_adjacency(const RoadGraph& g, bool self_loops, int hops) {
  const int n = g.node_count();
  AdjacencyMatrix a{BitMatrix(n, n), self_loops || hops > 1};
  if (hops <= 1) {
    for (const Arc& arc : g.arcs()) a.bits.set(arc.from, arc.to);
    if (self_loops) {
      for (int v = 0; v < n; ++v) a.bits.set(v, v);
    }
    return a;
  }
  // Breadth-first search truncated at `hops` arcs from every node.
  std::vector<int> depth(n);
  for (int s = 0; s < n; ++s) {
    std::fill(depth.begin(), depth.end(), -1);
    std::queue<int> q;
    depth[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      a.bits.set(s, v);
      if (depth[v] == hops) continue;
      for (const Arc& arc : g.out_arcs(v)) {
        if (depth[arc.to] < 0) {
          depth[arc.to] = depth[v] + 1;
          q.push(arc.to);
        }
      }
    }
  }
  return a;
}

TransmissionMatrix transmission_matrix(const RoadGraph& road, const CanalGraph& canal,
                                       double range_m) {
  if (!(range_m > 0.0)) throw UsageError("transmission range must be positive");
  TransmissionMatrix r{BitMatrix(road.node_count(), canal.node_count()), range_m};
  for (int i = 0; i < road.node_count(); ++i) {
    for (int j = 0; j < canal.node_count(); ++j) {
      if (planar_distance(road.node(i), canal.node(j)) <= range_m) r.bits.set(i, j);
    }
  }
  return r;
}

std::vector<int> ShortestPathTree::path_to(int target) const {
  if (distance[target] == kUnreachable) return {};
  std::vector<int> path;
  for (int v = target; v >= 0; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

ShortestPathTree dijkstra(const RoadGraph& g, int source) {
  const int n = g.node_count();
  ShortestPathTree tree{source, std::vector<double>(n, kUnreachable), std::vector<int>(n, -1)};
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  tree.distance[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > tree.distance[v]) continue;
    for (const Arc& arc : g.out_arcs(v)) {
      const double nd = d + arc.length_m;
      // Equal-length ties keep the lower-index parent so paths are reproducible.
      if (nd < tree.distance[arc.to] ||
          (nd == tree.distance[arc.to] && v < tree.parent[arc.to])) {
        const bool improved = nd < tree.distance[arc.to];
        tree.distance[arc.to] = nd;
        tree.parent[arc.to] = v;
        if (improved) heap.emplace(nd, arc.to);
      }
    }
  }
  return tree;
}

DistanceTable shortest_path_matrix(const RoadGraph& g, std::span<const int> sources,
                                   std::span<const int> targets) {
  DistanceTable table{{sources.begin(), sources.end()}, {targets.begin(), targets.end()}, {}};
  table.values.reserve(sources.size() * targets.size());
  for (int s : sources) {
    const ShortestPathTree tree = dijkstra(g, s);
    for (int t : targets) table.values.push_back(tree.distance[t]);
  }
  return table;
}

std::vector<int> strongly_connected_components(const RoadGraph& g) {
  const int n = g.node_count();
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0;
  int next_comp = 0;

  struct Frame {
    int node;
    int next_arc;
  };
  std::vector<Frame> call;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto arcs = g.out_arcs(f.node);
      if (f.next_arc < static_cast<int>(arcs.size())) {
        const int w = arcs[f.next_arc++].to;
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const int v = f.node;
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = next_comp;
        } while (w != v);
        ++next_comp;
      }
    }
  }
  return comp;
}

RoadGraph trim_road_subgraph(const RoadGraph& road, std::span<const GeoNode> canal_nodes,
                             double range_m, double margin_m) {
  if (margin_m < 0.0) throw UsageError("trim margin must be non-negative");
  const double reach = range_m + margin_m;
  std::vector<int> keep;
  for (int v = 0; v < road.node_count(); ++v) {
    for (const GeoNode& c : canal_nodes) {
      if (planar_distance(road.node(v), c) <= reach) {
        keep.push_back(v);
        break;
      }
    }
  }
  if (keep.empty()) throw CoverageError("no road support near subgraph");

  const RoadGraph near = road.induced(keep);
  const std::vector<int> comp = strongly_connected_components(near);
  const int comps = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<int> size(comps, 0);
  std::vector<int> first(comps, near.node_count());
  for (int v = 0; v < near.node_count(); ++v) {
    ++size[comp[v]];
    first[comp[v]] = std::min(first[comp[v]], v);
  }
  int best = 0;
  for (int c = 1; c < comps; ++c) {
    if (size[c] > size[best] || (size[c] == size[best] && first[c] < first[best])) best = c;
  }
  std::vector<int> members;
  for (int v = 0; v < near.node_count(); ++v) {
    if (comp[v] == best) members.push_back(v);
  }
  return near.induced(members);
}

}  // namespace canalplan::graph
