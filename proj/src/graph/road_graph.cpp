#include "canalplan/graph/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "canalplan/error.hpp"

namespace canalplan::graph {

RoadGraph RoadGraph::from_parts(std::vector<GeoNode> nodes, std::span<const RoadEdge> edges) {
  std::vector<Arc> arcs;
  arcs.reserve(edges.size() * 2);
  for (const RoadEdge& e : edges) {
    arcs.push_back({e.from, e.to, e.length_m});
    if (!e.oneway) arcs.push_back({e.to, e.from, e.length_m});
  }
  return from_arcs(std::move(nodes), std::move(arcs));
}

RoadGraph RoadGraph::from_arcs(std::vector<GeoNode> nodes, std::vector<Arc> arcs) {
  RoadGraph g;
  g.nodes_ = std::move(nodes);
  const int n = g.node_count();
  for (int i = 0; i < n; ++i) {
    if (!valid_coordinates(g.nodes_[i])) {
      throw ModelError("road node '" + g.nodes_[i].id + "' has coordinates out of range");
    }
    if (!g.by_id_.emplace(g.nodes_[i].id, i).second) {
      throw ModelError("duplicate road node id '" + g.nodes_[i].id + "'");
    }
  }
  for (const Arc& a : arcs) {
    if (a.from < 0 || a.from >= n || a.to < 0 || a.to >= n) {
      throw ModelError("road arc references a node outside the graph");
    }
    if (a.from == a.to) {
      throw ModelError("road edge at '" + g.nodes_[a.from].id + "' is a self-loop");
    }
    if (!(a.length_m > 0.0) || !std::isfinite(a.length_m)) {
      throw ModelError("road edge '" + g.nodes_[a.from].id + "' -> '" + g.nodes_[a.to].id +
                       "' must have positive finite length");
    }
  }
  std::sort(arcs.begin(), arcs.end(), [](const Arc& x, const Arc& y) {
    if (x.from != y.from) return x.from < y.from;
    if (x.to != y.to) return x.to < y.to;
    return x.length_m < y.length_m;
  });
  arcs.erase(std::unique(arcs.begin(), arcs.end(),
                         [](const Arc& x, const Arc& y) { return x.from == y.from && x.to == y.to; }),
             arcs.end());
  g.arcs_ = std::move(arcs);
  g.index();
  return g;
}

void RoadGraph::index() {
  offsets_.assign(nodes_.size() + 1, 0);
  for (const Arc& a : arcs_) ++offsets_[a.from + 1];
  for (size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
}

std::optional<int> RoadGraph::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

bool RoadGraph::has_arc(int from, int to) const {
  for (const Arc& a : out_arcs(from)) {
    if (a.to == to) return true;
  }
  return false;
}

RoadGraph RoadGraph::induced(std::span<const int> keep) const {
  std::vector<int> remap(nodes_.size(), -1);
  for (int v : keep) remap[v] = 0;
  std::vector<GeoNode> nodes;
  for (size_t v = 0; v < nodes_.size(); ++v) {
    if (remap[v] == 0) {
      remap[v] = static_cast<int>(nodes.size());
      nodes.push_back(nodes_[v]);
    }
  }
  std::vector<Arc> arcs;
  for (const Arc& a : arcs_) {
    if (remap[a.from] >= 0 && remap[a.to] >= 0) {
      arcs.push_back({remap[a.from], remap[a.to], a.length_m});
    }
  }
  return from_arcs(std::move(nodes), std::move(arcs));
}

RoadGraph RoadGraph::without_arcs(std::span<const std::pair<int, int>> removed) const {
  std::set<std::pair<int, int>> drop(removed.begin(), removed.end());
  std::vector<Arc> arcs;
  for (const Arc& a : arcs_) {
    if (!drop.contains({a.from, a.to})) arcs.push_back(a);
  }
  return from_arcs(nodes_, std::move(arcs));
}

std::vector<RoadEdge> RoadGraph::edges() const {
  std::vector<RoadEdge> out;
  for (const Arc& a : arcs_) {
    bool reverse_twin = false;
    for (const Arc& b : out_arcs(a.to)) {
      if (b.to == a.from && b.length_m == a.length_m) reverse_twin = true;
    }
    if (!reverse_twin) {
      out.push_back({a.from, a.to, a.length_m, true});
    } else if (a.from < a.to) {
      out.push_back({a.from, a.to, a.length_m, false});
    }
  }
  return out;
}

}  // namespace canalplan::graph
