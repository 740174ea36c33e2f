#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "canalplan/error.hpp"
#include "canalplan/graph/graph_io.hpp"
#include "canalplan/graph/metrics.hpp"

using namespace canalplan;
using namespace canalplan::graph;

namespace {

double haversine(const GeoNode& a, const GeoNode& b) {
  constexpr double kR = 6371008.8;
  const double rad = M_PI / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2 * kR * std::asin(std::sqrt(h));
}

// Random tree on n nodes around (52.0, 4.3); node i attaches to a random earlier node.
CanalGraph random_tree(int n, std::mt19937& rng, double spread = 0.004) {
  std::uniform_real_distribution<double> off(-spread, spread);
  std::vector<GeoNode> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back({"c" + std::to_string(i), 52.0 + off(rng), 4.3 + off(rng)});
  std::vector<CanalEdge> edges;
  for (int i = 1; i < n; ++i) {
    const int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
    std::uniform_real_distribution<double> w(20.0, 400.0);
    edges.push_back({p, i, w(rng)});
  }
  return CanalGraph::from_parts(std::move(nodes), std::move(edges));
}

std::vector<std::vector<double>> floyd_warshall(const RoadGraph& g) {
  const int n = g.node_count();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, kUnreachable));
  for (int i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const Arc& a : g.arcs()) d[a.from][a.to] = std::min(d[a.from][a.to], a.length_m);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

RoadGraph random_road(int n, std::mt19937& rng) {
  std::vector<GeoNode> nodes;
  std::uniform_real_distribution<double> off(-0.01, 0.01);
  for (int i = 0; i < n; ++i) nodes.push_back({"r" + std::to_string(i), 52.0 + off(rng), 4.3 + off(rng)});
  std::vector<RoadEdge> edges;
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> len(10.0, 900.0);
  for (int e = 0; e < 2 * n; ++e) {
    const int a = pick(rng);
    const int b = pick(rng);
    if (a == b) continue;
    edges.push_back({a, b, len(rng), std::bernoulli_distribution(0.3)(rng)});
  }
  return RoadGraph::from_parts(std::move(nodes), edges);
}

}  // namespace

TEST(Ingest, SampleMapIsA78NodeTree) {
  const GraphPair g = ingest_graphs(std::string(CANALPLAN_DATA_DIR) + "/sample_canal.json",
                                    std::string(CANALPLAN_DATA_DIR) + "/sample_road.json");
  EXPECT_EQ(g.canal.node_count(), 78);
  EXPECT_EQ(g.canal.edge_count(), 77);
  EXPECT_EQ(g.road.node_count(), 1391);
}

TEST(Ingest, MinimalTree) {
  const CanalGraph g = parse_canal_graph(R"({"nodes":[{"id":"a","lat":52,"lon":4},{"id":"b","lat":52.001,"lon":4}],
    "edges":[{"from":"a","to":"b"}]})");
  EXPECT_EQ(g.node_count(), 2);
  EXPECT_EQ(g.edge_count(), 1);
  EXPECT_NEAR(g.edge(0).weight_m, 110.54, 1e-6);
}

TEST(Ingest, CycleRejectedAndNamed) {
  const std::string text = R"({"nodes":[{"id":"a","lat":52,"lon":4},{"id":"b","lat":52.001,"lon":4},
    {"id":"c","lat":52.001,"lon":4.001}],
    "edges":[{"from":"a","to":"b"},{"from":"b","to":"c"},{"from":"c","to":"a"}]})";
  try {
    parse_canal_graph(text);
    FAIL() << "cycle accepted";
  } catch (const ModelError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("cycle"), std::string::npos) << what;
    EXPECT_NE(what.find("'a'"), std::string::npos) << what;
  }
}

TEST(Ingest, DisconnectedRejected) {
  const std::string text = R"({"nodes":[{"id":"a","lat":52,"lon":4},{"id":"b","lat":52.001,"lon":4},
    {"id":"c","lat":52.002,"lon":4.001}], "edges":[{"from":"a","to":"b"}]})";
  EXPECT_THROW(parse_canal_graph(text), ModelError);
}

TEST(Ingest, SchemaErrorsCarryField) {
  const std::string text = "{\"nodes\":[\n{\"id\":\"a\",\"lat\":52,\"lon\":4},\n{\"id\":\"b\",\"lat\":\"x\",\"lon\":4}],\n\"edges\":[]}";
  try {
    parse_canal_graph(text, "canal.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "nodes[1].lat");
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_canal_graph("{\"nodes\": [}"), ParseError);
  EXPECT_THROW(parse_canal_graph(R"({"nodes":[{"id":"a","lat":52,"lon":4},{"id":"b","lat":52,"lon":4.1}],
    "edges":[{"from":"a","to":"b","oneway":true}]})"),
               ParseError);
  EXPECT_THROW(parse_canal_graph(R"({"nodes":[{"id":"a","lat":95,"lon":4}],"edges":[]})"), ParseError);
}

TEST(Ingest, RoadOnewayExpansion) {
  const RoadGraph g = parse_road_graph(R"({"nodes":[{"id":"a","lat":52,"lon":4},{"id":"b","lat":52,"lon":4.01},
    {"id":"c","lat":52.01,"lon":4}],
    "edges":[{"from":"a","to":"b","weight_m":500,"oneway":true},{"from":"b","to":"c","weight_m":300}]})");
  EXPECT_EQ(g.arc_count(), 3);
  EXPECT_TRUE(g.has_arc(0, 1));
  EXPECT_FALSE(g.has_arc(1, 0));
  EXPECT_TRUE(g.has_arc(1, 2));
  EXPECT_TRUE(g.has_arc(2, 1));
}

TEST(Ingest, JsonRoundTrip) {
  std::mt19937 rng(3);
  const CanalGraph g = random_tree(12, rng);
  const CanalGraph back = parse_canal_graph(to_json(g).dump());
  ASSERT_EQ(back.edge_count(), g.edge_count());
  for (int e = 0; e < g.edge_count(); ++e) EXPECT_DOUBLE_EQ(back.edge(e).weight_m, g.edge(e).weight_m);
  const RoadGraph r = random_road(20, rng);
  const RoadGraph rb = parse_road_graph(to_json(r).dump());
  EXPECT_EQ(rb.arcs().size(), r.arcs().size());
}

TEST(Normalize, SplitsIntoEqualPieces) {
  const CanalGraph g = CanalGraph::from_parts({{"a", 52, 4}, {"b", 52.002, 4}}, {{0, 1, 250.0}});
  const CanalGraph n = normalize_canal_edges(g, 100.0);
  ASSERT_EQ(n.edge_count(), 3);
  for (const CanalEdge& e : n.edges()) EXPECT_NEAR(e.weight_m, 250.0 / 3.0, 1e-9);
  const CanalGraph same = normalize_canal_edges(CanalGraph::from_parts({{"a", 52, 4}, {"b", 52.001, 4}}, {{0, 1, 100.0}}), 100.0);
  EXPECT_EQ(same.edge_count(), 1);
  EXPECT_THROW(normalize_canal_edges(g, 0.0), UsageError);
}

TEST(Normalize, PreservesWeightLeavesAndCount) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const CanalGraph g = random_tree(15, rng);
    const double wc = 120.0;
    int expected = 0;
    double total = 0.0;
    for (const CanalEdge& e : g.edges()) {
      expected += static_cast<int>(std::ceil(e.weight_m / wc));
      total += e.weight_m;
    }
    const CanalGraph n = normalize_canal_edges(g, wc);
    EXPECT_EQ(n.edge_count(), expected);
    EXPECT_EQ(n.edge_count(), n.node_count() - 1);
    EXPECT_NEAR(n.total_weight(), total, 1e-9 * total);
    std::vector<std::string> before, after;
    for (int v : g.leaves()) before.push_back(g.node(v).id);
    for (int v : n.leaves()) after.push_back(n.node(v).id);
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    EXPECT_EQ(before, after);
    for (const CanalEdge& e : n.edges()) EXPECT_LE(e.weight_m, 1.5 * wc);
  }
}

TEST(Distance, Basics) {
  const GeoNode a{"a", 52.0, 4.0};
  EXPECT_EQ(planar_distance(a, a), 0.0);
  EXPECT_NEAR(planar_distance(a, {"b", 52.001, 4.0}), 110.54, 1e-9);
}

// 110540 m per degree of latitude is 0.59% short of the mean-sphere value,
// so north-south pairs can miss 0.5%; 0.6% covers the projection plus that.
TEST(Distance, MatchesHaversine) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> lat(-60, 60), lon(-170, 170), d(-0.2, 0.2);
  for (int i = 0; i < 100; ++i) {
    const GeoNode a{"a", lat(rng), lon(rng)};
    const GeoNode b{"b", a.lat + d(rng), a.lon + d(rng)};
    const double h = haversine(a, b);
    EXPECT_NEAR(planar_distance(a, b), h, 0.006 * h);
    EXPECT_DOUBLE_EQ(planar_distance(a, b), planar_distance(b, a));
    const GeoNode east{"e", a.lat, a.lon + d(rng)};
    EXPECT_NEAR(planar_distance(a, east), haversine(a, east), 0.005 * haversine(a, east));
  }
}

TEST(Transmission, TinyRangeAndCoincidence) {
  const RoadGraph road = RoadGraph::from_parts({{"r0", 52.0, 4.0}, {"r1", 52.01, 4.0}}, std::vector<RoadEdge>{});
  const CanalGraph canal = CanalGraph::from_parts({{"c0", 52.0, 4.0}, {"c1", 52.0, 4.005}}, {{0, 1, 300.0}});
  const TransmissionMatrix r = transmission_matrix(road, canal, 1e-9);
  EXPECT_TRUE(r.bits(0, 0));
  EXPECT_EQ(r.bits.count(), 1);
  const RoadGraph far = RoadGraph::from_parts({{"r0", 53.0, 4.0}}, std::vector<RoadEdge>{});
  EXPECT_EQ(transmission_matrix(far, canal, 1e-9).bits.count(), 0);
  EXPECT_THROW(transmission_matrix(road, canal, 0.0), UsageError);
}

TEST(Transmission, MonotoneInRange) {
  std::mt19937 rng(8);
  const RoadGraph road = random_road(30, rng);
  const CanalGraph canal = random_tree(20, rng);
  const TransmissionMatrix small = transmission_matrix(road, canal, 300.0);
  const TransmissionMatrix big = transmission_matrix(road, canal, 700.0);
  for (int i = 0; i < road.node_count(); ++i)
    for (int j = 0; j < canal.node_count(); ++j) {
      EXPECT_LE(small.bits(i, j), big.bits(i, j));
      EXPECT_EQ(big.bits(i, j), planar_distance(road.node(i), canal.node(j)) <= 700.0);
    }
}

TEST(Transmission, SampleMapEveryCanalNodeCovered) {
  const GraphPair g = ingest_graphs(std::string(CANALPLAN_DATA_DIR) + "/sample_canal.json",
                                    std::string(CANALPLAN_DATA_DIR) + "/sample_road.json");
  const TransmissionMatrix r = transmission_matrix(g.road, g.canal, 1000.0);
  for (int j = 0; j < g.canal.node_count(); ++j) {
    bool any = false;
    for (int i = 0; i < g.road.node_count() && !any; ++i) any = planar_distance(g.road.node(i), g.canal.node(j)) <= 1000.0;
    EXPECT_TRUE(any);
    EXPECT_FALSE(r.bits.col_support(j).empty());
  }
}

TEST(Adjacency, SelfLoopsAndArcs) {
  const CanalGraph c = CanalGraph::from_parts({{"a", 52, 4}, {"b", 52.001, 4}, {"c", 52.002, 4}}, {{0, 1, 100}, {1, 2, 100}});
  const AdjacencyMatrix a = canal_adjacency(c, true);
  EXPECT_TRUE(a.bits(0, 0));
  EXPECT_TRUE(a.bits(0, 1));
  EXPECT_TRUE(a.bits(1, 0));
  EXPECT_FALSE(a.bits(0, 2));
  EXPECT_EQ(a.bits.count(), 7);
  const AdjacencyMatrix plain = canal_adjacency(c, false);
  EXPECT_EQ(plain.bits.count(), 4);

  const RoadGraph r = RoadGraph::from_parts({{"a", 52, 4}, {"b", 52, 4.001}, {"c", 52, 4.002}},
                                            std::vector<RoadEdge>{{0, 1, 50, true}, {1, 2, 50, true}});
  const AdjacencyMatrix ra = road_adjacency(r, false);
  EXPECT_TRUE(ra.bits(0, 1));
  EXPECT_FALSE(ra.bits(1, 0));
  const AdjacencyMatrix two = road_adjacency(r, true, 2);
  EXPECT_TRUE(two.bits(0, 2));
  EXPECT_FALSE(two.bits(2, 0));
}

TEST(ShortestPath, OneArc) {
  const RoadGraph r = RoadGraph::from_parts({{"a", 52, 4}, {"b", 52, 4.001}}, std::vector<RoadEdge>{{0, 1, 500, true}});
  const std::vector<int> all{0, 1};
  const DistanceTable d = shortest_path_matrix(r, all, all);
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_EQ(d(0, 1), 500.0);
  EXPECT_EQ(d(1, 0), kUnreachable);
}

TEST(ShortestPath, MatchesFloydWarshall) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const RoadGraph r = random_road(50, rng);
    std::vector<int> all(r.node_count());
    std::iota(all.begin(), all.end(), 0);
    const DistanceTable d = shortest_path_matrix(r, all, all);
    const auto oracle = floyd_warshall(r);
    for (int i = 0; i < r.node_count(); ++i)
      for (int j = 0; j < r.node_count(); ++j) {
        if (oracle[i][j] == kUnreachable) {
          EXPECT_EQ(d(i, j), kUnreachable);
        } else {
          EXPECT_NEAR(d(i, j), oracle[i][j], 1e-9 * (1 + oracle[i][j]));
        }
      }
    for (int i = 0; i < 50; i += 7)
      for (int j = 0; j < 50; j += 5)
        for (int k = 0; k < 50; k += 3) EXPECT_LE(d(i, j), d(i, k) + d(k, j) + 1e-9);
    const ShortestPathTree tree = dijkstra(r, 0);
    for (int t = 1; t < r.node_count(); ++t) {
      const std::vector<int> path = tree.path_to(t);
      if (path.empty()) continue;
      double len = 0;
      for (size_t s = 0; s + 1 < path.size(); ++s) {
        double best = kUnreachable;
        for (const Arc& a : r.out_arcs(path[s]))
          if (a.to == path[s + 1]) best = a.length_m;
        len += best;
      }
      EXPECT_NEAR(len, d(0, t), 1e-9 * (1 + len));
    }
  }
}

TEST(Trim, IdentityWhenEverythingInRange) {
  const RoadGraph r = RoadGraph::from_parts({{"a", 52, 4}, {"b", 52, 4.001}, {"c", 52.001, 4.001}},
                                            std::vector<RoadEdge>{{0, 1, 70}, {1, 2, 110}});
  const std::vector<GeoNode> canal{{"c0", 52.0005, 4.0005}};
  const RoadGraph t = trim_road_subgraph(r, canal, 5000.0, 0.0);
  EXPECT_EQ(t.node_count(), 3);
  EXPECT_EQ(t.arc_count(), 4);
}

TEST(Trim, SingleIsolatedNodeAndEmpty) {
  const RoadGraph r = RoadGraph::from_parts({{"a", 52, 4}, {"b", 52.1, 4}}, std::vector<RoadEdge>{});
  const std::vector<GeoNode> canal{{"c0", 52.0001, 4.0}};
  const RoadGraph t = trim_road_subgraph(r, canal, 50.0, 0.0);
  ASSERT_EQ(t.node_count(), 1);
  EXPECT_EQ(t.node(0).id, "a");
  const std::vector<GeoNode> nowhere{{"c0", 10.0, 10.0}};
  try {
    trim_road_subgraph(r, nowhere, 50.0, 0.0);
    FAIL();
  } catch (const CoverageError& e) {
    EXPECT_STREQ(e.what(), "no road support near subgraph");
  }
}

TEST(Trim, SampleMapSubgraphIsSmaller) {
  const GraphPair g = ingest_graphs(std::string(CANALPLAN_DATA_DIR) + "/sample_canal.json",
                                    std::string(CANALPLAN_DATA_DIR) + "/sample_road.json");
  std::vector<GeoNode> some(g.canal.nodes().begin(), g.canal.nodes().begin() + 12);
  const RoadGraph t = trim_road_subgraph(g.road, some, 500.0, 100.0);
  EXPECT_GT(t.node_count(), 0);
  EXPECT_LT(t.node_count(), 1391);
  const std::vector<int> comp = strongly_connected_components(t);
  for (int c : comp) EXPECT_EQ(c, comp[0]);
}
