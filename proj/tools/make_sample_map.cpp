// Writes the bundled synthetic map: a comb-shaped canal tree, a canal-side
// street that follows it, and a distant town grid with cul-de-sacs that
// brings the road network to its full size.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "canalplan/graph/geo.hpp"
#include "canalplan/graph/graph_io.hpp"

namespace {

using nlohmann::json;

constexpr double kLat0 = 52.3600;
constexpr double kLon0 = 4.8800;
constexpr double kStep = 100.0;       // canal edge length
constexpr double kStreetOffset = 35.0;

struct Pt {
  double x = 0;  // metres east
  double y = 0;  // metres north
};

struct Branch {
  int length = 0;
  int at = 0;  // trunk node
};

json node(const std::string& id, Pt p) {
  const double lat = kLat0 + p.y / canalplan::graph::kMetersPerDegreeLat;
  const double lon = kLon0 + p.x / (canalplan::graph::kMetersPerDegreeLon * std::cos(kLat0 * M_PI / 180.0));
  // 7 decimals is ~1 cm, keeps files stable across platforms
  const auto round7 = [](double v) { return std::round(v * 1e7) / 1e7; };
  return {{"id", id}, {"lat", round7(lat)}, {"lon", round7(lon)}};
}

std::vector<Branch> parse_branches(const std::string& spec) {
  std::vector<Branch> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto at = item.find('@');
    if (at == std::string::npos) throw CLI::ValidationError("--branches", "expected LEN@TRUNKNODE items");
    out.push_back({std::stoi(item.substr(0, at)), std::stoi(item.substr(at + 1))});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled sample canal and road maps"};
  int trunk = 37;
  std::string branch_spec = "8@7,12@16,10@22,10@30";
  unsigned seed = 7;
  int road_nodes = 1391;
  std::string out_dir = "data";
  app.add_option("--trunk", trunk, "trunk length in edges");
  app.add_option("--branches", branch_spec, "LEN@TRUNKNODE list; branches alternate north and south");
  app.add_option("--seed", seed, "jitter and cul-de-sac seed");
  app.add_option("--road-nodes", road_nodes, "total road node count");
  app.add_option("--out", out_dir, "output directory");
  CLI11_PARSE(app, argc, argv);

  const auto branches = parse_branches(branch_spec);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> jitter(-8.0, 8.0);

  // canal
  std::vector<Pt> cpos;
  std::vector<std::pair<int, int>> cedges;
  for (int i = 0; i <= trunk; ++i) cpos.push_back({i * kStep, i == 0 ? 0.0 : jitter(rng)});
  for (int i = 0; i < trunk; ++i) cedges.push_back({i, i + 1});
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const double dir = b % 2 == 0 ? 1.0 : -1.0;
    int prev = branches[b].at;
    for (int j = 0; j < branches[b].length; ++j) {
      cpos.push_back({cpos[branches[b].at].x + jitter(rng), cpos[branches[b].at].y + dir * (j + 1) * kStep});
      cedges.push_back({prev, static_cast<int>(cpos.size()) - 1});
      prev = static_cast<int>(cpos.size()) - 1;
    }
  }
  json canal{{"nodes", json::array()}, {"edges", json::array()}};
  for (std::size_t i = 0; i < cpos.size(); ++i) canal["nodes"].push_back(node("c" + std::to_string(i), cpos[i]));
  for (auto [a, b] : cedges)
    canal["edges"].push_back({{"from", "c" + std::to_string(a)}, {"to", "c" + std::to_string(b)}});

  // road: canal-side street mirroring the canal
  std::vector<Pt> rpos;
  std::vector<std::string> rid;
  json road_edges = json::array();
  const auto add_road = [&](const std::string& id, Pt p) {
    rpos.push_back(p);
    rid.push_back(id);
    return static_cast<int>(rpos.size()) - 1;
  };
  const auto link = [&](int a, int b) { road_edges.push_back({{"from", rid[a]}, {"to", rid[b]}}); };
  for (std::size_t i = 0; i < cpos.size(); ++i)
    add_road("rc" + std::to_string(i), {cpos[i].x + kStreetOffset, cpos[i].y + kStreetOffset});
  for (auto [a, b] : cedges) link(a, b);

  // town: 3 x 5 junctions, 400 m blocks, every street split into 4 pieces
  const Pt town{-2600.0, -3400.0};
  const int rows = 3, cols = 5, split = 4;
  const double block = 400.0;
  std::vector<int> junction(rows * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::string id = r == rows - 1 && c == cols - 1 ? "office" : "rg" + std::to_string(r * cols + c);
      junction[r * cols + c] = add_road(id, {town.x + c * block, town.y + r * block});
    }
  int interior = 0;
  const auto street = [&](int a, int b) {
    int prev = a;
    for (int s = 1; s < split; ++s) {
      const double f = static_cast<double>(s) / split;
      const int v = add_road("rs" + std::to_string(interior++),
                             {rpos[a].x + f * (rpos[b].x - rpos[a].x), rpos[a].y + f * (rpos[b].y - rpos[a].y)});
      link(prev, v);
      prev = v;
    }
    link(prev, b);
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) street(junction[r * cols + c], junction[r * cols + c + 1]);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c) street(junction[r * cols + c], junction[(r + 1) * cols + c]);

  // access road from the canal street to the office corner
  {
    const int from = 0;  // rc0
    const int to = junction[rows * cols - 1];
    const double len = std::hypot(rpos[to].x - rpos[from].x, rpos[to].y - rpos[from].y);
    const int pieces = static_cast<int>(std::ceil(len / kStep));
    int prev = from;
    for (int s = 1; s < pieces; ++s) {
      const double f = static_cast<double>(s) / pieces;
      const int v = add_road("ra" + std::to_string(s),
                             {rpos[from].x + f * (rpos[to].x - rpos[from].x), rpos[from].y + f * (rpos[to].y - rpos[from].y)});
      link(prev, v);
      prev = v;
    }
    link(prev, to);
  }

  // cul-de-sacs grow away from the canal until the node budget is met
  const auto too_close = [&](Pt p) {
    for (const Pt& c : cpos)
      if (std::hypot(p.x - c.x, p.y - c.y) < 1500.0) return true;
    return false;
  };
  std::uniform_real_distribution<double> angle(M_PI * 0.5, M_PI * 1.5);  // west-facing half plane
  std::uniform_real_distribution<double> step(60.0, 110.0);
  std::uniform_int_distribution<int> run(3, 14);
  const int town_nodes = static_cast<int>(rpos.size());
  int dead_end = 0;
  int attempts = 0;
  while (static_cast<int>(rpos.size()) < road_nodes) {
    if (++attempts > 100000) {
      std::cerr << "could not place the cul-de-sacs\n";
      return 1;
    }
    int prev = junction[std::uniform_int_distribution<int>(0, rows * cols - 1)(rng)];
    if (static_cast<int>(rpos.size()) > town_nodes && rng() % 4 != 0)
      prev = std::uniform_int_distribution<int>(town_nodes, static_cast<int>(rpos.size()) - 1)(rng);
    double heading = angle(rng) + (rng() % 2 ? 0.0 : -M_PI * 0.5);
    const int n = std::min(run(rng), road_nodes - static_cast<int>(rpos.size()));
    for (int s = 0; s < n; ++s) {
      heading += std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
      const double d = step(rng);
      const Pt p{rpos[prev].x + d * std::cos(heading), rpos[prev].y + d * std::sin(heading)};
      if (too_close(p)) break;
      const int v = add_road("rd" + std::to_string(dead_end++), p);
      link(prev, v);
      prev = v;
    }
  }

  json road{{"nodes", json::array()}, {"edges", std::move(road_edges)}};
  for (std::size_t i = 0; i < rpos.size(); ++i) road["nodes"].push_back(node(rid[i], rpos[i]));

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  canalplan::graph::write_text_file_atomic(fs::path(out_dir) / "sample_canal.json", canal.dump(1) + "\n");
  canalplan::graph::write_text_file_atomic(fs::path(out_dir) / "sample_road.json", road.dump(1) + "\n");
  std::cout << "canal " << cpos.size() << " nodes / " << cedges.size() << " edges; road " << rpos.size()
            << " nodes / " << road["edges"].size() << " edges\n";
  return 0;
}
