#include "canalplan/cli/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "canalplan/error.hpp"
#include "canalplan/graph/geo.hpp"

namespace canalplan::cli {

namespace {

using nlohmann::json;

constexpr double kWidth = 1000.0;
constexpr double kPad = 30.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string hex(double r, double g, double b) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(r * 255)),
                static_cast<int>(std::lround(g * 255)), static_cast<int>(std::lround(b * 255)));
  return buf;
}

std::string hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  return hex(r + m, g + m, b + m);
}

// Planar metres, then scaled into a kWidth-wide canvas with y up.
class Canvas {
 public:
  void include(const graph::GeoNode& n) {
    if (!origin_) {
      origin_ = true;
      lat0_ = n.lat;
      lon0_ = n.lon;
    }
    const auto [x, y] = metres(n);
    minx_ = std::min(minx_, x), maxx_ = std::max(maxx_, x);
    miny_ = std::min(miny_, y), maxy_ = std::max(maxy_, y);
  }

  std::pair<double, double> at(const graph::GeoNode& n) const {
    const auto [x, y] = metres(n);
    return {kPad + (x - minx_) * scale(), kPad + (maxy_ - y) * scale()};
  }

  double width() const { return kWidth + 2 * kPad; }
  double height() const { return std::max(1.0, (maxy_ - miny_) * scale()) + 2 * kPad; }

 private:
  std::pair<double, double> metres(const graph::GeoNode& n) const {
    const double x = (n.lon - lon0_) * graph::kMetersPerDegreeLon * std::cos(lat0_ * M_PI / 180.0);
    const double y = (n.lat - lat0_) * graph::kMetersPerDegreeLat;
    return {x, y};
  }
  double scale() const {
    const double span = std::max({maxx_ - minx_, maxy_ - miny_, 1.0});
    return kWidth / span;
  }

  bool origin_ = false;
  double lat0_ = 0, lon0_ = 0;
  double minx_ = std::numeric_limits<double>::infinity(), maxx_ = -std::numeric_limits<double>::infinity();
  double miny_ = std::numeric_limits<double>::infinity(), maxy_ = -std::numeric_limits<double>::infinity();
};

struct Line {
  const graph::GeoNode* a;
  const graph::GeoNode* b;
  std::string color;
  double width;
  bool dashed;
};

struct Dot {
  const graph::GeoNode* at;
  std::string color;
  double radius;
  std::string label;
};

// Shared writer: both formats list the same lines and markers in the same
// order.
Rendering draw(const std::string& name, bool directed, const std::vector<Line>& lines, const std::vector<Dot>& dots) {
  Canvas canvas;
  for (const Line& l : lines) canvas.include(*l.a), canvas.include(*l.b);
  for (const Dot& d : dots) canvas.include(*d.at);

  std::ostringstream dot;
  const char* arrow = directed ? " -> " : " -- ";
  dot << (directed ? "digraph" : "graph") << " \"" << name << "\" {\n";
  dot << "  graph [splines=false, outputorder=edgesfirst];\n";
  dot << "  node [shape=point, width=0.04, color=\"#404040\"];\n";
  std::map<std::string, int> declared;
  const auto declare = [&](const graph::GeoNode& n) {
    if (declared.count(n.id)) return;
    declared[n.id] = 1;
    const auto [x, y] = canvas.at(n);
    dot << "  \"" << n.id << "\" [pos=\"" << fmt(x) << "," << fmt(canvas.height() - y) << "!\"];\n";
  };
  for (const Line& l : lines) declare(*l.a), declare(*l.b);
  for (const Dot& d : dots) declare(*d.at);
  for (const Line& l : lines) {
    dot << "  \"" << l.a->id << "\"" << arrow << "\"" << l.b->id << "\" [color=\"" << l.color
        << "\", penwidth=" << fmt(l.width) << (l.dashed ? ", style=dashed" : "") << (directed ? ", arrowsize=0.4" : "")
        << "];\n";
  }
  for (const Dot& d : dots) {
    if (d.label.empty()) continue;
    dot << "  \"" << d.at->id << "\" [shape=circle, width=" << fmt(d.radius / 36.0) << ", color=\"" << d.color
        << "\", xlabel=\"" << d.label << "\"];\n";
  }
  dot << "}\n";

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(canvas.width()) << "\" height=\""
      << fmt(canvas.height()) << "\" viewBox=\"0 0 " << fmt(canvas.width()) << " " << fmt(canvas.height()) << "\">\n";
  svg << "<title>" << name << "</title>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (const Line& l : lines) {
    const auto [x1, y1] = canvas.at(*l.a);
    const auto [x2, y2] = canvas.at(*l.b);
    svg << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2)
        << "\" stroke=\"" << l.color << "\" stroke-width=\"" << fmt(l.width) << "\""
        << (l.dashed ? " stroke-dasharray=\"4 3\"" : "") << " stroke-linecap=\"round\"/>\n";
  }
  for (const Dot& d : dots) {
    const auto [x, y] = canvas.at(*d.at);
    svg << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(d.radius) << "\" fill=\"" << d.color
        << "\"/>\n";
    if (!d.label.empty())
      svg << "<text x=\"" << fmt(x + d.radius + 2) << "\" y=\"" << fmt(y - d.radius - 2)
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << d.label << "</text>\n";
  }
  svg << "</svg>\n";
  return {dot.str(), svg.str()};
}

const graph::GeoNode& canal_node(const graph::CanalGraph& g, const json& id) {
  const auto i = g.index_of(id.get<std::string>());
  if (!i) throw UsageError("render: canal node '" + id.get<std::string>() + "' is not in the canal graph");
  return g.node(*i);
}

const graph::GeoNode& road_node(const graph::RoadGraph& g, const json& id) {
  const auto i = g.index_of(id.get<std::string>());
  if (!i) throw UsageError("render: road node '" + id.get<std::string>() + "' is not in the road graph");
  return g.node(*i);
}

}  // namespace

std::string subgraph_color(int i) { return hsv(std::fmod(0.07 + i * 0.6180339887498949, 1.0), 0.75, 0.85); }

std::string uav_color(int i) {
  static const char* table[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45"};
  return i < 8 ? table[i] : subgraph_color(i);
}

std::string car_color(int i) {
  static const char* table[] = {"#000000", "#808080", "#9a6324", "#800000", "#000075", "#808000"};
  return i < 6 ? table[i] : hsv(std::fmod(i * 0.6180339887498949, 1.0), 0.5, 0.4);
}

Rendering render_partition(const graph::CanalGraph& canal, const json& partition) {
  std::vector<Line> lines;
  std::vector<Dot> dots;
  const json& subs = partition.at("subgraphs");
  for (size_t s = 0; s < subs.size(); ++s) {
    const std::string color = subgraph_color(static_cast<int>(s));
    const graph::GeoNode* first = nullptr;
    for (const json& e : subs[s].at("edges")) {
      const auto& a = canal_node(canal, e.at(0));
      const auto& b = canal_node(canal, e.at(1));
      if (!first) first = &a;
      lines.push_back({&a, &b, color, 3.0, false});
    }
    if (first) dots.push_back({first, color, 3.0, "s" + std::to_string(s)});
  }
  return draw("partition", false, lines, dots);
}

Rendering render_plan(const graph::CanalGraph& canal, const graph::RoadGraph& road, const json& plan) {
  std::vector<Line> lines;
  std::vector<Dot> dots;
  const json& uavs = plan.at("uavs");
  const json& cars = plan.at("cars");
  std::map<std::string, const json*> uav_path, car_path;
  for (const json& u : uavs) uav_path[u.at("id").get<std::string>()] = &u.at("path");
  for (const json& c : cars) car_path[c.at("id").get<std::string>()] = &c.at("path");

  for (const json& c : plan.at("coverage")) {
    const auto& a = canal_node(canal, c.at("edge").at(0));
    const auto& b = canal_node(canal, c.at("edge").at(1));
    lines.push_back({&a, &b, "#d0d0d0", 6.0, false});
  }
  for (size_t k = 0; k < uavs.size(); ++k) {
    const json& path = uavs[k].at("path");
    for (size_t t = 0; t + 1 < path.size(); ++t) {
      if (path[t] == path[t + 1]) continue;
      lines.push_back({&canal_node(canal, path[t]), &canal_node(canal, path[t + 1]), uav_color(static_cast<int>(k)), 2.5,
                       false});
    }
    dots.push_back({&canal_node(canal, path.at(0)), uav_color(static_cast<int>(k)), 4.0,
                    uavs[k].at("id").get<std::string>()});
  }
  for (size_t c = 0; c < cars.size(); ++c) {
    const json& path = cars[c].at("path");
    for (size_t t = 0; t + 1 < path.size(); ++t) {
      if (path[t] == path[t + 1]) continue;
      lines.push_back({&road_node(road, path[t]), &road_node(road, path[t + 1]), car_color(static_cast<int>(c)), 2.0,
                       false});
    }
    dots.push_back({&road_node(road, path.at(0)), car_color(static_cast<int>(c)), 4.0,
                    cars[c].at("id").get<std::string>()});
  }
  for (const json& l : plan.at("comm")) {
    const int t = l.at("t").get<int>();
    const json& up = *uav_path.at(l.at("uav").get<std::string>());
    const json& cp = *car_path.at(l.at("car").get<std::string>());
    lines.push_back({&canal_node(canal, up.at(t)), &road_node(road, cp.at(t)), "#909090", 0.8, true});
  }
  return draw("plan", true, lines, dots);
}

Rendering render_tour(const graph::RoadGraph& road, const json& tour, int office) {
  std::vector<Line> lines;
  std::vector<Dot> dots;
  std::map<std::string, int> car_index;
  for (const json& leg : tour.at("legs")) {
    for (const json& c : leg.at("cars")) {
      const std::string id = c.at("car").get<std::string>();
      const int k = car_index.emplace(id, static_cast<int>(car_index.size())).first->second;
      const json& path = c.at("path");
      for (size_t i = 0; i + 1 < path.size(); ++i)
        lines.push_back({&road_node(road, path[i]), &road_node(road, path[i + 1]), car_color(k), 2.0, false});
    }
  }
  int stop = 0;
  for (const json& leg : tour.at("legs")) {
    if (leg.at("toSub").is_string()) continue;
    for (const json& c : leg.at("cars")) {
      if (c.at("path").empty()) continue;
      dots.push_back({&road_node(road, c.at("path").back()), subgraph_color(leg.at("toSub").get<int>()), 4.0,
                      std::to_string(++stop) + ": s" + std::to_string(leg.at("toSub").get<int>())});
      break;
    }
  }
  dots.push_back({&road.node(office), "#000000", 6.0, "office"});
  return draw("tour", true, lines, dots);
}

Rendering render_artifact(const graph::CanalGraph& canal, const graph::RoadGraph& road, int office, const json& artifact) {
  if (!artifact.is_object()) throw UsageError("render: artifact is not a JSON object");
  if (artifact.contains("subgraphs")) return render_partition(canal, artifact);
  if (artifact.contains("uavs")) return render_plan(canal, road, artifact);
  if (artifact.contains("legs")) return render_tour(road, artifact, office);
  throw UsageError("render: not a partition, plan or tour artifact");
}

}  // namespace canalplan::cli
