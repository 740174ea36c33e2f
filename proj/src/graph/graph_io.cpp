#include "canalplan/graph/graph_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "canalplan/error.hpp"

namespace canalplan::graph {

using nlohmann::json;

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Schema walker: every violation names the JSON path of the field.
class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {
    try {
      doc_ = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source_, line_of_offset(text, e.byte), "", e.what());
    }
  }

  [[noreturn]] void fail(const std::string& field, const std::string& message) const {
    throw ParseError(source_, locate(field), field, message);
  }

  const json& doc() const { return doc_; }

  const json& array_field(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + key, "missing required field");
    if (!it->is_array()) fail(path + key, "expected an array");
    return *it;
  }

  std::string string_field(const json& obj, const std::string& key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing required field");
    if (!it->is_string()) fail(path + "." + key, "expected a string");
    return it->get<std::string>();
  }

  double number_field(const json& obj, const std::string& key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing required field");
    if (!it->is_number()) fail(path + "." + key, "expected a number");
    return it->get<double>();
  }

 private:
  // Best-effort line lookup: the n-th occurrence of the array element.
  int locate(const std::string& field) const {
    // Fields look like "nodes[3].lat"; find the array, then skip n objects.
    const auto bracket = field.find('[');
    if (bracket == std::string::npos) return 0;
    const std::string array = field.substr(0, bracket);
    const int index = std::atoi(field.c_str() + bracket + 1);
    std::size_t pos = text_.find("\"" + array + "\"");
    if (pos == std::string::npos) return 0;
    pos = text_.find('[', pos);
    int depth = 0;
    int seen = -1;
    for (std::size_t i = pos + 1; i < text_.size(); ++i) {
      const char c = text_[i];
      if (c == '"') {
        for (++i; i < text_.size() && text_[i] != '"'; ++i) {
          if (text_[i] == '\\') ++i;
        }
        continue;
      }
      if (c == '{') {
        if (depth == 0 && ++seen == index) return line_of_offset(text_, i);
        ++depth;
      } else if (c == '}') {
        --depth;
      } else if (c == ']' && depth == 0) {
        break;
      }
    }
    return 0;
  }

  const std::string& text_;
  std::string source_;
  json doc_;
};

struct RawGraph {
  std::vector<GeoNode> nodes;
  std::unordered_map<std::string, int> index;
  struct RawEdge {
    int from;
    int to;
    double weight;
    bool oneway;
  };
  std::vector<RawEdge> edges;
};

RawGraph read_raw(const Reader& r, bool allow_oneway) {
  RawGraph g;
  const json& root = r.doc();
  if (!root.is_object()) r.fail("", "top level must be an object");
  const json& nodes = r.array_field(root, "nodes", "");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const json& n = nodes[i];
    if (!n.is_object()) r.fail(path, "expected an object");
    GeoNode node{r.string_field(n, "id", path), r.number_field(n, "lat", path),
                 r.number_field(n, "lon", path)};
    if (node.lat < -90.0 || node.lat > 90.0) r.fail(path + ".lat", "latitude out of [-90, 90]");
    if (node.lon < -180.0 || node.lon > 180.0) r.fail(path + ".lon", "longitude out of [-180, 180]");
    if (!g.index.emplace(node.id, static_cast<int>(g.nodes.size())).second) {
      r.fail(path + ".id", "duplicate node id '" + node.id + "'");
    }
    g.nodes.push_back(std::move(node));
  }
  const json& edges = r.array_field(root, "edges", "");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "edges[" + std::to_string(i) + "]";
    const json& e = edges[i];
    if (!e.is_object()) r.fail(path, "expected an object");
    const std::string from = r.string_field(e, "from", path);
    const std::string to = r.string_field(e, "to", path);
    auto fi = g.index.find(from);
    if (fi == g.index.end()) r.fail(path + ".from", "unknown node id '" + from + "'");
    auto ti = g.index.find(to);
    if (ti == g.index.end()) r.fail(path + ".to", "unknown node id '" + to + "'");
    double weight = planar_distance(g.nodes[fi->second], g.nodes[ti->second]);
    if (e.contains("weight_m")) {
      weight = r.number_field(e, "weight_m", path);
      if (!(weight > 0.0)) r.fail(path + ".weight_m", "weight must be positive");
    }
    bool oneway = false;
    if (e.contains("oneway")) {
      if (!allow_oneway) r.fail(path + ".oneway", "canal edges are undirected; \"oneway\" is not allowed");
      if (!e["oneway"].is_boolean()) r.fail(path + ".oneway", "expected a boolean");
      oneway = e["oneway"].get<bool>();
    }
    g.edges.push_back({fi->second, ti->second, weight, oneway});
  }
  return g;
}

}  // namespace

CanalGraph parse_canal_graph(const std::string& text, const std::string& source) {
  Reader reader(text, source);
  RawGraph raw = read_raw(reader, /*allow_oneway=*/false);
  std::vector<CanalEdge> edges;
  edges.reserve(raw.edges.size());
  for (const auto& e : raw.edges) edges.push_back({e.from, e.to, e.weight});
  return CanalGraph::from_parts(std::move(raw.nodes), std::move(edges));
}

RoadGraph parse_road_graph(const std::string& text, const std::string& source) {
  Reader reader(text, source);
  RawGraph raw = read_raw(reader, /*allow_oneway=*/true);
  std::vector<RoadEdge> edges;
  edges.reserve(raw.edges.size());
  for (const auto& e : raw.edges) edges.push_back({e.from, e.to, e.weight, e.oneway});
  return RoadGraph::from_parts(std::move(raw.nodes), edges);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

CanalGraph read_canal_graph(const std::filesystem::path& path) {
  return parse_canal_graph(read_text_file(path), path.string());
}

RoadGraph read_road_graph(const std::filesystem::path& path) {
  return parse_road_graph(read_text_file(path), path.string());
}

GraphPair ingest_graphs(const std::filesystem::path& canal_file,
                        const std::filesystem::path& road_file) {
  return {read_canal_graph(canal_file), read_road_graph(road_file)};
}

json to_json(const CanalGraph& g) {
  json nodes = json::array();
  for (const GeoNode& n : g.nodes()) nodes.push_back({{"id", n.id}, {"lat", n.lat}, {"lon", n.lon}});
  json edges = json::array();
  for (const CanalEdge& e : g.edges()) {
    edges.push_back({{"from", g.node(e.a).id}, {"to", g.node(e.b).id}, {"weight_m", e.weight_m}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

json to_json(const RoadGraph& g) {
  json nodes = json::array();
  for (const GeoNode& n : g.nodes()) nodes.push_back({{"id", n.id}, {"lat", n.lat}, {"lon", n.lon}});
  json edges = json::array();
  for (const RoadEdge& e : g.edges()) {
    json je = {{"from", g.node(e.from).id}, {"to", g.node(e.to).id}, {"weight_m", e.length_m}};
    if (e.oneway) je["oneway"] = true;
    edges.push_back(std::move(je));
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

}  // namespace canalplan::graph
