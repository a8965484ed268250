#include "affect_router/graph_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

#include "affect_router/error.hpp"

namespace affect_router {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

json point_json(const GeoPoint& p) { return json{{"lat", p.lat()}, {"lon", p.lon()}}; }

GeoPoint point_from(const json& j) { return GeoPoint(j.at("lat").get<double>(), j.at("lon").get<double>()); }

}  // namespace

std::string canonical_graph_json(const RoadGraph& graph) {
  json nodes = json::array();
  for (const auto& node : graph.nodes()) {
    nodes.push_back(json{{"id", node.id}, {"point", point_json(node.point)}});
  }
  json edges = json::array();
  for (const auto& edge : graph.edges()) {
    json geometry = json::array();
    for (const auto& p : edge.geometry) geometry.push_back(point_json(p));
    edges.push_back(json{
        {"id", edge.id},
        {"from", graph.node(edge.from).id},
        {"to", graph.node(edge.to).id},
        {"geometry", std::move(geometry)},
        {"length_m", edge.length_m},
        {"road_type", std::string(to_string(edge.road_type))},
        {"max_speed_kmh", edge.max_speed_kmh ? json(*edge.max_speed_kmh) : json(nullptr)},
        {"n_lanes", edge.n_lanes ? json(*edge.n_lanes) : json(nullptr)},
    });
  }
  json doc{{"format_version", kGraphFormatVersion}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  return doc.dump();
}

RoadGraph graph_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph file: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kGraphFormatVersion) {
      throw ValidationError("graph file: unsupported format_version");
    }
    std::vector<RoadNode> nodes;
    std::unordered_map<OsmId, NodeIndex> index;
    for (const auto& jn : doc.at("nodes")) {
      RoadNode node{jn.at("id").get<OsmId>(), point_from(jn.at("point"))};
      index.emplace(node.id, static_cast<NodeIndex>(nodes.size()));
      nodes.push_back(node);
    }
    auto resolve = [&](const json& id) {
      const auto it = index.find(id.get<OsmId>());
      if (it == index.end()) throw ValidationError("graph file: edge endpoint does not resolve");
      return it->second;
    };
    std::vector<RoadEdge> edges;
    for (const auto& je : doc.at("edges")) {
      RoadEdge edge;
      edge.id = je.at("id").get<EdgeId>();
      edge.from = resolve(je.at("from"));
      edge.to = resolve(je.at("to"));
      for (const auto& jp : je.at("geometry")) edge.geometry.push_back(point_from(jp));
      edge.length_m = je.at("length_m").get<double>();
      edge.road_type = parse_road_type(je.at("road_type").get<std::string>());
      if (!je.at("max_speed_kmh").is_null()) edge.max_speed_kmh = je["max_speed_kmh"].get<double>();
      if (!je.at("n_lanes").is_null()) edge.n_lanes = je["n_lanes"].get<int>();
      edges.push_back(std::move(edge));
    }
    return RoadGraph(std::move(nodes), std::move(edges));
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph file: ") + e.what());
  }
}

std::string read_file_maybe_gzip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("file not found: " + path.string());
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file(gzopen(path.c_str(), "rb"), &gzclose);
  if (!file) throw Error("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(file.get(), buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  if (n < 0) throw ParseError("read error in " + path.string());
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

void save_graph(const RoadGraph& graph, const std::filesystem::path& path) {
  const std::string text = canonical_graph_json(graph);
  if (path.extension() == ".gz") {
    std::unique_ptr<gzFile_s, decltype(&gzclose)> file(gzopen(path.c_str(), "wb9"), &gzclose);
    if (!file) throw Error("cannot write " + path.string());
    if (gzwrite(file.get(), text.data(), static_cast<unsigned>(text.size())) != static_cast<int>(text.size())) {
      throw Error("gzip write failed: " + path.string());
    }
    return;
  }
  write_file(path, text);
}

RoadGraph load_graph(const std::filesystem::path& path) { return graph_from_json(read_file_maybe_gzip(path)); }

}  // namespace affect_router
