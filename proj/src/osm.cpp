#include "affect_router/osm.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "affect_router/error.hpp"

namespace affect_router {

namespace {

struct RawWay {
  OsmId id = 0;
  std::vector<OsmId> refs;
  std::unordered_map<std::string, std::string> tags;
};

struct ParserState {
  std::unordered_map<OsmId, GeoPoint> node_points;
  std::vector<RawWay> ways;
  bool in_way = false;
  RawWay current;
  std::string error;
  XML_Parser parser = nullptr;
};

const char* attribute(const XML_Char** attrs, const char* name) {
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
  }
  return nullptr;
}

template <typename T>
bool parse_number(const char* text, T& out) {
  if (text == nullptr) return false;
  const char* end = text + std::strlen(text);
  auto [ptr, ec] = std::from_chars(text, end, out);
  return ec == std::errc() && ptr == end;
}

void fail(ParserState& state, const std::string& message) {
  if (state.error.empty()) {
    state.error = message + " at line " + std::to_string(XML_GetCurrentLineNumber(state.parser));
  }
  XML_StopParser(state.parser, XML_FALSE);
}

void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  auto& state = *static_cast<ParserState*>(data);
  if (std::strcmp(name, "node") == 0) {
    OsmId id = 0;
    double lat = 0.0;
    double lon = 0.0;
    if (!parse_number(attribute(attrs, "id"), id) || !parse_number(attribute(attrs, "lat"), lat) ||
        !parse_number(attribute(attrs, "lon"), lon)) {
      fail(state, "node without valid id/lat/lon");
      return;
    }
    try {
      state.node_points.insert_or_assign(id, GeoPoint(lat, lon));
    } catch (const ValidationError& e) {
      fail(state, e.what());
    }
  } else if (std::strcmp(name, "way") == 0) {
    state.in_way = true;
    state.current = RawWay{};
    if (!parse_number(attribute(attrs, "id"), state.current.id)) fail(state, "way without valid id");
  } else if (state.in_way && std::strcmp(name, "nd") == 0) {
    OsmId ref = 0;
    if (!parse_number(attribute(attrs, "ref"), ref)) {
      fail(state, "nd without valid ref");
      return;
    }
    state.current.refs.push_back(ref);
  } else if (state.in_way && std::strcmp(name, "tag") == 0) {
    const char* k = attribute(attrs, "k");
    const char* v = attribute(attrs, "v");
    if (k != nullptr && v != nullptr) state.current.tags[k] = v;
  }
}

void on_end(void* data, const XML_Char* name) {
  auto& state = *static_cast<ParserState*>(data);
  if (std::strcmp(name, "way") == 0 && state.in_way) {
    state.in_way = false;
    state.ways.push_back(std::move(state.current));
  }
}

std::optional<int> parse_lanes(std::string_view value) {
  int lanes = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), lanes);
  if (ec != std::errc() || ptr != value.data() + value.size() || lanes <= 0) return std::nullopt;
  return lanes;
}

Oneway parse_oneway(std::string_view value) {
  if (value == "yes" || value == "true" || value == "1") return Oneway::forward;
  if (value == "-1" || value == "reverse") return Oneway::reverse;
  return Oneway::no;
}

}  // namespace

std::optional<double> parse_maxspeed(std::string_view value) noexcept {
  while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  double speed = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), speed);
  if (ec != std::errc() || !(speed > 0.0)) return std::nullopt;
  std::string_view unit(ptr, static_cast<std::size_t>(value.data() + value.size() - ptr));
  while (!unit.empty() && unit.front() == ' ') unit.remove_prefix(1);
  if (unit.empty() || unit == "km/h" || unit == "kmh" || unit == "kph") return speed;
  if (unit == "mph") return speed * 1.609344;
  return std::nullopt;
}

RoadNetworkSource parse_osm_xml(std::string_view document) {
  ParserState state;
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate(nullptr),
                                                                     &XML_ParserFree);
  if (!parser) throw Error("cannot allocate XML parser");
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), on_start, on_end);

  const auto status =
      XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE);
  if (!state.error.empty()) throw ParseError("OSM XML: " + state.error);
  if (status != XML_STATUS_OK) {
    throw ParseError(std::string("OSM XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())) +
                     " at line " + std::to_string(XML_GetCurrentLineNumber(parser.get())));
  }

  RoadNetworkSource source;
  std::unordered_set<OsmId> used;
  for (auto& raw : state.ways) {
    const auto highway = raw.tags.find("highway");
    if (highway == raw.tags.end()) continue;
    const auto missing = std::find_if(raw.refs.begin(), raw.refs.end(),
                                      [&](OsmId ref) { return !state.node_points.contains(ref); });
    if (missing != raw.refs.end()) {
      source.warnings.push_back("way " + std::to_string(raw.id) + " references missing node " +
                                std::to_string(*missing) + "; dropped");
      continue;
    }
    if (raw.refs.size() < 2) {
      source.warnings.push_back("way " + std::to_string(raw.id) + " has fewer than 2 nodes; dropped");
      continue;
    }
    SourceWay way;
    way.id = raw.id;
    way.node_refs = std::move(raw.refs);
    way.road_type = road_type_from_highway(highway->second);
    if (auto it = raw.tags.find("maxspeed"); it != raw.tags.end()) way.max_speed_kmh = parse_maxspeed(it->second);
    if (auto it = raw.tags.find("lanes"); it != raw.tags.end()) way.n_lanes = parse_lanes(it->second);
    if (auto it = raw.tags.find("oneway"); it != raw.tags.end()) way.oneway = parse_oneway(it->second);
    used.insert(way.node_refs.begin(), way.node_refs.end());
    source.ways.push_back(std::move(way));
  }

  std::vector<OsmId> ids(used.begin(), used.end());
  std::sort(ids.begin(), ids.end());
  source.nodes.reserve(ids.size());
  for (OsmId id : ids) source.nodes.push_back(SourceNode{id, state.node_points.at(id)});
  return source;
}

RoadGraph build_graph(const RoadNetworkSource& source, const SpeedDefaults& defaults) {
  if (source.ways.empty()) throw ValidationError("empty network");

  std::unordered_map<OsmId, GeoPoint> points;
  for (const auto& node : source.nodes) points.emplace(node.id, node.point);

  // Drop consecutive duplicate refs, then count how many times each node is used.
  std::vector<std::vector<OsmId>> refs_per_way;
  refs_per_way.reserve(source.ways.size());
  std::unordered_map<OsmId, int> use_count;
  for (const auto& way : source.ways) {
    std::vector<OsmId> refs;
    for (OsmId ref : way.node_refs) {
      if (!points.contains(ref)) {
        throw ValidationError("way " + std::to_string(way.id) + " references unknown node " +
                              std::to_string(ref));
      }
      if (refs.empty() || refs.back() != ref) refs.push_back(ref);
    }
    for (OsmId ref : refs) ++use_count[ref];
    refs_per_way.push_back(std::move(refs));
  }

  std::unordered_set<OsmId> junctions;
  for (const auto& refs : refs_per_way) {
    if (refs.size() < 2) continue;
    junctions.insert(refs.front());
    junctions.insert(refs.back());
    for (OsmId ref : refs) {
      if (use_count[ref] >= 2) junctions.insert(ref);
    }
  }

  std::vector<OsmId> node_ids(junctions.begin(), junctions.end());
  std::sort(node_ids.begin(), node_ids.end());
  std::vector<RoadNode> nodes;
  std::unordered_map<OsmId, NodeIndex> index;
  nodes.reserve(node_ids.size());
  for (OsmId id : node_ids) {
    index.emplace(id, static_cast<NodeIndex>(nodes.size()));
    nodes.push_back(RoadNode{id, points.at(id)});
  }

  std::vector<RoadEdge> edges;
  auto add_edge = [&](OsmId from, OsmId to, std::vector<GeoPoint> geometry, const SourceWay& way) {
    RoadEdge edge;
    edge.id = static_cast<EdgeId>(edges.size());
    edge.from = index.at(from);
    edge.to = index.at(to);
    edge.length_m = polyline_length(geometry);
    edge.geometry = std::move(geometry);
    edge.road_type = way.road_type;
    edge.max_speed_kmh = way.max_speed_kmh.value_or(defaults[way.road_type]);
    edge.n_lanes = way.n_lanes.value_or(1);
    edges.push_back(std::move(edge));
  };

  for (std::size_t w = 0; w < source.ways.size(); ++w) {
    const SourceWay& way = source.ways[w];
    const auto& refs = refs_per_way[w];
    if (refs.size() < 2) continue;
    std::size_t start = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
      if (!junctions.contains(refs[i])) continue;
      std::vector<GeoPoint> geometry;
      for (std::size_t k = start; k <= i; ++k) geometry.push_back(points.at(refs[k]));
      if (way.oneway != Oneway::reverse) add_edge(refs[start], refs[i], geometry, way);
      if (way.oneway != Oneway::forward) {
        std::reverse(geometry.begin(), geometry.end());
        add_edge(refs[i], refs[start], std::move(geometry), way);
      }
      start = i;
    }
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

}  // namespace affect_router
