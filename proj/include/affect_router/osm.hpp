#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affect_router/road_graph.hpp"

namespace affect_router {

enum class Oneway : std::uint8_t { no, forward, reverse };

struct SourceNode {
  OsmId id = 0;
  GeoPoint point;

  friend bool operator==(const SourceNode&, const SourceNode&) = default;
};

struct SourceWay {
  OsmId id = 0;
  std::vector<OsmId> node_refs;
  RoadType road_type = RoadType::unclassified;
  std::optional<double> max_speed_kmh;
  std::optional<int> n_lanes;
  Oneway oneway = Oneway::no;

  friend bool operator==(const SourceWay&, const SourceWay&) = default;
};

/// Highway ways and the nodes they reference, as read from an OSM extract.
struct RoadNetworkSource {
  std::vector<SourceNode> nodes;
  std::vector<SourceWay> ways;
  std::vector<std::string> warnings;

  friend bool operator==(const RoadNetworkSource&, const RoadNetworkSource&) = default;
};

/// Parses OSM XML. Ways without a highway tag are dropped, as are ways that
/// reference a missing node (with a warning). Throws ParseError with the
/// offending line on malformed XML.
RoadNetworkSource parse_osm_xml(std::string_view document);

/// Parses an OSM maxspeed value ("50", "30 mph"); nullopt for "none", "signals", etc.
std::optional<double> parse_maxspeed(std::string_view value) noexcept;

/// Splits ways at junctions and materializes a directed graph. Nodes are
/// ordered by OSM id; edges follow way order, forward edge before reverse.
RoadGraph build_graph(const RoadNetworkSource& source, const SpeedDefaults& defaults = {});

}  // namespace affect_router
