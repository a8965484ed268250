#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "affect_router/road_graph.hpp"

namespace affect_router {

inline constexpr int kGraphFormatVersion = 1;

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string to_hex(std::uint64_t value);

/// Compact JSON with sorted keys; doubles are written in shortest round-trip form.
std::string canonical_graph_json(const RoadGraph& graph);
RoadGraph graph_from_json(std::string_view text);

/// Writes gzip when the path ends in ".gz", plain JSON otherwise.
void save_graph(const RoadGraph& graph, const std::filesystem::path& path);
/// Reads plain or gzip-compressed JSON.
RoadGraph load_graph(const std::filesystem::path& path);

/// Whole-file read with transparent gzip decompression.
std::string read_file_maybe_gzip(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace affect_router
