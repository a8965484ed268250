#include "affect_router/emotion_layer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"

namespace affect_router {

namespace {

constexpr std::array<std::string_view, 4> kModeNames = {"fastest", "happy_linear", "happy_reciprocal",
                                                        "paper_literal"};

std::string format9(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

}  // namespace

std::string_view to_string(WeightMode mode) noexcept { return kModeNames[static_cast<std::size_t>(mode)]; }

WeightMode parse_weight_mode(std::string_view name) {
  for (std::size_t i = 0; i < kModeNames.size(); ++i) {
    if (kModeNames[i] == name) return static_cast<WeightMode>(i);
  }
  throw ParseError("unknown weight mode '" + std::string(name) + "'");
}

void WeightParams::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("lambda must be finite and >= 0");
  if (mode == WeightMode::paper_literal && !(lambda > 0.0)) throw ValidationError("paper_literal requires lambda > 0");
}

void EdgeEmotion::validate() const {
  const std::string where = "layer edge " + std::to_string(edge_id);
  if (!(e >= kHappyWeightFloor && e <= 1.0)) throw ValidationError(where + ": e outside [0.01,1]");
  if (!(c >= kHappyWeightFloor && c <= 1.0)) throw ValidationError(where + ": c outside [0.01,1]");
  if (!(base_time_s > 0.0 && std::isfinite(base_time_s))) throw ValidationError(where + ": base_time_s must be > 0");
}

EmotionLayer::EmotionLayer(std::uint64_t graph_fingerprint, std::vector<EdgeEmotion> edges, LayerMetadata metadata)
    : fingerprint_(graph_fingerprint), edges_(std::move(edges)), metadata_(std::move(metadata)) {
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (edges_[i].edge_id != i) throw ValidationError("layer: edge ids must be dense and ordered");
    edges_[i].validate();
  }
}

void EmotionLayer::check_matches(const RoadGraph& graph) const {
  if (fingerprint_ != graph.fingerprint() || edges_.size() != graph.edge_count()) {
    throw ValidationError("layer does not match graph");
  }
}

double quantize9(double value) { return std::strtod(format9(value).c_str(), nullptr); }

EmotionLayer build_layer(const RoadGraph& graph, const ProviderSet& providers, const EmotionScorer& scorer,
                         const PersonalProfile& profile, const LocalTimestamp& at, ContextCache* cache) {
  std::vector<EdgeEmotion> out;
  out.reserve(graph.edge_count());
  for (const RoadEdge& edge : graph.edges()) {
    ContextSnapshot snapshot;
    try {
      snapshot = context_for_edge(edge, providers, at, profile, cache);
    } catch (const ProviderError& e) {
      throw ProviderError(e.provider(), "edge " + std::to_string(edge.id) + ": " + e.what());
    }
    const HappyWeight hw = happy_weight(scorer.score(snapshot));
    const double base = std::max(kMinBaseTimeS, edge_travel_time(edge, &snapshot.traffic));
    out.push_back(EdgeEmotion{edge.id, quantize9(hw.e), quantize9(hw.c), quantize9(base)});
  }
  return EmotionLayer(graph.fingerprint(), std::move(out),
                      LayerMetadata{at.iso8601(), scorer.id(), providers.epoch});
}

double edge_weight(double d, double e, double c, const WeightParams& params) {
  if (!std::isfinite(d) || !std::isfinite(e) || !std::isfinite(c) || !std::isfinite(params.lambda)) {
    throw ValidationError("edge_weight: non-finite input");
  }
  if (d < 0.0) throw ValidationError("edge_weight: negative travel time");
  const double lambda = params.lambda;
  switch (params.mode) {
    case WeightMode::fastest:
      return d;
    case WeightMode::happy_linear:
      return d * (1.0 + lambda * (1.0 - e * c));
    case WeightMode::happy_reciprocal:
      return d / (1.0 + lambda * e * c);
    case WeightMode::paper_literal:
      if (!(lambda > 0.0)) throw ValidationError("paper_literal requires lambda > 0");
      return d / (lambda * e * c);
  }
  return d;
}

WeightedView::WeightedView(std::uint64_t graph_fingerprint, WeightParams params, std::vector<double> weights)
    : graph_fingerprint_(graph_fingerprint), params_(params), weights_(std::move(weights)) {
  std::string key = to_hex(graph_fingerprint_) + "|" + std::string(to_string(params_.mode)) + "|" +
                    format9(params_.lambda) + "|";
  key.append(reinterpret_cast<const char*>(weights_.data()), weights_.size() * sizeof(double));
  fingerprint_ = fnv1a64(key);
}

WeightedView apply_weights(const RoadGraph& graph, const EmotionLayer& layer, const WeightParams& params) {
  layer.check_matches(graph);
  params.validate();
  std::vector<double> weights;
  weights.reserve(layer.size());
  for (const auto& edge : layer.edges()) weights.push_back(edge_weight(edge.base_time_s, edge.e, edge.c, params));
  return WeightedView(graph.fingerprint(), params, std::move(weights));
}

WeightedView travel_time_view(const RoadGraph& graph) {
  std::vector<double> weights;
  weights.reserve(graph.edge_count());
  for (const auto& edge : graph.edges()) weights.push_back(std::max(kMinBaseTimeS, edge_travel_time(edge, nullptr)));
  return WeightedView(graph.fingerprint(), WeightParams{WeightMode::fastest, 0.0}, std::move(weights));
}

std::string layer_to_csv(const EmotionLayer& layer) {
  std::string out;
  out += "# fingerprint=" + to_hex(layer.graph_fingerprint()) + "\n";
  out += "# model=" + layer.metadata().model_id + "\n";
  out += "# built_at=" + layer.metadata().built_at + "\n";
  out += "# provider_epoch=" + std::to_string(layer.metadata().provider_epoch) + "\n";
  out += "edge_id,e,c,base_time_s\n";
  for (const auto& edge : layer.edges()) {
    out += std::to_string(edge.edge_id) + "," + format9(edge.e) + "," + format9(edge.c) + "," +
           format9(edge.base_time_s) + "\n";
  }
  return out;
}

namespace {

double parse_double_field(std::string_view text, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("layer line " + std::to_string(line_no) + ": bad number '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

EmotionLayer layer_from_csv(std::string_view text, const RoadGraph& graph) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::uint64_t> fingerprint;
  LayerMetadata metadata;
  bool header = false;
  std::vector<EdgeEmotion> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      while (!key.empty() && key.front() == ' ') key.erase(key.begin());
      const std::string value = line.substr(eq + 1);
      if (key == "fingerprint") {
        std::uint64_t fp = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), fp, 16);
        if (ec != std::errc() || ptr != value.data() + value.size()) throw ParseError("layer: bad fingerprint");
        fingerprint = fp;
      } else if (key == "model") {
        metadata.model_id = value;
      } else if (key == "built_at") {
        metadata.built_at = value;
      } else if (key == "provider_epoch") {
        metadata.provider_epoch = static_cast<std::uint64_t>(parse_double_field(value, line_no));
      }
      continue;
    }
    if (!header) {
      if (line != "edge_id,e,c,base_time_s") throw ParseError("layer: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::array<std::string_view, 4> fields;
    std::string_view rest = line;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto comma = rest.find(',');
      if ((i < 3) == (comma == std::string_view::npos)) {
        throw ParseError("layer line " + std::to_string(line_no) + ": expected 4 columns");
      }
      fields[i] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    EdgeEmotion edge;
    edge.edge_id = static_cast<EdgeId>(parse_double_field(fields[0], line_no));
    edge.e = parse_double_field(fields[1], line_no);
    edge.c = parse_double_field(fields[2], line_no);
    edge.base_time_s = parse_double_field(fields[3], line_no);
    edges.push_back(edge);
  }
  if (!fingerprint) throw ValidationError("layer: missing fingerprint");
  if (*fingerprint != graph.fingerprint()) throw ValidationError("layer does not match graph");
  if (edges.size() != graph.edge_count()) {
    throw ValidationError("layer: " + std::to_string(edges.size()) + " rows for " +
                          std::to_string(graph.edge_count()) + " edges");
  }
  return EmotionLayer(*fingerprint, std::move(edges), std::move(metadata));
}

void save_layer(const EmotionLayer& layer, const std::filesystem::path& path) { write_file(path, layer_to_csv(layer)); }

EmotionLayer load_layer(const std::filesystem::path& path, const RoadGraph& graph) {
  return layer_from_csv(read_file_maybe_gzip(path), graph);
}

}  // namespace affect_router
