#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect_router/context.hpp"
#include "affect_router/emotion_layer.hpp"
#include "affect_router/routing.hpp"

namespace affect_router {

// ---------------------------------------------------------------------------
// Geometry metrics

/// Radius of the circle through a triangle with side lengths a, b, c:
/// abc / sqrt((a+b+c)(b+c-a)(c+a-b)(a+b-c)). Infinite for degenerate
/// triangles; throws ValidationError when the triangle inequality fails.
double circumradius(double a, double b, double c);

/// Length-weighted mean curvature (1/m) over consecutive point triples.
double route_curviness(std::span<const GeoPoint> polyline);

/// Shared directed-edge length as a percentage of the longer route.
double route_overlap(const Route& r1, const Route& r2);

/// Fraction of travel time per road type; throws on an empty route.
std::map<RoadType, double> roadtype_shares(const Route& route);

// ---------------------------------------------------------------------------
// Statistics

enum class MwuMethod : std::uint8_t { automatic, exact, normal_approx };
std::string_view to_string(MwuMethod method) noexcept;

struct MwuResult {
  double u_statistic = 0.0;
  double p_value = 1.0;  // two-sided
  MwuMethod method = MwuMethod::exact;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// U counts pairs with x > y, plus one half per tie. automatic uses the exact
/// null distribution when n1 + n2 <= 16 and there are no ties, otherwise the
/// tie- and continuity-corrected normal approximation.
MwuResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                         MwuMethod method = MwuMethod::automatic);

/// Number of rank arrangements giving each U value, index 0..n1*n2.
std::vector<double> mwu_null_counts(std::size_t n1, std::size_t n2);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double bic = 0.0;  // n ln(RSS/n) + 2 ln n
  std::optional<double> slope_p_value;
  std::size_t n = 0;
};

/// Simple least squares with intercept. Throws ValidationError("degenerate regressor") for constant x.
RegressionResult ols_fit(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Simulation

struct OdPair {
  NodeIndex origin = 0;
  NodeIndex destination = 0;

  friend bool operator==(const OdPair&, const OdPair&) = default;
};

/// Uniform node draws from a seeded generator; rejects pairs closer than
/// min_separation_m or unreachable. Throws SimulationError after 50 n attempts.
std::vector<OdPair> sample_od_pairs(const RoadGraph& graph, std::size_t n, std::uint64_t seed,
                                    double min_separation_m = 1000.0);

/// Context characteristics reported per route (not used for routing).
struct EdgeCharacteristics {
  double satellite_greeness = 0.0;
  double freeflow_speed = 0.0;
  double max_speed = 0.0;
};

std::vector<EdgeCharacteristics> edge_characteristics(const RoadGraph& graph, const ProviderSet& providers,
                                                      ContextCache* cache = nullptr);

struct RouteMetrics {
  double duration_s = 0.0;
  double distance_m = 0.0;
  double mean_e = 0.0;
  double curviness = 0.0;
  double greeness = 0.0;
  double max_speed = 0.0;
  double freeflow_speed = 0.0;
  std::map<RoadType, double> shares;
};

RouteMetrics route_metrics(const Route& route, std::span<const EdgeCharacteristics> characteristics);

struct PairRow {
  OsmId origin = 0;
  OsmId destination = 0;
  RouteMetrics fastest;
  RouteMetrics happy;
  double overlap_pct = 0.0;
  bool identical = false;
};

struct DistributionSummary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

DistributionSummary summarize(std::span<const double> values);

struct CharacteristicComparison {
  std::string name;
  DistributionSummary fastest;
  DistributionSummary happy;
  MwuResult test;
};

struct RoadTypeShareRow {
  RoadType road_type = RoadType::unclassified;
  double fastest_mean_share = 0.0;
  double happy_mean_share = 0.0;
  MwuResult test;
};

struct SimulationReport {
  WeightParams params;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  double min_separation_m = 0.0;
  std::vector<PairRow> rows;
  std::size_t skipped = 0;
  std::optional<RegressionResult> regression;  // x = fastest minutes, y = happy minutes
  double mean_overlap_pct = 0.0;
  double identical_fraction = 0.0;
  std::vector<CharacteristicComparison> characteristics;
  std::vector<RoadTypeShareRow> roadtype_shares;
  std::string graph_fingerprint;
  std::string model_id;
};

struct SimulationOptions {
  double min_separation_m = 1000.0;
  /// Per-edge characteristics aligned with edge ids; zeros when empty.
  std::span<const EdgeCharacteristics> characteristics;
};

/// Fastest and happy routes (contraction hierarchy queries) for each pair.
SimulationReport simulate_pairs(const RoadGraph& graph, const EmotionLayer& layer, const WeightParams& params,
                                std::span<const OdPair> pairs, const SimulationOptions& options = {});

SimulationReport run_simulation(const RoadGraph& graph, const EmotionLayer& layer, const WeightParams& params,
                                std::size_t n, std::uint64_t seed, const SimulationOptions& options = {});

struct SweepRow {
  double lambda = 0.0;
  double mean_happy_s = 0.0;
  double mean_fastest_s = 0.0;
  double mean_overlap_pct = 0.0;
  std::size_t routes = 0;
};

/// One happy_linear pass per lambda over fixed pairs.
std::vector<SweepRow> lambda_sweep(const RoadGraph& graph, const EmotionLayer& layer, std::span<const double> lambdas,
                                   std::span<const OdPair> pairs, const SimulationOptions& options = {});

inline constexpr std::string_view kPairsCsvHeader =
    "origin,destination,fastest_s,happy_s,overlap_pct,happy_mean_e,fastest_mean_e,happy_curv,fastest_curv,"
    "happy_green,fastest_green";

std::string report_json(const SimulationReport& report);
std::string pairs_csv(const SimulationReport& report);
std::string sweep_csv(std::span<const SweepRow> rows);
/// Writes report.json and pairs.csv into dir (created if missing).
void write_report(const SimulationReport& report, const std::filesystem::path& dir);

}  // namespace affect_router
