#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "affect_router/analysis.hpp"
#include "affect_router/error.hpp"
#include "support.hpp"

using namespace affect_router;
namespace ts = testing_support;

namespace {

Route route_of(std::vector<std::tuple<EdgeId, RoadType, double, double>> edges) {
  Route r;
  for (const auto& [id, type, time, length] : edges) {
    RouteEdge e;
    e.edge_id = id;
    e.road_type = type;
    e.base_time_s = time;
    e.length_m = length;
    r.per_edge.push_back(e);
    r.path.edges.push_back(id);
    r.duration_s += time;
    r.distance_m += length;
  }
  return r;
}

}  // namespace

TEST(Circumradius, Examples) {
  EXPECT_NEAR(circumradius(3, 4, 5), 2.5, 1e-12);
  EXPECT_NEAR(circumradius(1, 1, 1), 1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_TRUE(std::isinf(circumradius(1, 1, 2)));
  EXPECT_THROW(circumradius(1, 1, 3), ValidationError);
  EXPECT_THROW(circumradius(-1, 1, 1), ValidationError);
}

TEST(Circumradius, SymmetricAndScales) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const double a = 1 + 10 * ts::unit(rng);
    const double b = 1 + 10 * ts::unit(rng);
    const double c = std::abs(a - b) + (a + b - std::abs(a - b)) * (0.05 + 0.9 * ts::unit(rng));
    const double r = circumradius(a, b, c);
    EXPECT_NEAR(circumradius(b, c, a), r, 1e-9 * r);
    EXPECT_NEAR(circumradius(c, a, b), r, 1e-9 * r);
    EXPECT_NEAR(circumradius(b, a, c), r, 1e-9 * r);
    EXPECT_NEAR(circumradius(7 * a, 7 * b, 7 * c), 7 * r, 1e-9 * r);
    // Law of sines: r = a / (2 sin A), angle from the law of cosines.
    const double angle = std::acos((b * b + c * c - a * a) / (2 * b * c));
    EXPECT_NEAR(r, a / (2 * std::sin(angle)), 1e-6 * r);
  }
}

TEST(Curviness, CircleArcHasInverseRadius) {
  const auto arc = ts::oracle::circle_arc(48.0, 11.0, 100.0, 60, std::numbers::pi);
  EXPECT_NEAR(route_curviness(arc), 0.01, 1e-4);
  const auto wide = ts::oracle::circle_arc(48.0, 11.0, 1000.0, 60, std::numbers::pi);
  EXPECT_NEAR(route_curviness(wide), 0.001, 1e-5);
}

TEST(Curviness, StraightShortAndReversed) {
  const std::vector<GeoPoint> line{GeoPoint(48.0, 11.0), GeoPoint(48.001, 11.0), GeoPoint(48.002, 11.0)};
  EXPECT_EQ(route_curviness(line), 0.0);
  EXPECT_EQ(route_curviness(std::span(line).first(2)), 0.0);
  EXPECT_EQ(route_curviness({}), 0.0);
  auto arc = ts::oracle::circle_arc(48.0, 11.0, 250.0, 17, 2.0);
  const double forward = route_curviness(arc);
  std::reverse(arc.begin(), arc.end());
  EXPECT_NEAR(route_curviness(arc), forward, 1e-12);
}

TEST(Overlap, Examples) {
  const Route a = route_of({{1, RoadType::primary, 10, 100}, {2, RoadType::primary, 10, 100}});
  const Route b = route_of({{3, RoadType::primary, 10, 100}, {4, RoadType::primary, 10, 100}});
  const Route c = route_of({{1, RoadType::primary, 10, 100}, {5, RoadType::primary, 10, 100}});
  EXPECT_EQ(route_overlap(a, a), 100.0);
  EXPECT_EQ(route_overlap(a, b), 0.0);
  EXPECT_EQ(route_overlap(a, c), 50.0);
  EXPECT_EQ(route_overlap(c, a), 50.0);
  // Shared length is divided by the longer route.
  const Route longer = route_of({{1, RoadType::primary, 10, 100}, {2, RoadType::primary, 10, 100}, {9, RoadType::primary, 10, 200}});
  EXPECT_EQ(route_overlap(a, longer), 50.0);
  EXPECT_EQ(route_overlap(longer, a), 50.0);
}

TEST(RoadTypeShares, TimeWeighted) {
  const Route r = route_of({{1, RoadType::residential, 100, 500}, {2, RoadType::primary, 300, 100}});
  const auto shares = roadtype_shares(r);
  ASSERT_EQ(shares.size(), 2u);
  EXPECT_DOUBLE_EQ(shares.at(RoadType::residential), 0.25);
  EXPECT_DOUBLE_EQ(shares.at(RoadType::primary), 0.75);
  EXPECT_THROW(roadtype_shares(Route{}), ValidationError);
}

TEST(MannWhitney, SmallExamples) {
  const std::vector<double> x{1, 2};
  const std::vector<double> y{3, 4};
  const MwuResult r = mann_whitney_u(x, y);
  EXPECT_EQ(r.u_statistic, 0.0);
  EXPECT_NEAR(r.p_value, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(r.method, MwuMethod::exact);
  EXPECT_EQ(mann_whitney_u(y, x).u_statistic, 4.0);
  EXPECT_NEAR(mann_whitney_u(y, x).p_value, 1.0 / 3.0, 1e-12);
  const std::vector<double> one{1};
  const std::vector<double> two{2};
  EXPECT_EQ(mann_whitney_u(one, two).p_value, 1.0);
}

TEST(MannWhitney, TiesCountHalf) {
  const std::vector<double> x{5, 5, 5};
  const std::vector<double> y{5, 5};
  const MwuResult r = mann_whitney_u(x, y);
  EXPECT_EQ(r.u_statistic, 3.0);
  EXPECT_EQ(r.method, MwuMethod::normal_approx);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(MannWhitney, NullCountsSumToBinomial) {
  const auto counts = mwu_null_counts(4, 3);
  ASSERT_EQ(counts.size(), 13u);
  double total = 0;
  for (double c : counts) total += c;
  EXPECT_EQ(total, 35.0);
  for (std::size_t u = 0; u < counts.size(); ++u) EXPECT_EQ(counts[u], counts[12 - u]);
  EXPECT_EQ(counts[0], 1.0);
  EXPECT_EQ(counts[1], 1.0);
  EXPECT_EQ(counts[2], 2.0);
}

TEST(MannWhitney, ExactMatchesEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n1 = 1 + rng() % 4;
    const std::size_t n2 = 1 + rng() % 4;
    std::vector<double> x;
    std::vector<double> y;
    // Integer draws give ties in some trials.
    const bool with_ties = trial % 3 == 0;
    for (std::size_t i = 0; i < n1; ++i) x.push_back(with_ties ? double(rng() % 4) : ts::unit(rng));
    for (std::size_t i = 0; i < n2; ++i) y.push_back(with_ties ? double(rng() % 4) : ts::unit(rng) + 0.2);
    double u_oracle = 0;
    const double p_oracle = ts::oracle::mwu_enumerated_p(x, y, &u_oracle);
    const MwuResult r = mann_whitney_u(x, y, with_ties ? MwuMethod::automatic : MwuMethod::exact);
    EXPECT_EQ(r.u_statistic, u_oracle);
    if (!with_ties) EXPECT_NEAR(r.p_value, p_oracle, 1e-12);
  }
}

TEST(MannWhitney, NormalApproximationCloseToExactAtFifteen) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 15; ++i) x.push_back(ts::unit(rng));
    for (int i = 0; i < 15; ++i) y.push_back(ts::unit(rng) + 0.1 * (trial % 5));
    const double exact = mann_whitney_u(x, y, MwuMethod::exact).p_value;
    const double normal = mann_whitney_u(x, y, MwuMethod::normal_approx).p_value;
    EXPECT_NEAR(normal, exact, 0.01);
  }
}

TEST(MannWhitney, EmptySampleIsRejected) {
  const std::vector<double> x{1, 2};
  EXPECT_THROW(mann_whitney_u(x, std::vector<double>{}), ValidationError);
}

TEST(Ols, Examples) {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{0, 2, 3, 5};
  const RegressionResult r = ols_fit(x, y);
  EXPECT_NEAR(r.slope, 1.6, 1e-12);
  EXPECT_NEAR(r.intercept, 0.1, 1e-12);
  EXPECT_NEAR(r.r_squared, 0.98461538461538, 1e-12);
  const double rss = 0.2;
  EXPECT_NEAR(r.bic, 4 * std::log(rss / 4) + 2 * std::log(4.0), 1e-9);
  ASSERT_TRUE(r.slope_p_value.has_value());
  EXPECT_LT(*r.slope_p_value, 0.01);

  const std::vector<double> exact_y{1, 3, 5, 7};
  const RegressionResult line = ols_fit(x, exact_y);
  EXPECT_DOUBLE_EQ(line.slope, 2.0);
  EXPECT_DOUBLE_EQ(line.intercept, 1.0);
  EXPECT_DOUBLE_EQ(line.r_squared, 1.0);
}

TEST(Ols, ConstantResponseAndDegenerateRegressor) {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> flat{4, 4, 4};
  const RegressionResult r = ols_fit(x, flat);
  EXPECT_EQ(r.slope, 0.0);
  EXPECT_EQ(r.intercept, 4.0);
  EXPECT_THROW(ols_fit(flat, x), ValidationError);
  EXPECT_THROW(ols_fit(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST(Ols, MatchesNormalEquations) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x;
    std::vector<double> y;
    const std::size_t n = 3 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(10 * ts::unit(rng));
      y.push_back(3 * x.back() - 2 + ts::unit(rng));
    }
    const auto expected = ts::oracle::ols_normal_equations(x, y);
    const RegressionResult r = ols_fit(x, y);
    EXPECT_NEAR(r.slope, expected.slope, 1e-9);
    EXPECT_NEAR(r.intercept, expected.intercept, 1e-9);
    EXPECT_NEAR(r.r_squared, expected.r_squared, 1e-9);
  }
}

TEST(Summary, Examples) {
  const std::vector<double> v{4, 1, 3, 2};
  const auto s = summarize(v);
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_EQ(s.median, 2.5);
  EXPECT_NEAR(s.sd, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 4.0);
  const std::vector<double> odd{5, 1, 3};
  EXPECT_EQ(summarize(odd).median, 3.0);
}

TEST(OdSampling, DeterministicAndValid) {
  const RoadGraph g = ts::random_graph(300, 31);
  const auto a = sample_od_pairs(g, 50, 7, 500.0);
  EXPECT_EQ(a, sample_od_pairs(g, 50, 7, 500.0));
  EXPECT_NE(a, sample_od_pairs(g, 50, 8, 500.0));
  const WeightedView w = travel_time_view(g);
  for (const auto& p : a) {
    EXPECT_NE(p.origin, p.destination);
    EXPECT_GE(haversine(g.node(p.origin).point, g.node(p.destination).point), 500.0);
    EXPECT_NO_THROW(dijkstra(g, w, p.origin, p.destination));
  }
  EXPECT_TRUE(sample_od_pairs(g, 0, 7).empty());
}

TEST(OdSampling, ImpossibleSeparationExhaustsBudget) {
  std::vector<RoadNode> nodes{{1, GeoPoint(48.0, 11.0)}, {2, GeoPoint(48.001, 11.0)}};
  const RoadGraph g(nodes, {ts::straight_edge(nodes, 0, 0, 1), ts::straight_edge(nodes, 1, 1, 0)});
  EXPECT_THROW(sample_od_pairs(g, 3, 1, 1000.0), SimulationError);
  EXPECT_EQ(sample_od_pairs(g, 3, 1, 10.0).size(), 3u);
}

TEST(Simulation, ConstantLayerGivesIdentityRegression) {
  const RoadGraph g = ts::random_graph(400, 32);
  const EmotionLayer layer = ts::constant_layer(g, 0.5, 0.5);
  const auto report = run_simulation(g, layer, {WeightMode::happy_linear, 20.0}, 40, 3, {500.0, {}});
  ASSERT_EQ(report.rows.size(), 40u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.overlap_pct, 100.0);
    EXPECT_TRUE(row.identical);
    EXPECT_EQ(row.happy.duration_s, row.fastest.duration_s);
  }
  ASSERT_TRUE(report.regression.has_value());
  EXPECT_EQ(report.regression->slope, 1.0);
  EXPECT_EQ(report.regression->intercept, 0.0);
  EXPECT_EQ(report.identical_fraction, 1.0);
}

TEST(Simulation, TriangleDetourIsTakenWhenHappier) {
  // Direct edge 0->2 is unhappy; the path via 1 is slightly longer and happy.
  std::vector<RoadNode> nodes{{1, GeoPoint(48.000, 11.000)}, {2, GeoPoint(48.010, 11.003)}, {3, GeoPoint(48.020, 11.000)}};
  const RoadGraph g(nodes, {ts::straight_edge(nodes, 0, 0, 1), ts::straight_edge(nodes, 1, 1, 2), ts::straight_edge(nodes, 2, 0, 2)});
  std::vector<EdgeEmotion> rows;
  for (const auto& edge : g.edges()) {
    const double e = edge.id == 2 ? 0.1 : 1.0;
    rows.push_back({edge.id, e, 1.0, quantize9(edge_travel_time(edge, nullptr))});
  }
  const EmotionLayer layer(g.fingerprint(), rows, {});
  const std::vector<OdPair> pairs{{0, 2}};
  const auto report = simulate_pairs(g, layer, {WeightMode::happy_linear, 20.0}, pairs, {100.0, {}});
  ASSERT_EQ(report.rows.size(), 1u);
  const auto& row = report.rows[0];
  EXPECT_EQ(row.overlap_pct, 0.0);
  EXPECT_FALSE(row.identical);
  EXPECT_GT(row.happy.duration_s, row.fastest.duration_s);
  EXPECT_DOUBLE_EQ(row.happy.mean_e, 1.0);
  EXPECT_DOUBLE_EQ(row.fastest.mean_e, 0.1);
  EXPECT_FALSE(report.regression.has_value());
}

TEST(Simulation, ReportIsByteStable) {
  const RoadGraph g = ts::random_graph(300, 33);
  const EmotionLayer layer = ts::random_layer(g, 34);
  const WeightParams params{WeightMode::happy_linear, 20.0};
  const auto a = run_simulation(g, layer, params, 30, 9, {500.0, {}});
  const auto b = run_simulation(g, layer, params, 30, 9, {500.0, {}});
  EXPECT_EQ(report_json(a), report_json(b));
  EXPECT_EQ(pairs_csv(a), pairs_csv(b));
  EXPECT_EQ(pairs_csv(a).substr(0, kPairsCsvHeader.size()), kPairsCsvHeader);
  const auto json = nlohmann::json::parse(report_json(a));
  EXPECT_EQ(json["config"]["seed"], 9);
  EXPECT_EQ(json["n"], 30);
}

TEST(Simulation, HappyRoutesAreNeverFaster) {
  const RoadGraph g = ts::random_graph(400, 35);
  const EmotionLayer layer = ts::random_layer(g, 36);
  const auto report = run_simulation(g, layer, {WeightMode::happy_linear, 20.0}, 50, 4, {500.0, {}});
  for (const auto& row : report.rows) {
    EXPECT_GE(row.happy.duration_s, row.fastest.duration_s - 1e-9 * row.fastest.duration_s);
    EXPECT_GE(row.happy.mean_e, 0.0);
  }
  EXPECT_EQ(report.characteristics.size(), 7u);
}

TEST(Sweep, MonotoneAndZeroEqualsFastest) {
  const RoadGraph g = ts::random_graph(400, 37);
  const EmotionLayer layer = ts::random_layer(g, 38);
  const auto pairs = sample_od_pairs(g, 40, 5, 500.0);
  const std::vector<double> lambdas{0, 1, 5, 20, 40, 100};
  const auto rows = lambda_sweep(g, layer, lambdas, pairs, {500.0, {}});
  ASSERT_EQ(rows.size(), lambdas.size());
  EXPECT_EQ(rows[0].mean_happy_s, rows[0].mean_fastest_s);
  EXPECT_EQ(rows[0].mean_overlap_pct, 100.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i].mean_happy_s, rows[i - 1].mean_happy_s - 1e-9 * rows[i].mean_happy_s);
    EXPECT_EQ(rows[i].mean_fastest_s, rows[0].mean_fastest_s);
    EXPECT_EQ(rows[i].routes, 40u);
  }
  EXPECT_TRUE(lambda_sweep(g, layer, std::vector<double>{}, pairs).empty());
  EXPECT_THROW(lambda_sweep(g, layer, lambdas, std::vector<OdPair>{}), ValidationError);
  const std::vector<double> negative{-1};
  EXPECT_THROW(lambda_sweep(g, layer, negative, pairs), ValidationError);
  EXPECT_EQ(sweep_csv(rows).substr(0, 54), "lambda,mean_happy_s,mean_fastest_s,mean_overlap_pct,ro");
}
