#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <numeric>

#include "affect_router/emotion_layer.hpp"
#include "affect_router/emotion_model.hpp"
#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"
#include "support.hpp"

using namespace affect_router;
namespace ts = testing_support;

namespace {

ContextSnapshot table_row() {
  ContextSnapshot s;
  s.weather = {13.0, 5.6, 76.0, WeatherTerm::clear};
  s.traffic = {115.0, 7.295495};
  s.road_type = RoadType::residential;
  s.max_speed = 120.0;
  s.n_lanes = 2;
  s.satellite_greeness = 0.2;
  s.daytime = Daytime::afternoon;
  s.personal = {21, Emotion::happy};
  return s;
}

ClassProbabilities delta(Emotion e) {
  ClassProbabilities p{};
  p[static_cast<std::size_t>(e)] = 1.0;
  return p;
}

DecisionForest single_leaf_forest(ClassProbabilities p) {
  DecisionForest f;
  f.trees.push_back(DecisionTree{{LeafNode{p}}});
  return f;
}

RoadGraph two_edge_graph() {
  std::vector<RoadNode> nodes{{1, GeoPoint(48.0, 11.0)}, {2, GeoPoint(48.001, 11.0)}};
  return RoadGraph(nodes, {ts::straight_edge(nodes, 0, 0, 1), ts::straight_edge(nodes, 1, 1, 0)});
}

}  // namespace

TEST(EncodeFeatures, TableRowInSchemaOrder) {
  const FeatureVector fv = encode_features(table_row());
  ASSERT_EQ(fv.values.size(), kFeatureCount);
  ASSERT_EQ(kFeatureCount, 35u);
  const std::vector<double> numeric{13.0, 5.6, 76.0, 7.295495, 115.0, 120.0, 2.0, 0.2, 21.0};
  for (std::size_t i = 0; i < numeric.size(); ++i) EXPECT_EQ(fv.values[i], numeric[i]) << feature_names()[i];
  EXPECT_EQ(feature_names()[0], "feeltemp_outside");
  EXPECT_EQ(feature_names()[8], "age");
  // weather_term=clear is the first of five.
  EXPECT_EQ((std::vector<double>(fv.values.begin() + 9, fv.values.begin() + 14)),
            (std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_EQ(fv.values[kRoadTypeOffset + static_cast<std::size_t>(RoadType::residential)], 1.0);
  EXPECT_EQ(fv.values[kDaytimeOffset + static_cast<std::size_t>(Daytime::afternoon)], 1.0);
  EXPECT_EQ(fv.values[kBeforeEmotionOffset + static_cast<std::size_t>(Emotion::happy)], 1.0);
}

TEST(EncodeFeatures, OneHotGroupsSumToOneAndDeterministic) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    ContextSnapshot s = table_row();
    s.weather.weather_term = static_cast<WeatherTerm>(rng() % kWeatherTermCount);
    s.road_type = static_cast<RoadType>(rng() % kRoadTypeCount);
    s.daytime = static_cast<Daytime>(rng() % kDaytimeCount);
    s.personal.before_emotion = static_cast<Emotion>(rng() % kEmotionCount);
    const auto fv = encode_features(s);
    EXPECT_EQ(fv, encode_features(ContextSnapshot(s)));
    auto group = [&](std::size_t off, std::size_t n) {
      return std::accumulate(fv.values.begin() + off, fv.values.begin() + off + n, 0.0);
    };
    EXPECT_EQ(group(kWeatherTermOffset, kWeatherTermCount), 1.0);
    EXPECT_EQ(group(kRoadTypeOffset, kRoadTypeCount), 1.0);
    EXPECT_EQ(group(kDaytimeOffset, kDaytimeCount), 1.0);
    EXPECT_EQ(group(kBeforeEmotionOffset, kEmotionCount), 1.0);
  }
}

TEST(EncodeFeatures, UnknownSpeedAndLanesUseDefaults) {
  ContextSnapshot s = table_row();
  s.road_type = RoadType::secondary;
  s.max_speed.reset();
  s.n_lanes.reset();
  const auto fv = encode_features(s);
  EXPECT_EQ(fv.values[static_cast<std::size_t>(NumericFeature::max_speed)], 70.0);
  EXPECT_EQ(fv.values[static_cast<std::size_t>(NumericFeature::n_lanes)], 1.0);
}

TEST(Predict, SingleUniformLeaf) {
  ClassProbabilities u;
  u.fill(0.125);
  const auto d = predict_distribution(single_leaf_forest(u), encode_features(table_row()));
  for (double p : d.p) EXPECT_EQ(p, 0.125);
}

TEST(Predict, AveragesTwoDeltaTrees) {
  DecisionForest f = single_leaf_forest(delta(Emotion::happy));
  f.trees.push_back(DecisionTree{{LeafNode{delta(Emotion::neutral)}}});
  const auto d = predict_distribution(f, encode_features(table_row()));
  EXPECT_EQ(d[Emotion::happy], 0.5);
  EXPECT_EQ(d[Emotion::neutral], 0.5);
  EXPECT_EQ(d[Emotion::sad], 0.0);
}

TEST(Predict, DepthOneSplitOnGreeness) {
  ClassProbabilities left{0.6, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05, 0.0};
  ClassProbabilities right = delta(Emotion::surprise);
  DecisionForest f;
  const auto g = static_cast<std::uint32_t>(NumericFeature::satellite_greeness);
  f.trees.push_back(DecisionTree{{SplitNode{g, 0.5, 1, 2}, LeafNode{left}, LeafNode{right}}});
  EXPECT_EQ(predict_distribution(f, encode_features(table_row())).p, left);
  ContextSnapshot green = table_row();
  green.satellite_greeness = 0.5;  // equal to threshold goes left
  EXPECT_EQ(predict_distribution(f, encode_features(green)).p, left);
  green.satellite_greeness = 0.51;
  EXPECT_EQ(predict_distribution(f, encode_features(green)).p, right);
}

TEST(Predict, FuzzedForestsMatchTracedLeaves) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const DecisionForest forest = ts::random_forest(rng);
    ASSERT_NO_THROW(forest.validate());
    const FeatureVector v = ts::random_features(rng);
    const auto doc = nlohmann::json::parse(save_model(forest));
    std::vector<double> expected(kEmotionCount, 0.0);
    for (const auto& tree : doc["trees"]) {
      const auto p = ts::oracle::trace_tree_json(tree, {v.values.begin(), v.values.end()});
      for (std::size_t k = 0; k < kEmotionCount; ++k) expected[k] += p[k];
    }
    const EmotionDistribution got = predict_distribution(forest, v);
    double sum = 0.0;
    for (std::size_t k = 0; k < kEmotionCount; ++k) {
      EXPECT_NEAR(got.p[k], expected[k] / static_cast<double>(forest.trees.size()), 1e-12);
      sum += got.p[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Predict, SchemaMismatchIsError) {
  DecisionForest f = single_leaf_forest(delta(Emotion::happy));
  FeatureVector fv = encode_features(table_row());
  fv.schema_version = 2;
  EXPECT_THROW(predict_distribution(f, fv), ValidationError);
}

TEST(HappyWeight, Examples) {
  const auto d = happy_weight(EmotionDistribution::delta(Emotion::happy));
  EXPECT_EQ(d.e, 1.0);
  EXPECT_EQ(d.c, 1.0);
  const auto u = happy_weight(EmotionDistribution::uniform());
  EXPECT_EQ(u.e, 0.125);
  EXPECT_EQ(u.c, 0.125);
  const auto z = happy_weight(EmotionDistribution::delta(Emotion::sad));
  EXPECT_EQ(z.e, 0.01);
  EXPECT_EQ(z.c, 1.0);
}

TEST(HappyWeight, MonotoneAndBounded) {
  double prev_e = 0.0;
  for (int k = 0; k <= 100; ++k) {
    EmotionDistribution d;
    const double ph = k / 100.0;
    d.p.fill((1.0 - ph) / 7.0);
    d.p[0] = ph;
    const auto w = happy_weight(d);
    EXPECT_GE(w.e, prev_e);
    EXPECT_GE(w.e, 0.01);
    EXPECT_LE(w.e, 1.0);
    EXPECT_GE(w.c, 0.01);
    EXPECT_LE(w.c, 1.0);
    prev_e = w.e;
  }
}

TEST(ModelFormat, RoundTrip) {
  const DecisionForest demo = load_model_file(ts::data_dir() / "demo" / "model-demo.json");
  EXPECT_EQ(demo.trees.size(), 3u);
  EXPECT_EQ(load_model(save_model(demo)), demo);
  EXPECT_EQ(save_model(load_model(save_model(demo))), save_model(demo));
  EXPECT_EQ(demo.id(), load_model(save_model(demo)).id());
}

TEST(ModelFormat, RejectsBadLeafSum) {
  auto doc = nlohmann::json::parse(save_model(single_leaf_forest(delta(Emotion::happy))));
  doc["trees"][0][0]["leaf"]["p"] = {0.9, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_THROW(load_model(doc.dump()), ValidationError);
}

TEST(ModelFormat, RejectsCycle) {
  nlohmann::json tree = nlohmann::json::array();
  tree.push_back({{"split", {{"f", 0}, {"t", 1.0}, {"l", 1}, {"r", 2}}}});
  tree.push_back({{"split", {{"f", 1}, {"t", 1.0}, {"l", 0}, {"r", 2}}}});
  tree.push_back({{"leaf", {{"p", {1, 0, 0, 0, 0, 0, 0, 0}}}}});
  auto doc = nlohmann::json::parse(save_model(single_leaf_forest(delta(Emotion::happy))));
  doc["trees"][0] = tree;
  EXPECT_THROW(load_model(doc.dump()), ValidationError);
}

TEST(ModelFormat, RejectsStructuralErrors) {
  auto base = nlohmann::json::parse(save_model(single_leaf_forest(delta(Emotion::happy))));
  auto bad_feature = base;
  bad_feature["trees"][0] = nlohmann::json::array(
      {{{"split", {{"f", 35}, {"t", 1.0}, {"l", 1}, {"r", 1}}}}, {{"leaf", {{"p", {1, 0, 0, 0, 0, 0, 0, 0}}}}}});
  EXPECT_THROW(load_model(bad_feature.dump()), ValidationError);
  auto bad_child = base;
  bad_child["trees"][0] = nlohmann::json::array({{{"split", {{"f", 0}, {"t", 1.0}, {"l", 1}, {"r", 9}}}},
                                                 {{"leaf", {{"p", {1, 0, 0, 0, 0, 0, 0, 0}}}}}});
  EXPECT_THROW(load_model(bad_child.dump()), ValidationError);
  auto labels = base;
  labels["class_labels"][0] = "joy";
  EXPECT_THROW(load_model(labels.dump()), ValidationError);
  auto no_trees = base;
  no_trees["trees"] = nlohmann::json::array();
  EXPECT_THROW(load_model(no_trees.dump()), ValidationError);
  EXPECT_THROW(load_model("{"), ParseError);
}

TEST(Heuristic, FormulaExamples) {
  ContextSnapshot s = table_row();
  s.satellite_greeness = 1.0;
  s.traffic = {100.0, 0.0};
  s.road_type = RoadType::residential;
  s.weather.weather_term = WeatherTerm::clear;
  EXPECT_NEAR(heuristic_scorer(s)[Emotion::happy], 0.90, 1e-12);
  s.satellite_greeness = 0.0;
  s.traffic = {1e-9, 0.0};
  s.road_type = RoadType::primary;
  s.weather.weather_term = WeatherTerm::rain;
  EXPECT_NEAR(heuristic_scorer(s)[Emotion::happy], 0.05, 1e-9);
}

TEST(Heuristic, AlwaysValidDistribution) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    ContextSnapshot s = table_row();
    s.satellite_greeness = ts::unit(rng);
    s.traffic.freeflow_speed = 1 + 150 * ts::unit(rng);
    s.traffic.reducedspeed = 0;
    s.road_type = static_cast<RoadType>(rng() % kRoadTypeCount);
    s.weather.weather_term = static_cast<WeatherTerm>(rng() % kWeatherTermCount);
    const auto d = heuristic_scorer(s);
    EXPECT_NO_THROW(d.validate());
    const double base = d[Emotion::happy];
    EXPECT_NEAR(d[Emotion::neutral], 0.7 * (1 - base), 1e-12);
    EXPECT_NEAR(d[Emotion::sad], 0.3 * (1 - base) / 6, 1e-12);
  }
}

TEST(EdgeWeight, Examples) {
  EXPECT_EQ(edge_weight(100, 0.3, 0.7, {WeightMode::happy_linear, 0.0}), 100.0);
  EXPECT_DOUBLE_EQ(edge_weight(100, 0.5, 0.5, {WeightMode::happy_linear, 20.0}), 1600.0);
  EXPECT_NEAR(edge_weight(100, 1.0, 1.0, {WeightMode::happy_reciprocal, 20.0}), 4.761905, 1e-6);
  EXPECT_EQ(edge_weight(100, 0.3, 0.7, {WeightMode::fastest, 20.0}), 100.0);
  EXPECT_DOUBLE_EQ(edge_weight(100, 0.5, 0.5, {WeightMode::paper_literal, 20.0}), 20.0);
  EXPECT_THROW(edge_weight(std::nan(""), 0.5, 0.5, {}), ValidationError);
  EXPECT_THROW(edge_weight(100, 0.5, 0.5, {WeightMode::paper_literal, 0.0}), ValidationError);
  EXPECT_THROW((WeightParams{WeightMode::paper_literal, 0.0}.validate()), ValidationError);
  EXPECT_THROW((WeightParams{WeightMode::happy_linear, -1.0}.validate()), ValidationError);
  EXPECT_THROW((WeightParams{WeightMode::happy_linear, INFINITY}.validate()), ValidationError);
}

TEST(EdgeWeight, Properties) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 5000; ++i) {
    const double d = 0.001 + 1000 * ts::unit(rng);
    const double e = 0.01 + 0.99 * ts::unit(rng);
    const double c = 0.01 + 0.99 * ts::unit(rng);
    const double lambda = 100 * ts::unit(rng);
    const double lin = edge_weight(d, e, c, {WeightMode::happy_linear, lambda});
    const double rec = edge_weight(d, e, c, {WeightMode::happy_reciprocal, lambda});
    EXPECT_GT(lin, 0.0);
    EXPECT_GT(rec, 0.0);
    EXPECT_GE(lin, d);
    EXPECT_LE(rec, d);
    if (e * c < 1.0) EXPECT_GT(edge_weight(d, e, c, {WeightMode::happy_linear, lambda + 0.5}), lin);
    // Non-increasing in e*c.
    const double e2 = std::min(1.0, e * 1.1);
    for (auto mode : {WeightMode::happy_linear, WeightMode::happy_reciprocal, WeightMode::paper_literal}) {
      const WeightParams p{mode, lambda + 0.1};
      EXPECT_LE(edge_weight(d, e2, c, p), edge_weight(d, e, c, p));
    }
  }
}

TEST(EdgeWeight, QuotientModeRatiosAreLambdaInvariant) {
  const double w1 = edge_weight(100, 0.3, 0.6, {WeightMode::paper_literal, 1.0});
  const double w2 = edge_weight(40, 0.9, 0.9, {WeightMode::paper_literal, 1.0});
  for (double lambda : {0.5, 1.0, 20.0, 100.0}) {
    const double a = edge_weight(100, 0.3, 0.6, {WeightMode::paper_literal, lambda});
    const double b = edge_weight(40, 0.9, 0.9, {WeightMode::paper_literal, lambda});
    EXPECT_NEAR(a / b, w1 / w2, 1e-12 * (w1 / w2));
  }
}

TEST(BuildLayer, DeltaHappyForestGivesOnes) {
  const RoadGraph g = two_edge_graph();
  const EmotionScorer scorer(std::make_shared<const DecisionForest>(single_leaf_forest(delta(Emotion::happy))));
  const auto layer = build_layer(g, ProviderSet::constant({}, {}, 0.4), scorer, {}, LocalTimestamp{});
  ASSERT_EQ(layer.size(), 2u);
  for (const auto& row : layer.edges()) {
    EXPECT_EQ(row.e, 1.0);
    EXPECT_EQ(row.c, 1.0);
  }
}

TEST(BuildLayer, HeuristicMatchesFormula) {
  const RoadGraph g = two_edge_graph();
  const WeatherInfo w{13.0, 5.6, 76.0, WeatherTerm::clear};
  const TrafficInfo t{40.0, 4.0};
  const auto layer = build_layer(g, ProviderSet::constant(w, t, 0.2), EmotionScorer(), {}, LocalTimestamp{});
  const double base = 0.25 + 0.3 * 0.2 + 0.2 * 0.4 + 0.15;  // residential, clear
  EXPECT_NEAR(layer[0].e, base, 1e-9);
  EXPECT_NEAR(layer[0].c, std::max(base, 0.7 * (1 - base)), 1e-9);
  // Effective speed min(30, 40 - 4) = 30 km/h.
  EXPECT_NEAR(layer[0].base_time_s, g.edge(0).length_m / (30 / 3.6), 1e-6);
}

TEST(BuildLayer, ProviderFailureNamesEdge) {
  const RoadGraph g = two_edge_graph();
  ProviderSet providers = ProviderSet::constant({}, {}, 0.0);
  auto raster = std::make_shared<const GreenRaster>(
      GreenRaster(1, 1, {0, 255, 0}, WorldTransform{0.0001, 0, 0, -0.0001, 0.0, 0.0}));
  providers.greenness = std::make_shared<const RasterGreennessProvider>(raster, 1);
  try {
    build_layer(g, providers, EmotionScorer(), {}, LocalTimestamp{});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("edge 0"), std::string::npos) << e.what();
  }
}

TEST(LayerFile, RoundTripAndByteIdenticalRebuild) {
  const auto dir = ts::fresh_dir("layer");
  const RoadGraph g = ts::random_graph(80, 2);
  const auto layer = build_layer(g, ProviderSet::constant({}, {45.0, 5.0}, 0.3), EmotionScorer(), {},
                                 LocalTimestamp::parse("2023-06-15T14:30:00"));
  save_layer(layer, dir / "a.csv");
  const auto again = build_layer(g, ProviderSet::constant({}, {45.0, 5.0}, 0.3), EmotionScorer(), {},
                                 LocalTimestamp::parse("2023-06-15T14:30:00"));
  save_layer(again, dir / "b.csv");
  EXPECT_EQ(read_file_maybe_gzip(dir / "a.csv"), read_file_maybe_gzip(dir / "b.csv"));
  const auto back = load_layer(dir / "a.csv", g);
  EXPECT_EQ(back, layer);
  const std::string text = layer_to_csv(layer);
  EXPECT_EQ(text.rfind("# fingerprint=" + to_hex(g.fingerprint()) + "\n", 0), 0u);
  EXPECT_NE(text.find("\nedge_id,e,c,base_time_s\n"), std::string::npos);
}

TEST(LayerFile, RejectsTruncatedAndForeign) {
  const RoadGraph g = ts::random_graph(40, 2);
  const auto layer = ts::constant_layer(g, 0.5, 0.5);
  std::string text = layer_to_csv(layer);
  const std::string truncated = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(layer_from_csv(truncated, g), ValidationError);
  const RoadGraph other = ts::random_graph(40, 3);
  EXPECT_THROW(layer_from_csv(text, other), ValidationError);
  try {
    apply_weights(other, layer, {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "layer does not match graph");
  }
}

TEST(ApplyWeights, MatchesElementwiseOracle) {
  const RoadGraph g = ts::random_graph(100, 4);
  std::mt19937_64 rng(6);
  std::vector<EdgeEmotion> rows;
  for (const auto& edge : g.edges()) {
    rows.push_back({edge.id, quantize9(0.01 + 0.99 * ts::unit(rng)), quantize9(0.01 + 0.99 * ts::unit(rng)),
                    quantize9(1 + 50 * ts::unit(rng))});
  }
  const EmotionLayer layer(g.fingerprint(), rows, {});
  const auto fastest = apply_weights(g, layer, {WeightMode::fastest, 0.0});
  const auto linear = apply_weights(g, layer, {WeightMode::happy_linear, 20.0});
  const auto literal = apply_weights(g, layer, {WeightMode::paper_literal, 20.0});
  for (const auto& r : rows) {
    EXPECT_EQ(fastest[r.edge_id], r.base_time_s);
    EXPECT_NEAR(linear[r.edge_id], r.base_time_s + 20.0 * r.base_time_s * (1.0 - r.e * r.c),
                1e-12 * linear[r.edge_id]);
    EXPECT_NEAR(literal[r.edge_id], r.base_time_s / (20.0 * r.e * r.c), 1e-12 * literal[r.edge_id]);
  }
  const auto uniform = ts::constant_layer(g, 0.4, 0.4);
  const auto lit = apply_weights(g, uniform, {WeightMode::paper_literal, 3.0});
  for (const auto& r : uniform.edges()) EXPECT_NEAR(lit[r.edge_id] / r.base_time_s, 1.0 / (3.0 * 0.16), 1e-12);
}
