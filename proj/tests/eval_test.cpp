#include <gtest/gtest.h>

#include <set>

#include "rsoanom/eval.hpp"

namespace rsoanom::eval {
namespace {

synth::ScenarioConfig scenario(std::size_t objects = 3) {
  synth::ScenarioConfig sc;
  sc.seed = 21;
  sc.object_count = objects;
  sc.observations_per_object = 1100;
  sc.observations_per_day = 0.5;
  sc.baseline[index_of(Element::kMeanMotion)] = {15.2, 2e-5, 0.0, 0.5};
  sc.baseline[index_of(Element::kEccentricity)] = {0.002, 2e-5, 0.0, 0.0};
  sc.baseline[index_of(Element::kInclination)] = {82.5, 0.005, 0.0, 0.0};
  sc.baseline[index_of(Element::kRaan)] = {120.0, 0.01, 0.0, 0.0};
  sc.baseline[index_of(Element::kArgPerigee)] = {150.0, 0.2, 0.0, 0.0};
  sc.baseline[index_of(Element::kMeanAnomaly)] = {210.0, 0.2, 0.0, 0.0};
  synth::RandomInjections ri;
  ri.fraction = 0.03;
  sc.random_injections = ri;
  return sc;
}

DetectorSpec quick(ModelFamily f) {
  DetectorSpec s;
  s.family = f;
  s.model.epochs = 5;
  s.model.batch_size = 32;
  s.iforest.n_estimators = 20;
  return s;
}

const PeriodWindow kTrain{"train", make_timestamp(2016, 8, 24), make_timestamp(2021, 8, 24)};
const PeriodWindow kLeadup{"leadup", make_timestamp(2021, 8, 24), make_timestamp(2022, 2, 24)};

TEST(Family, NamesRoundTrip) {
  for (auto f : kAllFamilies) EXPECT_EQ(family_from_string(to_string(f)), f);
  EXPECT_EQ(display_name(ModelFamily::kAnchorAutoencoder), "Anchor AE");
  EXPECT_THROW(family_from_string("svm"), ConfigError);
}

TEST(Grid, DefaultSizes) {
  EXPECT_EQ(enumerate_grid(default_grid(ModelFamily::kAutoencoder)).size(), 108u);
  EXPECT_EQ(enumerate_grid(default_grid(ModelFamily::kAnchorAutoencoder)).size(), 324u);
  EXPECT_EQ(enumerate_grid(default_grid(ModelFamily::kIForest)).size(), 36u);
}

TEST(Grid, EnumerationIsDistinctAndComplete) {
  const auto all = enumerate_grid(default_grid(ModelFamily::kAutoencoder));
  std::set<std::string> seen;
  for (const auto& p : all) {
    EXPECT_EQ(p.size(), 4u);
    seen.insert(p.dump());
  }
  EXPECT_EQ(seen.size(), all.size());
}

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(enumerate_grid(nlohmann::json::object()), ConfigError);
  EXPECT_THROW(enumerate_grid(nlohmann::json{{"epochs", 5}}), ConfigError);
  EXPECT_THROW(enumerate_grid(nlohmann::json{{"epochs", nlohmann::json::array()}}), ConfigError);
}

TEST(Params, ApplyAndValidate) {
  const auto s = apply_params(quick(ModelFamily::kAutoencoder), {{"latent_dim", 4}, {"threshold_sigma", 2.5}});
  EXPECT_EQ(s.model.latent_dim, 4u);
  EXPECT_EQ(s.model.threshold_sigma, 2.5);
  const auto f = apply_params(quick(ModelFamily::kIForest), {{"contamination", "auto"}, {"max_samples", 0.5}});
  EXPECT_FALSE(f.iforest.contamination.has_value());
  const auto g = apply_params(quick(ModelFamily::kIForest), {{"contamination", 0.1}});
  EXPECT_EQ(g.iforest.contamination, 0.1);
  EXPECT_THROW(apply_params(quick(ModelFamily::kAutoencoder), {{"dropout", 0.1}}), ConfigError);
  EXPECT_THROW(apply_params(quick(ModelFamily::kAutoencoder), {{"latent_dim", 6}}), ConfigError);
  EXPECT_THROW(apply_params(quick(ModelFamily::kIForest), {{"contamination", "some"}}), ConfigError);
}

TEST(Windows, MinusYears) {
  EXPECT_EQ(minus_years(make_timestamp(2021, 8, 24), 5), make_timestamp(2016, 8, 24));
  EXPECT_EQ(minus_years(make_timestamp(2020, 2, 29, 6), 1), make_timestamp(2019, 2, 28, 6));
}

TEST(Labels, IqrMatchesOraclePerElement) {
  const auto corpus = synth::generate(scenario(1));
  const auto& s = corpus.objects[0].series;
  const auto labels = iqr_labels(s);
  for (Element e : kAllElements) {
    const auto oracle = iqr_outliers(element_values(s, e));
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_EQ(labels[i][index_of(e)], oracle[i]);
  }
}

TEST(Labels, MaskSourceUsesGroundTruth) {
  const auto corpus = synth::generate(scenario(1));
  synth::MaskFile masks;
  const auto& obj = corpus.objects[0];
  for (std::size_t i = 0; i < obj.series.size(); ++i) {
    masks.rows[{obj.series.norad_id, obj.series.observations[i].epoch}] = obj.mask[i];
  }
  const LabelSource src{&masks};
  const auto labels = src(obj.series);
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(labels[i], obj.mask[i]);
  masks.rows.clear();
  EXPECT_THROW(src(obj.series), DataError);
}

TEST(EvaluateObject, SkipsShortTraining) {
  const auto corpus = synth::generate(scenario(1));
  const PeriodWindow tiny{"tiny", make_timestamp(2016, 8, 24), make_timestamp(2016, 9, 10)};
  const auto r = evaluate_object(corpus.objects[0].series, quick(ModelFamily::kAutoencoder), tiny, kLeadup, {}, 1);
  ASSERT_TRUE(r.skipped.has_value());
  EXPECT_EQ(r.total().total(), 0u);
}

TEST(EvaluateObject, CountsCoverEveryElement) {
  const auto corpus = synth::generate(scenario(1));
  const auto& s = corpus.objects[0].series;
  for (auto f : kAllFamilies) {
    const auto r = evaluate_object(s, quick(f), kTrain, kLeadup, {}, 1);
    ASSERT_FALSE(r.skipped.has_value()) << *r.skipped;
    EXPECT_EQ(r.total().total(), 6 * s.count_in(kLeadup));
  }
}

TEST(Population, WorkerCountDoesNotChangeResults) {
  const auto corpus = synth::generate(scenario(4));
  const auto series = corpus.series_map();
  PopulationRequest req{&series, {}, kTrain, kLeadup, {}, 7, 1};
  for (const auto& [id, _] : series) req.ids.push_back(id);
  req.ids.push_back(12345);  // absent
  const auto spec = quick(ModelFamily::kAnchorAutoencoder);
  const auto a = evaluate_population(req, spec);
  req.workers = 4;
  const auto b = evaluate_population(req, spec);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].per_element, b[i].per_element);
    EXPECT_EQ(a[i].skipped, b[i].skipped);
  }
  const auto s = summarize(a);
  EXPECT_EQ(s.evaluated, 4u);
  EXPECT_EQ(s.skipped, 1u);
}

TEST(Summary, PooledAndMeanF1) {
  ObjectEvaluation a{1, std::nullopt, {}};
  a.per_element[0] = {2, 0, 0, 8};  // f1 = 1
  ObjectEvaluation b{2, std::nullopt, {}};
  b.per_element[0] = {0, 2, 2, 6};  // f1 = 0
  ObjectEvaluation c{3, std::string("short"), {}};
  const std::vector<ObjectEvaluation> all{a, b, c};
  const auto s = summarize(all);
  EXPECT_EQ(s.evaluated, 2u);
  EXPECT_EQ(s.skipped, 1u);
  EXPECT_DOUBLE_EQ(s.mean_f1, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 * 2 / (2.0 * 2 + 2 + 2));
  EXPECT_DOUBLE_EQ(s.accuracy, 16.0 / 20.0);
}

TEST(GridSearch, SingletonGridAndRanking) {
  const auto corpus = synth::generate(scenario(2));
  const auto series = corpus.series_map();
  PopulationRequest req{&series, {}, kTrain, kLeadup, {}, 3, 2};
  for (const auto& [id, _] : series) req.ids.push_back(id);
  const auto one = grid_search(quick(ModelFamily::kIForest), {{"n_estimators", {10}}}, req);
  ASSERT_EQ(one.size(), 1u);
  const auto many = grid_search(quick(ModelFamily::kIForest),
                                {{"contamination", {0.05, 0.15, "auto"}}, {"n_estimators", {10, 20}}}, req);
  ASSERT_EQ(many.size(), 6u);
  for (std::size_t i = 1; i < many.size(); ++i) {
    EXPECT_GE(many[i - 1].summary.mean_f1, many[i].summary.mean_f1);
    if (many[i - 1].summary.mean_f1 == many[i].summary.mean_f1) {
      EXPECT_LT(many[i - 1].index, many[i].index);
    }
  }
  const auto again = grid_search(quick(ModelFamily::kIForest),
                                 {{"contamination", {0.05, 0.15, "auto"}}, {"n_estimators", {10, 20}}}, req);
  for (std::size_t i = 0; i < many.size(); ++i) EXPECT_EQ(many[i].index, again[i].index);
}

TEST(Temporal, FiveWindowsPerModel) {
  const auto corpus = synth::generate(scenario(2));
  const auto series = corpus.series_map();
  PopulationRequest req{&series, {}, {}, kLeadup, {}, 5, 2};
  for (const auto& [id, _] : series) req.ids.push_back(id);
  std::vector<DetectorSpec> specs;
  for (auto f : kAllFamilies) specs.push_back(quick(f));
  const std::vector<int> years{5, 4, 3, 2, 1};
  const auto rows = temporal_window_eval(specs, req, kTrain.end, years);
  ASSERT_EQ(rows.size(), 15u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].years, years[i / 3]);
    EXPECT_EQ(rows[i].family, kAllFamilies[i % 3]);
    EXPECT_FALSE(rows[i].skipped);
    EXPECT_EQ(rows[i].train_window.end, kTrain.end);
    EXPECT_EQ(rows[i].summary.evaluated, 2u);
  }
  EXPECT_EQ(rows[0].train_window.start, kTrain.start);
}

TEST(Temporal, IdenticalDataGivesIdenticalMetrics) {
  // With data only in the final year, every window trains on the same rows.
  auto sc = scenario(1);
  sc.start = make_timestamp(2020, 9, 1);
  sc.observations_per_object = 400;
  sc.observations_per_day = 0.75;
  const auto series = synth::generate(sc).series_map();
  PopulationRequest req{&series, {series.begin()->first}, {}, kLeadup, {}, 5, 1};
  const std::vector<DetectorSpec> specs{quick(ModelFamily::kIForest)};
  const std::vector<int> years{3, 1};
  const auto rows = temporal_window_eval(specs, req, kTrain.end, years);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].summary.total, rows[1].summary.total);
}

}  // namespace
}  // namespace rsoanom::eval
