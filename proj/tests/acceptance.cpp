// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rsoanom/eval.hpp"
#include "rsoanom/pipeline.hpp"
#include "rsoanom/stats/chi_square.hpp"
#include "rsoanom/synth.hpp"

#ifndef RSOANOM_SCENARIO_DIR
#define RSOANOM_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace rsoanom;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const pipeline::Logger kQuiet = [](std::string_view) {};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rsoanom_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1 -------------------------------------------------------------------------

Outcome chi_square_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = stats::chi_square_2x2({1634, 842269, 26536, 880546});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = std::abs(r.statistic - 21276.23) <= 5.0 && r.p_value < 1e-300 && r.p_text() == "< 0.001" && secs < 1.0;
  return {ok, fmt::format("statistic {:.3f}, p {}, {:.4f}s", r.statistic, r.p_text(), secs)};
}

// 2 -------------------------------------------------------------------------

double brute_anchor_loss(const nn::Tensor& z, std::size_t k) {
  const std::size_t b = z.rows;
  const std::size_t kk = std::min(k, b - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t f = 0; f < z.cols; ++f) s += (z(i, f) - z(j, f)) * (z(i, f) - z(j, f));
      d.push_back(std::sqrt(s));
    }
    std::sort(d.begin(), d.end());
    double row = 0.0;
    for (std::size_t n = 0; n < kk; ++n) row += d[n];
    total += row / static_cast<double>(kk);
  }
  return total / static_cast<double>(b);
}

Outcome anchor_loss_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2002);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = 2 + rng.below(63);
    const std::size_t latent = 2 + rng.below(7);
    const std::size_t k = 1 + rng.below(8);
    nn::Tensor z(b, latent);
    // Every tenth batch repeats rows to exercise ties and zero distances.
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = rng.normal() * 3.0;
    if (trial % 10 == 0 && b > 2) std::copy(z.row(0).begin(), z.row(0).end(), z.data.begin() + latent);
    worst = std::max(worst, std::abs(nn::anchor_loss(z, k) - brute_anchor_loss(z, k)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-9 && secs < 10.0, fmt::format("max |diff| {:.3g} over 1000 batches, {:.2f}s", worst, secs)};
}

// 3 -------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t m = 0; m < 100; ++m) {
    Rng rng(3000 + m);
    nn::ModelConfig cfg;
    cfg.kind = m % 4 == 0 ? nn::ModelKind::kPlain : nn::ModelKind::kAnchor;
    cfg.hidden_dim = 3 + rng.below(6);
    cfg.latent_dim = 1 + rng.below(5);
    cfg.k_neighbors = 1 + rng.below(3);
    cfg.batch_size = cfg.k_neighbors + 2 + rng.below(6);
    cfg.lambda_anchor = rng.uniform(0.05, 1.0);
    auto p = nn::init_parameters(cfg, rng);
    for (nn::Tensor* t : {&p.ln1_gain, &p.ln1_offset, &p.ln2_gain, &p.ln2_offset, &p.enc1_b, &p.enc2_b, &p.dec1_b,
                          &p.dec2_b}) {
      for (double& v : t->data) v += 0.3 * rng.normal();
    }
    nn::Tensor x(cfg.batch_size, kNumElements);
    for (double& v : x.data) v = rng.normal();

    const auto lg = nn::loss_and_gradients(p, cfg, x);
    const auto nb = nn::assign_neighbors(nn::forward(p, cfg.leaky_slope, x).z, cfg.k_neighbors);
    // Neighbour assignment frozen at the unperturbed point, as in training.
    auto loss = [&](const nn::Parameters& q) {
      const auto fr = nn::forward(q, cfg.leaky_slope, x);
      double l = nn::reconstruction_loss(x, fr.x_hat);
      if (cfg.kind == nn::ModelKind::kAnchor) {
        auto f = nb;
        for (std::size_t i = 0; i < fr.z.rows; ++i) {
          for (std::size_t n = 0; n < f.k; ++n) {
            f.distance[i * f.k + n] = nn::euclidean(fr.z.row(i), fr.z.row(f.index[i * f.k + n]));
          }
        }
        l += cfg.anchor_weight() * nn::anchor_loss(f, fr.z.rows);
      }
      return l;
    };
    auto pt = p.tensors();
    const auto gt = lg.grad.tensors();
    for (std::size_t t = 0; t < nn::Parameters::kTensorCount; ++t) {
      for (std::size_t i = 0; i < pt[t]->size(); ++i) {
        const double orig = pt[t]->data[i];
        pt[t]->data[i] = orig + h;
        const double up = loss(p);
        pt[t]->data[i] = orig - h;
        const double down = loss(p);
        pt[t]->data[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double an = gt[t]->data[i];
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
        ++checked;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-4 && secs < 60.0,
          fmt::format("max relative error {:.3g} over {} parameters in 100 models, {:.2f}s", worst, checked, secs)};
}

// 4 -------------------------------------------------------------------------

synth::ScenarioConfig quiet_scenario(std::size_t objects, std::size_t n) {
  synth::ScenarioConfig sc;
  sc.seed = 404;
  sc.object_count = objects;
  sc.observations_per_object = n;
  sc.observations_per_day = 0.5;
  sc.baseline[index_of(Element::kMeanMotion)] = {15.2, 2e-5, 0.0, 0.5};
  sc.baseline[index_of(Element::kEccentricity)] = {0.002, 2e-5, 0.0, 0.0};
  sc.baseline[index_of(Element::kInclination)] = {82.5, 0.005, 0.0, 0.0};
  sc.baseline[index_of(Element::kRaan)] = {120.0, 0.01, 0.0, 0.0};
  sc.baseline[index_of(Element::kArgPerigee)] = {150.0, 0.2, 0.0, 0.0};
  sc.baseline[index_of(Element::kMeanAnomaly)] = {210.0, 0.2, 0.0, 0.0};
  return sc;
}

Outcome reduction_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  auto sc = quiet_scenario(1, 200);
  synth::RandomInjections ri;
  ri.fraction = 0.03;
  sc.random_injections = ri;
  const auto x = eval::observation_matrix(synth::generate(sc).objects[0].series);
  nn::ModelConfig anchor;
  anchor.kind = nn::ModelKind::kAnchor;
  anchor.lambda_anchor = 0.0;
  anchor.epochs = 150;
  anchor.seed = 44;
  auto plain = anchor;
  plain.kind = nn::ModelKind::kPlain;
  const auto a = nn::train(x, anchor);
  const auto b = nn::train(x, plain);
  const bool same = a.params == b.params && a.calibration == b.calibration;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {same, fmt::format("{} rows, 150 epochs, weights {}, {:.2f}s", x.rows, same ? "bit-identical" : "differ", secs)};
}

// 5 -------------------------------------------------------------------------

// Twenty objects whose elements drift together over time. Maneuver-like events
// move all six elements of 3% of observations by 20-30 sigma (ramps start at
// half magnitude, so every injected value is at least 10 sigma). Events fall
// in the final 30% of each series; the model trains on the clean first 70%
// and scores every observation.
Outcome synthetic_detection() {
  const auto t0 = std::chrono::steady_clock::now();
  auto sc = quiet_scenario(20, 1000);
  sc.seed = 2024;
  const double span_days = 2000.0;
  for (std::size_t e = 0; e < kNumElements; ++e) {
    // About six noise sigmas of drift over the series, alternating sign.
    sc.baseline[e].drift_per_day = (e % 2 == 0 ? 1.0 : -1.0) * 6.0 * sc.baseline[e].noise / span_days;
  }
  const auto cut = add_days(sc.start, 699.5 * 2.0);
  synth::RandomInjections ri;
  ri.fraction = 0.1;  // of the 300 observations after the cut, so 3% overall
  ri.min_magnitude = 20.0;
  ri.max_magnitude = 30.0;
  ri.joint = true;
  ri.window = PeriodWindow{"events", cut, sc.end()};
  sc.random_injections = ri;
  const auto corpus = synth::generate(sc);

  nn::ModelConfig cfg;
  cfg.kind = nn::ModelKind::kAnchor;
  cfg.hidden_dim = 16;
  cfg.latent_dim = 3;
  cfg.epochs = 150;
  cfg.batch_size = 16;
  cfg.threshold_sigma = 20.0;

  std::vector<std::array<stats::ConfusionCounts, 2>> per(corpus.objects.size());
  std::size_t injected_rows = 0;
  std::size_t rows = 0;
  parallel_for(corpus.objects.size(), 0, [&](std::size_t o) {
    const auto& obj = corpus.objects[o];
    const auto all = eval::observation_matrix(obj.series);
    std::size_t n_train = 0;
    while (n_train < obj.series.size() && obj.series.observations[n_train].epoch < cut) ++n_train;
    nn::Tensor train(n_train, kNumElements);
    std::copy(all.data.begin(), all.data.begin() + static_cast<std::ptrdiff_t>(n_train * kNumElements),
              train.data.begin());
    auto c = cfg;
    c.seed = sub_seed(17, obj.series.norad_id);
    const auto verdicts = nn::score(nn::train(train, c), all);
    const auto iqr = eval::iqr_labels(obj.series);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      for (std::size_t e = 0; e < kNumElements; ++e) {
        per[o][0].add(obj.mask[i][e], verdicts[i].flags[e]);
        per[o][1].add(iqr[i][e], verdicts[i].flags[e]);
      }
    }
  });
  stats::ConfusionCounts vs_mask, vs_iqr;
  for (const auto& p : per) {
    vs_mask += p[0];
    vs_iqr += p[1];
  }
  for (const auto& obj : corpus.objects) {
    rows += obj.mask.size();
    for (const auto& m : obj.mask) injected_rows += m[0] ? 1 : 0;
  }
  const double f_mask = stats::f1(vs_mask);
  const double f_iqr = stats::f1(vs_iqr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {f_mask >= 0.90 && f_iqr >= 0.75 && secs < 600.0,
          fmt::format("mask F1 {:.4f}, IQR F1 {:.4f}, {:.2f}% rows injected, {:.1f}s", f_mask, f_iqr,
                      100.0 * static_cast<double>(injected_rows) / static_cast<double>(rows), secs)};
}

// 6 -------------------------------------------------------------------------

// Order statistics by selection rather than a full sort.
std::vector<bool> brute_iqr(const std::vector<double>& v) {
  auto order_stat = [&](std::size_t k) {
    auto c = v;
    std::nth_element(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k), c.end());
    return c[k];
  };
  auto q = [&](double p) {
    const double h = static_cast<double>(v.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double lo_v = order_stat(lo);
    if (lo + 1 >= v.size()) return lo_v;
    return lo_v + (h - static_cast<double>(lo)) * (order_stat(lo + 1) - lo_v);
  };
  const double q1 = q(0.25);
  const double q3 = q(0.75);
  const double lower = q1 - 1.5 * (q3 - q1);
  const double upper = q3 + 1.5 * (q3 - q1);
  std::vector<bool> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] < lower || v[i] > upper;
  return out;
}

Outcome iqr_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(6006);
  std::size_t mismatched = 0;
  std::size_t flagged = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 4 + rng.below(197);
    std::vector<double> v(n);
    switch (trial % 3) {
      case 0:
        for (double& x : v) x = rng.normal();
        break;
      case 1:  // small integers: heavy ties, values landing on the fences
        for (double& x : v) x = static_cast<double>(rng.below(7));
        break;
      default:
        for (double& x : v) x = rng.uniform(-1.0, 1.0) * (rng.uniform() < 0.05 ? 1e3 : 1.0);
    }
    const auto got = iqr_outliers(v);
    const auto want = brute_iqr(v);
    mismatched += got == want ? 0 : 1;
    flagged += static_cast<std::size_t>(std::count(want.begin(), want.end(), true));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatched == 0,
          fmt::format("{} of 10000 sequences differ ({} outliers total), {:.2f}s", mismatched, flagged, secs)};
}

// 7 -------------------------------------------------------------------------

int brute_checksum(const std::string& line) {
  int s = 0;
  for (std::size_t i = 0; i < 68; ++i) {
    if (line[i] >= '0' && line[i] <= '9') s += line[i] - '0';
    if (line[i] == '-') s += 1;
  }
  return s % 10;
}

TleRecord random_record(Rng& rng) {
  TleRecord r;
  r.norad_id = 1 + static_cast<int>(rng.below(99999));
  r.classification = "UCS"[rng.below(3)];
  const std::string letters = "ABCDEFGHJKLMNPQRSTUVWXYZ";
  r.intl_designator = fmt::format("{:02d}{:03d}", rng.below(100), 1 + rng.below(999));
  for (std::size_t i = 0, n = 1 + rng.below(3); i < n; ++i) r.intl_designator += letters[rng.below(letters.size())];
  r.epoch = add_days(make_timestamp(1960, 1, 1), rng.uniform(0.0, 35000.0));
  r.mean_motion_dot = rng.uniform(-0.5, 0.5) * std::pow(10.0, -static_cast<double>(rng.below(6)));
  r.mean_motion_ddot = {static_cast<int>(rng.below(199999)) - 99999, rng.uniform() < 0.5 ? '-' : '+',
                        static_cast<int>(rng.below(10))};
  r.bstar = {static_cast<int>(rng.below(199999)) - 99999, rng.uniform() < 0.5 ? '-' : '+',
             static_cast<int>(rng.below(10))};
  r.ephemeris_type = '0';
  r.element_set_number = static_cast<int>(rng.below(10000));
  r.elements.mean_motion = rng.uniform(0.9, 17.0);
  r.elements.eccentricity = rng.uniform() < 0.1 ? 0.0 : rng.uniform(0.0, 0.99);
  r.elements.inclination = rng.uniform(0.0, 179.9);
  r.elements.raan = rng.uniform(0.0, 359.99);
  r.elements.arg_perigee = rng.uniform(0.0, 359.99);
  r.elements.mean_anomaly = rng.uniform(0.0, 359.99);
  r.revolution_number = static_cast<int>(rng.below(100000));
  return r;
}

Outcome parser_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(7007);
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto raw = random_record(rng);
    // The representable record: raw values rounded to the column layout.
    const auto [l1, l2] = synth::format_tle(raw);
    const auto rec = parse_tle(l1, l2);
    const auto [m1, m2] = synth::format_tle(rec);
    const auto again = parse_tle(m1, m2);
    const bool ok = again == rec && m1 == l1 && m2 == l2 && rec.checksums_ok() && l1.size() == 69 &&
                    l2.size() == 69 && l1[68] - '0' == brute_checksum(l1) && l2[68] - '0' == brute_checksum(l2) &&
                    rec.norad_id == raw.norad_id && std::abs(rec.elements.inclination - raw.elements.inclination) <= 5e-5 &&
                    std::abs(rec.elements.eccentricity - raw.elements.eccentricity) <= 5e-8;
    failures += ok ? 0 : 1;
  }
  const auto demo = synth::load_scenario(fs::path(RSOANOM_SCENARIO_DIR) / "demo.json");
  const auto loaded = load_tle_text(synth::corpus_tle_text(synth::generate(demo)));
  const std::size_t warnings = loaded.report.checksum_warnings + loaded.report.rejected.size();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failures == 0 && warnings == 0,
          fmt::format("{} of 1000 records fail the round trip; synth corpus: {} records, {} warnings, {:.2f}s",
                      failures, loaded.report.records_parsed, warnings, secs)};
}

// 8 -------------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

pipeline::RunConfig demo_config(const fs::path& out, std::size_t workers) {
  auto cfg = pipeline::load_run_config(fs::path(RSOANOM_SCENARIO_DIR) / "demo_run.json");
  cfg.out_dir = out;
  cfg.workers = workers;
  return cfg;
}

Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = scratch("determinism");
  std::array<std::map<std::string, std::string>, 2> trees;
  const std::array<std::size_t, 2> workers{1, 8};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto cfg = demo_config(root / fmt::format("w{}", workers[k]), workers[k]);
    pipeline::cmd_synth(cfg, std::nullopt, kQuiet);
    pipeline::cmd_ingest(cfg, kQuiet);
    pipeline::cmd_label(cfg, "train", kQuiet);
    pipeline::cmd_train(cfg, "train", false, kQuiet);
    pipeline::cmd_score(cfg, "leadup", kQuiet);
    pipeline::cmd_evaluate(cfg, {std::nullopt, true}, kQuiet);
    pipeline::cmd_stats(cfg, {}, kQuiet);
    trees[k] = tree(cfg.out_dir);
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : trees[0]) {
    const auto it = trees[1].find(name);
    differing += it == trees[1].end() || it->second != bytes ? 1 : 0;
  }
  differing += trees[1].size() > trees[0].size() ? trees[1].size() - trees[0].size() : 0;
  fs::remove_all(root);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {differing == 0 && !trees[0].empty(),
          fmt::format("{} files per run, {} differ between workers=1 and workers=8, {:.1f}s", trees[0].size(),
                      differing, secs)};
}

// 9 -------------------------------------------------------------------------

Outcome iforest_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(9000 + trial);
    nn::Tensor data(256, 2);
    for (std::size_t r = 0; r < 255; ++r) {
      data(r, 0) = rng.normal();
      data(r, 1) = rng.normal();
    }
    const double angle = rng.uniform(0.0, 6.283185307179586);
    data(255, 0) = 10.0 * std::cos(angle);
    data(255, 1) = 10.0 * std::sin(angle);
    IForestConfig cfg;
    cfg.seed = trial;
    const auto scores = score_iforest(fit_iforest(data, cfg), data);
    std::vector<double> cluster(scores.begin(), scores.end() - 1);
    std::nth_element(cluster.begin(), cluster.begin() + 127, cluster.end());
    wins += scores.back() > cluster[127] ? 1 : 0;
  }
  nn::Tensor flat(300, kNumElements, 3.25);
  IForestConfig auto_cfg;
  auto_cfg.seed = 1;
  const auto det = detect_iforest(flat, flat, auto_cfg);
  std::size_t flagged = 0;
  for (const auto& row : det.flags) flagged += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {wins >= 95 && flagged == 0,
          fmt::format("outlier above cluster median in {}/100 trials; AUTO flags {} of {} constant cells, {:.2f}s", wins,
                      flagged, flat.size(), secs)};
}

// 10 ------------------------------------------------------------------------

Outcome temporal_harness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = scratch("temporal");
  const auto cfg = demo_config(root / "out", 4);
  pipeline::cmd_synth(cfg, std::nullopt, kQuiet);
  const auto failures = pipeline::cmd_evaluate(cfg, {std::nullopt, true}, kQuiet);
  const auto table = read_delimited(cfg.out_dir / "evaluate" / "temporal_table.csv");
  const auto longform = read_delimited(cfg.out_dir / "evaluate" / "temporal.csv");
  fs::remove_all(root);

  const std::size_t models = cfg.evaluation.families.size();
  const std::size_t columns = table.header.size();
  bool shape = models == 3 && table.rows.size() == 5 && columns == 1 + 2 * models &&
               longform.rows.size() == 5 * models;
  std::size_t skipped = failures.size();
  const auto col = [&](std::string_view name) {
    return static_cast<std::size_t>(std::find(longform.header.begin(), longform.header.end(), name) -
                                    longform.header.begin());
  };
  for (const auto& row : longform.rows) skipped += row.at(col("skipped")) != "0" || row.at(col("skipped_row")) != "0";
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {shape && skipped == 0,
          fmt::format("{} windows x {} models, table {} rows x {} columns, {} skipped, {:.1f}s", table.rows.size(),
                      models, table.rows.size(), columns, skipped, secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chi-square reproduction", chi_square_reproduction},
      {"anchor-loss oracle", anchor_loss_oracle},
      {"gradient check", gradient_check},
      {"reduction equivalence", reduction_equivalence},
      {"synthetic detection quality", synthetic_detection},
      {"IQR oracle equivalence", iqr_oracle_equivalence},
      {"parser round-trip", parser_round_trip},
      {"determinism", determinism},
      {"isolation-forest sanity", iforest_sanity},
      {"temporal-window harness", temporal_harness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
