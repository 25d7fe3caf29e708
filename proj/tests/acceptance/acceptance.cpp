// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. `--regenerate-golden` rewrites tests/data/golden from the
// end-to-end run instead of comparing against it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "histolime/codec.hpp"
#include "histolime/dataset.hpp"
#include "histolime/errors.hpp"
#include "histolime/imaging.hpp"
#include "histolime/lime.hpp"
#include "histolime/metrics.hpp"
#include "histolime/superpixel.hpp"
#include "histolime_cli/synthetic.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace histolime;
using histolime::testing::read_text;
using histolime::testing::run_cli;
using histolime::testing::TempDir;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++count_;
  }
  void note(std::string s) { notes_.push_back(std::move(s)); }
  Outcome outcome() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    if (count_) {
      os << (notes_.empty() ? "" : "; ") << count_ << " failure(s): ";
      for (std::size_t i = 0; i < failures_.size(); ++i) os << (i ? " | " : "") << failures_[i];
    }
    return {count_ == 0, os.str()};
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
  int count_ = 0;
};

std::unique_ptr<Classifier> red_toy(int side, double tau) {
  ModelManifest m;
  m.name = "toy-red";
  m.input_side = side;
  m.backend = ToySpec{Channel::R, tau, 10.0};
  return make_classifier(std::move(m));
}

unsigned all_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ------------------------------------------------------------ criterion 1

Outcome metric_reconstruction() {
  Check c;
  const auto near4 = [&](const std::optional<Ratio>& r, double want, double tol, const char* what) {
    c.expect(r.has_value() && std::abs(r->rounded(4) - want) <= tol + 1e-12,
             std::string(what) + " = " + format_metric(r) + ", want " + std::to_string(want));
  };
  const auto eff = make_report({410, 356, 4, 9}, "efficientnet-b3", "test");
  near4(eff.accuracy, 0.9833, 0, "efficientnet accuracy");
  near4(eff.precision, 0.9903, 0, "efficientnet precision");
  near4(eff.recall, 0.9782, 0.0005, "efficientnet recall");
  near4(eff.f1, 0.9844, 0, "efficientnet f1");
  const auto dense = make_report({360, 343, 31, 45}, "densenet121", "test");
  near4(dense.accuracy, 0.9024, 0, "densenet accuracy");
  near4(dense.precision, 0.9207, 0, "densenet precision");
  near4(dense.recall, 0.8889, 0, "densenet recall");
  near4(dense.f1, 0.9045, 0, "densenet f1");
  c.note("efficientnet " + format_metric(eff.accuracy) + "/" + format_metric(eff.precision) + "/" +
         format_metric(eff.recall) + "/" + format_metric(eff.f1));
  return c.outcome();
}

// ------------------------------------------------------------ criterion 2

Outcome surrogate_oracle() {
  Check c;
  SplitMix64 rng(2);
  double worst = 0.0;
  for (int k = 1; k <= 4; ++k) {
    const int n = 1 << k;
    PerturbationBatch b;
    b.masks = {n, k, {}};
    std::vector<std::vector<int>> rows;
    for (int r = 0; r < n; ++r) {
      std::vector<int> row;
      for (int j = 0; j < k; ++j) row.push_back((r >> j) & 1);
      for (int v : row) b.masks.values.push_back(static_cast<std::uint8_t>(v));
      rows.push_back(row);
      b.weights.push_back(proximity_weight(b.masks.row(r), 0.25));
    }
    for (int f = 0; f < 20; ++f) {
      std::vector<double> coef(static_cast<std::size_t>(k) + 1);
      for (auto& v : coef) v = rng.uniform(-2.0, 2.0);
      b.responses.assign(static_cast<std::size_t>(n), coef[0]);
      for (int r = 0; r < n; ++r) {
        for (int j = 0; j < k; ++j) b.responses[r] += coef[j + 1] * rows[r][j];
      }
      const auto want = oracle::weighted_ridge(rows, b.weights, b.responses, 0.0);
      if (!want) {
        c.expect(false, "oracle singular at k=" + std::to_string(k));
        continue;
      }
      SurrogateFit got;
      try {
        got = fit_surrogate(b, 0.0);
      } catch (const std::exception& e) {
        c.expect(false, std::string("fit threw: ") + e.what());
        continue;
      }
      long double diff = 0, norm = 0;
      const auto sq = [](long double v) { return v * v; };
      diff += sq(got.intercept - (*want)[0]);
      norm += sq((*want)[0]);
      for (int j = 0; j < k; ++j) {
        diff += sq(got.segment_weights[j] - (*want)[j + 1]);
        norm += sq((*want)[j + 1]);
      }
      const double rel = static_cast<double>(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-300L));
      worst = std::max(worst, rel);
      c.expect(rel <= 1e-9, "k=" + std::to_string(k) + " relative error " + std::to_string(rel));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "80 fits, worst relative error %.2e", worst);
  c.note(buf);
  return c.outcome();
}

// ------------------------------------------------------------ criterion 3

// The red disk usually spans several superpixels. The red-dominant segment
// is the one carrying the most red mass (sum of R over its pixels).
Outcome localization() {
  Check c;
  const auto clf = red_toy(64, 0.05);
  int hits = 0, share_hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Raster img = synth::two_region_image(seed);
    LimeConfig cfg;
    cfg.baseline = Baseline::fixed({0, 0, 0});
    cfg.seed = seed;
    cfg.threads = all_threads();
    const auto ex = explain(*clf, img, cfg);
    const auto& sp = ex.superpixels;
    std::vector<double> mass(static_cast<std::size_t>(sp.k), 0.0);
    std::vector<int> red_pixels(static_cast<std::size_t>(sp.k), 0);
    const auto px = img.data();
    for (std::size_t p = 0; p < sp.labels.size(); ++p) {
      const auto s = static_cast<std::size_t>(sp.labels[p]);
      mass[s] += px[3 * p];
      red_pixels[s] += px[3 * p] > px[3 * p + 1] && px[3 * p] > px[3 * p + 2];
    }
    const auto order = rank_segments(ex.segment_weights);
    const double top = ex.segment_weights[static_cast<std::size_t>(order[0])];
    const bool strict =
        top > 0.0 && (sp.k == 1 || top > ex.segment_weights[static_cast<std::size_t>(order[1])]);
    const auto by_mass = std::max_element(mass.begin(), mass.end()) - mass.begin();
    const auto by_share = std::max_element(red_pixels.begin(), red_pixels.end()) - red_pixels.begin();
    hits += strict && order[0] == by_mass;
    share_hits += strict && order[0] == by_share;
  }
  c.expect(hits >= 95, std::to_string(hits) + "/100 runs");
  c.note(std::to_string(hits) + "/100 runs (segment holding most red pixels: " + std::to_string(share_hits) +
         "/100)");
  return c.outcome();
}

// ------------------------------------------------------------ criterion 4

Outcome determinism() {
  Check c;
  TempDir dir;
  const auto corpus = (testing::source_dir() / "tests/data/corpus40").string();
  const auto model = (testing::source_dir() / "tests/data/toy_red_model.json").string();
  for (const char* run : {"a", "b"}) {
    const auto out = (dir / run).string();
    const auto s = run_cli({"split", "--dataset", corpus, "--out", out, "--seed", "31"});
    c.expect(s.exit_code == 0, std::string("split exit ") + std::to_string(s.exit_code) + ": " + s.err);
    const auto e = run_cli({"explain", "--model", model, "--dataset", corpus, "--image", "OSCC/oscc_003.png",
                            "--image", "Normal/normal_005.png", "--seed", "99", "--id-map", "--threads",
                            run[0] == 'a' ? "1" : "0", "--out", out});
    c.expect(e.exit_code == 0, std::string("explain exit ") + std::to_string(e.exit_code) + ": " + e.err);
  }
  int files = 0;
  for (const char* name : {"manifest.json", "OSCC_oscc_003.explanation.json", "OSCC_oscc_003.overlay.png",
                           "OSCC_oscc_003.segments.png", "Normal_normal_005.explanation.json",
                           "Normal_normal_005.overlay.png"}) {
    const bool same = fs::exists(dir / "a" / name) && read_text(dir / "a" / name) == read_text(dir / "b" / name);
    c.expect(same, std::string(name) + " differs");
    files += same;
  }
  c.note(std::to_string(files) + " artifacts byte-identical across runs");
  return c.outcome();
}

// ------------------------------------------------------------ criterion 5

Outcome fuzz_invariants() {
  Check c;
  constexpr int kCases = 1000;
  SplitMix64 rng(5);

  // Probability rows.
  for (int i = 0; i < kCases; ++i) {
    const int side = 4 + static_cast<int>(rng.below(12));
    const auto clf = red_toy(side, rng.uniform());
    std::vector<Raster> batch;
    for (int j = 0; j < 3; ++j) batch.push_back(resize_to_input(testing::random_raster(rng, 24), side));
    const auto p = clf->predict(batch);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      c.expect(std::abs(p.at(r, 0) + p.at(r, 1) - 1.0) <= 1e-6 && p.at(r, 0) >= 0 && p.at(r, 1) >= 0,
               "toy row does not sum to 1");
    }
    std::vector<double> scores = {rng.uniform(-20, 20), rng.uniform(-20, 20)};
    if (i % 2) scores = {rng.uniform(0, 5), rng.uniform(1e-3, 5)};
    const auto q = normalize_scores(scores);
    c.expect(std::abs(q[0] + q[1] - 1.0) <= 1e-6, "normalized scores do not sum to 1");
  }

  // Superpixel maps.
  for (int i = 0; i < kCases; ++i) {
    const Raster img = testing::random_raster(rng, 24);
    const int target = 1 + static_cast<int>(rng.below(std::min<std::uint64_t>(40, img.pixel_count())));
    std::string why;
    c.expect(oracle::superpixels_valid(segment(img, target, rng.uniform(0.5, 30.0)), &why), "superpixels: " + why);
  }

  // F1 between precision and recall.
  for (int i = 0; i < kCases; ++i) {
    ConfusionMatrix m{rng.below(500), rng.below(500), rng.below(500), rng.below(500)};
    if (m.tp == 0) m.tp = 1;
    const double p = precision(m), r = recall(m), f = f1(m);
    c.expect(std::min(p, r) <= f + 1e-15 && f <= std::max(p, r) + 1e-15, "F1 outside [min(P,R), max(P,R)]");
  }

  // Stratified split.
  for (int i = 0; i < kCases; ++i) {
    std::vector<SampleRef> refs;
    const int normal = static_cast<int>(rng.below(60)), oscc = 1 + static_cast<int>(rng.below(60));
    for (int j = 0; j < normal + oscc; ++j) {
      refs.push_back({"img" + std::to_string(j), j < normal ? Label::Normal : Label::Oscc});
    }
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    const SplitRatios ratios{a, b, 1 - a - b};
    const auto m = stratified_split(refs, ratios, rng.next());
    std::set<std::string> seen;
    bool ok = m.size() == refs.size();
    for (Partition part : {Partition::Train, Partition::Test, Partition::Validation}) {
      const double share = part == Partition::Train ? ratios.train
                           : part == Partition::Test ? ratios.test
                                                     : ratios.validation;
      int counts[2] = {0, 0};
      for (const auto& ref : m.partition(part)) {
        ok &= seen.insert(ref.id).second;
        ++counts[label_index(ref.label)];
      }
      ok &= std::abs(counts[0] - share * normal) <= 1.0 + 1e-9;
      ok &= std::abs(counts[1] - share * oscc) <= 1.0 + 1e-9;
    }
    c.expect(ok && seen.size() == refs.size(), "split not disjoint, complete and stratified");
  }

  // Flip involution and all-ones mask identity.
  for (int i = 0; i < kCases; ++i) {
    const Raster img = testing::random_raster(rng, 32);
    c.expect(augment(augment(img, AugmentSpec::flip()), AugmentSpec::flip()) == img, "flip is not an involution");
    const int target = 1 + static_cast<int>(rng.below(std::min<std::uint64_t>(20, img.pixel_count())));
    const auto sp = segment(img, target);
    const std::vector<std::uint8_t> ones(static_cast<std::size_t>(sp.k), 1);
    const Baseline baseline = i % 2 ? Baseline::segment_mean() : Baseline::fixed({0, 0, 0});
    c.expect(apply_mask(img, ones, sp, baseline) == img, "all-ones mask changed the image");
  }
  c.note("6 families x 1000 cases");
  return c.outcome();
}

// ------------------------------------------------------------ criterion 6

Outcome throughput() {
  Check c;
  SplitMix64 rng(6);
  Raster img(224, 224);
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      const auto n = static_cast<std::uint8_t>(rng.below(40));
      const bool blob = (x - 120) * (x - 120) + (y - 90) * (y - 90) < 40 * 40;
      img.set(x, y, blob ? Rgb{static_cast<std::uint8_t>(200 + n / 4), 40, 60}
                         : Rgb{static_cast<std::uint8_t>(60 + n), 100, 170});
    }
  }
  const auto clf = red_toy(224, 0.3);
  LimeConfig cfg;
  cfg.threads = 1;
  cfg.seed = 6;
  const auto t0 = std::chrono::steady_clock::now();
  const auto ex = explain(*clf, img, cfg);
  const double explain_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(explain_s < 10.0, "explain took " + std::to_string(explain_s) + " s");

  PerturbationBatch b;
  b.masks = sample_masks(50, 5000, 6);
  for (int r = 0; r < b.masks.rows; ++r) {
    b.weights.push_back(proximity_weight(b.masks.row(r), 0.25));
    double y = 0.1;
    for (int j = 0; j < 50; ++j) y += 0.01 * (j % 7) * b.masks.at(r, j);
    b.responses.push_back(y);
  }
  const auto t1 = std::chrono::steady_clock::now();
  const auto fit = fit_surrogate(b, 1.0);
  const double solve_ms = 1e3 * std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  c.expect(solve_ms < 100.0, "ridge solve took " + std::to_string(solve_ms) + " ms");
  c.expect(fit.segment_weights.size() == 50, "wrong surrogate size");

  char buf[128];
  std::snprintf(buf, sizeof buf, "explain k=%d, 5000 samples: %.2f s; 51x51 ridge solve: %.2f ms", ex.k(),
                explain_s, solve_ms);
  c.note(buf);
  return c.outcome();
}

// ------------------------------------------------------------ criterion 7

const std::vector<std::string> kGoldenFiles = {
    "manifest.json",          "metrics.json",         "metrics.csv",
    "predictions.csv",        "explanation.json",     "overlay.png",
    "segments.png",           "accuracy.svg",         "loss.svg"};

bool numbers_close(const json& a, const json& b, double tol) {
  if (a.is_number() && b.is_number()) return std::abs(a.get<double>() - b.get<double>()) <= tol;
  if (a.type() != b.type() || a.size() != b.size()) return false;
  if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key()) || !numbers_close(it.value(), b[it.key()], tol)) return false;
    }
    return true;
  }
  if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!numbers_close(a[i], b[i], tol)) return false;
    }
    return true;
  }
  return a == b;
}

bool has_keys(const json& doc, std::initializer_list<const char*> keys) {
  return std::all_of(keys.begin(), keys.end(), [&](const char* k) { return doc.contains(k); });
}

Outcome end_to_end(bool regenerate) {
  Check c;
  TempDir dir;
  const auto src = testing::source_dir();
  const auto corpus = (src / "tests/data/corpus40").string();
  const auto model = (src / "tests/data/toy_red_model.json").string();
  const auto run = [&](const std::vector<std::string>& args) {
    const auto r = run_cli(args);
    c.expect(r.exit_code == 0, args[0] + " exit " + std::to_string(r.exit_code) + ": " + r.err);
    return r.exit_code == 0;
  };

  const auto out = (dir / "out").string();
  if (!run({"split", "--dataset", corpus, "--out", out, "--ratios", "0.7,0.3,0", "--seed", "2024"})) {
    return c.outcome();
  }
  const auto manifest = load_manifest(dir / "out/manifest.json");
  const auto oscc = std::find_if(manifest.test.begin(), manifest.test.end(),
                                 [](const SampleRef& r) { return r.label == Label::Oscc; });
  c.expect(oscc != manifest.test.end(), "no OSCC image in the test partition");
  if (oscc == manifest.test.end()) return c.outcome();

  run({"evaluate", "--dataset", corpus, "--manifest", (dir / "out/manifest.json").string(), "--model", model,
       "--out", out});
  const auto explain_dir = (dir / "explain").string();
  run({"explain", "--model", model, "--dataset", corpus, "--manifest", (dir / "out/manifest.json").string(),
       "--image", oscc->id, "--baseline", "rgb:0,0,0", "--id-map", "--seed", "2024", "--out", explain_dir});
  run({"curves", "--log", (src / "tests/data/epoch_log.csv").string(), "--out", out});

  const std::string stem = fs::path(oscc->id).replace_extension().generic_string();
  std::string flat = stem;
  std::replace(flat.begin(), flat.end(), '/', '_');
  const auto produced = [&](const std::string& name) -> fs::path {
    if (name == "explanation.json") return dir / ("explain/" + flat + ".explanation.json");
    if (name == "overlay.png") return dir / ("explain/" + flat + ".overlay.png");
    if (name == "segments.png") return dir / ("explain/" + flat + ".segments.png");
    return dir / ("out/" + name);
  };
  for (const auto& name : kGoldenFiles) c.expect(fs::exists(produced(name)), name + " not produced");

  // Schema checks that do not depend on the golden copies.
  try {
    const auto metrics = json::parse(read_text(produced("metrics.json")));
    c.expect(has_keys(metrics, {"model", "partition", "threshold", "matrix", "precision", "recall", "f1",
                                "accuracy"}),
             "metrics.json keys");
    c.expect(metrics["matrix"]["tp"].get<int>() + metrics["matrix"]["tn"].get<int>() +
                     metrics["matrix"]["fp"].get<int>() + metrics["matrix"]["fn"].get<int>() ==
                 static_cast<int>(manifest.test.size()),
             "confusion total differs from the test partition size");
    const auto ex = json::parse(read_text(produced("explanation.json")));
    c.expect(has_keys(ex, {"model", "image_id", "seed", "config", "k", "target_class", "segment_weights",
                           "intercept", "local_r2"}),
             "explanation.json keys");
    c.expect(ex["segment_weights"].size() == ex["k"].get<std::size_t>(), "segment_weights length != k");
    c.expect(ex["image_id"] == oscc->id, "explanation image_id");
    const auto overlay = read_image(produced("overlay.png"));
    c.expect(overlay.width() == 64 && overlay.height() == 64, "overlay size");
    c.expect(read_text(produced("predictions.csv")).rfind("id,label,p_normal,p_oscc\n", 0) == 0,
             "predictions.csv header");
    c.expect(read_text(produced("metrics.csv")).rfind(report_csv_header(), 0) == 0, "metrics.csv header");
    c.expect(read_text(produced("loss.svg")).find("data-epoch=\"74\"") != std::string::npos,
             "loss.svg best-epoch marker");
  } catch (const std::exception& e) {
    c.expect(false, std::string("schema check threw: ") + e.what());
  }

  const fs::path golden = src / "tests/data/golden";
  if (regenerate) {
    fs::create_directories(golden);
    for (const auto& name : kGoldenFiles) fs::copy_file(produced(name), golden / name, fs::copy_options::overwrite_existing);
    c.note("golden files regenerated in " + golden.string());
    return c.outcome();
  }
  int matched = 0;
  for (const auto& name : kGoldenFiles) {
    if (!fs::exists(golden / name)) {
      c.expect(false, "missing golden " + name);
      continue;
    }
    bool same = false;
    try {
      const auto ext = fs::path(name).extension();
      if (name == "explanation.json") {
        same = numbers_close(json::parse(read_text(produced(name))), json::parse(read_text(golden / name)), 1e-9);
      } else if (ext == ".png") {
        same = read_image(produced(name)) == read_image(golden / name);
      } else {
        same = read_text(produced(name)) == read_text(golden / name);
      }
    } catch (const std::exception& e) {
      c.expect(false, name + ": " + e.what());
    }
    c.expect(same, name + " differs from golden");
    matched += same;
  }
  c.note(std::to_string(matched) + "/" + std::to_string(kGoldenFiles.size()) + " artifacts match golden");
  return c.outcome();
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  bool regenerate = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--regenerate-golden") regenerate = true;
  }
  const std::vector<Criterion> criteria = {
      {1, "metric reconstruction", 1.0, metric_reconstruction},
      {2, "surrogate matches least-squares oracle", 5.0, surrogate_oracle},
      {3, "LIME localization on two-region images", 60.0, localization},
      {4, "determinism of explain and split", 30.0, determinism},
      {5, "fuzzed invariants", 600.0, fuzz_invariants},
      {6, "throughput floor", 600.0, throughput},
      {7, "end-to-end pipeline against golden files", 120.0, [&] { return end_to_end(regenerate); }},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > cr.budget_s) {
      o.pass = false;
      o.detail += "; over the " + std::to_string(static_cast<int>(cr.budget_s)) + " s budget";
    }
    failed += !o.pass;
    std::printf("%s criterion %d: %s (%.2f s) - %s\n", o.pass ? "PASS" : "FAIL", cr.id, cr.title, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
