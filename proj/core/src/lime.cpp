#include "histolime/lime.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "histolime/errors.hpp"
#include "histolime/rng.hpp"
#include "json.hpp"

namespace histolime {
namespace {

using nlohmann::json;

void check_same_shape(const Raster& img, const SuperpixelMap& sp) {
  if (img.width() != sp.width || img.height() != sp.height) {
    throw ShapeError("image is " + std::to_string(img.width()) + "x" +
                     std::to_string(img.height()) + " but superpixel map is " +
                     std::to_string(sp.width) + "x" + std::to_string(sp.height));
  }
}

std::string baseline_label(const Baseline& b) {
  if (b.kind == Baseline::Kind::SegmentMean) return "mean";
  return "rgb:" + std::to_string(b.color[0]) + "," + std::to_string(b.color[1]) + "," +
         std::to_string(b.color[2]);
}

}  // namespace

void validate(const LimeConfig& cfg) {
  if (cfg.n_samples < 2) throw ShapeError("n_samples must be >= 2");
  if (!(cfg.kernel_width > 0.0) || !std::isfinite(cfg.kernel_width)) {
    throw ShapeError("kernel_width must be > 0");
  }
  if (!(cfg.ridge_lambda >= 0.0) || !std::isfinite(cfg.ridge_lambda)) {
    throw ShapeError("ridge_lambda must be >= 0");
  }
  if (cfg.top_k < 1) throw ShapeError("top_k must be >= 1");
  if (cfg.n_segments < 1) throw ShapeError("n_segments must be >= 1");
  if (cfg.batch_size < 1) throw ShapeError("batch_size must be >= 1");
  if (cfg.target_class && (*cfg.target_class < 0 || *cfg.target_class > 1)) {
    throw ShapeError("target_class must be 0 or 1");
  }
}

MaskMatrix sample_masks(int k, int n, std::uint64_t seed) {
  if (k < 1) throw ShapeError("mask width k must be >= 1");
  if (n < 2) throw ShapeError("need at least 2 mask rows");
  MaskMatrix m;
  m.rows = n;
  m.cols = k;
  m.values.resize(static_cast<std::size_t>(n) * k);
  std::fill_n(m.values.begin(), k, std::uint8_t{1});
  SplitMix64 rng(seed);
  for (std::size_t i = static_cast<std::size_t>(k); i < m.values.size(); ++i) {
    m.values[i] = rng.coin() ? 1 : 0;
  }
  return m;
}

double proximity_weight(std::span<const std::uint8_t> mask, double kernel_width) {
  if (mask.empty()) throw ShapeError("mask must be non-empty");
  if (!(kernel_width > 0.0)) throw ShapeError("kernel_width must be > 0");
  std::size_t on = 0;
  for (auto v : mask) on += v != 0;
  const double d = 1.0 - std::sqrt(static_cast<double>(on) / static_cast<double>(mask.size()));
  return std::exp(-(d * d) / (kernel_width * kernel_width));
}

std::vector<Rgb> baseline_colors(const Raster& img, const SuperpixelMap& sp,
                                 const Baseline& baseline) {
  check_same_shape(img, sp);
  const auto k = static_cast<std::size_t>(sp.k);
  if (baseline.kind == Baseline::Kind::FixedColor) return std::vector<Rgb>(k, baseline.color);

  std::vector<std::uint64_t> sum(k * 3, 0);
  std::vector<std::uint64_t> count(k, 0);
  const auto data = img.data();
  for (std::size_t p = 0; p < sp.labels.size(); ++p) {
    const auto s = static_cast<std::size_t>(sp.labels[p]);
    sum[s * 3] += data[p * 3];
    sum[s * 3 + 1] += data[p * 3 + 1];
    sum[s * 3 + 2] += data[p * 3 + 2];
    ++count[s];
  }
  std::vector<Rgb> out(k, Rgb{0, 0, 0});
  for (std::size_t s = 0; s < k; ++s) {
    if (count[s] == 0) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      out[s][c] = static_cast<std::uint8_t>((sum[s * 3 + c] + count[s] / 2) / count[s]);
    }
  }
  return out;
}

Raster apply_mask(const Raster& img, std::span<const std::uint8_t> mask, const SuperpixelMap& sp,
                  std::span<const Rgb> fill) {
  check_same_shape(img, sp);
  if (mask.size() != static_cast<std::size_t>(sp.k) || fill.size() != mask.size()) {
    throw ShapeError("mask has " + std::to_string(mask.size()) + " entries for " +
                     std::to_string(sp.k) + " segments");
  }
  Raster out = img;
  auto data = out.data();
  for (std::size_t p = 0; p < sp.labels.size(); ++p) {
    const auto s = static_cast<std::size_t>(sp.labels[p]);
    if (mask[s]) continue;
    data[p * 3] = fill[s][0];
    data[p * 3 + 1] = fill[s][1];
    data[p * 3 + 2] = fill[s][2];
  }
  return out;
}

Raster apply_mask(const Raster& img, std::span<const std::uint8_t> mask, const SuperpixelMap& sp,
                  const Baseline& baseline) {
  const auto fill = baseline_colors(img, sp, baseline);
  return apply_mask(img, mask, sp, fill);
}

Explanation explain(const Classifier& classifier, const Raster& img, const LimeConfig& cfg) {
  validate(cfg);
  if (img.width() != classifier.input_side() || img.height() != classifier.input_side()) {
    throw ShapeError("explain expects a " + std::to_string(classifier.input_side()) + "x" +
                     std::to_string(classifier.input_side()) + " image");
  }
  const auto target = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_segments),
                                            img.pixel_count());
  return explain(classifier, img, segment(img, static_cast<int>(target), cfg.compactness), cfg);
}

Explanation explain(const Classifier& classifier, const Raster& img, const SuperpixelMap& sp,
                    const LimeConfig& cfg) {
  validate(cfg);
  check_same_shape(img, sp);
  const int n = cfg.n_samples;
  const MaskMatrix masks = sample_masks(sp.k, n, cfg.seed);
  const auto fill = baseline_colors(img, sp, cfg.baseline);

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches = (static_cast<std::size_t>(n) + batch - 1) / batch;
  std::vector<double> probs(static_cast<std::size_t>(n) * 2, 0.0);
  std::vector<std::exception_ptr> errors(batches);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    std::vector<Raster> inputs;
    for (std::size_t b = next++; b < batches; b = next++) {
      try {
        const std::size_t begin = b * batch;
        const std::size_t end = std::min(static_cast<std::size_t>(n), begin + batch);
        inputs.clear();
        for (std::size_t r = begin; r < end; ++r) {
          inputs.push_back(apply_mask(img, masks.row(static_cast<int>(r)), sp, fill));
        }
        const auto out = classifier.predict(inputs);
        for (std::size_t r = 0; r < out.rows(); ++r) {
          probs[(begin + r) * 2] = out.at(r, 0);
          probs[(begin + r) * 2 + 1] = out.at(r, 1);
        }
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(batches)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Explanation ex;
  ex.model = classifier.manifest().name;
  ex.config = cfg;
  ex.original_probabilities = {probs[0], probs[1]};
  ex.target_class = cfg.target_class.value_or(
      static_cast<int>(argmax_class(std::span<const double>(probs).first(2))));
  ex.superpixels = sp;

  PerturbationBatch pb;
  pb.masks = masks;
  pb.weights.resize(static_cast<std::size_t>(n));
  pb.responses.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pb.weights[static_cast<std::size_t>(i)] = proximity_weight(masks.row(i), cfg.kernel_width);
    pb.responses[static_cast<std::size_t>(i)] =
        probs[static_cast<std::size_t>(i) * 2 + static_cast<std::size_t>(ex.target_class)];
  }
  auto fit = fit_surrogate(pb, cfg.ridge_lambda);
  ex.segment_weights = std::move(fit.segment_weights);
  ex.intercept = fit.intercept;
  ex.local_r2 = fit.local_r2;
  return ex;
}

std::string explanation_to_json(const Explanation& e) {
  json cfg;
  cfg["n_samples"] = e.config.n_samples;
  cfg["kernel_width"] = e.config.kernel_width;
  cfg["lambda"] = e.config.ridge_lambda;
  cfg["top_k"] = e.config.top_k;
  cfg["segments"] = e.config.n_segments;
  cfg["compactness"] = e.config.compactness;
  cfg["baseline"] = baseline_label(e.config.baseline);
  cfg["batch_size"] = e.config.batch_size;
  if (e.config.target_class) {
    cfg["target_class"] = *e.config.target_class;
  } else {
    cfg["target_class"] = "predicted";
  }

  json doc;
  doc["model"] = e.model;
  doc["image_id"] = e.image_id;
  doc["seed"] = e.config.seed;
  doc["config"] = std::move(cfg);
  doc["k"] = e.k();
  doc["target_class"] = e.target_class;
  doc["segment_weights"] = e.segment_weights;
  doc["intercept"] = e.intercept;
  doc["local_r2"] = e.local_r2;
  return doc.dump(2) + "\n";
}

std::vector<int> rank_segments(std::span<const double> weights) {
  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace histolime
