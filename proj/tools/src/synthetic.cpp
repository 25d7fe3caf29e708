#include "histolime_cli/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "histolime/codec.hpp"
#include "histolime/rng.hpp"

namespace histolime::synth {
namespace {

std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

void paint_disk(Raster& img, double cx, double cy, double r, SplitMix64& rng) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy > r * r) continue;
      const int n = static_cast<int>(rng.below(12));
      img.set(x, y, {clamp8(210 + n), clamp8(30 + n), 40});
    }
  }
}

Raster background(int side, SplitMix64& rng) {
  Raster img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const int n = static_cast<int>(rng.below(12));
      img.set(x, y, {clamp8(25 + n), 110, clamp8(150 + n)});
    }
  }
  return img;
}

}  // namespace

Raster two_region_image(std::uint64_t seed, int side) {
  SplitMix64 rng(seed);
  const double r = side * rng.uniform(0.12, 0.22);
  const double cx = rng.uniform(r + 2, side - r - 2);
  const double cy = rng.uniform(r + 2, side - r - 2);
  Raster img = background(side, rng);
  paint_disk(img, cx, cy, r, rng);
  return img;
}

Raster tissue_tile(Label label, std::uint64_t seed, int side) {
  SplitMix64 rng(seed);
  const double r = label == Label::Oscc ? side * rng.uniform(0.13, 0.30) : side * rng.uniform(0.0, 0.17);
  const double cx = rng.uniform(0.3, 0.7) * side;
  const double cy = rng.uniform(0.3, 0.7) * side;
  Raster img = background(side, rng);
  paint_disk(img, cx, cy, r, rng);
  return img;
}

void write_corpus(const std::filesystem::path& root, int normal, int oscc, std::uint64_t seed,
                  int side) {
  SplitMix64 seeds(seed);
  for (Label label : {Label::Normal, Label::Oscc}) {
    const bool is_normal = label == Label::Normal;
    const auto dir = root / (is_normal ? "Normal" : "OSCC");
    std::filesystem::create_directories(dir);
    for (int i = 0; i < (is_normal ? normal : oscc); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%s_%03d.png", is_normal ? "normal" : "oscc", i);
      write_image(dir / name, tissue_tile(label, seeds.next(), side));
    }
  }
}

std::string epoch_log(int epochs, int best_epoch, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::ostringstream os;
  os << "epoch,train_acc,val_acc,train_loss,val_loss\n";
  char line[128];
  for (int e = 1; e <= epochs; ++e) {
    const double t = static_cast<double>(e) / epochs;
    const double train_loss = 0.7 * std::exp(-4.0 * t) + 0.02 + 0.01 * rng.uniform();
    const double train_acc = std::min(1.0, 1.0 - 0.45 * std::exp(-5.0 * t) - 0.005 * rng.uniform());
    // Convex bowl around best_epoch plus small noise that cannot move the minimum.
    const double d = static_cast<double>(e - best_epoch) / epochs;
    const double val_loss = 0.08 + 0.9 * d * d + (e == best_epoch ? 0.0 : 0.002 + 0.004 * rng.uniform());
    const double val_acc = std::clamp(0.985 - 0.6 * d * d - 0.004 * rng.uniform(), 0.0, 1.0);
    std::snprintf(line, sizeof line, "%d,%.4f,%.4f,%.4f,%.4f\n", e, train_acc, val_acc, train_loss,
                  val_loss);
    os << line;
  }
  return os.str();
}

std::string predictions_for(const ConfusionMatrix& m, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<PredictionRecord> rows;
  auto emit = [&](std::uint64_t n, Label truth, bool predict_oscc, const char* tag) {
    for (std::uint64_t i = 0; i < n; ++i) {
      // Probabilities on a 1e-4 grid keep the CSV short and exact to replay.
      const double margin = std::round(rng.uniform(0.01, 0.49) * 1e4) / 1e4;
      const double p = predict_oscc ? 0.5 + margin : 0.5 - margin;
      char id[48];
      std::snprintf(id, sizeof id, "%s_%04llu.png", tag, static_cast<unsigned long long>(i));
      rows.push_back({id, truth, std::round((1.0 - p) * 1e4) / 1e4, p});
    }
  };
  emit(m.tp, Label::Oscc, true, "tp");
  emit(m.tn, Label::Normal, false, "tn");
  emit(m.fp, Label::Normal, true, "fp");
  emit(m.fn, Label::Oscc, false, "fn");
  return predictions_to_csv(rows);
}

}  // namespace histolime::synth
