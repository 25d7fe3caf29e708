#include "histolime/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include "histolime/codec.hpp"
#include "histolime/errors.hpp"
#include "histolime/rng.hpp"

namespace fs = std::filesystem;

namespace histolime {
namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<Label> class_from_dirname(const std::string& name) {
  const auto n = to_lower(name);
  if (n == "normal") return Label::Normal;
  if (n == "oscc") return Label::Oscc;
  return std::nullopt;
}

bool is_split_dirname(const std::string& name) {
  const auto n = to_lower(name);
  return n == "train" || n == "test" || n == "val" || n == "validation";
}

bool has_image_extension(const fs::path& p) {
  const auto ext = to_lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::directory_entry> sorted_entries(const fs::path& dir) {
  std::vector<fs::directory_entry> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e);
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.path() < b.path(); });
  return entries;
}

struct ClassDir {
  fs::path path;
  Label label;
};

}  // namespace

std::string_view label_name(Label l) noexcept { return l == Label::Normal ? "Normal" : "OSCC"; }

Raster LabeledImage::load() const {
  if (raster) return *raster;
  return read_image(source);
}

std::size_t Corpus::count(Label l) const {
  return static_cast<std::size_t>(std::count_if(images.begin(), images.end(),
                                                [l](const auto& im) { return im.label == l; }));
}

Corpus load_corpus(const fs::path& root, const CorpusOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw MissingClassDirectory("dataset root '" + root.string() + "' is not a directory");
  }

  std::vector<ClassDir> class_dirs;
  for (const auto& e : sorted_entries(root)) {
    if (!e.is_directory()) continue;
    const auto name = e.path().filename().string();
    if (auto label = class_from_dirname(name)) {
      class_dirs.push_back({e.path(), *label});
    } else if (is_split_dirname(name)) {
      for (const auto& sub : sorted_entries(e.path())) {
        if (!sub.is_directory()) continue;
        if (auto label = class_from_dirname(sub.path().filename().string())) {
          class_dirs.push_back({sub.path(), *label});
        }
      }
    }
  }

  for (Label l : {Label::Normal, Label::Oscc}) {
    const bool found = std::any_of(class_dirs.begin(), class_dirs.end(),
                                   [l](const auto& d) { return d.label == l; });
    if (!found) {
      throw MissingClassDirectory("no '" + std::string(label_name(l)) + "' directory under " +
                                  root.string());
    }
  }

  std::vector<LabeledImage> candidates;
  for (const auto& dir : class_dirs) {
    for (const auto& e : sorted_entries(dir.path)) {
      if (!e.is_regular_file() || !has_image_extension(e.path())) continue;
      LabeledImage im;
      im.id = fs::relative(e.path(), root).generic_string();
      im.label = dir.label;
      im.source = e.path();
      candidates.push_back(std::move(im));
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  // Decode in parallel; each slot is written by exactly one worker.
  std::vector<std::string> failures(candidates.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      try {
        Raster r = read_image(candidates[i].source);
        if (options.keep_rasters) candidates[i].raster = std::move(r);
      } catch (const Error& e) {
        failures[i] = e.what();
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, 16);
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, candidates.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  Corpus corpus;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (failures[i].empty()) {
      corpus.images.push_back(std::move(candidates[i]));
    } else {
      corpus.warnings.push_back("skipped " + candidates[i].id + ": " + failures[i]);
    }
  }
  for (Label l : {Label::Normal, Label::Oscc}) {
    if (corpus.count(l) == 0) {
      corpus.warnings.push_back("class " + std::string(label_name(l)) + " has no images");
    }
  }
  return corpus;
}

std::vector<SampleRef> to_refs(std::span<const LabeledImage> images) {
  std::vector<SampleRef> refs;
  refs.reserve(images.size());
  for (const auto& im : images) refs.push_back({im.id, im.label});
  return refs;
}

std::string_view partition_name(Partition p) noexcept {
  switch (p) {
    case Partition::Train:
      return "train";
    case Partition::Test:
      return "test";
    case Partition::Validation:
      return "validation";
  }
  return "train";
}

std::optional<Partition> parse_partition(std::string_view name) noexcept {
  if (name == "train") return Partition::Train;
  if (name == "test") return Partition::Test;
  if (name == "val" || name == "validation") return Partition::Validation;
  return std::nullopt;
}

const std::vector<SampleRef>& SplitManifest::partition(Partition p) const {
  switch (p) {
    case Partition::Train:
      return train;
    case Partition::Test:
      return test;
    case Partition::Validation:
      return validation;
  }
  return train;
}

SplitManifest stratified_split(std::span<const SampleRef> corpus, const SplitRatios& ratios,
                               std::uint64_t seed) {
  if (corpus.empty()) throw EmptyCorpus("cannot split an empty corpus");
  for (double r : {ratios.train, ratios.test, ratios.validation}) {
    if (!std::isfinite(r) || r < 0.0) throw BadRatios("ratios must be finite and non-negative");
  }
  const double sum = ratios.train + ratios.test + ratios.validation;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw BadRatios("ratios must sum to 1, got " + std::to_string(sum));
  }

  SplitManifest m;
  m.seed = seed;
  m.ratios = ratios;
  SplitMix64 rng(seed);
  for (Label l : {Label::Normal, Label::Oscc}) {
    std::vector<SampleRef> members;
    for (const auto& s : corpus) {
      if (s.label == l) members.push_back(s);
    }
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    seeded_shuffle(std::span<SampleRef>(members), rng);

    const double n = static_cast<double>(members.size());
    auto cut = [n](double cumulative) {
      return static_cast<std::size_t>(std::min(n, std::floor(n * cumulative + 0.5 + 1e-9)));
    };
    const std::size_t b1 = cut(ratios.train);
    const std::size_t b2 = std::max(b1, cut(ratios.train + ratios.validation));
    const auto first = members.begin();
    m.train.insert(m.train.end(), first, first + static_cast<std::ptrdiff_t>(b1));
    m.validation.insert(m.validation.end(), first + static_cast<std::ptrdiff_t>(b1),
                        first + static_cast<std::ptrdiff_t>(b2));
    m.test.insert(m.test.end(), first + static_cast<std::ptrdiff_t>(b2), members.end());
  }
  return m;
}

}  // namespace histolime
