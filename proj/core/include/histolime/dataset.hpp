#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "histolime/raster.hpp"

namespace histolime {

enum class Label : int { Normal = 0, Oscc = 1 };

inline constexpr int label_index(Label l) noexcept { return static_cast<int>(l); }
std::string_view label_name(Label l) noexcept;

/// One image of the corpus. `id` is the path relative to the corpus root
/// with '/' separators; the raster is decoded on demand unless the corpus
/// was loaded with keep_rasters.
struct LabeledImage {
  std::string id;
  Label label = Label::Normal;
  std::filesystem::path source;
  std::optional<Raster> raster;

  Raster load() const;
};

struct CorpusOptions {
  bool keep_rasters = false;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct Corpus {
  std::vector<LabeledImage> images;  // sorted by id
  std::vector<std::string> warnings;

  std::size_t count(Label l) const;
};

/// Accepts <root>/<Normal|OSCC>/* and <root>/<train|test|val>/<Normal|OSCC>/*.
/// Directory names match case-insensitively. Throws MissingClassDirectory
/// when either class has no directory at all. Undecodable files become
/// warnings.
Corpus load_corpus(const std::filesystem::path& root, const CorpusOptions& options = {});

struct SampleRef {
  std::string id;
  Label label = Label::Normal;

  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

std::vector<SampleRef> to_refs(std::span<const LabeledImage> images);

enum class Partition { Train, Test, Validation };

std::string_view partition_name(Partition p) noexcept;
/// Accepts train, test, val, validation.
std::optional<Partition> parse_partition(std::string_view name) noexcept;

struct SplitRatios {
  double train = 0.70;
  double test = 0.15;
  double validation = 0.15;

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<SampleRef> train;
  std::vector<SampleRef> test;
  std::vector<SampleRef> validation;

  const std::vector<SampleRef>& partition(Partition p) const;
  std::size_t size() const { return train.size() + test.size() + validation.size(); }

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// Per class (Normal first, then OSCC): sort ids, shuffle with a single
/// SplitMix64 stream seeded by `seed`, then cut at round-half-up cumulative
/// boundaries in train, validation, test order. Throws EmptyCorpus / BadRatios.
SplitManifest stratified_split(std::span<const SampleRef> corpus, const SplitRatios& ratios,
                               std::uint64_t seed);

/// Canonical JSON: sorted keys, two-space indent, LF, trailing newline.
std::string manifest_to_json(const SplitManifest& m);
/// Throws ManifestParseError naming the line or field at fault.
SplitManifest manifest_from_json(std::string_view text);

void save_manifest(const SplitManifest& m, const std::filesystem::path& path);
SplitManifest load_manifest(const std::filesystem::path& path);

}  // namespace histolime
