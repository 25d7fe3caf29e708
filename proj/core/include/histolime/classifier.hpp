#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "histolime/raster.hpp"

namespace histolime {

/// Row-major n x cols matrix of class probabilities.
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;
  explicit ProbabilityMatrix(std::size_t cols) : cols_(cols) {}
  ProbabilityMatrix(std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return cols_ ? values_.size() / cols_ : 0; }
  std::size_t cols() const noexcept { return cols_; }
  double at(std::size_t r, std::size_t c) const { return values_.at(r * cols_ + c); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }
  std::span<const double> values() const noexcept { return values_; }

  void append_row(std::span<const double> row);
  void append(const ProbabilityMatrix& other);

  friend bool operator==(const ProbabilityMatrix&, const ProbabilityMatrix&) = default;

 private:
  std::size_t cols_ = 2;
  std::vector<double> values_;
};

/// Turns raw backend scores into a two-class distribution. One score per row
/// is read as the OSCC logit; two non-negative scores are divided by their
/// sum; two scores with a negative entry go through a softmax.
/// Throws BackendFailure for non-finite values or unsupported widths.
std::vector<double> normalize_scores(std::span<const double> scores);

enum class Channel { R = 0, G = 1, B = 2 };

/// Deterministic logistic classifier on the mean of one channel.
struct ToySpec {
  Channel channel = Channel::R;
  double tau = 0.5;
  double steepness = 10.0;
};

/// p(OSCC) = 1 / (1 + exp(-s * (mu - tau))) with mu the channel mean in [0, 1].
double toy_predict_scalar(const ToySpec& spec, const Raster& img);

struct ExchangeFileBackend {
  std::filesystem::path model_path;
  std::string runner;  // empty: bundled onnx runner
};

struct ExternalBackend {
  std::string command;  // run through /bin/sh -c in `working_dir`
  std::filesystem::path working_dir;
  double timeout_seconds = 300.0;
};

struct Normalization {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};
};

struct ModelManifest {
  std::string name = "model";
  int input_side = 224;
  Normalization normalization;
  std::vector<std::string> class_names{"Normal", "OSCC"};
  std::variant<ToySpec, ExternalBackend, ExchangeFileBackend> backend;
};

/// Relative paths inside the manifest resolve against `base_dir`.
/// Throws ManifestError on schema or invariant violations.
ModelManifest parse_model_manifest(std::string_view text,
                                   const std::filesystem::path& base_dir = {});
std::string model_manifest_to_json(const ModelManifest& manifest);

class Classifier {
 public:
  explicit Classifier(ModelManifest manifest) : manifest_(std::move(manifest)) {}
  virtual ~Classifier() = default;
  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;

  const ModelManifest& manifest() const noexcept { return manifest_; }
  int input_side() const noexcept { return manifest_.input_side; }

  /// Row i is the [p(Normal), p(OSCC)] distribution for batch[i].
  /// Throws ShapeError when any raster is not input_side x input_side.
  /// Safe to call concurrently.
  ProbabilityMatrix predict(std::span<const Raster> batch) const;

 protected:
  virtual ProbabilityMatrix predict_batch(std::span<const Raster> batch) const = 0;

 private:
  ModelManifest manifest_;
};

/// Throws BackendUnavailable when the backend cannot be started.
std::unique_ptr<Classifier> make_classifier(ModelManifest manifest);
std::unique_ptr<Classifier> load_model(const std::filesystem::path& manifest_path);

/// Index of the larger probability; exact ties go to class 0 (Normal).
std::size_t argmax_class(std::span<const double> row) noexcept;

}  // namespace histolime
