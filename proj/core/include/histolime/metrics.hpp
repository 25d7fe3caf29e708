#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "histolime/classifier.hpp"
#include "histolime/dataset.hpp"

namespace histolime {

/// Binary confusion counts with OSCC (label 1) as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  /// Relabels with Normal as positive: tp<->tn, fp<->fn.
  ConfusionMatrix swapped() const noexcept { return {tn, tp, fn, fp}; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Exact non-negative rational. Metrics stay in this form until they are
/// printed or serialized.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  /// Half-up rounding to `digits` decimals, computed in integers.
  double rounded(int digits = 4) const noexcept;
};

/// Throws LengthMismatch when the spans differ in length or are empty.
ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> labels);

// Each throws UndefinedMetric on a zero denominator.
Ratio precision_ratio(const ConfusionMatrix& m);
Ratio recall_ratio(const ConfusionMatrix& m);
/// 2TP / (2TP + FP + FN), which equals 2PR/(P+R) whenever both are defined.
Ratio f1_ratio(const ConfusionMatrix& m);
Ratio accuracy_ratio(const ConfusionMatrix& m);

double precision(const ConfusionMatrix& m);
double recall(const ConfusionMatrix& m);
double f1(const ConfusionMatrix& m);
double accuracy(const ConfusionMatrix& m);

struct MetricsReport {
  std::string model;
  std::string partition;
  double threshold = 0.5;
  ConfusionMatrix matrix;
  // Absent when undefined; serialized as null.
  std::optional<Ratio> precision;
  std::optional<Ratio> recall;
  std::optional<Ratio> f1;
  std::optional<Ratio> accuracy;

  std::uint64_t normal_count() const noexcept { return matrix.tn + matrix.fp; }
  std::uint64_t oscc_count() const noexcept { return matrix.tp + matrix.fn; }
};

MetricsReport make_report(const ConfusionMatrix& m, std::string model = {},
                          std::string partition = {}, double threshold = 0.5);

/// {model, partition, threshold, matrix:{tp,tn,fp,fn}, precision, recall, f1, accuracy}
/// with metric values rounded half-up to four decimals.
std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(std::string_view text);

std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);

/// Four decimals, or "n/a" when the metric is undefined.
std::string format_metric(const std::optional<Ratio>& v);

struct PredictionRecord {
  std::string id;
  Label label = Label::Normal;
  double p_normal = 0.0;
  double p_oscc = 0.0;
};

/// OSCC iff p_oscc > threshold. At 0.5 this is argmax with ties to Normal.
Label decide(const PredictionRecord& r, double threshold) noexcept;

ConfusionMatrix confusion_from_predictions(std::span<const PredictionRecord> records,
                                           double threshold);

std::string predictions_to_csv(std::span<const PredictionRecord> records);
/// Parses the format written by predictions_to_csv (id,label,p_normal,p_oscc).
std::vector<PredictionRecord> predictions_from_csv(std::string_view text);

struct EvaluateOptions {
  double threshold = 0.5;
  std::size_t batch_size = 32;
  unsigned threads = 1;
  std::string model_name;
  std::string partition_name;
};

struct Evaluation {
  MetricsReport report;
  std::vector<PredictionRecord> predictions;  // partition order
};

/// Loads and resizes each image to the classifier's input, predicts in
/// batches, and counts in partition order regardless of worker count.
Evaluation evaluate(const Classifier& classifier, std::span<const LabeledImage> partition,
                    const EvaluateOptions& options = {});

}  // namespace histolime
