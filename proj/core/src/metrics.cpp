#include "histolime/metrics.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "histolime/errors.hpp"
#include "histolime/imaging.hpp"
#include "histolime/rng.hpp"
#include "json.hpp"

namespace histolime {
namespace {

using nlohmann::json;

Ratio checked(std::uint64_t num, std::uint64_t den, const char* what) {
  if (den == 0) throw UndefinedMetric(std::string(what) + " has a zero denominator");
  return {num, den};
}

template <typename F>
std::optional<Ratio> defined(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

json metric_json(const std::optional<Ratio>& r) {
  if (!r) return nullptr;
  return r->rounded(4);
}

std::optional<Ratio> metric_from_json(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  const double v = doc.at(key).get<double>();
  // Stored values are already rounded; keep them as x/10000.
  return Ratio{static_cast<std::uint64_t>(std::llround(v * 10000.0)), 10000};
}

std::string csv_metric(const std::optional<Ratio>& r) { return format_metric(r); }

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double Ratio::rounded(int digits) const noexcept {
  uint128_t scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  const uint128_t n = static_cast<uint128_t>(num) * scale * 2 + den;
  const uint128_t q = n / (static_cast<uint128_t>(den) * 2);
  return static_cast<double>(q) / static_cast<double>(scale);
}

ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) {
    throw LengthMismatch(std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw LengthMismatch("need at least one prediction");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == Label::Oscc;
    const bool truth = labels[i] == Label::Oscc;
    if (pred && truth) {
      ++m.tp;
    } else if (!pred && !truth) {
      ++m.tn;
    } else if (pred) {
      ++m.fp;
    } else {
      ++m.fn;
    }
  }
  return m;
}

Ratio precision_ratio(const ConfusionMatrix& m) { return checked(m.tp, m.tp + m.fp, "precision"); }
Ratio recall_ratio(const ConfusionMatrix& m) { return checked(m.tp, m.tp + m.fn, "recall"); }
Ratio f1_ratio(const ConfusionMatrix& m) {
  // Both P and R must exist, and they are both zero exactly when tp == 0.
  precision_ratio(m);
  recall_ratio(m);
  if (m.tp == 0) throw UndefinedMetric("f1 is undefined when precision and recall are both 0");
  return {2 * m.tp, 2 * m.tp + m.fp + m.fn};
}
Ratio accuracy_ratio(const ConfusionMatrix& m) {
  return checked(m.tp + m.tn, m.total(), "accuracy");
}

double precision(const ConfusionMatrix& m) { return precision_ratio(m).value(); }
double recall(const ConfusionMatrix& m) { return recall_ratio(m).value(); }
double f1(const ConfusionMatrix& m) { return f1_ratio(m).value(); }
double accuracy(const ConfusionMatrix& m) { return accuracy_ratio(m).value(); }

MetricsReport make_report(const ConfusionMatrix& m, std::string model, std::string partition,
                          double threshold) {
  MetricsReport r;
  r.model = std::move(model);
  r.partition = std::move(partition);
  r.threshold = threshold;
  r.matrix = m;
  r.precision = defined([&] { return precision_ratio(m); });
  r.recall = defined([&] { return recall_ratio(m); });
  r.f1 = defined([&] { return f1_ratio(m); });
  r.accuracy = defined([&] { return accuracy_ratio(m); });
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  json doc;
  doc["model"] = r.model;
  doc["partition"] = r.partition;
  doc["threshold"] = r.threshold;
  doc["matrix"] = {{"tp", r.matrix.tp}, {"tn", r.matrix.tn}, {"fp", r.matrix.fp}, {"fn", r.matrix.fn}};
  doc["precision"] = metric_json(r.precision);
  doc["recall"] = metric_json(r.recall);
  doc["f1"] = metric_json(r.f1);
  doc["accuracy"] = metric_json(r.accuracy);
  return doc.dump(2) + "\n";
}

MetricsReport report_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
    MetricsReport r;
    r.model = doc.at("model").get<std::string>();
    r.partition = doc.at("partition").get<std::string>();
    r.threshold = doc.at("threshold").get<double>();
    const auto& m = doc.at("matrix");
    r.matrix = {m.at("tp").get<std::uint64_t>(), m.at("tn").get<std::uint64_t>(),
                m.at("fp").get<std::uint64_t>(), m.at("fn").get<std::uint64_t>()};
    r.precision = metric_from_json(doc, "precision");
    r.recall = metric_from_json(doc, "recall");
    r.f1 = metric_from_json(doc, "f1");
    r.accuracy = metric_from_json(doc, "accuracy");
    return r;
  } catch (const json::exception& e) {
    throw ManifestParseError(std::string("metrics report: ") + e.what());
  }
}

std::string report_csv_header() {
  return "model,partition,threshold,tp,tn,fp,fn,precision,recall,f1,accuracy\n";
}

std::string report_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << r.model << ',' << r.partition << ',' << format_double(r.threshold) << ',' << r.matrix.tp
     << ',' << r.matrix.tn << ',' << r.matrix.fp << ',' << r.matrix.fn << ','
     << csv_metric(r.precision) << ',' << csv_metric(r.recall) << ',' << csv_metric(r.f1) << ','
     << csv_metric(r.accuracy) << '\n';
  return os.str();
}

std::string format_metric(const std::optional<Ratio>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v->rounded(4);
  return os.str();
}

Label decide(const PredictionRecord& r, double threshold) noexcept {
  return r.p_oscc > threshold ? Label::Oscc : Label::Normal;
}

ConfusionMatrix confusion_from_predictions(std::span<const PredictionRecord> records,
                                           double threshold) {
  std::vector<Label> preds;
  std::vector<Label> labels;
  preds.reserve(records.size());
  labels.reserve(records.size());
  for (const auto& r : records) {
    preds.push_back(decide(r, threshold));
    labels.push_back(r.label);
  }
  return confusion(preds, labels);
}

std::string predictions_to_csv(std::span<const PredictionRecord> records) {
  std::ostringstream os;
  os << "id,label,p_normal,p_oscc\n";
  for (const auto& r : records) {
    os << r.id << ',' << label_index(r.label) << ',' << format_double(r.p_normal) << ','
       << format_double(r.p_oscc) << '\n';
  }
  return os.str();
}

std::vector<PredictionRecord> predictions_from_csv(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) {
    throw ManifestParseError("predictions line " + std::to_string(line_no) + ": " + msg);
  };
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "id,label,p_normal,p_oscc") fail("expected header id,label,p_normal,p_oscc");
      continue;
    }
    // The id may contain commas; the three numeric fields are taken from the right.
    std::string_view fields[4];
    std::string_view rest = line;
    for (int f = 3; f >= 1; --f) {
      const auto comma = rest.rfind(',');
      if (comma == std::string_view::npos) fail("expected 4 fields");
      fields[f] = rest.substr(comma + 1);
      rest = rest.substr(0, comma);
    }
    fields[0] = rest;
    PredictionRecord r;
    r.id = std::string(fields[0]);
    if (fields[1] == "0") {
      r.label = Label::Normal;
    } else if (fields[1] == "1") {
      r.label = Label::Oscc;
    } else {
      fail("label must be 0 or 1");
    }
    for (int f = 2; f <= 3; ++f) {
      double v = 0;
      const auto* first = fields[f].data();
      const auto* last = first + fields[f].size();
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) fail("bad probability");
      (f == 2 ? r.p_normal : r.p_oscc) = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

Evaluation evaluate(const Classifier& classifier, std::span<const LabeledImage> partition,
                    const EvaluateOptions& options) {
  if (partition.empty()) throw EmptyCorpus("cannot evaluate an empty partition");
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw ManifestError("threshold must lie in (0, 1)");
  }
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t batches = (partition.size() + batch - 1) / batch;
  std::vector<ProbabilityMatrix> results(batches);
  std::vector<std::exception_ptr> errors(batches);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b = next++; b < batches; b = next++) {
      try {
        const std::size_t begin = b * batch;
        const std::size_t end = std::min(partition.size(), begin + batch);
        std::vector<Raster> inputs;
        inputs.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          inputs.push_back(resize_to_input(partition[i].load(), classifier.input_side()));
        }
        results[b] = classifier.predict(inputs);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(batches)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Evaluation ev;
  ev.predictions.reserve(partition.size());
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t r = 0; r < results[b].rows(); ++r) {
      const auto& im = partition[b * batch + r];
      ev.predictions.push_back({im.id, im.label, results[b].at(r, 0), results[b].at(r, 1)});
    }
  }
  const auto m = confusion_from_predictions(ev.predictions, options.threshold);
  ev.report = make_report(m, options.model_name.empty() ? classifier.manifest().name : options.model_name,
                          options.partition_name, options.threshold);
  return ev;
}

}  // namespace histolime
