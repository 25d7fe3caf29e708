#include "histolime/classifier.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "base64.hpp"
#include "histolime/errors.hpp"
#include "json.hpp"
#include "subprocess.hpp"

#ifndef HISTOLIME_DEFAULT_ONNX_RUNNER
#define HISTOLIME_DEFAULT_ONNX_RUNNER "histolime_onnx_runner.py"
#endif

namespace histolime {
namespace {

using nlohmann::json;

double logistic(double z) {
  // Split on sign so neither branch overflows.
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

std::string join3(const std::array<double, 3>& v) {
  std::ostringstream os;
  os.precision(17);
  os << v[0] << ',' << v[1] << ',' << v[2];
  return os.str();
}

class ToyClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  ProbabilityMatrix predict_batch(std::span<const Raster> batch) const override {
    const auto& spec = std::get<ToySpec>(manifest().backend);
    ProbabilityMatrix out(2);
    for (const auto& img : batch) {
      const double p = toy_predict_scalar(spec, img);
      const double row[2] = {1.0 - p, p};
      out.append_row(row);
    }
    return out;
  }
};

/// Talks the newline-delimited JSON protocol to a child process. Requests
/// are serialized under a mutex and matched to responses by sequence number.
class ProcessClassifier final : public Classifier {
 public:
  ProcessClassifier(ModelManifest manifest, const std::string& command,
                    const std::filesystem::path& working_dir, double timeout)
      : Classifier(std::move(manifest)), process_(command, working_dir), timeout_(timeout) {
    try {
      const auto empty = exchange({});
      if (empty.rows() != 0) throw BackendFailure("handshake returned rows for an empty batch");
    } catch (const BackendFailure& e) {
      throw BackendUnavailable("predictor did not complete the handshake (" +
                               std::string(e.what()) + "): " + command);
    }
  }

 protected:
  ProbabilityMatrix predict_batch(std::span<const Raster> batch) const override {
    return exchange(batch);
  }

 private:
  ProbabilityMatrix exchange(std::span<const Raster> batch) const {
    const int side = input_side();
    std::vector<std::uint8_t> raw;
    raw.reserve(batch.size() * static_cast<std::size_t>(side) * side * 3);
    for (const auto& img : batch) raw.insert(raw.end(), img.data().begin(), img.data().end());

    std::lock_guard lock(mutex_);
    const std::int64_t seq = next_seq_++;
    json request = {{"seq", seq},
                    {"shape", {batch.size(), side, side, 3}},
                    {"data_b64", detail::base64_encode(raw)}};
    if (!process_.write_line(request.dump())) {
      throw BackendFailure("predictor closed its input");
    }
    std::string line;
    if (!process_.read_line(line, timeout_)) {
      throw BackendFailure("no response from predictor for seq " + std::to_string(seq));
    }
    return parse_response(line, seq, batch.size());
  }

  static ProbabilityMatrix parse_response(const std::string& line, std::int64_t seq,
                                          std::size_t rows) {
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception&) {
      throw BackendFailure("malformed response line");
    }
    if (!doc.is_object() || !doc.contains("seq") || !doc.contains("probs") ||
        !doc["seq"].is_number_integer() || !doc["probs"].is_array()) {
      throw BackendFailure("response must carry integer seq and probs array");
    }
    if (doc["seq"].get<std::int64_t>() != seq) {
      throw BackendFailure("response seq " + doc["seq"].dump() + " does not match request " +
                           std::to_string(seq));
    }
    const auto& probs = doc["probs"];
    if (probs.size() != rows) {
      throw BackendFailure("expected " + std::to_string(rows) + " rows, got " +
                           std::to_string(probs.size()));
    }
    ProbabilityMatrix out(2);
    std::vector<double> scores;
    for (const auto& row : probs) {
      if (!row.is_array()) throw BackendFailure("probs rows must be arrays");
      scores.clear();
      for (const auto& v : row) {
        if (!v.is_number()) throw BackendFailure("probs entries must be numbers");
        scores.push_back(v.get<double>());
      }
      out.append_row(normalize_scores(scores));
    }
    return out;
  }

  mutable detail::LineProcess process_;
  mutable std::mutex mutex_;
  mutable std::int64_t next_seq_ = 0;
  double timeout_;
};

std::array<double, 3> triple(const json& v, const char* field) {
  if (!v.is_array() || v.size() != 3) {
    throw ManifestError(std::string("normalization.") + field + " must be three numbers");
  }
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) {
      throw ManifestError(std::string("normalization.") + field + " must be three numbers");
    }
    out[i] = v[i].get<double>();
  }
  return out;
}

Channel parse_channel(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "R" || s == "r") return Channel::R;
    if (s == "G" || s == "g") return Channel::G;
    if (s == "B" || s == "b") return Channel::B;
  }
  throw ManifestError("toy.channel must be one of R, G, B");
}

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::R:
      return "R";
    case Channel::G:
      return "G";
    case Channel::B:
      return "B";
  }
  return "R";
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

}  // namespace

ProbabilityMatrix::ProbabilityMatrix(std::size_t cols, std::vector<double> values)
    : cols_(cols), values_(std::move(values)) {
  if (cols_ == 0 || values_.size() % cols_ != 0) {
    throw ShapeError("probability matrix values do not fill whole rows");
  }
}

void ProbabilityMatrix::append_row(std::span<const double> row) {
  if (row.size() != cols_) throw ShapeError("row width does not match matrix");
  values_.insert(values_.end(), row.begin(), row.end());
}

void ProbabilityMatrix::append(const ProbabilityMatrix& other) {
  if (other.rows() == 0) return;
  if (other.cols_ != cols_) throw ShapeError("cannot append matrices of different width");
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

std::vector<double> normalize_scores(std::span<const double> scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw BackendFailure("non-finite score from backend");
  }
  if (scores.size() == 1) {
    const double p = logistic(scores[0]);
    return {1.0 - p, p};
  }
  if (scores.size() != 2) {
    throw BackendFailure("expected 1 or 2 scores per row, got " + std::to_string(scores.size()));
  }
  const double a = scores[0];
  const double b = scores[1];
  if (a >= 0 && b >= 0 && a + b > 0) {
    const double sum = a + b;
    return {a / sum, b / sum};
  }
  // Softmax over two logits is the logistic of their difference.
  const double p = logistic(b - a);
  return {1.0 - p, p};
}

double toy_predict_scalar(const ToySpec& spec, const Raster& img) {
  const auto data = img.data();
  const std::size_t c = static_cast<std::size_t>(spec.channel);
  std::uint64_t sum = 0;
  for (std::size_t i = c; i < data.size(); i += Raster::kChannels) sum += data[i];
  const double mu = static_cast<double>(sum) / (255.0 * static_cast<double>(img.pixel_count()));
  return logistic(spec.steepness * (mu - spec.tau));
}

std::size_t argmax_class(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

ProbabilityMatrix Classifier::predict(std::span<const Raster> batch) const {
  const int side = input_side();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].width() != side || batch[i].height() != side) {
      throw ShapeError("image " + std::to_string(i) + " is " + std::to_string(batch[i].width()) +
                       "x" + std::to_string(batch[i].height()) + ", model expects " +
                       std::to_string(side) + "x" + std::to_string(side));
    }
  }
  if (batch.empty()) return ProbabilityMatrix(2);
  return predict_batch(batch);
}

ModelManifest parse_model_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ManifestError("model manifest must be an object");

  ModelManifest m;
  try {
    if (doc.contains("name")) m.name = doc.at("name").get<std::string>();
    if (doc.contains("input_side")) m.input_side = doc.at("input_side").get<int>();
    if (doc.contains("class_names")) {
      m.class_names = doc.at("class_names").get<std::vector<std::string>>();
    }
    if (doc.contains("normalization")) {
      const auto& n = doc.at("normalization");
      if (n.contains("mean")) m.normalization.mean = triple(n.at("mean"), "mean");
      if (n.contains("scale")) m.normalization.scale = triple(n.at("scale"), "scale");
    }
  } catch (const json::type_error& e) {
    throw ManifestError(std::string("wrong field type: ") + e.what());
  }
  if (m.input_side < 1) throw ManifestError("input_side must be >= 1");
  if (m.class_names.size() != 2) {
    throw ManifestError("class_names must list exactly 2 classes, got " +
                        std::to_string(m.class_names.size()));
  }
  for (double s : m.normalization.scale) {
    if (s == 0.0 || !std::isfinite(s)) throw ManifestError("normalization.scale must be nonzero");
  }

  if (!doc.contains("backend") || !doc.at("backend").is_object() || doc.at("backend").size() != 1) {
    throw ManifestError("backend must be an object with exactly one of toy, external, exchange_file");
  }
  const auto& backend = doc.at("backend");
  if (backend.contains("toy")) {
    const auto& t = backend.at("toy");
    if (!t.is_object()) throw ManifestError("backend.toy must be an object");
    ToySpec spec;
    if (t.contains("channel")) spec.channel = parse_channel(t.at("channel"));
    if (t.contains("tau")) {
      if (!t.at("tau").is_number()) throw ManifestError("toy.tau must be a number");
      spec.tau = t.at("tau").get<double>();
    }
    if (t.contains("s")) {
      if (!t.at("s").is_number()) throw ManifestError("toy.s must be a number");
      spec.steepness = t.at("s").get<double>();
    }
    if (!(spec.tau >= 0.0 && spec.tau <= 1.0)) throw ManifestError("toy.tau must lie in [0, 1]");
    if (!(spec.steepness > 0.0) || !std::isfinite(spec.steepness)) {
      throw ManifestError("toy.s must be positive");
    }
    m.backend = spec;
  } else if (backend.contains("external")) {
    const auto& e = backend.at("external");
    ExternalBackend ext;
    ext.working_dir = base_dir;
    if (e.is_string()) {
      ext.command = e.get<std::string>();
    } else if (e.is_object() && e.contains("command") && e.at("command").is_string()) {
      ext.command = e.at("command").get<std::string>();
      if (e.contains("timeout_s")) ext.timeout_seconds = e.at("timeout_s").get<double>();
    } else {
      throw ManifestError("backend.external must be a command string");
    }
    if (ext.command.empty()) throw ManifestError("backend.external command is empty");
    m.backend = ext;
  } else if (backend.contains("exchange_file")) {
    const auto& e = backend.at("exchange_file");
    ExchangeFileBackend ex;
    if (e.is_string()) {
      ex.model_path = resolve(base_dir, e.get<std::string>());
    } else if (e.is_object() && e.contains("path") && e.at("path").is_string()) {
      ex.model_path = resolve(base_dir, e.at("path").get<std::string>());
      if (e.contains("runner")) ex.runner = e.at("runner").get<std::string>();
    } else {
      throw ManifestError("backend.exchange_file must be a path");
    }
    m.backend = ex;
  } else {
    throw ManifestError("unknown backend '" + backend.begin().key() + "'");
  }
  return m;
}

std::string model_manifest_to_json(const ModelManifest& m) {
  json doc;
  doc["name"] = m.name;
  doc["input_side"] = m.input_side;
  doc["class_names"] = m.class_names;
  doc["normalization"] = {{"mean", m.normalization.mean}, {"scale", m.normalization.scale}};
  if (const auto* t = std::get_if<ToySpec>(&m.backend)) {
    doc["backend"] = {{"toy", {{"channel", channel_name(t->channel)}, {"tau", t->tau}, {"s", t->steepness}}}};
  } else if (const auto* e = std::get_if<ExternalBackend>(&m.backend)) {
    doc["backend"] = {{"external", {{"command", e->command}, {"timeout_s", e->timeout_seconds}}}};
  } else if (const auto* x = std::get_if<ExchangeFileBackend>(&m.backend)) {
    json inner = {{"path", x->model_path.string()}};
    if (!x->runner.empty()) inner["runner"] = x->runner;
    doc["backend"] = {{"exchange_file", inner}};
  }
  return doc.dump(2) + "\n";
}

std::unique_ptr<Classifier> make_classifier(ModelManifest manifest) {
  if (std::holds_alternative<ToySpec>(manifest.backend)) {
    return std::make_unique<ToyClassifier>(std::move(manifest));
  }
  if (const auto* ext = std::get_if<ExternalBackend>(&manifest.backend)) {
    const auto command = ext->command;
    const auto dir = ext->working_dir;
    const double timeout = ext->timeout_seconds;
    return std::make_unique<ProcessClassifier>(std::move(manifest), command, dir, timeout);
  }
  const auto& ex = std::get<ExchangeFileBackend>(manifest.backend);
  {
    std::ifstream probe(ex.model_path, std::ios::binary);
    if (!probe || probe.peek() == std::char_traits<char>::eof()) {
      throw BackendUnavailable("exchange file unreadable: " + ex.model_path.string());
    }
  }
  std::string runner = ex.runner;
  if (const char* env = std::getenv("HISTOLIME_ONNX_RUNNER"); env && *env) runner = env;
  if (runner.empty()) runner = "python3 " + shell_quote(HISTOLIME_DEFAULT_ONNX_RUNNER);
  const std::string command = runner + " --model " + shell_quote(ex.model_path.string()) +
                              " --side " + std::to_string(manifest.input_side) + " --mean " +
                              join3(manifest.normalization.mean) + " --scale " +
                              join3(manifest.normalization.scale);
  return std::make_unique<ProcessClassifier>(std::move(manifest), command,
                                             std::filesystem::path{}, 300.0);
}

std::unique_ptr<Classifier> load_model(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ManifestError("cannot open model manifest " + manifest_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return make_classifier(parse_model_manifest(ss.str(), manifest_path.parent_path()));
}

}  // namespace histolime
