#include "histolime_cli/app.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "histolime/codec.hpp"
#include "histolime/dataset.hpp"
#include "histolime/errors.hpp"
#include "histolime/imaging.hpp"
#include "histolime/lime.hpp"
#include "histolime/metrics.hpp"
#include "histolime_cli/curves.hpp"
#include "json.hpp"

namespace histolime::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Input, "UsageError: " + what) {}
};

struct Options {
  bool json_output = false;
  bool force = false;
  std::string dataset;
  std::string manifest;
  std::string model;
  std::string out = "histolime_out";
  std::uint64_t seed = 0;
  std::string ratios;
  std::string partition = "test";
  double threshold = 0.5;
  unsigned threads = 0;
  std::string predictions;
  std::string name;
  // explain
  std::vector<std::string> images;
  int n_samples = 5000;
  int segments = 50;
  double kernel_width = 0.25;
  double lambda = 1.0;
  int top_k = 5;
  double compactness = kDefaultCompactness;
  std::string baseline = "mean";
  std::string mode = "positive";
  std::string target = "predicted";
  bool id_map = false;
  // curves
  std::string log;
  // report
  std::vector<std::string> reports;
};

unsigned worker_count(unsigned requested) {
  if (requested) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> parse_numbers(std::string_view text, std::size_t count, const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto field = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    double v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
      throw UsageError(std::string(what) + " must be " + std::to_string(count) +
                       " comma-separated numbers, got '" + std::string(text) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() != count) {
    throw UsageError(std::string(what) + " must be " + std::to_string(count) +
                     " comma-separated numbers, got '" + std::string(text) + "'");
  }
  return out;
}

Baseline parse_baseline(const std::string& text) {
  if (text == "mean") return Baseline::segment_mean();
  if (text.rfind("rgb:", 0) == 0) {
    const auto v = parse_numbers(std::string_view(text).substr(4), 3, "--baseline rgb");
    Rgb c{};
    for (std::size_t i = 0; i < 3; ++i) {
      if (v[i] < 0 || v[i] > 255 || v[i] != std::floor(v[i])) {
        throw UsageError("--baseline rgb components must be integers in [0, 255]");
      }
      c[i] = static_cast<std::uint8_t>(v[i]);
    }
    return Baseline::fixed(c);
  }
  throw UsageError("--baseline must be 'mean' or 'rgb:r,g,b'");
}

std::string text_of(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

/// Collects output paths so the overwrite check runs before any work.
class OutputPlan {
 public:
  OutputPlan(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

  fs::path add(const std::string& name) {
    const fs::path p = dir_ / name;
    if (!force_ && fs::exists(p)) {
      throw UsageError("refusing to overwrite " + p.string() + " (pass --force)");
    }
    return p;
  }

  void ensure_dir() const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw UsageError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

 private:
  fs::path dir_;
  bool force_;
};

void write_text(const fs::path& p, const std::string& text) {
  write_file_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string signed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.6f", v);
  return buf;
}

std::string file_stem_for(const std::string& id) {
  std::string stem = fs::path(id).replace_extension().generic_string();
  std::replace(stem.begin(), stem.end(), '/', '_');
  return stem;
}

json counts_json(const std::vector<SampleRef>& refs) {
  std::uint64_t normal = 0;
  for (const auto& r : refs) normal += r.label == Label::Normal;
  return {{"normal", normal}, {"oscc", refs.size() - normal}, {"total", refs.size()}};
}

// ---------------------------------------------------------------- split

int cmd_split(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.dataset.empty()) throw UsageError("split needs --dataset");
  SplitRatios ratios;
  if (!o.ratios.empty()) {
    const auto v = parse_numbers(o.ratios, 3, "--ratios");
    ratios = {v[0], v[1], v[2]};
  }
  OutputPlan plan(o.out, o.force);
  const fs::path manifest_path = o.manifest.empty() ? plan.add("manifest.json") : fs::path(o.manifest);
  if (!o.manifest.empty() && !o.force && fs::exists(manifest_path)) {
    throw UsageError("refusing to overwrite " + manifest_path.string() + " (pass --force)");
  }

  const auto corpus = load_corpus(o.dataset, {.keep_rasters = false, .threads = worker_count(o.threads)});
  for (const auto& w : corpus.warnings) err << "histolime: warning: " << w << '\n';
  const auto refs = to_refs(corpus.images);
  const auto m = stratified_split(refs, ratios, o.seed);

  if (o.manifest.empty()) plan.ensure_dir();
  save_manifest(m, manifest_path);

  if (o.json_output) {
    json doc = {{"manifest", manifest_path.string()},
                {"seed", o.seed},
                {"warnings", corpus.warnings},
                {"partitions",
                 {{"train", counts_json(m.train)},
                  {"validation", counts_json(m.validation)},
                  {"test", counts_json(m.test)}}}};
    out << doc.dump(2) << '\n';
    return kOk;
  }
  out << "wrote " << manifest_path.string() << " (seed " << o.seed << ", " << m.size() << " images)\n";
  for (Partition p : {Partition::Train, Partition::Validation, Partition::Test}) {
    const auto c = counts_json(m.partition(p));
    out << "  " << partition_name(p) << ": " << c["total"] << " (Normal " << c["normal"] << ", OSCC "
        << c["oscc"] << ")\n";
  }
  return kOk;
}

// ------------------------------------------------------------- evaluate

std::vector<LabeledImage> resolve_partition(const Options& o, Partition part) {
  if (o.dataset.empty() || o.manifest.empty()) throw UsageError("evaluate needs --dataset and --manifest");
  const auto manifest = load_manifest(o.manifest);
  auto corpus = load_corpus(o.dataset, {.keep_rasters = false, .threads = worker_count(o.threads)});
  std::map<std::string, LabeledImage*> by_id;
  for (auto& im : corpus.images) by_id[im.id] = &im;
  std::vector<LabeledImage> images;
  for (const auto& ref : manifest.partition(part)) {
    const auto it = by_id.find(ref.id);
    if (it == by_id.end()) throw UsageError("manifest id not found in dataset: " + ref.id);
    if (it->second->label != ref.label) throw UsageError("label mismatch for " + ref.id);
    images.push_back(*it->second);
  }
  return images;
}

void print_report(const MetricsReport& r, std::size_t n, std::ostream& out) {
  out << "model " << r.model << ", partition " << r.partition << ", " << n << " images, threshold "
      << r.threshold << '\n';
  out << "tp=" << r.matrix.tp << " tn=" << r.matrix.tn << " fp=" << r.matrix.fp
      << " fn=" << r.matrix.fn << '\n';
  out << "precision " << format_metric(r.precision) << '\n';
  out << "recall    " << format_metric(r.recall) << '\n';
  out << "f1        " << format_metric(r.f1) << '\n';
  out << "accuracy  " << format_metric(r.accuracy) << '\n';
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto part = parse_partition(o.partition);
  if (!part) throw UsageError("--partition must be train, test or val");
  if (!(o.threshold > 0.0 && o.threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");

  OutputPlan plan(o.out, o.force);
  const auto json_path = plan.add("metrics.json");
  const auto csv_path = plan.add("metrics.csv");
  const bool replay = !o.predictions.empty();
  const auto pred_path = replay ? fs::path{} : plan.add("predictions.csv");

  Evaluation ev;
  if (replay) {
    ev.predictions = predictions_from_csv(text_of(o.predictions));
    if (ev.predictions.empty()) throw UsageError("prediction file has no rows");
    const auto m = confusion_from_predictions(ev.predictions, o.threshold);
    const std::string name = !o.name.empty() ? o.name : fs::path(o.predictions).stem().string();
    ev.report = make_report(m, name, std::string(partition_name(*part)), o.threshold);
  } else {
    if (o.model.empty()) throw UsageError("evaluate needs --model (or --predictions)");
    const auto images = resolve_partition(o, *part);
    const auto model = load_model(o.model);
    ev = evaluate(*model, images,
                  {.threshold = o.threshold,
                   .batch_size = 32,
                   .threads = worker_count(o.threads),
                   .model_name = o.name,
                   .partition_name = std::string(partition_name(*part))});
  }

  plan.ensure_dir();
  write_text(json_path, report_to_json(ev.report));
  write_text(csv_path, report_csv_header() + report_csv_row(ev.report));
  if (!replay) write_text(pred_path, predictions_to_csv(ev.predictions));

  if (o.json_output) {
    json doc = json::parse(report_to_json(ev.report));
    doc["images"] = ev.predictions.size();
    doc["files"] = {json_path.string(), csv_path.string()};
    if (!replay) doc["files"].push_back(pred_path.string());
    out << doc.dump(2) << '\n';
  } else {
    print_report(ev.report, ev.predictions.size(), out);
  }
  return kOk;
}

// -------------------------------------------------------------- explain

struct ImageTarget {
  std::string id;
  fs::path path;
};

ImageTarget resolve_image(const Options& o, const std::string& arg,
                          const std::optional<SplitManifest>& manifest) {
  if (!o.dataset.empty()) {
    const fs::path p = fs::path(o.dataset) / arg;
    if (fs::is_regular_file(p)) {
      if (manifest) {
        const auto& m = *manifest;
        bool found = false;
        for (const auto* part : {&m.train, &m.test, &m.validation}) {
          found = found || std::any_of(part->begin(), part->end(),
                                       [&](const SampleRef& r) { return r.id == arg; });
        }
        if (!found) throw UsageError("image id not in manifest: " + arg);
      }
      return {arg, p};
    }
  }
  if (fs::is_regular_file(arg)) return {fs::path(arg).filename().string(), arg};
  throw UsageError("image not found: " + arg);
}

int cmd_explain(const Options& o, std::ostream& out) {
  if (o.model.empty()) throw UsageError("explain needs --model");
  if (o.images.empty()) throw UsageError("explain needs at least one --image");
  if (o.mode != "positive" && o.mode != "signed") throw UsageError("--mode must be positive or signed");

  LimeConfig cfg;
  cfg.n_samples = o.n_samples;
  cfg.kernel_width = o.kernel_width;
  cfg.ridge_lambda = o.lambda;
  cfg.top_k = o.top_k;
  cfg.n_segments = o.segments;
  cfg.compactness = o.compactness;
  cfg.baseline = parse_baseline(o.baseline);
  cfg.seed = o.seed;
  cfg.threads = worker_count(o.threads);
  if (o.target == "predicted") {
    cfg.target_class = std::nullopt;
  } else if (o.target == "0" || o.target == "1") {
    cfg.target_class = o.target == "1" ? 1 : 0;
  } else {
    throw UsageError("--target must be predicted, 0 or 1");
  }
  validate(cfg);
  const auto mode = o.mode == "signed" ? OverlayMode::Signed : OverlayMode::PositiveOnly;

  std::optional<SplitManifest> manifest;
  if (!o.manifest.empty()) manifest = load_manifest(o.manifest);

  OutputPlan plan(o.out, o.force);
  struct Job {
    ImageTarget target;
    fs::path json_path, overlay_path, idmap_path;
  };
  std::vector<Job> jobs;
  std::set<std::string> stems;
  for (const auto& arg : o.images) {
    Job j{resolve_image(o, arg, manifest), {}, {}, {}};
    const auto stem = file_stem_for(j.target.id);
    if (!stems.insert(stem).second) throw UsageError("duplicate output name for " + arg);
    j.json_path = plan.add(stem + ".explanation.json");
    j.overlay_path = plan.add(stem + ".overlay.png");
    if (o.id_map) j.idmap_path = plan.add(stem + ".segments.png");
    jobs.push_back(std::move(j));
  }

  const auto model = load_model(o.model);
  json listing = json::array();
  for (const auto& job : jobs) {
    const Raster img = resize_to_input(read_image(job.target.path), model->input_side());
    Explanation ex = explain(*model, img, cfg);
    ex.image_id = job.target.id;
    const int top_k = std::min(cfg.top_k, ex.k());
    const Raster overlay = render_overlay(img, ex, top_k, mode);

    plan.ensure_dir();
    write_text(job.json_path, explanation_to_json(ex));
    write_image(job.overlay_path, overlay);
    if (o.id_map) write_image(job.idmap_path, superpixel_id_map(ex.superpixels));

    const auto order = rank_segments(ex.segment_weights);
    json top = json::array();
    for (int i = 0; i < top_k; ++i) {
      const auto s = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
      top.push_back({{"segment", s}, {"weight", ex.segment_weights[s]}});
    }
    if (o.json_output) {
      listing.push_back({{"image_id", ex.image_id},
                         {"explanation", job.json_path.string()},
                         {"overlay", job.overlay_path.string()},
                         {"target_class", ex.target_class},
                         {"probabilities", ex.original_probabilities},
                         {"k", ex.k()},
                         {"local_r2", ex.local_r2},
                         {"top", top}});
      continue;
    }
    out << ex.image_id << ": target " << model->manifest().class_names[static_cast<std::size_t>(ex.target_class)]
        << " (p=" << fixed4(ex.original_probabilities[static_cast<std::size_t>(ex.target_class)])
        << "), k=" << ex.k() << ", local_r2=" << fixed4(ex.local_r2) << '\n';
    for (int i = 0; i < top_k; ++i) {
      out << "  #" << (i + 1) << " segment " << top[static_cast<std::size_t>(i)]["segment"] << " weight "
          << signed6(top[static_cast<std::size_t>(i)]["weight"].get<double>()) << '\n';
    }
    out << "  wrote " << job.json_path.string() << ", " << job.overlay_path.string() << '\n';
  }
  if (o.json_output) out << json{{"explanations", listing}}.dump(2) << '\n';
  return kOk;
}

// --------------------------------------------------------------- curves

int cmd_curves(const Options& o, std::ostream& out) {
  if (o.log.empty()) throw UsageError("curves needs --log");
  OutputPlan plan(o.out, o.force);
  const auto acc_path = plan.add("accuracy.svg");
  const auto loss_path = plan.add("loss.svg");
  const auto rows = parse_epoch_log(text_of(o.log));
  const auto best = best_epoch_index(rows);
  plan.ensure_dir();
  write_text(acc_path, render_curve_svg(rows, CurveKind::Accuracy, best, "Training and validation accuracy"));
  write_text(loss_path, render_curve_svg(rows, CurveKind::Loss, best, "Training and validation loss"));
  const auto& b = rows[best];
  if (o.json_output) {
    out << json{{"best_epoch", b.epoch},
                {"val_loss", b.val_loss},
                {"val_acc", b.val_acc},
                {"epochs", rows.size()},
                {"files", {acc_path.string(), loss_path.string()}}}
               .dump(2)
        << '\n';
  } else {
    out << "best epoch " << b.epoch << " (val_loss " << fixed4(b.val_loss) << ", val_acc "
        << fixed4(b.val_acc) << ") over " << rows.size() << " epochs\n";
    out << "wrote " << acc_path.string() << ", " << loss_path.string() << '\n';
  }
  return kOk;
}

// --------------------------------------------------------------- report

int cmd_report(const Options& o, std::ostream& out) {
  if (o.reports.empty()) throw UsageError("report needs one or more metrics JSON files");
  OutputPlan plan(o.out, o.force);
  const auto csv_path = plan.add("report.csv");
  std::vector<MetricsReport> reports;
  for (const auto& p : o.reports) reports.push_back(report_from_json(text_of(p)));

  std::string csv = report_csv_header();
  for (const auto& r : reports) csv += report_csv_row(r);
  plan.ensure_dir();
  write_text(csv_path, csv);

  if (o.json_output) {
    json doc = json::array();
    for (const auto& r : reports) doc.push_back(json::parse(report_to_json(r)));
    out << json{{"reports", doc}, {"file", csv_path.string()}}.dump(2) << '\n';
    return kOk;
  }
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.model.size());
  auto pad = [&](const std::string& s) { return s + std::string(width + 2 - s.size(), ' '); };
  out << pad("model") << "partition  precision  recall  f1      accuracy\n";
  for (const auto& r : reports) {
    std::string part = r.partition;
    part.resize(std::max<std::size_t>(part.size(), 9), ' ');
    out << pad(r.model) << part << "  " << format_metric(r.precision) << "     "
        << format_metric(r.recall) << "  " << format_metric(r.f1) << "  " << format_metric(r.accuracy)
        << '\n';
  }
  out << "wrote " << csv_path.string() << '\n';
  return kOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input:
      return kInputError;
    case ErrorKind::Backend:
      return kBackendError;
    case ErrorKind::Numerical:
      return kNumericalError;
  }
  return kInputError;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Normal/OSCC classifier evaluation and LIME explanations", "histolime"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", o.json_output, "Print a single JSON document on stdout");
  app.add_flag("--force", o.force, "Overwrite existing output files");
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* split = app.add_subcommand("split", "Stratified train/validation/test split");
  split->add_option("--dataset", o.dataset, "Corpus root with Normal/ and OSCC/")->required();
  split->add_option("--out", o.out, "Output directory");
  split->add_option("--manifest", o.manifest, "Manifest path (default <out>/manifest.json)");
  split->add_option("--seed", o.seed, "Shuffle seed");
  split->add_option("--ratios", o.ratios, "train,test,val fractions (default 0.70,0.15,0.15)");

  auto* eval = app.add_subcommand("evaluate", "Metrics for one partition");
  eval->add_option("--dataset", o.dataset, "Corpus root");
  eval->add_option("--manifest", o.manifest, "Split manifest");
  eval->add_option("--model", o.model, "Model manifest JSON");
  eval->add_option("--partition", o.partition, "train, test or val")->capture_default_str();
  eval->add_option("--threshold", o.threshold, "OSCC iff p(OSCC) > threshold")->capture_default_str();
  eval->add_option("--predictions", o.predictions, "Replay a stored predictions CSV instead of a model");
  eval->add_option("--name", o.name, "Model name recorded in the report");
  eval->add_option("--out", o.out, "Output directory");

  auto* expl = app.add_subcommand("explain", "LIME explanation and overlay for images");
  expl->add_option("--model", o.model, "Model manifest JSON")->required();
  expl->add_option("--image", o.images, "Image id under --dataset, or a file path")->required();
  expl->add_option("--dataset", o.dataset, "Corpus root for image ids");
  expl->add_option("--manifest", o.manifest, "Restrict image ids to this split manifest");
  expl->add_option("--out", o.out, "Output directory");
  expl->add_option("--seed", o.seed, "Mask sampling seed");
  expl->add_option("--n-samples", o.n_samples, "Perturbed samples")->capture_default_str();
  expl->add_option("--segments", o.segments, "Target superpixel count")->capture_default_str();
  expl->add_option("--compactness", o.compactness, "Superpixel compactness")->capture_default_str();
  expl->add_option("--kernel-width", o.kernel_width, "Proximity kernel width")->capture_default_str();
  expl->add_option("--lambda", o.lambda, "Ridge penalty")->capture_default_str();
  expl->add_option("--top-k", o.top_k, "Segments to highlight")->capture_default_str();
  expl->add_option("--baseline", o.baseline, "mean or rgb:r,g,b")->capture_default_str();
  expl->add_option("--mode", o.mode, "positive or signed")->capture_default_str();
  expl->add_option("--target", o.target, "predicted, 0 or 1")->capture_default_str();
  expl->add_flag("--id-map", o.id_map, "Also write the superpixel id map");

  auto* curves = app.add_subcommand("curves", "Accuracy and loss curves from an epoch log");
  curves->add_option("--log", o.log, "CSV epoch,train_acc,val_acc,train_loss,val_loss")->required();
  curves->add_option("--out", o.out, "Output directory");

  auto* report = app.add_subcommand("report", "Compare metrics reports");
  report->add_option("reports", o.reports, "metrics.json files")->required();
  report->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  try {
    if (*split) return cmd_split(o, out, err);
    if (*eval) return cmd_evaluate(o, out);
    if (*expl) return cmd_explain(o, out);
    if (*curves) return cmd_curves(o, out);
    return cmd_report(o, out);
  } catch (const Error& e) {
    err << "histolime: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "histolime: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace histolime::cli
