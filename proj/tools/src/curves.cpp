#include "histolime_cli/curves.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace histolime::cli {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 60;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

template <typename T>
bool parse_field(std::string_view s, T& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

std::vector<EpochRow> parse_epoch_log(std::string_view text) {
  std::vector<EpochRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fail = [&](const std::string& msg) {
      throw EpochLogError("line " + std::to_string(line_no) + ": " + msg);
    };
    if (rows.empty() && line_no == 1 && !(line.front() >= '0' && line.front() <= '9')) {
      if (line != kEpochLogHeader) fail("expected header " + std::string(kEpochLogHeader));
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) fail("expected 5 fields, got " + std::to_string(fields.size()));
    EpochRow r;
    if (!parse_field(fields[0], r.epoch)) fail("epoch must be an integer");
    double* values[4] = {&r.train_acc, &r.val_acc, &r.train_loss, &r.val_loss};
    for (int i = 0; i < 4; ++i) {
      if (!parse_field(fields[static_cast<std::size_t>(i) + 1], *values[i]) ||
          !std::isfinite(*values[i])) {
        fail("field " + std::to_string(i + 2) + " is not a number");
      }
    }
    if (!rows.empty() && r.epoch <= rows.back().epoch) fail("epochs must strictly increase");
    if (r.train_acc < 0 || r.train_acc > 1 || r.val_acc < 0 || r.val_acc > 1) {
      fail("accuracies must lie in [0, 1]");
    }
    if (r.train_loss < 0 || r.val_loss < 0) fail("losses must be >= 0");
    rows.push_back(r);
  }
  if (rows.empty()) throw EpochLogError("log has no epochs");
  return rows;
}

std::size_t best_epoch_index(const std::vector<EpochRow>& rows) {
  if (rows.empty()) throw EpochLogError("log has no epochs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].val_loss < rows[best].val_loss) best = i;
  }
  return best;
}

std::string render_curve_svg(const std::vector<EpochRow>& rows, CurveKind kind, std::size_t best,
                             std::string_view title) {
  const bool acc = kind == CurveKind::Accuracy;
  auto train = [&](const EpochRow& r) { return acc ? r.train_acc : r.train_loss; };
  auto val = [&](const EpochRow& r) { return acc ? r.val_acc : r.val_loss; };

  const double x0 = rows.front().epoch;
  const double x1 = std::max(x0 + 1, static_cast<double>(rows.back().epoch));
  double y0 = 0.0;
  double y1 = acc ? 1.0 : 0.0;
  for (const auto& r : rows) y1 = std::max({y1, train(r), val(r)});
  if (y1 <= y0) y1 = 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">"
     << escape(title) << "</text>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(kLeft + pw)
     << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n";
  os << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
     << fmt(kTop + ph) << "\"/>\n";
  os << "</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = y0 + (y1 - y0) * t / 4.0;
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(y) + 4) << "\" text-anchor=\"end\">"
       << fmt_tick(y) << "</text>\n";
    const double x = x0 + (x1 - x0) * t / 4.0;
    os << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(kTop + ph + 16)
       << "\" text-anchor=\"middle\">" << fmt_tick(x) << "</text>\n";
  }
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10)
     << "\" text-anchor=\"middle\">epoch</text>\n";
  os << "</g>\n";

  auto polyline = [&](auto value, const char* color, const char* name) {
    os << "<polyline class=\"" << name << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) os << ' ';
      os << fmt(px(rows[i].epoch)) << ',' << fmt(py(value(rows[i])));
    }
    os << "\"/>\n";
  };
  polyline(train, "#1f77b4", "train");
  polyline(val, "#ff7f0e", "validation");

  const auto& b = rows.at(best);
  os << "<circle class=\"best-epoch\" data-epoch=\"" << b.epoch << "\" cx=\"" << fmt(px(b.epoch))
     << "\" cy=\"" << fmt(py(val(b))) << "\" r=\"5\" fill=\"red\"/>\n";
  os << "<text x=\"" << fmt(px(b.epoch) + 8) << "\" y=\"" << fmt(py(val(b)) - 8)
     << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"red\">best epoch " << b.epoch
     << "</text>\n";

  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<text x=\"" << fmt(kLeft + pw - 110) << "\" y=\"" << fmt(kTop + 12)
     << "\" fill=\"#1f77b4\">train</text>\n"
     << "<text x=\"" << fmt(kLeft + pw - 60) << "\" y=\"" << fmt(kTop + 12)
     << "\" fill=\"#ff7f0e\">validation</text>\n"
     << "</g>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace histolime::cli
