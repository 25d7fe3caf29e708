#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "histolime/codec.hpp"
#include "histolime/dataset.hpp"
#include "histolime/errors.hpp"
#include "json.hpp"

namespace histolime {
namespace {

using nlohmann::json;

constexpr Partition kPartitions[] = {Partition::Train, Partition::Test, Partition::Validation};

json refs_to_json(const std::vector<SampleRef>& refs) {
  json arr = json::array();
  for (const auto& r : refs) arr.push_back({{"id", r.id}, {"label", label_index(r.label)}});
  return arr;
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ManifestParseError("missing field " + where + "." + key);
  }
  return obj.at(key);
}

double ratio_field(const json& ratios, const char* key) {
  const json& v = require(ratios, key, "ratios");
  if (!v.is_number()) throw ManifestParseError("field ratios." + std::string(key) + " must be a number");
  return v.get<double>();
}

}  // namespace

std::string manifest_to_json(const SplitManifest& m) {
  json doc;
  doc["seed"] = m.seed;
  doc["ratios"] = {{"train", m.ratios.train},
                   {"test", m.ratios.test},
                   {"validation", m.ratios.validation}};
  json parts = json::object();
  for (Partition p : kPartitions) parts[std::string(partition_name(p))] = refs_to_json(m.partition(p));
  doc["partitions"] = std::move(parts);
  return doc.dump(2) + "\n";
}

SplitManifest manifest_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestParseError("line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_object()) throw ManifestParseError("top level must be an object");

  SplitManifest m;
  const json& seed = require(doc, "seed", "manifest");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw ManifestParseError("field seed must be a non-negative integer");
  }
  m.seed = seed.get<std::uint64_t>();

  const json& ratios = require(doc, "ratios", "manifest");
  m.ratios.train = ratio_field(ratios, "train");
  m.ratios.test = ratio_field(ratios, "test");
  m.ratios.validation = ratio_field(ratios, "validation");
  const double sum = m.ratios.train + m.ratios.test + m.ratios.validation;
  if (m.ratios.train < 0 || m.ratios.test < 0 || m.ratios.validation < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ManifestParseError("field ratios must be non-negative and sum to 1");
  }

  const json& parts = require(doc, "partitions", "manifest");
  std::map<std::string, std::string> seen;  // id -> location of first occurrence
  for (Partition p : kPartitions) {
    const std::string name(partition_name(p));
    const json& arr = require(parts, name.c_str(), "partitions");
    if (!arr.is_array()) throw ManifestParseError("field partitions." + name + " must be an array");
    auto& out = p == Partition::Train ? m.train : p == Partition::Test ? m.test : m.validation;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "partitions." + name + "[" + std::to_string(i) + "]";
      const json& entry = arr[i];
      const json& id = require(entry, "id", where);
      const json& label = require(entry, "label", where);
      if (!id.is_string()) throw ManifestParseError("field " + where + ".id must be a string");
      if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1)) {
        throw ManifestParseError("field " + where + ".label must be 0 or 1");
      }
      auto [it, inserted] = seen.emplace(id.get<std::string>(), where);
      if (!inserted) {
        throw ManifestParseError("duplicate id '" + it->first + "' at " + where +
                                 " (first seen at " + it->second + ")");
      }
      out.push_back({id.get<std::string>(), static_cast<Label>(label.get<int>())});
    }
  }
  return m;
}

void save_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  const auto text = manifest_to_json(m);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return manifest_from_json(ss.str());
  } catch (const ManifestParseError& e) {
    throw ManifestParseError(path.string() + ": " + e.what());
  }
}

}  // namespace histolime
