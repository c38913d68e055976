#include "tapkit/results_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tapkit/error.hpp"

namespace tapkit {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, what + ": " + e.what());
  }
}

[[noreturn]] void schema_error(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::kSchema, where + ": " + msg);
}

double number_at(const json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where, "expected a number");
  return j.get<double>();
}

TemporalInterval segment_at(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) schema_error(where, "segment must be a [start, end] pair");
  const double s = number_at(j[0], where + "[0]");
  const double e = number_at(j[1], where + "[1]");
  if (!(s < e)) schema_error(where, "segment start must be below end");
  return {s, e};
}

std::string string_at(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) schema_error(where + "." + key, "expected a string");
  return it->get<std::string>();
}

const json& results_of(const json& root, const std::string& what) {
  if (!root.is_object()) schema_error(what, "expected an object");
  auto it = root.find("results");
  if (it == root.end()) schema_error(what, "missing \"results\"");
  if (!it->is_object()) schema_error(what + ".results", "expected an object");
  return *it;
}

json segment_json(const TemporalInterval& iv) { return json::array({iv.start(), iv.end()}); }

double score_at(const json& entry, const std::string& where) {
  auto it = entry.find("score");
  if (it == entry.end()) schema_error(where + ".score", "missing");
  return number_at(*it, where + ".score");
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

DatasetIndex parse_annotations(const std::string& text) {
  const json root = parse_json(text, "annotations");
  if (!root.is_object()) schema_error("annotations", "expected an object");
  auto db = root.find("database");
  if (db == root.end() || !db->is_object()) schema_error("annotations.database", "expected an object");

  std::vector<VideoRecord> records;
  for (const auto& [id, entry] : db->items()) {
    const std::string where = "database." + id;
    if (!entry.is_object()) schema_error(where, "expected an object");
    VideoRecord rec;
    rec.video_id = id;
    auto dur = entry.find("duration");
    if (dur == entry.end()) schema_error(where + ".duration", "missing");
    rec.duration = number_at(*dur, where + ".duration");
    if (!(rec.duration > 0.0)) schema_error(where + ".duration", "must be positive");
    rec.subset = subset_from_string(string_at(entry, "subset", where));
    if (auto ann = entry.find("annotations"); ann != entry.end()) {
      if (!ann->is_array()) schema_error(where + ".annotations", "expected an array");
      for (std::size_t i = 0; i < ann->size(); ++i) {
        const std::string iw = where + ".annotations[" + std::to_string(i) + "]";
        const json& a = (*ann)[i];
        if (!a.is_object()) schema_error(iw, "expected an object");
        auto seg = a.find("segment");
        if (seg == a.end()) schema_error(iw + ".segment", "missing");
        const TemporalInterval iv = segment_at(*seg, iw + ".segment");
        if (iv.start() < 0.0 || iv.end() > rec.duration)
          schema_error(iw + ".segment", "outside [0, duration]");
        rec.instances.push_back({string_at(a, "label", iw), iv});
      }
    }
    records.push_back(std::move(rec));
  }
  return DatasetIndex::from_records(std::move(records));
}

DatasetIndex load_annotations(const std::filesystem::path& path) {
  try {
    return parse_annotations(read_text(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_annotations(const DatasetIndex& index, const std::filesystem::path& path) {
  json db = json::object();
  for (const auto& [id, rec] : index.videos()) {
    json anns = json::array();
    for (const auto& inst : rec.instances)
      anns.push_back({{"label", inst.label}, {"segment", segment_json(inst.interval)}});
    db[id] = {{"duration", rec.duration}, {"subset", to_string(rec.subset)}, {"annotations", anns}};
  }
  const json root = {{"version", "tapkit-1.0"}, {"database", db}};
  write_text_atomic(path, root.dump(1) + "\n");
}

void write_proposals(const ProposalMap& proposals, const std::filesystem::path& path) {
  json results = json::object();
  for (const auto& [id, set] : proposals) {
    json list = json::array();
    for (const auto& p : set.proposals())
      list.push_back({{"segment", segment_json(p.interval)}, {"score", p.score}});
    results[id] = std::move(list);
  }
  const json root = {{"version", "tapkit-1.0"}, {"results", results}, {"external_data", json::object()}};
  write_text_atomic(path, root.dump() + "\n");
}

ProposalMap parse_proposals(const std::string& text) {
  const json root = parse_json(text, "proposals");
  const json& results = results_of(root, "proposals");
  ProposalMap out;
  for (const auto& [id, list] : results.items()) {
    const std::string where = "results." + id;
    if (!list.is_array()) schema_error(where, "expected an array");
    std::vector<Proposal> ps;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string ew = where + "[" + std::to_string(i) + "]";
      const json& e = list[i];
      if (!e.is_object()) schema_error(ew, "expected an object");
      auto seg = e.find("segment");
      if (seg == e.end()) schema_error(ew + ".segment", "missing");
      ps.push_back({segment_at(*seg, ew + ".segment"), score_at(e, ew), ProposalSource::kSsad});
    }
    out.emplace(id, ProposalSet(id, std::move(ps)));
  }
  return out;
}

ProposalMap read_proposals(const std::filesystem::path& path) { return parse_proposals(read_text(path)); }

void write_localization(const LocalizationResult& result, const std::filesystem::path& path) {
  json results = json::object();
  for (const auto& [id, list] : result) {
    json arr = json::array();
    for (const auto& e : list)
      arr.push_back({{"label", e.label}, {"segment", segment_json(e.interval)}, {"score", e.score}});
    results[id] = std::move(arr);
  }
  const json root = {{"version", "tapkit-1.0"}, {"results", results}, {"external_data", json::object()}};
  write_text_atomic(path, root.dump() + "\n");
}

LocalizationResult parse_localization(const std::string& text) {
  const json root = parse_json(text, "localization");
  const json& results = results_of(root, "localization");
  LocalizationResult out;
  for (const auto& [id, list] : results.items()) {
    const std::string where = "results." + id;
    if (!list.is_array()) schema_error(where, "expected an array");
    auto& entries = out[id];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string ew = where + "[" + std::to_string(i) + "]";
      const json& e = list[i];
      if (!e.is_object()) schema_error(ew, "expected an object");
      auto seg = e.find("segment");
      if (seg == e.end()) schema_error(ew + ".segment", "missing");
      entries.push_back({string_at(e, "label", ew), segment_at(*seg, ew + ".segment"), score_at(e, ew)});
    }
  }
  return out;
}

LocalizationResult read_localization(const std::filesystem::path& path) {
  return parse_localization(read_text(path));
}

void write_classification(const ClassificationResult& result, const std::filesystem::path& path) {
  json root = json::object();
  for (const auto& [id, classes] : result) {
    json arr = json::array();
    for (const auto& c : classes) arr.push_back({{"label", c.label}, {"score", c.score}});
    root[id] = std::move(arr);
  }
  write_text_atomic(path, root.dump(1) + "\n");
}

ClassificationResult parse_classification(const std::string& text) {
  const json root = parse_json(text, "classification");
  if (!root.is_object()) schema_error("classification", "expected an object");
  ClassificationResult out;
  for (const auto& [id, list] : root.items()) {
    if (!list.is_array()) schema_error(id, "expected an array");
    std::vector<ClassScore> classes;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string ew = id + "[" + std::to_string(i) + "]";
      const json& e = list[i];
      if (!e.is_object()) schema_error(ew, "expected an object");
      const double s = score_at(e, ew);
      if (s < 0.0 || s > 1.0) schema_error(ew + ".score", "confidence outside [0, 1]");
      classes.push_back({string_at(e, "label", ew), s});
    }
    std::stable_sort(classes.begin(), classes.end(),
                     [](const ClassScore& a, const ClassScore& b) { return a.score > b.score; });
    out.emplace(id, std::move(classes));
  }
  return out;
}

ClassificationResult read_classification(const std::filesystem::path& path) {
  return parse_classification(read_text(path));
}

}  // namespace tapkit
