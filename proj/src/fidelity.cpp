#include "dialbench/fidelity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "dialbench/error.hpp"

namespace dialbench {

namespace fs = std::filesystem;

std::string_view to_string(Answer answer) {
  switch (answer) {
    case Answer::Yes:
      return "yes";
    case Answer::No:
      return "no";
    case Answer::NA:
      break;
  }
  return "na";
}

std::optional<Answer> parse_answer(std::string_view text) {
  std::string lower;
  for (const char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "yes") return Answer::Yes;
  if (lower == "no") return Answer::No;
  if (lower == "na" || lower == "n/a") return Answer::NA;
  return std::nullopt;
}

const std::array<ChecklistDefinition, kChecklistSize>& checklist_registry() {
  static constexpr std::array<ChecklistDefinition, kChecklistSize> kItems = {{
      {"rationale_explained", "Therapist explained rationale for imaginal?"},
      {"imaginal_instructions", "Therapist gave client instructions to carry out imaginal?"},
      {"hotspots_introduced", "Hotspots procedure and rationale introduced?"},
      {"hotspots_identified", "Therapist helped patient to identify hotspots?"},
      {"oriented_to_imaginal", "Therapist oriented the client to imaginal planned for that session?"},
      {"suds_monitored_5min", "Therapist monitored SUDS ratings about every 5 minutes?"},
      {"reinforcing_comments", "Therapist used appropriate reinforcing comments during imaginal?"},
      {"elicited_thoughts_feelings", "Therapist elicited thoughts and feelings as appropriate?"},
      {"present_tense_closed_eyes", "Therapist prompted for present tense, closed eyes?"},
      {"imaginal_duration_ok",
       "Imaginal lasted about 30-45 minutes (or about 15 for final imaginal)?"},
      {"imaginal_processed", "Therapist processed the imaginal with client?"},
  }};
  return kItems;
}

bool is_checklist_item(std::string_view item_id) {
  const auto& items = checklist_registry();
  return std::any_of(items.begin(), items.end(),
                     [&](const ChecklistDefinition& d) { return d.item_id == item_id; });
}

std::string_view to_string(ViolationCategory category) {
  switch (category) {
    case ViolationCategory::RoleDrift:
      return "role_drift";
    case ViolationCategory::GenericAffirmation:
      return "generic_affirmation";
    case ViolationCategory::ReflectionDuringExposure:
      return "reflection_during_exposure";
    case ViolationCategory::TraumaAnchoringAdherent:
      return "trauma_anchoring_adherent";
    case ViolationCategory::NoIssue:
      break;
  }
  return "no_issue";
}

std::optional<ViolationCategory> parse_violation_category(std::string_view text) {
  for (const ViolationCategory c : kViolationCategories) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

bool is_adherent(ViolationCategory category) {
  return category == ViolationCategory::TraumaAnchoringAdherent ||
         category == ViolationCategory::NoIssue;
}

FidelityAnnotation blank_annotation(std::string session_id, std::string annotator_id) {
  FidelityAnnotation a;
  a.session_id = std::move(session_id);
  a.annotator_id = std::move(annotator_id);
  for (const auto& def : checklist_registry()) a.items.push_back({std::string(def.item_id), Answer::NA});
  return a;
}

nlohmann::json annotation_to_json(const FidelityAnnotation& a) {
  nlohmann::json items = nlohmann::json::array();
  for (const ChecklistItem& item : a.items) {
    items.push_back({{"item_id", item.item_id}, {"answer", to_string(item.answer)}});
  }
  nlohmann::json spans = nlohmann::json::array();
  for (const ViolationSpan& s : a.spans) {
    spans.push_back({{"turn_index", s.turn_index},
                     {"category", to_string(s.category)},
                     {"note", s.note},
                     {"annotator_id", s.annotator_id}});
  }
  return {{"session_id", a.session_id}, {"annotator_id", a.annotator_id},
          {"version", a.version},       {"updated_at", a.updated_at},
          {"items", std::move(items)},  {"spans", std::move(spans)}};
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(std::string("annotation: missing field '") + key + "'");
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw InputError(std::string("annotation: '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

void validate_annotation(const FidelityAnnotation& a, std::optional<std::size_t> turn_count) {
  if (a.session_id.empty()) throw InputError("annotation: empty session_id");
  if (a.annotator_id.empty()) throw InputError("annotation: empty annotator_id");
  if (a.version < 0) throw InputError("annotation: negative version");
  if (a.items.size() != kChecklistSize) {
    throw InputError("annotation: expected " + std::to_string(kChecklistSize) +
                     " checklist items, got " + std::to_string(a.items.size()));
  }
  std::set<std::string> seen;
  for (const ChecklistItem& item : a.items) {
    if (!is_checklist_item(item.item_id)) {
      throw InputError("annotation: unknown checklist item '" + item.item_id + "'");
    }
    if (!seen.insert(item.item_id).second) {
      throw InputError("annotation: duplicate checklist item '" + item.item_id + "'");
    }
  }
  if (turn_count) {
    for (const ViolationSpan& s : a.spans) {
      if (s.turn_index >= *turn_count) {
        throw InputError("annotation: span turn_index " + std::to_string(s.turn_index) +
                         " out of range (session has " + std::to_string(*turn_count) + " turns)");
      }
    }
  }
}

FidelityAnnotation annotation_from_json(const nlohmann::json& j,
                                        std::optional<std::size_t> turn_count) {
  if (!j.is_object()) throw InputError("annotation: expected a JSON object");
  FidelityAnnotation a;
  a.session_id = require_string(j, "session_id");
  a.annotator_id = require_string(j, "annotator_id");
  if (const auto it = j.find("version"); it != j.end()) {
    if (!it->is_number_integer()) throw InputError("annotation: 'version' must be an integer");
    a.version = it->get<std::int64_t>();
  }
  if (const auto it = j.find("updated_at"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw InputError("annotation: 'updated_at' must be a string");
    a.updated_at = it->get<std::string>();
  }
  const auto& items = require(j, "items");
  if (!items.is_array()) throw InputError("annotation: 'items' must be an array");
  for (const auto& item : items) {
    if (!item.is_object()) throw InputError("annotation: checklist item must be an object");
    ChecklistItem ci;
    ci.item_id = require_string(item, "item_id");
    const std::string answer = require_string(item, "answer");
    const auto parsed = parse_answer(answer);
    if (!parsed) throw InputError("annotation: invalid answer '" + answer + "' for '" + ci.item_id + "'");
    ci.answer = *parsed;
    a.items.push_back(std::move(ci));
  }
  if (const auto it = j.find("spans"); it != j.end()) {
    if (!it->is_array()) throw InputError("annotation: 'spans' must be an array");
    for (const auto& span : *it) {
      if (!span.is_object()) throw InputError("annotation: span must be an object");
      ViolationSpan s;
      const auto& index = require(span, "turn_index");
      if (!index.is_number_integer() || index.get<std::int64_t>() < 0) {
        throw InputError("annotation: span turn_index must be a non-negative integer");
      }
      s.turn_index = index.get<std::size_t>();
      const std::string category = require_string(span, "category");
      const auto parsed = parse_violation_category(category);
      if (!parsed) throw InputError("annotation: unknown span category '" + category + "'");
      s.category = *parsed;
      if (const auto n = span.find("note"); n != span.end() && !n->is_null()) {
        if (!n->is_string()) throw InputError("annotation: span note must be a string");
        s.note = n->get<std::string>();
      }
      s.annotator_id = a.annotator_id;
      if (const auto n = span.find("annotator_id"); n != span.end() && !n->is_null()) {
        if (!n->is_string()) throw InputError("annotation: span annotator_id must be a string");
        s.annotator_id = n->get<std::string>();
      }
      a.spans.push_back(std::move(s));
    }
  }
  validate_annotation(a, turn_count);
  return a;
}

std::optional<double> adherence_score(const FidelityAnnotation& annotation) {
  std::size_t yes = 0;
  std::size_t no = 0;
  for (const ChecklistItem& item : annotation.items) {
    if (item.answer == Answer::Yes) ++yes;
    if (item.answer == Answer::No) ++no;
  }
  if (yes + no == 0) return std::nullopt;
  return static_cast<double>(yes) / static_cast<double>(yes + no);
}

ViolationSummary violation_summary(const std::vector<FidelityAnnotation>& annotations) {
  ViolationSummary summary;
  std::set<std::string> sessions;
  std::map<ViolationCategory, std::size_t> counts;
  std::map<ViolationCategory, std::set<std::string>> sessions_with;
  for (const FidelityAnnotation& a : annotations) {
    sessions.insert(a.session_id);
    for (const ViolationSpan& s : a.spans) {
      ++counts[s.category];
      sessions_with[s.category].insert(a.session_id);
    }
  }
  summary.annotated_sessions = sessions.size();
  for (const auto& [category, count] : counts) {
    CategoryCount c;
    c.count = count;
    c.sessions = sessions_with[category].size();
    c.rate = static_cast<double>(c.sessions) / static_cast<double>(summary.annotated_sessions);
    (is_adherent(category) ? summary.adherent : summary.violations)[std::string(to_string(category))] = c;
  }
  return summary;
}

AdherenceSummary summarize_annotations(std::vector<FidelityAnnotation> annotations) {
  std::sort(annotations.begin(), annotations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.session_id, a.annotator_id) < std::tie(b.session_id, b.annotator_id);
  });
  AdherenceSummary out;
  out.annotations = annotations.size();
  std::vector<double> values;
  for (const FidelityAnnotation& a : annotations) {
    const auto score = adherence_score(a);
    out.scores.emplace_back(a.session_id + "/" + a.annotator_id, score);
    if (score) values.push_back(*score);
  }
  out.scored = values.size();
  if (!values.empty()) {
    double sum = 0.0;
    for (const double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    out.mean = mean;
    out.sd = std::sqrt(ss / static_cast<double>(values.size()));
    out.min = *std::min_element(values.begin(), values.end());
    out.max = *std::max_element(values.begin(), values.end());
  }
  out.violations = violation_summary(annotations);
  return out;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

nlohmann::json counts_to_json(const std::map<std::string, CategoryCount>& counts) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, c] : counts) {
    out[name] = {{"count", c.count}, {"sessions", c.sessions}, {"rate", c.rate}};
  }
  return out;
}

std::map<std::string, CategoryCount> counts_from_json(const nlohmann::json& j) {
  std::map<std::string, CategoryCount> out;
  for (const auto& [name, c] : j.items()) {
    out[name] = {c.at("count").get<std::size_t>(), c.at("sessions").get<std::size_t>(),
                 c.at("rate").get<double>()};
  }
  return out;
}

}  // namespace

nlohmann::json adherence_summary_to_json(const AdherenceSummary& s) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [key, score] : s.scores) scores.push_back({{"key", key}, {"score", optional_json(score)}});
  return {{"annotations", s.annotations},
          {"scored", s.scored},
          {"mean", optional_json(s.mean)},
          {"sd", optional_json(s.sd)},
          {"min", optional_json(s.min)},
          {"max", optional_json(s.max)},
          {"scores", std::move(scores)},
          {"annotated_sessions", s.violations.annotated_sessions},
          {"violations", counts_to_json(s.violations.violations)},
          {"adherent", counts_to_json(s.violations.adherent)}};
}

AdherenceSummary adherence_summary_from_json(const nlohmann::json& j) {
  AdherenceSummary s;
  s.annotations = j.at("annotations").get<std::size_t>();
  s.scored = j.at("scored").get<std::size_t>();
  s.mean = optional_from(j, "mean");
  s.sd = optional_from(j, "sd");
  s.min = optional_from(j, "min");
  s.max = optional_from(j, "max");
  for (const auto& entry : j.at("scores")) {
    s.scores.emplace_back(entry.at("key").get<std::string>(), optional_from(entry, "score"));
  }
  s.violations.annotated_sessions = j.at("annotated_sessions").get<std::size_t>();
  s.violations.violations = counts_from_json(j.at("violations"));
  s.violations.adherent = counts_from_json(j.at("adherent"));
  return s;
}

VersionConflict::VersionConflict(std::int64_t expected, std::int64_t current)
    : std::runtime_error("stale annotation version " + std::to_string(expected) +
                         " (stored version is " + std::to_string(current) + ")"),
      expected_(expected),
      current_(current) {}

std::string format_utc(std::chrono::system_clock::time_point tp) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

namespace {

// Keeps [A-Za-z0-9-]; everything else becomes %XX so the "__" separator and
// path characters cannot appear in an encoded component.
std::string encode_component(const std::string& text) {
  static const char* kHex = "0123456789ABCDEF";
  std::string out;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-') {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::optional<FidelityAnnotation> read_annotation(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return annotation_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt annotation file '" + path.string() + "': " + e.what());
  } catch (const InputError& e) {
    throw InputError("invalid annotation file '" + path.string() + "': " + e.what());
  }
}

}  // namespace

AnnotationStore::AnnotationStore(fs::path directory, Clock clock)
    : directory_(std::move(directory)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
  std::error_code ec;
  fs::create_directories(directory_, ec);
  if (!fs::is_directory(directory_)) {
    throw InputError("annotation directory '" + directory_.string() + "' is not usable");
  }
}

fs::path AnnotationStore::path_for(const std::string& session_id, const std::string& annotator_id) const {
  return directory_ / (encode_component(session_id) + "__" + encode_component(annotator_id) + ".json");
}

std::mutex& AnnotationStore::key_mutex(const std::string& key) {
  std::lock_guard lock(keys_mu_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::optional<FidelityAnnotation> AnnotationStore::get(const std::string& session_id,
                                                       const std::string& annotator_id) const {
  return read_annotation(path_for(session_id, annotator_id));
}

FidelityAnnotation AnnotationStore::put(const FidelityAnnotation& annotation,
                                        std::optional<std::size_t> turn_count) {
  validate_annotation(annotation, turn_count);
  const fs::path target = path_for(annotation.session_id, annotation.annotator_id);
  std::lock_guard lock(key_mutex(target.filename().string()));

  const auto existing = read_annotation(target);
  const std::int64_t current = existing ? existing->version : 0;
  if (annotation.version != current) throw VersionConflict(annotation.version, current);

  FidelityAnnotation stored = annotation;
  stored.version = current + 1;
  stored.updated_at = format_utc(clock_());

  const fs::path temp = directory_ / ("." + target.filename().string() + ".tmp");
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + temp.string() + "'");
    out << annotation_to_json(stored).dump(2) << '\n';
    if (!out.flush()) throw std::runtime_error("cannot write '" + temp.string() + "'");
  }
  fs::rename(temp, target);
  return stored;
}

std::vector<FidelityAnnotation> AnnotationStore::list() const {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory_)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.empty() || name.front() == '.' ||
        entry.path().extension() != ".json") {
      continue;
    }
    files.push_back(entry.path());
  }
  std::vector<FidelityAnnotation> out;
  for (const fs::path& f : files) {
    if (auto a = read_annotation(f)) out.push_back(std::move(*a));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.session_id, a.annotator_id) < std::tie(b.session_id, b.annotator_id);
  });
  return out;
}

std::vector<FidelityAnnotation> AnnotationStore::list_for_session(const std::string& session_id) const {
  std::vector<FidelityAnnotation> out;
  for (auto& a : list()) {
    if (a.session_id == session_id) out.push_back(std::move(a));
  }
  return out;
}

}  // namespace dialbench
