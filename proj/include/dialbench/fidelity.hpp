#pragma once

// Clinician fidelity checklist, turn-level violation spans, scoring, and the
// file-backed annotation store.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dialbench {

enum class Answer { Yes, No, NA };
std::string_view to_string(Answer answer);
std::optional<Answer> parse_answer(std::string_view text);

struct ChecklistDefinition {
  std::string_view item_id;
  std::string_view text;
};
constexpr std::size_t kChecklistSize = 11;
const std::array<ChecklistDefinition, kChecklistSize>& checklist_registry();
bool is_checklist_item(std::string_view item_id);

struct ChecklistItem {
  std::string item_id;
  Answer answer = Answer::NA;
  friend bool operator==(const ChecklistItem&, const ChecklistItem&) = default;
};

enum class ViolationCategory {
  RoleDrift,
  GenericAffirmation,
  ReflectionDuringExposure,
  TraumaAnchoringAdherent,
  NoIssue,
};
constexpr std::array<ViolationCategory, 5> kViolationCategories = {
    ViolationCategory::RoleDrift, ViolationCategory::GenericAffirmation,
    ViolationCategory::ReflectionDuringExposure, ViolationCategory::TraumaAnchoringAdherent,
    ViolationCategory::NoIssue};
std::string_view to_string(ViolationCategory category);
std::optional<ViolationCategory> parse_violation_category(std::string_view text);
// TraumaAnchoringAdherent and NoIssue mark adherent exchanges, not lapses.
bool is_adherent(ViolationCategory category);

struct ViolationSpan {
  std::size_t turn_index = 0;
  ViolationCategory category = ViolationCategory::NoIssue;
  std::string note;
  std::string annotator_id;
  friend bool operator==(const ViolationSpan&, const ViolationSpan&) = default;
};

struct FidelityAnnotation {
  std::string session_id;
  std::vector<ChecklistItem> items;
  std::vector<ViolationSpan> spans;
  std::string annotator_id;
  std::int64_t version = 0;
  std::string updated_at;  // ISO-8601 UTC, set by the store
  friend bool operator==(const FidelityAnnotation&, const FidelityAnnotation&) = default;
};

// A fresh annotation with every registry item answered NA.
FidelityAnnotation blank_annotation(std::string session_id, std::string annotator_id);

nlohmann::json annotation_to_json(const FidelityAnnotation& annotation);
// Throws InputError on any schema violation. When turn_count is given, span
// turn indices are checked against it.
FidelityAnnotation annotation_from_json(const nlohmann::json& j,
                                        std::optional<std::size_t> turn_count = std::nullopt);
void validate_annotation(const FidelityAnnotation& annotation,
                         std::optional<std::size_t> turn_count = std::nullopt);

// Yes / (Yes + No); nullopt when no item is applicable.
std::optional<double> adherence_score(const FidelityAnnotation& annotation);

struct CategoryCount {
  std::size_t count = 0;     // spans
  std::size_t sessions = 0;  // sessions with at least one span
  double rate = 0.0;         // sessions / annotated sessions
};

struct ViolationSummary {
  std::size_t annotated_sessions = 0;
  std::map<std::string, CategoryCount> violations;
  std::map<std::string, CategoryCount> adherent;
  bool empty() const { return violations.empty() && adherent.empty(); }
};
ViolationSummary violation_summary(const std::vector<FidelityAnnotation>& annotations);

struct AdherenceSummary {
  std::size_t annotations = 0;
  std::size_t scored = 0;  // annotations with a defined score
  std::optional<double> mean;
  std::optional<double> sd;  // population
  std::optional<double> min;
  std::optional<double> max;
  // Score per annotation, ordered by (session_id, annotator_id).
  std::vector<std::pair<std::string, std::optional<double>>> scores;
  ViolationSummary violations;
};
AdherenceSummary summarize_annotations(std::vector<FidelityAnnotation> annotations);
nlohmann::json adherence_summary_to_json(const AdherenceSummary& summary);
AdherenceSummary adherence_summary_from_json(const nlohmann::json& j);

class VersionConflict : public std::runtime_error {
 public:
  VersionConflict(std::int64_t expected, std::int64_t current);
  std::int64_t expected() const { return expected_; }
  std::int64_t current() const { return current_; }

 private:
  std::int64_t expected_;
  std::int64_t current_;
};

// One JSON file per (session_id, annotator_id). Writes go to a temporary file
// that is renamed into place; writes to the same key are serialized, and a
// write is accepted only when its version equals the stored one (0 when none
// exists). The stored copy gets version + 1 and a fresh timestamp.
class AnnotationStore {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  explicit AnnotationStore(std::filesystem::path directory, Clock clock = {});

  std::optional<FidelityAnnotation> get(const std::string& session_id,
                                        const std::string& annotator_id) const;
  // Throws VersionConflict on a stale version, InputError on invalid content.
  FidelityAnnotation put(const FidelityAnnotation& annotation,
                         std::optional<std::size_t> turn_count = std::nullopt);
  // All stored annotations ordered by (session_id, annotator_id).
  std::vector<FidelityAnnotation> list() const;
  std::vector<FidelityAnnotation> list_for_session(const std::string& session_id) const;

  const std::filesystem::path& directory() const { return directory_; }
  std::filesystem::path path_for(const std::string& session_id,
                                 const std::string& annotator_id) const;

 private:
  std::mutex& key_mutex(const std::string& key);

  std::filesystem::path directory_;
  Clock clock_;
  std::mutex keys_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

std::string format_utc(std::chrono::system_clock::time_point tp);

}  // namespace dialbench
