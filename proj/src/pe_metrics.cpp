#include "dialbench/pe_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dialbench/bundled.hpp"
#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "json.hpp"

namespace dialbench {
namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Lowercase ASCII and fold typographic apostrophes so rules can be written
// with a plain '.
std::string match_form(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) == 0x98 ||
         static_cast<unsigned char>(text[i + 2]) == 0x99)) {
      out.push_back('\'');
      i += 2;
      continue;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  }
  return out;
}

std::optional<int> as_scale_value(const std::string& token) {
  if (token.empty() || token.size() > 3) return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  if (value < 0 || value > 100) return std::nullopt;
  return value;
}

const std::unordered_set<std::string>& unit_words() {
  static const std::unordered_set<std::string> kUnits = {
      "minute", "minutes", "min", "mins", "second", "seconds", "sec", "secs",
      "hour",   "hours",   "hr",  "hrs",  "day",    "days",    "week", "weeks",
      "month",  "months",  "year", "years", "yrs",  "times",   "time", "percent",
      "am",     "pm",      "o'clock", "people", "dollars", "miles", "feet", "pounds"};
  return kUnits;
}

// True when tokens[i] is an endpoint of a scale description such as
// "0 to 100", "0-100" or "1 to 100", which is an anchor, not a rating.
bool is_scale_anchor(const std::vector<std::string>& tokens, std::size_t i) {
  auto low_end = [&](std::size_t k) {
    return tokens[k] == "0" || tokens[k] == "1" || tokens[k] == "zero";
  };
  auto high_end = [&](std::size_t k) { return tokens[k] == "100" || tokens[k] == "hundred"; };
  auto pair_at = [&](std::size_t lo, std::size_t hi) {
    return hi < tokens.size() && low_end(lo) && high_end(hi) &&
           (hi == lo + 1 || (hi == lo + 2 && tokens[lo + 1] == "to") ||
            (hi == lo + 3 && tokens[lo + 1] == "to" && tokens[lo + 2] == "a"));
  };
  for (std::size_t span = 1; span <= 3; ++span) {
    if (pair_at(i, i + span)) return true;
    if (i >= span && pair_at(i - span, i)) return true;
  }
  return false;
}

double mean_of(const std::vector<double>& v, SplitRange r) {
  if (r.end <= r.begin) return 0.0;
  double sum = 0.0;
  for (std::size_t i = r.begin; i < r.end; ++i) sum += v[i];
  return sum / static_cast<double>(r.end - r.begin);
}

std::unordered_set<std::string> parse_stopwords(std::string_view text) {
  std::unordered_set<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::istringstream words(line);
    std::string w;
    while (words >> w) out.insert(match_form(w));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// EmotionLexicon

EmotionLexicon::EmotionLexicon(std::unordered_map<std::string, double> entries, std::string name,
                               std::string version)
    : name_(std::move(name)), version_(std::move(version)) {
  for (auto& [word, weight] : entries) {
    if (!(weight > 0.0 && weight <= 1.0)) {
      throw InputError("lexicon weight for '" + word + "' outside (0,1]");
    }
    entries_.emplace(match_form(word), weight);
  }
}

EmotionLexicon EmotionLexicon::parse_tsv(std::string_view text) {
  std::unordered_map<std::string, double> entries;
  std::string name;
  std::string version;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (body.rfind("name:", 0) == 0) name = trim(std::string_view(body).substr(5));
      if (body.rfind("version:", 0) == 0) version = trim(std::string_view(body).substr(8));
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError("lexicon line " + std::to_string(line_no) + ": expected word<TAB>weight");
    }
    const std::string word = trim(std::string_view(line).substr(0, tab));
    const std::string weight_text = trim(std::string_view(line).substr(tab + 1));
    double weight = 0.0;
    try {
      std::size_t used = 0;
      weight = std::stod(weight_text, &used);
      if (used != weight_text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("lexicon line " + std::to_string(line_no) + ": bad weight '" +
                       weight_text + "'");
    }
    if (word.empty()) throw InputError("lexicon line " + std::to_string(line_no) + ": empty word");
    entries[word] = weight;
  }
  return EmotionLexicon(std::move(entries), std::move(name), std::move(version));
}

EmotionLexicon EmotionLexicon::load(const std::string& path) {
  return parse_tsv(read_file(path, "lexicon"));
}

const EmotionLexicon& EmotionLexicon::bundled() {
  static const EmotionLexicon kLexicon = parse_tsv(bundled::emotion_lexicon_tsv());
  return kLexicon;
}

double EmotionLexicon::weight(const std::string& word) const {
  const auto it = entries_.find(word);
  return it == entries_.end() ? 0.0 : it->second;
}

// ---------------------------------------------------------------------------
// PatternRuleSet

PatternRuleSet::PatternRuleSet(std::map<std::string, std::vector<std::string>> groups,
                               std::size_t redirection_window)
    : groups_(std::move(groups)), redirection_window_(redirection_window) {
  if (redirection_window_ == 0) throw InputError("redirection_window must be positive");
  for (const char* required : kGroups) {
    const auto it = groups_.find(required);
    if (it == groups_.end() || it->second.empty()) {
      throw InputError(std::string("rule group '") + required + "' missing or empty");
    }
  }
  for (const auto& [name, patterns] : groups_) {
    if (patterns.empty()) throw InputError("rule group '" + name + "' is empty");
    std::string alternation;
    for (const std::string& p : patterns) {
      try {
        std::regex probe(p, std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& e) {
        throw InputError("rule '" + p + "' in group '" + name + "' does not compile: " + e.what());
      }
      if (!alternation.empty()) alternation += '|';
      alternation += "(?:" + p + ")";
    }
    compiled_.emplace(name, std::regex(alternation, std::regex::ECMAScript | std::regex::icase |
                                                        std::regex::optimize));
  }
}

PatternRuleSet PatternRuleSet::parse_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed rule file: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("rule file must be a JSON object");
  std::map<std::string, std::vector<std::string>> groups;
  std::size_t window = 2;
  for (const auto& [key, value] : doc.items()) {
    if (key == "redirection_window") {
      if (!value.is_number_integer() || value.get<long long>() <= 0) {
        throw InputError("redirection_window must be a positive integer");
      }
      window = value.get<std::size_t>();
      continue;
    }
    if (!value.is_array()) throw InputError("rule group '" + key + "' must be an array");
    for (const auto& p : value) {
      if (!p.is_string()) throw InputError("rule group '" + key + "' has a non-string pattern");
      groups[key].push_back(p.get<std::string>());
    }
  }
  return PatternRuleSet(std::move(groups), window);
}

PatternRuleSet PatternRuleSet::load(const std::string& path) {
  return parse_json(read_file(path, "rule file"));
}

const PatternRuleSet& PatternRuleSet::bundled() {
  static const PatternRuleSet kRules = parse_json(bundled::pe_rules_json());
  return kRules;
}

bool PatternRuleSet::matches(const std::string& group, std::string_view text) const {
  const auto it = compiled_.find(group);
  if (it == compiled_.end()) throw InputError("unknown rule group '" + group + "'");
  const std::string form = match_form(text);
  return std::regex_search(form, it->second);
}

// ---------------------------------------------------------------------------
// Metric vector plumbing

const std::array<PEMetricVector::Field, PEMetricVector::kFieldCount>& PEMetricVector::fields() {
  static const std::array<Field, kFieldCount> kFields = {{
      {"trauma_narrative_coherence", &PEMetricVector::trauma_narrative_coherence},
      {"emotional_engagement", &PEMetricVector::emotional_engagement},
      {"avoidance_handling", &PEMetricVector::avoidance_handling},
      {"exposure_guidance", &PEMetricVector::exposure_guidance},
      {"cognitive_restructuring", &PEMetricVector::cognitive_restructuring},
      {"emotional_habituation", &PEMetricVector::emotional_habituation},
      {"suds_progression", &PEMetricVector::suds_progression},
      {"avoidance_reduction", &PEMetricVector::avoidance_reduction},
      {"emotion_intensity", &PEMetricVector::emotion_intensity},
      {"narrative_development", &PEMetricVector::narrative_development},
  }};
  return kFields;
}

MetricValue PEMetricVector::get(std::string_view name) const {
  for (const Field& f : fields()) {
    if (f.name == name) return this->*f.member;
  }
  throw InputError("unknown PE metric '" + std::string(name) + "'");
}

std::pair<SplitRange, SplitRange> thirds(std::size_t n) {
  const std::size_t k = n / 3;
  return {{0, k}, {n - k, n}};
}

std::pair<SplitRange, SplitRange> halves(std::size_t n) {
  const std::size_t k = n / 2;
  return {{0, k}, {n - k, n}};
}

// ---------------------------------------------------------------------------
// SUDS

std::vector<SudsEvent> extract_suds(const Session& session) {
  std::vector<SudsEvent> events;
  for (std::size_t t = 0; t < session.turns.size(); ++t) {
    const Turn& turn = session.turns[t];
    const std::vector<std::string> tokens = words(turn.text);
    const std::size_t n = tokens.size();

    auto usable = [&](std::size_t i) {
      if (!as_scale_value(tokens[i])) return false;
      if (i + 1 < n && unit_words().contains(tokens[i + 1])) return false;
      return !is_scale_anchor(tokens, i);
    };

    std::vector<bool> consumed(n, false);
    std::vector<std::pair<std::size_t, int>> found;  // (token position, value)

    // "N out of 100"
    for (std::size_t i = 0; i + 3 < n; ++i) {
      if (tokens[i + 1] == "out" && tokens[i + 2] == "of" && tokens[i + 3] == "100" &&
          as_scale_value(tokens[i]) && !(i + 4 < n && unit_words().contains(tokens[i + 4]))) {
        found.emplace_back(i, *as_scale_value(tokens[i]));
        consumed[i] = consumed[i + 3] = true;
      }
    }
    // "suds" within six tokens of a number
    for (std::size_t s = 0; s < n; ++s) {
      if (tokens[s] != "suds") continue;
      const std::size_t lo = s >= 6 ? s - 6 : 0;
      const std::size_t hi = std::min(n - 1, s + 6);
      for (std::size_t i = lo; i <= hi; ++i) {
        if (i == s || consumed[i] || !usable(i)) continue;
        found.emplace_back(i, *as_scale_value(tokens[i]));
        consumed[i] = true;
      }
    }
    std::sort(found.begin(), found.end());
    for (const auto& [pos, value] : found) {
      events.push_back({t, static_cast<double>(value), turn.speaker});
    }
  }
  return events;
}

std::optional<double> suds_progression(const std::vector<SudsEvent>& events) {
  std::optional<double> first;
  std::optional<double> last;
  std::size_t count = 0;
  for (const SudsEvent& e : events) {
    if (e.speaker != Speaker::Client) continue;
    if (!first) first = e.value;
    last = e.value;
    ++count;
  }
  if (count < 2) return std::nullopt;
  return *last - *first;
}

// ---------------------------------------------------------------------------
// Emotion

std::vector<double> emotion_intensity_series(const Session& session, const EmotionLexicon& lexicon) {
  if (lexicon.empty()) throw InputError("emotion lexicon is empty");
  std::vector<double> series;
  for (const Turn& turn : session.turns) {
    if (turn.speaker != Speaker::Client) continue;
    const auto tokens = words(turn.text);
    double sum = 0.0;
    for (const auto& w : tokens) sum += lexicon.weight(w);
    series.push_back(tokens.empty() ? 0.0 : sum / static_cast<double>(tokens.size()));
  }
  return series;
}

std::optional<double> emotional_habituation(const std::vector<double>& series) {
  if (series.size() < 3) return std::nullopt;
  const auto [first, last] = thirds(series.size());
  return mean_of(series, first) - mean_of(series, last);
}

// ---------------------------------------------------------------------------
// Avoidance and marker densities

AvoidanceMetrics avoidance_metrics(const Session& session, const PatternRuleSet& rules) {
  AvoidanceMetrics out;
  const auto& turns = session.turns;
  std::vector<double> client_avoids;  // 1.0 per avoidant client turn, in client order
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].speaker != Speaker::Client) continue;
    const bool avoids = rules.matches("avoidance_markers", turns[i].text);
    client_avoids.push_back(avoids ? 1.0 : 0.0);
    if (!avoids) continue;
    ++out.events;
    const std::size_t stop = std::min(turns.size(), i + 1 + rules.redirection_window());
    for (std::size_t j = i + 1; j < stop; ++j) {
      if (turns[j].speaker == Speaker::Therapist &&
          rules.matches("redirection_markers", turns[j].text)) {
        ++out.handled;
        break;
      }
    }
  }
  if (out.events > 0) {
    out.handling = static_cast<double>(out.handled) / static_cast<double>(out.events);
  }
  if (client_avoids.size() >= 2) {
    const auto [first, second] = halves(client_avoids.size());
    out.reduction = mean_of(client_avoids, first) - mean_of(client_avoids, second);
  }
  return out;
}

MarkerDensities marker_density_metrics(const Session& session, const PatternRuleSet& rules,
                                       const EmotionLexicon& lexicon, const PeConfig& config) {
  std::size_t therapist = 0;
  std::size_t guided = 0;
  std::size_t client = 0;
  std::size_t restructured = 0;
  std::size_t engaged = 0;
  const std::vector<double> intensity = emotion_intensity_series(session, lexicon);
  for (const Turn& turn : session.turns) {
    if (turn.speaker == Speaker::Therapist) {
      ++therapist;
      if (rules.matches("guidance_markers", turn.text)) ++guided;
      continue;
    }
    if (rules.matches("restructuring_markers", turn.text)) ++restructured;
    if (rules.matches("engagement_markers", turn.text) ||
        intensity[client] > config.engagement_threshold) {
      ++engaged;
    }
    ++client;
  }
  MarkerDensities out;
  if (therapist > 0) out.exposure_guidance = static_cast<double>(guided) / static_cast<double>(therapist);
  if (client > 0) {
    out.cognitive_restructuring = static_cast<double>(restructured) / static_cast<double>(client);
    out.emotional_engagement = static_cast<double>(engaged) / static_cast<double>(client);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Narrative

const std::unordered_set<std::string>& bundled_stopwords() {
  static const std::unordered_set<std::string> kStopwords =
      parse_stopwords(bundled::stopwords_txt());
  return kStopwords;
}

const std::vector<std::string>& discourse_connectives() {
  static const std::vector<std::string> kConnectives = {
      "then", "because", "so", "after", "before", "when", "while", "next", "finally", "since"};
  return kConnectives;
}

NarrativeMetrics narrative_metrics(const Session& session, const Embedder& embedder,
                                   const std::unordered_set<std::string>& stopwords) {
  const std::unordered_set<std::string> connectives(discourse_connectives().begin(),
                                                    discourse_connectives().end());
  std::vector<Embedding> client_embeddings;
  std::vector<double> new_content;  // per client turn
  std::unordered_set<std::string> seen;
  std::size_t client_tokens = 0;
  std::size_t connective_tokens = 0;

  for (const Turn& turn : session.turns) {
    const auto tokens = words(turn.text);
    if (turn.speaker == Speaker::Client) {
      client_embeddings.push_back(embedder.embed(turn.text));
      client_tokens += tokens.size();
      std::unordered_set<std::string> fresh;
      for (const auto& w : tokens) {
        if (connectives.contains(w)) ++connective_tokens;
        const bool content = !stopwords.contains(w) &&
                             std::any_of(w.begin(), w.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
        if (content && !seen.contains(w)) fresh.insert(w);
      }
      new_content.push_back(static_cast<double>(fresh.size()));
    }
    seen.insert(tokens.begin(), tokens.end());
  }
  if (client_embeddings.size() < 2) {
    throw DomainError("narrative metrics need at least two client turns");
  }

  double cos_sum = 0.0;
  for (std::size_t i = 1; i < client_embeddings.size(); ++i) {
    cos_sum += cosine(client_embeddings[i - 1], client_embeddings[i]);
  }
  const double mean_cos = cos_sum / static_cast<double>(client_embeddings.size() - 1);
  const double density =
      client_tokens == 0
          ? 0.0
          : std::min(1.0, static_cast<double>(connective_tokens) / static_cast<double>(client_tokens));

  NarrativeMetrics out;
  out.trauma_narrative_coherence = 0.5 * mean_cos + 0.5 * density;
  const auto [first, second] = halves(new_content.size());
  out.narrative_development = mean_of(new_content, second) - mean_of(new_content, first);
  return out;
}

PEMetricVector compute_pe_metric_vector(const Session& session, const Embedder& embedder,
                                        const PeResources& resources) {
  PEMetricVector v;
  const auto series = emotion_intensity_series(session, *resources.lexicon);
  v.emotional_habituation = emotional_habituation(series);
  if (!series.empty()) {
    double sum = 0.0;
    for (const double x : series) sum += x;
    v.emotion_intensity = sum / static_cast<double>(series.size());
  }
  v.suds_progression = suds_progression(extract_suds(session));

  const AvoidanceMetrics avoidance = avoidance_metrics(session, *resources.rules);
  v.avoidance_handling = avoidance.handling;
  v.avoidance_reduction = avoidance.reduction;

  const MarkerDensities densities =
      marker_density_metrics(session, *resources.rules, *resources.lexicon, resources.config);
  v.exposure_guidance = densities.exposure_guidance;
  v.cognitive_restructuring = densities.cognitive_restructuring;
  v.emotional_engagement = densities.emotional_engagement;

  if (session.count_turns(Speaker::Client) >= 2) {
    const NarrativeMetrics narrative = narrative_metrics(session, embedder, *resources.stopwords);
    v.trauma_narrative_coherence = narrative.trauma_narrative_coherence;
    v.narrative_development = narrative.narrative_development;
  }
  return v;
}

}  // namespace dialbench
