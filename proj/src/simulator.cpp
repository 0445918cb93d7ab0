#include "dialbench/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "dialbench/pe_metrics.hpp"
#include "dialbench/rng.hpp"

namespace dialbench {

void SimParams::validate() const {
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError(std::string(name) + " must be in [0, 1]");
  };
  auto normal = [](const NormalParam& n, const char* name) {
    if (!(n.mean > 0.0)) throw InputError(std::string(name) + ".mean must be positive");
    if (!(n.sd >= 0.0)) throw InputError(std::string(name) + ".sd must be non-negative");
  };
  if (session_count == 0) throw InputError("session_count must be positive");
  normal(turns_per_session, "turns_per_session");
  normal(therapist_utterance_length, "utterance_length.therapist");
  normal(client_utterance_length, "utterance_length.client");
  probability(avoidance_rate, "avoidance_rate");
  probability(redirection_probability, "redirection_probability");
  probability(emotion_rate, "emotion_rate");
  probability(guidance_rate, "guidance_rate");
  probability(restructuring_rate, "restructuring_rate");
  if (!(emotion_decay >= 0.0)) throw InputError("emotion_decay must be non-negative");
  if (vocab_size < 10) throw InputError("vocab_size must be at least 10");
  for (const SudsPoint& p : suds_trajectory) {
    if (!(p.fraction >= 0.0 && p.fraction <= 1.0)) {
      throw InputError("suds_trajectory fractions must be in [0, 1]");
    }
    if (!(p.value >= 0.0 && p.value <= 100.0) || p.value != std::floor(p.value)) {
      throw InputError("suds_trajectory values must be integers in [0, 100]");
    }
  }
  if (!std::is_sorted(suds_trajectory.begin(), suds_trajectory.end(),
                      [](const SudsPoint& a, const SudsPoint& b) { return a.fraction < b.fraction; })) {
    throw InputError("suds_trajectory must be ordered by fraction");
  }
}

namespace {

nlohmann::json normal_json(const NormalParam& n) { return {{"mean", n.mean}, {"sd", n.sd}}; }

NormalParam normal_from(const nlohmann::json& j, const char* name) {
  if (!j.is_object()) throw InputError(std::string(name) + " must be an object with mean and sd");
  return {j.at("mean").get<double>(), j.value("sd", 0.0)};
}

}  // namespace

nlohmann::json SimParams::to_json() const {
  nlohmann::json trajectory = nlohmann::json::array();
  for (const SudsPoint& p : suds_trajectory) trajectory.push_back({p.fraction, p.value});
  return {{"session_count", session_count},
          {"turns_per_session", normal_json(turns_per_session)},
          {"utterance_length",
           {{"therapist", normal_json(therapist_utterance_length)},
            {"client", normal_json(client_utterance_length)}}},
          {"suds_trajectory", trajectory},
          {"avoidance_rate", avoidance_rate},
          {"redirection_probability", redirection_probability},
          {"emotion_rate", emotion_rate},
          {"emotion_decay", emotion_decay},
          {"guidance_rate", guidance_rate},
          {"restructuring_rate", restructuring_rate},
          {"vocab_size", vocab_size},
          {"seed", seed},
          {"label", to_string(label)},
          {"id_prefix", id_prefix}};
}

SimParams SimParams::from_json(const nlohmann::json& j) {
  SimParams p;
  try {
    if (!j.is_object()) throw InputError("simulator params must be a JSON object");
    p.session_count = j.value("session_count", p.session_count);
    if (j.contains("turns_per_session")) p.turns_per_session = normal_from(j["turns_per_session"], "turns_per_session");
    if (j.contains("utterance_length")) {
      const auto& u = j["utterance_length"];
      if (u.contains("mean")) {
        p.therapist_utterance_length = p.client_utterance_length = normal_from(u, "utterance_length");
      } else {
        if (u.contains("therapist")) p.therapist_utterance_length = normal_from(u["therapist"], "utterance_length.therapist");
        if (u.contains("client")) p.client_utterance_length = normal_from(u["client"], "utterance_length.client");
      }
    }
    if (j.contains("suds_trajectory")) {
      for (const auto& point : j["suds_trajectory"]) {
        if (point.is_array() && point.size() == 2) {
          p.suds_trajectory.push_back({point[0].get<double>(), point[1].get<double>()});
        } else if (point.is_object()) {
          p.suds_trajectory.push_back({point.at("fraction").get<double>(), point.at("value").get<double>()});
        } else {
          throw InputError("suds_trajectory entries must be [fraction, value] pairs");
        }
      }
    }
    p.avoidance_rate = j.value("avoidance_rate", p.avoidance_rate);
    p.redirection_probability = j.value("redirection_probability", p.redirection_probability);
    p.emotion_rate = j.value("emotion_rate", p.emotion_rate);
    p.emotion_decay = j.value("emotion_decay", p.emotion_decay);
    p.guidance_rate = j.value("guidance_rate", p.guidance_rate);
    p.restructuring_rate = j.value("restructuring_rate", p.restructuring_rate);
    p.vocab_size = j.value("vocab_size", p.vocab_size);
    p.seed = j.value("seed", p.seed);
    p.id_prefix = j.value("id_prefix", p.id_prefix);
    if (j.contains("label")) {
      const auto label = parse_corpus_label(j["label"].get<std::string>());
      if (!label) throw InputError("unknown label '" + j["label"].get<std::string>() + "'");
      p.label = *label;
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid simulator params: ") + e.what());
  }
  p.validate();
  return p;
}

SimParams SimParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open simulator params '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed simulator params '" + path + "': " + e.what());
  }
}

std::string suds_statement(int value) {
  return "My SUDS is about " + std::to_string(value) + " right now.";
}

std::vector<std::string> simulator_vocabulary(std::size_t size, std::uint64_t seed) {
  static const std::string kOnsets = "bdfgklmnprstvz";
  static const std::string kVowels = "aeiou";
  const auto& stopwords = bundled_stopwords();
  const auto& lexicon = EmotionLexicon::bundled();
  Rng rng(derive_seed(seed, 0x70CAB));
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < size) {
    const std::size_t syllables = 2 + static_cast<std::size_t>(rng.below(2));
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(kOnsets[rng.below(kOnsets.size())]);
      w.push_back(kVowels[rng.below(kVowels.size())]);
    }
    if (stopwords.count(w) || lexicon.weight(w) > 0.0 || !seen.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cumulative_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / static_cast<double>(r + 1);
      cumulative_[r] = total;
    }
    for (double& c : cumulative_) c /= total;
  }
  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

struct Generator {
  const SimParams& params;
  std::vector<std::string> vocabulary;
  ZipfSampler zipf;
  std::vector<std::string> emotion_words;

  std::size_t draw_length(Rng& rng, const NormalParam& n) const {
    return static_cast<std::size_t>(std::max<long long>(1, std::llround(rng.normal(n.mean, n.sd))));
  }

  // Phrases first, then pseudo-word sentences until the turn has `length`
  // words. Filler words become emotion words with probability emotion_p.
  std::string compose(Rng& rng, const std::vector<std::string>& lead, const std::vector<std::string>& tail,
                      std::size_t length, double emotion_p) const {
    std::size_t fixed = 0;
    for (const auto& p : lead) fixed += word_count(p);
    for (const auto& p : tail) fixed += word_count(p);
    std::vector<std::string> parts(lead.begin(), lead.end());
    std::size_t remaining = length > fixed ? length - fixed : 0;
    while (remaining > 0) {
      const std::size_t sentence = std::min<std::size_t>(remaining, 5 + rng.below(8));
      std::string s;
      for (std::size_t k = 0; k < sentence; ++k) {
        if (k > 0) s.push_back(' ');
        if (emotion_p > 0.0 && rng.bernoulli(emotion_p)) {
          s += emotion_words[rng.below(emotion_words.size())];
        } else {
          s += vocabulary[zipf.sample(rng)];
        }
      }
      s.push_back('.');
      parts.push_back(std::move(s));
      remaining -= sentence;
    }
    parts.insert(parts.end(), tail.begin(), tail.end());
    std::string text;
    for (const auto& p : parts) {
      if (!text.empty()) text.push_back(' ');
      text += p;
    }
    return text;
  }

  Session session(std::size_t index) const {
    Rng rng(derive_seed(params.seed, index + 1));
    const std::size_t min_turns = std::max<std::size_t>(4, 2 * params.suds_trajectory.size());
    const std::size_t n_turns = std::max(min_turns, draw_length(rng, params.turns_per_session));
    const std::size_t n_client = n_turns / 2;

    // Client-turn slots for SUDS statements: nearest to each fraction, then
    // nudged so they are strictly increasing.
    const std::size_t k = params.suds_trajectory.size();
    std::vector<std::size_t> slots(k);
    for (std::size_t i = 0; i < k; ++i) {
      slots[i] = static_cast<std::size_t>(
          std::llround(params.suds_trajectory[i].fraction * static_cast<double>(n_client - 1)));
      if (i > 0) slots[i] = std::max(slots[i], slots[i - 1] + 1);
    }
    for (std::size_t i = k; i-- > 0;) {
      const std::size_t cap = i + 1 < k ? slots[i + 1] - 1 : n_client - 1;
      slots[i] = std::min(slots[i], cap);
    }

    const std::size_t third = n_client / 3;
    Session s;
    std::ostringstream id;
    id << params.id_prefix << '-' << std::setw(4) << std::setfill('0') << index;
    s.session_id = id.str();
    s.corpus_label = params.label;
    s.meta["generator"] = "simulator";

    bool redirect_next = false;
    std::size_t client_index = 0;
    for (std::size_t t = 0; t < n_turns; ++t) {
      Turn turn;
      std::vector<std::string> lead;
      std::vector<std::string> tail;
      if (t % 2 == 0) {
        turn.speaker = Speaker::Therapist;
        if (redirect_next) lead.push_back(SimPhrases::kRedirection);
        redirect_next = false;
        if (rng.bernoulli(params.guidance_rate)) tail.push_back(SimPhrases::kGuidance);
        turn.text = compose(rng, lead, tail, draw_length(rng, params.therapist_utterance_length), 0.0);
      } else {
        turn.speaker = Speaker::Client;
        const std::size_t c = client_index++;
        if (rng.bernoulli(params.avoidance_rate) && t + 1 < n_turns) {
          lead.push_back(SimPhrases::kAvoidance);
          redirect_next = rng.bernoulli(params.redirection_probability);
        }
        if (rng.bernoulli(params.restructuring_rate)) lead.push_back(SimPhrases::kRestructuring);
        for (std::size_t i = 0; i < k; ++i) {
          if (slots[i] == c) tail.push_back(suds_statement(static_cast<int>(params.suds_trajectory[i].value)));
        }
        std::size_t segment = 1;
        if (third > 0 && c < third) segment = 0;
        if (third > 0 && c >= n_client - third) segment = 2;
        const double emotion_p =
            std::min(1.0, params.emotion_rate * std::pow(params.emotion_decay, static_cast<double>(segment)));
        turn.text = compose(rng, lead, tail, draw_length(rng, params.client_utterance_length), emotion_p);
      }
      s.turns.push_back(std::move(turn));
    }
    s.raw_turn_count = s.turns.size();
    return s;
  }
};

}  // namespace

Corpus generate_corpus(const SimParams& params) { return generate_corpus(params, EmotionLexicon::bundled()); }

Corpus generate_corpus(const SimParams& params, const EmotionLexicon& lexicon) {
  params.validate();
  if (params.emotion_rate > 0.0 && lexicon.empty()) throw InputError("emotion lexicon is empty");
  Generator gen{params, simulator_vocabulary(params.vocab_size, params.seed), ZipfSampler(params.vocab_size), {}};
  for (const auto& [word, weight] : lexicon.entries()) {
    // Single-token entries only, so each injected word scores exactly once.
    if (word_count(word) == 1 && words(word).front() == word) gen.emotion_words.push_back(word);
  }
  std::sort(gen.emotion_words.begin(), gen.emotion_words.end());
  if (params.emotion_rate > 0.0 && gen.emotion_words.empty()) {
    throw InputError("emotion lexicon has no single-word entries");
  }

  Corpus corpus;
  corpus.label = params.label;
  for (std::size_t i = 0; i < params.session_count; ++i) corpus.sessions.push_back(gen.session(i));
  return corpus;
}

}  // namespace dialbench
