#pragma once

// Add-alpha smoothed n-gram model used for per-session perplexity.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialbench/transcript.hpp"
#include "json.hpp"

namespace dialbench {

struct LmOptions {
  int order = 3;
  double alpha = 1.0;
  // Words seen fewer times than this in training map to <unk>.
  std::size_t min_count = 2;
  // Predict one end-of-utterance symbol per turn.
  bool end_of_utterance = true;
};

class NGramModel {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";

  using Context = std::vector<std::string>;

  // A model with a fixed vocabulary and no counts: every prediction is uniform
  // over the support.
  NGramModel(LmOptions options, std::set<std::string> vocabulary);

  // Trains on every turn of every session. Throws DomainError on an empty
  // corpus or a corpus without a single word.
  static NGramModel train(const std::vector<const Session*>& sessions, LmOptions options = {});
  static NGramModel train(const Corpus& corpus, LmOptions options = {});

  const LmOptions& options() const { return options_; }
  int order() const { return options_.order; }
  double alpha() const { return options_.alpha; }
  const std::set<std::string>& vocabulary() const { return vocabulary_; }

  // Symbols a prediction ranges over: vocabulary, <unk>, and </s> when enabled.
  std::size_t support_size() const;
  std::vector<std::string> support() const;

  // context holds exactly order-1 symbols (already mapped); word is a member
  // of support().
  double probability(const Context& context, const std::string& word) const;

  // Maps an utterance to model symbols: order-1 <s>, words (OOV -> <unk>),
  // optional </s>.
  std::vector<std::string> symbolize(std::string_view utterance) const;

  // exp(-mean log p) over every predicted symbol of every turn.
  // Throws DomainError when the session has no words.
  double avg_perplexity(const Session& session) const;

  // Observed contexts and their continuation counts.
  const std::map<Context, std::map<std::string, std::uint64_t>>& counts() const { return counts_; }

  nlohmann::json to_json() const;
  static NGramModel from_json(const nlohmann::json& dump);

 private:
  void add_utterance(std::string_view utterance);
  std::string map_word(const std::string& word) const;

  LmOptions options_;
  std::set<std::string> vocabulary_;
  std::map<Context, std::map<std::string, std::uint64_t>> counts_;
  std::map<Context, std::uint64_t> context_totals_;
};

// Picks min(|a|, |b|) sessions from each corpus after a seeded shuffle and
// trains on their union, so both corpora are scored by the same model.
NGramModel train_reference_model(const Corpus& a, const Corpus& b, std::uint64_t seed,
                                 LmOptions options = {});

}  // namespace dialbench
