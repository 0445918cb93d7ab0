#include "dialbench/lm.hpp"

#include <cmath>
#include <numeric>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"
#include "dialbench/rng.hpp"

namespace dialbench {

NGramModel::NGramModel(LmOptions options, std::set<std::string> vocabulary)
    : options_(options), vocabulary_(std::move(vocabulary)) {
  if (options_.order < 1) throw InputError("n-gram order must be >= 1");
  if (!(options_.alpha > 0.0)) throw InputError("smoothing alpha must be positive");
  for (const std::string_view reserved : {kUnk, kBos, kEos}) {
    vocabulary_.erase(std::string(reserved));
  }
}

NGramModel NGramModel::train(const std::vector<const Session*>& sessions, LmOptions options) {
  if (sessions.empty()) throw DomainError("cannot train a language model on an empty corpus");
  std::unordered_map<std::string, std::size_t> frequency;
  std::size_t total = 0;
  for (const Session* s : sessions) {
    for (const Turn& turn : s->turns) {
      for (auto& w : words(turn.text)) {
        ++frequency[std::move(w)];
        ++total;
      }
    }
  }
  if (total == 0) throw DomainError("cannot train a language model on a corpus without words");

  std::set<std::string> vocabulary;
  for (const auto& [word, count] : frequency) {
    if (count >= options.min_count) vocabulary.insert(word);
  }
  NGramModel model(options, std::move(vocabulary));
  for (const Session* s : sessions) {
    for (const Turn& turn : s->turns) model.add_utterance(turn.text);
  }
  return model;
}

NGramModel NGramModel::train(const Corpus& corpus, LmOptions options) {
  std::vector<const Session*> sessions;
  for (const Session& s : corpus.sessions) sessions.push_back(&s);
  return train(sessions, options);
}

std::size_t NGramModel::support_size() const {
  return vocabulary_.size() + 1 + (options_.end_of_utterance ? 1 : 0);
}

std::vector<std::string> NGramModel::support() const {
  std::vector<std::string> out(vocabulary_.begin(), vocabulary_.end());
  out.emplace_back(kUnk);
  if (options_.end_of_utterance) out.emplace_back(kEos);
  return out;
}

std::string NGramModel::map_word(const std::string& word) const {
  return vocabulary_.contains(word) ? word : std::string(kUnk);
}

std::vector<std::string> NGramModel::symbolize(std::string_view utterance) const {
  std::vector<std::string> symbols(static_cast<std::size_t>(options_.order - 1), std::string(kBos));
  for (const auto& w : words(utterance)) symbols.push_back(map_word(w));
  if (options_.end_of_utterance) symbols.emplace_back(kEos);
  return symbols;
}

void NGramModel::add_utterance(std::string_view utterance) {
  const auto symbols = symbolize(utterance);
  const auto ctx_len = static_cast<std::size_t>(options_.order - 1);
  for (std::size_t i = ctx_len; i < symbols.size(); ++i) {
    Context context(symbols.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                    symbols.begin() + static_cast<std::ptrdiff_t>(i));
    ++counts_[context][symbols[i]];
    ++context_totals_[context];
  }
}

double NGramModel::probability(const Context& context, const std::string& word) const {
  const double v = static_cast<double>(support_size());
  double count = 0.0;
  double total = 0.0;
  if (const auto it = counts_.find(context); it != counts_.end()) {
    total = static_cast<double>(context_totals_.at(context));
    if (const auto w = it->second.find(word); w != it->second.end()) {
      count = static_cast<double>(w->second);
    }
  }
  return (count + options_.alpha) / (total + options_.alpha * v);
}

double NGramModel::avg_perplexity(const Session& session) const {
  const auto ctx_len = static_cast<std::size_t>(options_.order - 1);
  double log_sum = 0.0;
  std::size_t predicted = 0;
  std::size_t word_total = 0;
  Context context;
  for (const Turn& turn : session.turns) {
    const auto symbols = symbolize(turn.text);
    word_total += symbols.size() - ctx_len - (options_.end_of_utterance ? 1 : 0);
    for (std::size_t i = ctx_len; i < symbols.size(); ++i) {
      context.assign(symbols.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                     symbols.begin() + static_cast<std::ptrdiff_t>(i));
      log_sum += std::log(probability(context, symbols[i]));
      ++predicted;
    }
  }
  if (word_total == 0) throw DomainError("perplexity of a session with zero tokens");
  return std::exp(-log_sum / static_cast<double>(predicted));
}

nlohmann::json NGramModel::to_json() const {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [context, next] : counts_) {
    for (const auto& [word, count] : next) {
      counts.push_back({{"context", context}, {"word", word}, {"count", count}});
    }
  }
  return {{"order", options_.order},
          {"alpha", options_.alpha},
          {"min_count", options_.min_count},
          {"end_of_utterance", options_.end_of_utterance},
          {"vocabulary", vocabulary_},
          {"counts", std::move(counts)}};
}

NGramModel NGramModel::from_json(const nlohmann::json& dump) {
  try {
    LmOptions options;
    options.order = dump.at("order").get<int>();
    options.alpha = dump.at("alpha").get<double>();
    options.min_count = dump.value("min_count", options.min_count);
    options.end_of_utterance = dump.value("end_of_utterance", true);
    NGramModel model(options, dump.at("vocabulary").get<std::set<std::string>>());
    for (const auto& entry : dump.at("counts")) {
      auto context = entry.at("context").get<Context>();
      if (context.size() != static_cast<std::size_t>(options.order - 1)) {
        throw InputError("context length does not match model order");
      }
      const auto count = entry.at("count").get<std::uint64_t>();
      if (count == 0) throw InputError("stored n-gram counts must be >= 1");
      model.counts_[context][entry.at("word").get<std::string>()] += count;
      model.context_totals_[context] += count;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid model dump: ") + e.what());
  }
}

NGramModel train_reference_model(const Corpus& a, const Corpus& b, std::uint64_t seed,
                                 LmOptions options) {
  const std::size_t take = std::min(a.sessions.size(), b.sessions.size());
  if (take == 0) throw DomainError("reference model needs two non-empty corpora");
  std::vector<const Session*> mixture;
  std::uint64_t stream = 0;
  for (const Corpus* corpus : {&a, &b}) {
    std::vector<std::size_t> order(corpus->sessions.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, stream++));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < take; ++i) mixture.push_back(&corpus->sessions[order[i]]);
  }
  return NGramModel::train(mixture, options);
}

}  // namespace dialbench
