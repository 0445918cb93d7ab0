#include "dialbench/embedder.hpp"

#include <algorithm>
#include <cmath>

#include "dialbench/error.hpp"
#include "dialbench/lexical.hpp"

namespace dialbench {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvariantError("cosine of vectors with different dimensions");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void l2_normalize(std::span<double> v) {
  double norm = 0.0;
  for (const double x : v) norm += x * x;
  if (norm == 0.0) return;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
}

std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ seed;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  // Final avalanche so nearby seeds give unrelated bucket assignments.
  h ^= h >> 33;
  h *= 0xFF51AFD7ED558CCDULL;
  h ^= h >> 33;
  return h;
}

HashedBagOfWords::HashedBagOfWords(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw InputError("embedder dimension must be positive");
}

std::size_t HashedBagOfWords::bucket(std::string_view token) const {
  return static_cast<std::size_t>(stable_hash(token, seed_) % dimension_);
}

std::optional<Embedding> HashedBagOfWords::additive_part(std::string_view text) const {
  Embedding counts(dimension_, 0.0);
  for (const auto& token : words(text)) counts[bucket(token)] += 1.0;
  return counts;
}

Embedding HashedBagOfWords::embed(std::string_view text) const {
  Embedding v = *additive_part(text);
  l2_normalize(v);
  return v;
}

std::unique_ptr<Embedder> default_embedder(std::size_t dimension, std::uint64_t seed) {
  return std::make_unique<HashedBagOfWords>(dimension, seed);
}

}  // namespace dialbench
