#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dialbench {

using Embedding = std::vector<double>;

// Text -> fixed-length vector. Implementations must be deterministic and safe
// to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;

  // Additive embedders map a text to an unnormalized vector such that the
  // embedding of a space-joined concatenation equals the L2-normalized sum of
  // the parts. Lets prefix embeddings be accumulated instead of recomputed.
  virtual std::optional<Embedding> additive_part(std::string_view /*text*/) const {
    return std::nullopt;
  }
};

// Cosine similarity; 0 when either vector is all zeros.
double cosine(std::span<const double> a, std::span<const double> b);
void l2_normalize(std::span<double> v);

// Hashed bag of words: each token falls into one of `dimension` buckets by a
// seeded 64-bit FNV-1a hash; bucket counts are L2-normalized.
class HashedBagOfWords final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 512;
  static constexpr std::uint64_t kDefaultSeed = 0x5EEDF00DULL;

  explicit HashedBagOfWords(std::size_t dimension = kDefaultDimension,
                            std::uint64_t seed = kDefaultSeed);

  std::size_t dimension() const override { return dimension_; }
  Embedding embed(std::string_view text) const override;
  std::optional<Embedding> additive_part(std::string_view text) const override;

  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed);

std::unique_ptr<Embedder> default_embedder(std::size_t dimension = HashedBagOfWords::kDefaultDimension,
                                           std::uint64_t seed = HashedBagOfWords::kDefaultSeed);

}  // namespace dialbench
