#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace commlab {

/// Fixed-size bit set sized at runtime. Agents and simulations use these for
/// neighbor rows and knowledge sets, so the word layout is exposed for fast
/// unions.
class DynamicBitset {
 public:
  DynamicBitset() = default;
  explicit DynamicBitset(int nbits)
      : nbits_(nbits), words_((nbits + 63) / 64, 0) {
    if (nbits < 0) throw std::invalid_argument("DynamicBitset: negative size");
  }

  int size() const { return nbits_; }

  bool test(int i) const {
    check(i);
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }

  void set(int i) {
    check(i);
    words_[i >> 6] |= (std::uint64_t{1} << (i & 63));
  }

  void reset(int i) {
    check(i);
    words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
  }

  void clear() {
    for (auto& w : words_) w = 0;
  }

  int count() const {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  bool all() const { return count() == nbits_; }
  bool any() const {
    for (auto w : words_)
      if (w) return true;
    return false;
  }

  DynamicBitset& operator|=(const DynamicBitset& o) {
    check_same(o);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }

  /// popcount(*this & o) without materializing the intersection.
  int count_and(const DynamicBitset& o) const {
    check_same(o);
    int c = 0;
    for (std::size_t k = 0; k < words_.size(); ++k)
      c += std::popcount(words_[k] & o.words_[k]);
    return c;
  }

  bool is_subset_of(const DynamicBitset& o) const {
    check_same(o);
    for (std::size_t k = 0; k < words_.size(); ++k)
      if (words_[k] & ~o.words_[k]) return false;
    return true;
  }

  friend bool operator==(const DynamicBitset& a, const DynamicBitset& b) {
    return a.nbits_ == b.nbits_ && a.words_ == b.words_;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  void check(int i) const {
    if (i < 0 || i >= nbits_) throw std::out_of_range("DynamicBitset: index");
  }
  void check_same(const DynamicBitset& o) const {
    if (o.nbits_ != nbits_)
      throw std::invalid_argument("DynamicBitset: size mismatch");
  }

  int nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace commlab
