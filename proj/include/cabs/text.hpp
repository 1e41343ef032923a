#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cabs_eval {

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);

/// Lowercases, maps every non-alphanumeric byte to a separator and splits.
/// "Ground-glass, patchy" -> {"ground", "glass", "patchy"}.
std::vector<std::string> word_tokens(std::string_view s);

/// Space-joined word_tokens(); the normal form used for name comparison.
std::string normalize_phrase(std::string_view s);

bool is_stopword(std::string_view token);

/// True if `phrase` occurs in `text` at word boundaries (both already lowercased).
bool contains_phrase(std::string_view text, std::string_view phrase);

/// Deterministic generator: mt19937_64 has a fixed output sequence across
/// platforms; the draw helpers avoid std::*_distribution, which does not.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);

  /// Uniform double in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index so sub-generators are independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cabs_eval
