#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace flowcast {

// mt19937_64 is fully specified by the standard; the helpers below avoid the
// implementation-defined std distributions so runs reproduce across toolchains.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt) {
  return splitmix64(root ^ splitmix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view salt) {
  return derive_seed(root, fnv1a(salt));
}

template <typename... Salts>
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t first, std::uint64_t second, Salts... rest) {
  return derive_seed(derive_seed(root, first), second, rest...);
}

// Uniform in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform in [0, n), unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// Uniform sample of `cap` elements without replacement; the input is returned
// unchanged when it already fits. Selected elements keep their input order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t cap, std::uint64_t seed) {
  if (items.size() <= cap) return items;
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  out.reserve(cap);
  for (auto i : idx) out.push_back(std::move(items[i]));
  return out;
}

}  // namespace flowcast
