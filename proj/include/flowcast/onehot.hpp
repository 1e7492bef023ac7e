#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowcast/errors.hpp"
#include "flowcast/eventlog.hpp"

namespace flowcast {

struct NotInUniverse : Error {
  explicit NotInUniverse(std::string_view value)
      : Error("value '" + std::string(value) + "' is not in the universe") {}
};

// 1-based position of `value` in `universe`.
inline std::size_t codify(std::string_view value, std::span<const std::string> universe) {
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (universe[i] == value) return i + 1;
  throw NotInUniverse(value);
}

inline std::vector<double> onehot(std::string_view value, std::span<const std::string> universe) {
  std::vector<double> out(universe.size(), 0.0);
  out[codify(value, universe) - 1] = 1.0;
  return out;
}

inline std::vector<double> concat(std::span<const std::vector<double>> parts) {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.size();
  std::vector<double> out;
  out.reserve(n);
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
  return concat(std::span<const std::vector<double>>(parts.begin(), parts.size()));
}

// Ordered value list with O(1) lookup; the hashed form of a codify universe.
class Universe {
 public:
  Universe() = default;
  explicit Universe(std::vector<std::string> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) index_.emplace(values_[i], i);
  }

  // 0-based slot, or nullopt for values outside the universe.
  std::optional<std::size_t> slot(const std::string& value) const {
    auto it = index_.find(value);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& values() const { return values_; }
  const std::string& operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Universe& o) const { return values_ == o.values_; }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Per-attribute universes in `attname` order.
struct AttributeVocab {
  std::vector<std::string> names;
  std::vector<Universe> universes;

  std::size_t width() const {
    std::size_t w = 0;
    for (const auto& u : universes) w += u.size();
    return w;
  }
  bool operator==(const AttributeVocab&) const = default;
};

inline AttributeVocab global_vocab(const AttributeSchema& schema) {
  AttributeVocab v;
  for (const auto& name : schema.attributes) {
    v.names.push_back(name);
    auto it = schema.vocab.find(name);
    v.universes.emplace_back(it == schema.vocab.end() ? std::vector<std::string>{} : it->second);
  }
  return v;
}

using Buckets = std::map<std::string, std::vector<const Event*>>;

// Groups training events by activity. Pointers refer into `training_cases`.
inline Buckets bucket_events(const std::vector<Case>& training_cases) {
  Buckets buckets;
  for (const auto& c : training_cases)
    for (const auto& e : c.events) buckets[e.activity].push_back(&e);
  return buckets;
}

// Vocabulary of the selected attributes restricted to one bucket's events.
inline AttributeVocab bucket_vocab(std::span<const Event* const> bucket,
                                   std::span<const std::string> attributes) {
  AttributeVocab v;
  for (const auto& name : attributes) {
    std::set<std::string> values;
    for (const Event* e : bucket)
      if (auto it = e->attrs.find(name); it != e->attrs.end()) values.insert(it->second);
    v.names.push_back(name);
    v.universes.emplace_back(std::vector<std::string>(values.begin(), values.end()));
  }
  return v;
}

// Appends the positions (offset by `base`) of the active one-hot slots for
// every attribute of `e`. Missing or unseen values contribute nothing.
inline void append_attribute_slots(const Event& e, const AttributeVocab& vocab, std::size_t base,
                                   std::vector<std::size_t>& out) {
  std::size_t offset = base;
  for (std::size_t a = 0; a < vocab.names.size(); ++a) {
    if (auto it = e.attrs.find(vocab.names[a]); it != e.attrs.end())
      if (auto s = vocab.universes[a].slot(it->second)) out.push_back(offset + *s);
    offset += vocab.universes[a].size();
  }
}

inline std::vector<double> attr_vector(const Event& e, const AttributeVocab& vocab) {
  std::vector<double> out(vocab.width(), 0.0);
  std::vector<std::size_t> slots;
  append_attribute_slots(e, vocab, 0, slots);
  for (auto s : slots) out[s] = 1.0;
  return out;
}

}  // namespace flowcast
