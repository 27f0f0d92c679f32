#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "dsq/error.hpp"

namespace dsq {

/// Per-user object weights. Unset entries read as 0.
class ProfileStore {
 public:
  using Key = std::pair<std::string, std::string>;  // (user, object)

  void put(const std::string& user, const std::string& object, std::int64_t weight) {
    if (weight < 0)
      throw Error(ErrorKind::NegativeWeight,
                  "weight for " + object + " must be >= 0, got " + std::to_string(weight));
    weights_[{user, object}] = weight;
  }

  std::int64_t get(const std::string& user, const std::string& object) const {
    auto it = weights_.find({user, object});
    return it == weights_.end() ? 0 : it->second;
  }

  const std::map<Key, std::int64_t>& entries() const { return weights_; }
  bool empty() const { return weights_.empty(); }

  friend bool operator==(const ProfileStore&, const ProfileStore&) = default;

 private:
  std::map<Key, std::int64_t> weights_;
};

}  // namespace dsq
