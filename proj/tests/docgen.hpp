#pragma once

// Random generator for canonical-safe JSON documents (strings, int64s,
// booleans, arrays, string-keyed objects) plus an insertion-order shuffler,
// shared by the canonicalization tests and the acceptance suite.

#include <algorithm>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace safe::test {

inline nlohmann::json random_document(std::mt19937_64& rng, int depth) {
  using nlohmann::json;
  std::uniform_int_distribution<int> kind_dist(0, depth > 0 ? 4 : 2);
  std::uniform_int_distribution<int> len_dist(0, 5);
  std::uniform_int_distribution<std::int64_t> int_dist(
      std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max());
  const auto random_string = [&rng]() {
    static const std::vector<std::string> pieces = {
        "a", "Z", "0", "\"", "\\", "\n", "\t", "\x01", "\x1f", "~", " ",
        "é", "日", "-", ":", "{", "}", "[", "]", std::string(1, '\0')};
    std::uniform_int_distribution<int> n_dist(0, 8);
    std::uniform_int_distribution<std::size_t> piece_dist(0, pieces.size() - 1);
    std::string out;
    const int n = n_dist(rng);
    for (int i = 0; i < n; ++i) out += pieces[piece_dist(rng)];
    return out;
  };
  switch (kind_dist(rng)) {
    case 0: return json(random_string());
    case 1: return json(int_dist(rng));
    case 2: return json(int_dist(rng) % 2 == 0);
    case 3: {
      json arr = json::array();
      const int n = len_dist(rng);
      for (int i = 0; i < n; ++i) arr.push_back(random_document(rng, depth - 1));
      return arr;
    }
    default: {
      json obj = json::object();
      const int n = len_dist(rng);
      for (int i = 0; i < n; ++i) {
        obj[random_string() + std::to_string(i)] = random_document(rng, depth - 1);
      }
      return obj;
    }
  }
}

// Same value, object keys inserted in a shuffled order.
inline nlohmann::ordered_json shuffled_copy(const nlohmann::json& j,
                                            std::mt19937_64& rng) {
  using nlohmann::ordered_json;
  if (j.is_object()) {
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    std::shuffle(keys.begin(), keys.end(), rng);
    ordered_json out = ordered_json::object();
    for (const std::string& key : keys) out[key] = shuffled_copy(j.at(key), rng);
    return out;
  }
  if (j.is_array()) {
    ordered_json out = ordered_json::array();
    for (const nlohmann::json& item : j) out.push_back(shuffled_copy(item, rng));
    return out;
  }
  return ordered_json(j);
}

}  // namespace safe::test
