#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe/result.hpp"

namespace safe {

// Canonical JSON: the byte form every signature and hash in this project is
// computed over. Rules:
//   - UTF-8, no insignificant whitespace
//   - object keys sorted by byte order
//   - integers only, shortest decimal form (floats are rejected)
//   - strings escape only '"', '\' and control chars; no \uXXXX for
//     printable ASCII; non-ASCII UTF-8 passes through raw
//   - supported values: string, integer, boolean, array, string-keyed object
// Equal values yield equal bytes regardless of construction order.

namespace canonical_detail {

inline void escape_string(const std::string& s, std::string& out) {
  out.push_back('"');
  for (const char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case 0x08: out += "\\b"; break;
      case 0x09: out += "\\t"; break;
      case 0x0a: out += "\\n"; break;
      case 0x0c: out += "\\f"; break;
      case 0x0d: out += "\\r"; break;
      default:
        if (c < 0x20) {
          static constexpr char kHex[] = "0123456789abcdef";
          out += "\\u00";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xf]);
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
}

template <typename JsonT>
bool emit(const JsonT& v, std::string& out, Error& err) {
  using value_t = nlohmann::detail::value_t;
  switch (v.type()) {
    case value_t::boolean:
      out += v.template get<bool>() ? "true" : "false";
      return true;
    case value_t::number_integer:
      out += std::to_string(v.template get<std::int64_t>());
      return true;
    case value_t::number_unsigned:
      out += std::to_string(v.template get<std::uint64_t>());
      return true;
    case value_t::string:
      escape_string(v.template get_ref<const std::string&>(), out);
      return true;
    case value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : v) {
        if (!first) out.push_back(',');
        first = false;
        if (!emit(item, out, err)) return false;
      }
      out.push_back(']');
      return true;
    }
    case value_t::object: {
      std::vector<std::pair<std::string, const JsonT*>> entries;
      entries.reserve(v.size());
      for (auto it = v.begin(); it != v.end(); ++it) {
        entries.emplace_back(it.key(), &it.value());
      }
      std::sort(entries.begin(), entries.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      out.push_back('{');
      bool first = true;
      for (const auto& [key, child] : entries) {
        if (!first) out.push_back(',');
        first = false;
        escape_string(key, out);
        out.push_back(':');
        if (!emit(*child, out, err)) return false;
      }
      out.push_back('}');
      return true;
    }
    case value_t::number_float:
      err = {"UnsupportedValue", "floating point is forbidden in canonical documents"};
      return false;
    case value_t::null:
      err = {"UnsupportedValue", "null is forbidden in canonical documents"};
      return false;
    default:
      err = {"UnsupportedValue", "unsupported JSON value type"};
      return false;
  }
}

}  // namespace canonical_detail

template <typename JsonT>
Result<std::string> canonical_bytes(const JsonT& doc) {
  std::string out;
  Error err;
  if (!canonical_detail::emit(doc, out, err)) return err;
  return out;
}

// For documents built by this codebase, which never contain floats or nulls.
template <typename JsonT>
std::string must_canonical(const JsonT& doc) {
  auto r = canonical_bytes(doc);
  if (!r.ok()) throw std::logic_error("canonical_bytes: " + r.error().detail);
  return std::move(r).value();
}

}  // namespace safe
