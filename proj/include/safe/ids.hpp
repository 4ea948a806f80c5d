#pragma once

#include <compare>
#include <string>
#include <string_view>

#include "safe/result.hpp"

namespace safe {

// SAFE identifiers. Each wraps its full rendered form; equality is
// case-sensitive byte equality and render(parse(s)) == s for every valid s.
//
//   apid:<org-label>:<platform-label>   platform
//   apni:<org-label>:<network-label>    platform network
//   arid:iso3166:<CC> | arid:global     region (global is a wildcard)
//   ds:<org-label>:<dataset-label>      dataset
//
// Labels are 1-63 chars of [a-z0-9.-] with no leading/trailing '.' or '-'.

struct Apid {
  std::string value;
  auto operator<=>(const Apid&) const = default;
};

struct Apni {
  std::string value;
  auto operator<=>(const Apni&) const = default;
};

struct Arid {
  std::string value;
  auto operator<=>(const Arid&) const = default;
  bool is_global() const { return value == "arid:global"; }
};

struct DatasetId {
  std::string value;
  auto operator<=>(const DatasetId&) const = default;
};

// Errors: BadScheme, BadLabel (detail names the label and the violated rule).
Result<Apid> parse_apid(std::string_view text);
Result<Apni> parse_apni(std::string_view text);
Result<DatasetId> parse_dataset_id(std::string_view text);

// Errors: BadScheme, BadCountryCode.
Result<Arid> parse_arid(std::string_view text);

}  // namespace safe
