#include "safe/ids.hpp"

namespace safe {

namespace {

bool label_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' || c == '-';
}

// Empty string on success, otherwise the violated rule.
std::string check_label(std::string_view label) {
  if (label.empty()) return "is empty";
  if (label.size() > 63) return "exceeds 63 characters";
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (!label_char(label[i])) {
      return "has invalid character at position " + std::to_string(i) +
             " (allowed: [a-z0-9.-])";
    }
  }
  if (label.front() == '.' || label.front() == '-') return "starts with '.' or '-'";
  if (label.back() == '.' || label.back() == '-') return "ends with '.' or '-'";
  return {};
}

// Shared grammar for apid/apni/ds: <scheme>:<label>:<label>.
Result<std::string> parse_two_label(std::string_view text, std::string_view scheme,
                                    std::string_view first_name,
                                    std::string_view second_name) {
  const std::string prefix = std::string(scheme) + ":";
  if (text.substr(0, prefix.size()) != prefix) {
    return Result<std::string>::failure(
        "BadScheme", "expected '" + prefix + "' prefix (case-sensitive)");
  }
  const std::string_view rest = text.substr(prefix.size());
  const std::size_t sep = rest.find(':');
  if (sep == std::string_view::npos) {
    return Result<std::string>::failure(
        "BadLabel", std::string(second_name) + " is missing (expected '" +
                        std::string(scheme) + ":<" + std::string(first_name) + ">:<" +
                        std::string(second_name) + ">')");
  }
  const std::string_view first = rest.substr(0, sep);
  const std::string_view second = rest.substr(sep + 1);
  if (std::string why = check_label(first); !why.empty()) {
    return Result<std::string>::failure("BadLabel",
                                        std::string(first_name) + " " + why);
  }
  if (std::string why = check_label(second); !why.empty()) {
    return Result<std::string>::failure("BadLabel",
                                        std::string(second_name) + " " + why);
  }
  return std::string(text);
}

}  // namespace

Result<Apid> parse_apid(std::string_view text) {
  auto r = parse_two_label(text, "apid", "org-label", "platform-label");
  if (!r.ok()) return r.error();
  return Apid{std::move(r).value()};
}

Result<Apni> parse_apni(std::string_view text) {
  auto r = parse_two_label(text, "apni", "org-label", "network-label");
  if (!r.ok()) return r.error();
  return Apni{std::move(r).value()};
}

Result<DatasetId> parse_dataset_id(std::string_view text) {
  auto r = parse_two_label(text, "ds", "org-label", "dataset-label");
  if (!r.ok()) return r.error();
  return DatasetId{std::move(r).value()};
}

Result<Arid> parse_arid(std::string_view text) {
  if (text.substr(0, 5) != "arid:") {
    return Result<Arid>::failure("BadScheme", "expected 'arid:' prefix (case-sensitive)");
  }
  if (text == "arid:global") return Arid{std::string(text)};
  const std::string_view rest = text.substr(5);
  constexpr std::string_view kIso = "iso3166:";
  if (rest.substr(0, kIso.size()) != kIso) {
    return Result<Arid>::failure(
        "BadCountryCode", "expected 'arid:global' or 'arid:iso3166:<CC>'");
  }
  const std::string_view cc = rest.substr(kIso.size());
  if (cc.size() != 2 || cc[0] < 'A' || cc[0] > 'Z' || cc[1] < 'A' || cc[1] > 'Z') {
    return Result<Arid>::failure("BadCountryCode",
                                 "country code must be two uppercase letters");
  }
  return Arid{std::string(text)};
}

}  // namespace safe
