#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "safe/ids.hpp"
#include "safe/timestamp.hpp"

using namespace safe;

TEST_CASE("apid grammar") {
  CHECK(parse_apid("apid:nih.nci:gdc").ok());
  CHECK(parse_apid("apid:nih.nci:gdc").value().value == "apid:nih.nci:gdc");
  CHECK(parse_apid("apid:a:b").ok());
  CHECK(parse_apid("apid:a-1.x:y-2").ok());

  CHECK(parse_apid("apid::x").error().code == "BadLabel");
  CHECK(parse_apid("apid::x").error().detail == "org-label is empty");
  CHECK(parse_apid("APID:a:b").error().code == "BadScheme");
  CHECK(parse_apid("apni:a:b").error().code == "BadScheme");
  CHECK(parse_apid("apid:a:").error().code == "BadLabel");
  CHECK(parse_apid("apid:a").error().code == "BadLabel");
  CHECK(parse_apid("apid:-a:b").error().code == "BadLabel");
  CHECK(parse_apid("apid:a-:b").error().code == "BadLabel");
  CHECK(parse_apid("apid:a:b.").error().code == "BadLabel");
  CHECK(parse_apid("apid:A:b").error().code == "BadLabel");
  CHECK(parse_apid("apid:a:b c").error().code == "BadLabel");
  CHECK(parse_apid(std::string("apid:") + std::string(64, 'a') + ":b").error().code ==
        "BadLabel");
  CHECK(parse_apid(std::string("apid:") + std::string(63, 'a') + ":b").ok());
  // A colon inside the second label is an invalid character, not a separator.
  CHECK(parse_apid("apid:a:b:c").error().code == "BadLabel");
}

TEST_CASE("apni grammar") {
  CHECK(parse_apni("apni:ncpi:main").ok());
  CHECK(parse_apni("apni:ncpi:").error().code == "BadLabel");
  CHECK(parse_apni("apid:ncpi:main").error().code == "BadScheme");
}

TEST_CASE("arid grammar") {
  CHECK(parse_arid("arid:iso3166:US").ok());
  CHECK(parse_arid("arid:global").ok());
  CHECK(parse_arid("arid:global").value().is_global());
  CHECK_FALSE(parse_arid("arid:iso3166:US").value().is_global());

  CHECK(parse_arid("arid:iso3166:usa").error().code == "BadCountryCode");
  CHECK(parse_arid("arid:iso3166:us").error().code == "BadCountryCode");
  CHECK(parse_arid("arid:iso3166:U1").error().code == "BadCountryCode");
  CHECK(parse_arid("arid:europe").error().code == "BadCountryCode");
  CHECK(parse_arid("ARID:global").error().code == "BadScheme");
  CHECK(parse_arid("apid:iso3166:US").error().code == "BadScheme");
}

TEST_CASE("dataset id grammar") {
  CHECK(parse_dataset_id("ds:nih.nci:tcga-x").ok());
  CHECK(parse_dataset_id("ds::x").error().code == "BadLabel");
  CHECK(parse_dataset_id("data:a:b").error().code == "BadScheme");
}

TEST_CASE("round trip: render(parse(s)) == s for valid identifiers") {
  for (const char* s : {"apid:nih.nci:gdc", "apid:a:b", "apid:x-1.y:z.9"}) {
    CHECK(parse_apid(s).value().value == s);
  }
  for (const char* s : {"arid:global", "arid:iso3166:DE"}) {
    CHECK(parse_arid(s).value().value == s);
  }
  for (const char* s : {"2024-01-22T00:00:00Z", "1999-12-31T23:59:59Z",
                        "2024-02-29T12:00:00Z"}) {
    CHECK(render_timestamp(parse_timestamp(s).value()) == s);
  }
}

TEST_CASE("parser totality on arbitrary bytes up to 1 KiB") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len_dist(0, 1024);
  std::uniform_int_distribution<int> byte_dist(0, 255);
  for (int i = 0; i < 5000; ++i) {
    std::string s(static_cast<std::size_t>(len_dist(rng)), '\0');
    for (char& c : s) c = static_cast<char>(byte_dist(rng));
    // Must return ok or a structured error; never crash.
    auto a = parse_apid(s);
    if (!a.ok()) CHECK_FALSE(a.error().code.empty());
    auto n = parse_apni(s);
    if (!n.ok()) CHECK_FALSE(n.error().code.empty());
    auto r = parse_arid(s);
    if (!r.ok()) CHECK_FALSE(r.error().code.empty());
    auto t = parse_timestamp(s);
    if (!t.ok()) CHECK_FALSE(t.error().code.empty());
  }
}

TEST_CASE("timestamp parsing and arithmetic") {
  CHECK(parse_timestamp("2024-01-22T00:00:00Z").ok());
  CHECK(parse_timestamp("2024-01-22T00:00:00").error().code == "BadTimestamp");
  CHECK(parse_timestamp("2024-01-22 00:00:00Z").error().code == "BadTimestamp");
  CHECK(parse_timestamp("2024-13-01T00:00:00Z").error().code == "BadTimestamp");
  CHECK(parse_timestamp("2024-02-30T00:00:00Z").error().code == "BadTimestamp");
  CHECK(parse_timestamp("2023-02-29T00:00:00Z").error().code == "BadTimestamp");
  CHECK(parse_timestamp("2024-01-22T24:00:00Z").error().code == "BadTimestamp");
  CHECK(parse_timestamp("2024-01-22T00:00:00.5etc").error().code == "BadTimestamp");

  const Timestamp a = parse_timestamp("2024-01-01T00:00:00Z").value();
  const Timestamp b = parse_timestamp("2025-01-01T00:00:00Z").value();
  CHECK(b.seconds_since(a) == 366 * kSecondsPerDay);  // 2024 is a leap year
  CHECK(a < b);
  CHECK(a.plus_seconds(366 * kSecondsPerDay) == b);

  // Chronological order equals lexicographic order of the rendered form.
  CHECK(render_timestamp(a) < render_timestamp(b));
}
