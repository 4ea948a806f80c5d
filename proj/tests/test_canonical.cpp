#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "docgen.hpp"
#include "safe/canonical.hpp"

using namespace safe;
using nlohmann::json;
using nlohmann::ordered_json;

TEST_CASE("object keys sorted by byte order") {
  ordered_json j;
  j["b"] = 1;
  j["a"] = 2;
  CHECK(canonical_bytes(j).value() == R"({"a":2,"b":1})");

  ordered_json nested;
  nested["z"] = ordered_json{{"y", 1}, {"x", 2}};
  nested["a"] = ordered_json::array({ordered_json{{"q", true}, {"p", false}}});
  CHECK(canonical_bytes(nested).value() == R"({"a":[{"p":false,"q":true}],"z":{"x":2,"y":1}})");
}

TEST_CASE("integers in shortest decimal form") {
  json j;
  j["i"] = -42;
  j["u"] = 18446744073709551615ULL;
  j["z"] = 0;
  CHECK(canonical_bytes(j).value() == R"({"i":-42,"u":18446744073709551615,"z":0})");
}

TEST_CASE("minimal string escaping") {
  json j = std::string("a\"b\\c\n\t\x01 é");
  CHECK(canonical_bytes(j).value() == "\"a\\\"b\\\\c\\n\\t\\u0001 é\"");
  // Printable ASCII and non-ASCII UTF-8 pass through raw.
  CHECK(canonical_bytes(json("hello ~ world")).value() == "\"hello ~ world\"");
}

TEST_CASE("floats and nulls are rejected") {
  json with_float;
  with_float["x"] = 1.5;
  CHECK(canonical_bytes(with_float).error().code == "UnsupportedValue");
  json with_null;
  with_null["x"] = nullptr;
  CHECK(canonical_bytes(with_null).error().code == "UnsupportedValue");
  CHECK(canonical_bytes(json(2.0)).error().code == "UnsupportedValue");
}

TEST_CASE("fixpoint and key-order independence (generative)") {
  using namespace safe::test;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const json doc = random_document(rng, 3);
    const auto canon = canonical_bytes(doc);
    REQUIRE(canon.ok());

    // serialize-parse-serialize fixpoint
    const json reparsed = json::parse(canon.value());
    CHECK(canonical_bytes(reparsed).value() == canon.value());

    // identical values with different insertion order yield identical bytes
    const ordered_json shuffled = shuffled_copy(doc, rng);
    CHECK(canonical_bytes(shuffled).value() == canon.value());
  }
}
