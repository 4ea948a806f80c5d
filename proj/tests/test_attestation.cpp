#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "safe/canonical.hpp"

using namespace safe;
using namespace safe::test;
using nlohmann::json;

namespace {

const std::string kNonce = "00112233445566778899aabbccddeeff";

SignedEnvelope fixture_envelope(const Fixture& f) {
  return make_anvil_envelope(f, kNonce, f.t_query);
}

}  // namespace

TEST_CASE("nonce generation") {
  SeededEntropy a(1), b(1), c(2);
  const std::string n1 = generate_nonce(a);
  CHECK(n1 == generate_nonce(b));  // same seed, same nonce
  CHECK(n1 != generate_nonce(c));
  CHECK(n1.size() == 32);
  for (const char ch : n1) {
    CHECK(((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f')));
  }

  SystemEntropy sys;
  std::set<std::string> seen;
  for (int i = 0; i < 10000; ++i) {
    CHECK(seen.insert(generate_nonce(sys)).second);
  }
}

TEST_CASE("sign and verify round trip") {
  SeededEntropy entropy(3);
  const KeyPair key = generate_keypair(entropy);
  const Signature sig = ed25519_sign(key, "payload");
  CHECK(ed25519_verify(key.public_key, "payload", sig));
  CHECK_FALSE(ed25519_verify(key.public_key, "payloaf", sig));
  const KeyPair other = generate_keypair(entropy);
  CHECK_FALSE(ed25519_verify(other.public_key, "payload", sig));
}

TEST_CASE("certificate issuance") {
  Fixture f = make_fixture();
  auto cert = issue_certificate(f.authority_key, Apid{kAnvil}, f.anvil_key.public_key,
                                Apni{kNetwork}, f.t0, ts("2026-01-01T00:00:00Z"));
  REQUIRE(cert.ok());
  CHECK(ed25519_verify(f.authority_key.public_key,
                       certificate_signing_bytes(cert.value()),
                       cert.value().authority_signature));

  // A different network's anchor does not verify it.
  SeededEntropy entropy(9);
  const KeyPair other_authority = generate_keypair(entropy);
  CHECK_FALSE(ed25519_verify(other_authority.public_key,
                             certificate_signing_bytes(cert.value()),
                             cert.value().authority_signature));

  CHECK(issue_certificate(f.authority_key, Apid{kAnvil}, f.anvil_key.public_key,
                          Apni{kNetwork}, f.t0, f.t0)
            .error()
            .code == "BadInterval");
}

TEST_CASE("sign_attestation requires matching apid") {
  Fixture f = make_fixture();
  auto cert = issue_certificate(f.authority_key, Apid{kAnvil}, f.anvil_key.public_key,
                                Apni{kNetwork}, f.t0, ts("2026-01-01T00:00:00Z"));
  AttestationDocument doc;
  doc.apid = Apid{kGdc};
  doc.apni_memberships = {Apni{kNetwork}};
  doc.framework_id = kFramework;
  doc.region = Arid{"arid:iso3166:US"};
  doc.nonce = kNonce;
  doc.issued_at = f.t_query;
  CHECK(sign_attestation(f.gdc_key, doc, cert.value()).error().code == "ApidMismatch");
}

TEST_CASE("verify_envelope success and per-condition failures") {
  Fixture f = make_fixture();
  const TrustAnchorSet anchors = fixture_anchors(f);
  const SignedEnvelope env = fixture_envelope(f);

  auto ok = verify_envelope(env, anchors, kNonce, f.t_query, 300);
  REQUIRE(ok.ok());
  CHECK(ok.value().apid == Apid{kAnvil});
  CHECK(ok.value().apnis == std::set<Apni>{Apni{kNetwork}});
  CHECK(ok.value().region == Arid{"arid:iso3166:US"});
  CHECK(ok.value().verified_at == f.t_query);

  SUBCASE("unknown anchor") {
    TrustAnchorSet empty;
    CHECK(verify_envelope(env, empty, kNonce, f.t_query, 300).error().code ==
          "UnknownAnchor");
  }
  SUBCASE("expired certificate") {
    CHECK(verify_envelope(env, anchors, kNonce, ts("2026-01-01T00:00:00Z"), 300)
              .error()
              .code == "CertificateExpired");
  }
  SUBCASE("certificate signed by the wrong authority") {
    SignedEnvelope forged = env;
    SeededEntropy entropy(13);
    const KeyPair rogue = generate_keypair(entropy);
    auto cert = issue_certificate(rogue, Apid{kAnvil}, f.anvil_key.public_key,
                                  Apni{kNetwork}, f.t0, ts("2026-01-01T00:00:00Z"));
    forged.certificate = cert.value();
    CHECK(verify_envelope(forged, anchors, kNonce, f.t_query, 300).error().code ==
          "BadCertificateSignature");
  }
  SUBCASE("payload tampered after signing") {
    SignedEnvelope tampered = env;
    tampered.payload.framework_id = "NIST-SP-800-171";
    CHECK(verify_envelope(tampered, anchors, kNonce, f.t_query, 300).error().code ==
          "BadEnvelopeSignature");
  }
  SUBCASE("apid mismatch between payload and certificate") {
    // Certificate for gdc, payload for anvil, both correctly signed with the
    // same platform key.
    auto gdc_cert = issue_certificate(f.authority_key, Apid{kGdc},
                                      f.anvil_key.public_key, Apni{kNetwork}, f.t0,
                                      ts("2026-01-01T00:00:00Z"));
    SignedEnvelope crossed = env;
    crossed.certificate = gdc_cert.value();
    CHECK(verify_envelope(crossed, anchors, kNonce, f.t_query, 300).error().code ==
          "ApidMismatch");
  }
  SUBCASE("nonce replay") {
    CHECK(verify_envelope(env, anchors, "ffffffffffffffffffffffffffffffff", f.t_query,
                          300)
              .error()
              .code == "NonceMismatch");
  }
  SUBCASE("freshness window boundary is inclusive") {
    CHECK(verify_envelope(env, anchors, kNonce, f.t_query.plus_seconds(300), 300).ok());
    CHECK(verify_envelope(env, anchors, kNonce, f.t_query.plus_seconds(301), 300)
              .error()
              .code == "StaleAttestation");
    // Future-dated attestations are bounded by the same window.
    CHECK(verify_envelope(env, anchors, kNonce, f.t_query.plus_seconds(-300), 300).ok());
    CHECK(verify_envelope(env, anchors, kNonce, f.t_query.plus_seconds(-301), 300)
              .error()
              .code == "StaleAttestation");
  }
}

TEST_CASE("verified identity only carries certified memberships") {
  Fixture f = make_fixture();
  // Payload claims a membership the certificate does not certify.
  auto cert = issue_certificate(f.authority_key, Apid{kAnvil}, f.anvil_key.public_key,
                                Apni{kNetwork}, f.t0, ts("2026-01-01T00:00:00Z"));
  AttestationDocument doc;
  doc.apid = Apid{kAnvil};
  doc.apni_memberships = {Apni{"apni:other:net"}};
  doc.framework_id = kFramework;
  doc.region = Arid{"arid:iso3166:US"};
  doc.nonce = kNonce;
  doc.issued_at = f.t_query;
  auto env = sign_attestation(f.anvil_key, doc, cert.value());
  auto verified = verify_envelope(env.value(), fixture_anchors(f), kNonce, f.t_query, 300);
  REQUIRE(verified.ok());
  CHECK(verified.value().apnis.empty());
}

TEST_CASE("envelope wire form round trip and strictness") {
  Fixture f = make_fixture();
  const SignedEnvelope env = fixture_envelope(f);
  const json wire = to_json(env);
  auto parsed = envelope_from_json(wire);
  REQUIRE(parsed.ok());
  CHECK(parsed.value() == env);
  CHECK(must_canonical(to_json(parsed.value())) == must_canonical(wire));

  json extra = wire;
  extra["note"] = "x";
  CHECK_FALSE(envelope_from_json(extra).ok());

  json missing = wire;
  missing.erase("signature");
  CHECK_FALSE(envelope_from_json(missing).ok());

  json unsorted = wire;
  unsorted["payload"]["apni_memberships"] = json::array({kNetwork, kNetwork});
  CHECK_FALSE(envelope_from_json(unsorted).ok());

  json bad_hex = wire;
  bad_hex["signature"] = std::string(128, 'G');
  CHECK_FALSE(envelope_from_json(bad_hex).ok());
}

TEST_CASE("single-byte mutations of the wire form never verify") {
  Fixture f = make_fixture();
  const TrustAnchorSet anchors = fixture_anchors(f);
  const std::string wire = must_canonical(to_json(fixture_envelope(f)));

  // Sample every 7th byte here; the acceptance suite sweeps every position.
  int rejected = 0, total = 0;
  for (std::size_t i = 0; i < wire.size(); i += 7) {
    std::string mutated = wire;
    mutated[i] = static_cast<char>(mutated[i] ^ 0x01);
    ++total;
    const json parsed = json::parse(mutated, nullptr, false);
    if (parsed.is_discarded()) {
      ++rejected;
      continue;
    }
    auto env = envelope_from_json(parsed);
    if (!env.ok()) {
      ++rejected;
      continue;
    }
    if (!verify_envelope(env.value(), anchors, kNonce, f.t_query, 300).ok()) ++rejected;
  }
  CHECK(rejected == total);
}

TEST_CASE("golden envelope bytes") {
  Fixture f = make_fixture();
  const std::string wire = must_canonical(to_json(fixture_envelope(f)));
  const std::string path = std::string(SAFE_SOURCE_DIR) + "/tests/golden/envelope.json";
  if (std::getenv("SAFE_REGEN_GOLDEN")) {
    std::ofstream out(path, std::ios::binary);
    out << wire << '\n';
  }
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream buffer;
  buffer << in.rdbuf();
  CHECK(buffer.str() == wire + "\n");
}
