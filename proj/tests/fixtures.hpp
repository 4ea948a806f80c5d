#pragma once

// Shared governance fixture used across the test suites:
//   - gdc (US) and anvil (US) in apni:ncpi:main with active ATOs
//   - platform-c (CA) registered but in no network, no ATO
//   - dataset ds:nih.nci:tcga-x authorized for ncpi:main, RTD held by gdc
//   - alice authorized for one year from 2025-01-01
// Keys are derived from a fixed seed so signatures are bit-stable.

#include <memory>
#include <string>

#include "safe/attestation.hpp"
#include "safe/crypto.hpp"
#include "safe/governance.hpp"
#include "safe/model.hpp"
#include "safe/policy.hpp"

namespace safe::test {

inline Timestamp ts(const std::string& text) {
  auto r = parse_timestamp(text);
  if (!r.ok()) throw std::runtime_error("fixture timestamp: " + text);
  return r.value();
}

inline const char* kGdc = "apid:nih.nci:gdc";
inline const char* kAnvil = "apid:nhgri:anvil";
inline const char* kPlatformC = "apid:demo:platform-c";
inline const char* kNetwork = "apni:ncpi:main";
inline const char* kDataset = "ds:nih.nci:tcga-x";
inline const char* kUser = "u:alice";
inline const char* kAuth = "auth:alice:tcga-x";
inline const char* kFramework = "NIST-SP-800-53-Moderate";

struct Fixture {
  std::shared_ptr<GovernanceStore> store;
  KeyPair authority_key;
  KeyPair gdc_key;
  KeyPair anvil_key;
  KeyPair c_key;
  Timestamp t0 = ts("2025-01-01T00:00:00Z");
  Timestamp t_query = ts("2025-06-01T00:00:00Z");
  Timestamp ato_valid_until = ts("2027-01-01T00:00:00Z");
  Timestamp auth_expires = ts("2026-01-01T00:00:00Z");
};

inline PlatformRecord platform_record(const char* apid, const char* region,
                                      const std::string& name) {
  PlatformRecord rec;
  rec.apid = Apid{apid};
  rec.display_name = name;
  rec.region = Arid{region};
  rec.public_key_id = "ed25519:fixture";
  rec.operator_name = "Fixture Operator";
  return rec;
}

inline void must(const Status& s, const char* what) {
  if (!s.ok()) {
    throw std::runtime_error(std::string(what) + ": " + s.error().code + " " +
                             s.error().detail);
  }
}

inline Fixture make_fixture(bool grant_rtd_to_gdc = true) {
  Fixture f;
  SeededEntropy entropy(42);
  f.authority_key = generate_keypair(entropy);
  f.gdc_key = generate_keypair(entropy);
  f.anvil_key = generate_keypair(entropy);
  f.c_key = generate_keypair(entropy);

  f.store = std::make_shared<GovernanceStore>();
  GovernanceStore& store = *f.store;
  const std::string actor = "fixture";

  must(store.register_platform(platform_record(kGdc, "arid:iso3166:US", "Genomic Data Commons"),
                               actor, f.t0),
       "register gdc");
  must(store.register_platform(platform_record(kAnvil, "arid:iso3166:US", "AnVIL"), actor,
                               f.t0),
       "register anvil");
  must(store.register_platform(platform_record(kPlatformC, "arid:iso3166:CA", "Platform C"),
                               actor, f.t0),
       "register platform-c");

  NetworkRecord network;
  network.apni = Apni{kNetwork};
  network.authority_name = "NCPI Coordination";
  network.framework_id = kFramework;
  network.authority_public_key.assign(f.authority_key.public_key.begin(),
                                      f.authority_key.public_key.end());
  network.members = {Apid{kGdc}, Apid{kAnvil}};
  must(store.create_network(std::move(network), actor, f.t0), "create network");

  for (const char* apid : {kGdc, kAnvil}) {
    must(store.submit_assessment(Apid{apid}, kFramework, actor, f.t0), "submit");
    must(store.record_independent_assessment(Apid{apid}, actor, f.t0), "independent");
    must(store.issue_ato(Apid{apid}, f.ato_valid_until, actor, f.t0), "issue");
  }

  DatasetSafeMetadata meta;
  meta.dataset_id = DatasetId{kDataset};
  meta.sponsor = "NCI";
  meta.authorized_networks = {Apni{kNetwork}};
  must(store.register_dataset(std::move(meta), actor, f.t0), "register dataset");
  if (grant_rtd_to_gdc) {
    must(store.grant_right_to_distribute(DatasetId{kDataset}, Apid{kGdc}, actor, f.t0),
         "grant rtd");
  }

  UserAuthorization auth;
  auth.authorization_id = kAuth;
  auth.user_id = kUser;
  auth.dataset_id = DatasetId{kDataset};
  auth.granted_at = f.t0;
  auth.expires_at = f.auth_expires;
  must(store.authorize_user(std::move(auth), actor, f.t0), "authorize alice");

  return f;
}

inline VerifiedIdentity anvil_identity(const Fixture& f) {
  VerifiedIdentity identity;
  identity.apid = Apid{kAnvil};
  identity.apnis = {Apni{kNetwork}};
  identity.region = Arid{"arid:iso3166:US"};
  identity.verified_at = f.t_query;
  return identity;
}

inline TransferQuery happy_query(const Fixture& f) {
  TransferQuery query;
  query.dataset_id = DatasetId{kDataset};
  query.source_apid = Apid{kGdc};
  query.dest_apid = Apid{kAnvil};
  query.user_id = kUser;
  query.authorization_id = kAuth;
  query.now = f.t_query;
  query.verified_attestation = anvil_identity(f);
  return query;
}

// A fully valid envelope for anvil under the fixture authority.
inline SignedEnvelope make_anvil_envelope(const Fixture& f, const std::string& nonce,
                                          Timestamp issued_at) {
  auto cert = issue_certificate(f.authority_key, Apid{kAnvil}, f.anvil_key.public_key,
                                Apni{kNetwork}, f.t0, ts("2026-01-01T00:00:00Z"));
  AttestationDocument doc;
  doc.apid = Apid{kAnvil};
  doc.apni_memberships = {Apni{kNetwork}};
  doc.framework_id = kFramework;
  doc.region = Arid{"arid:iso3166:US"};
  doc.nonce = nonce;
  doc.issued_at = issued_at;
  auto env = sign_attestation(f.anvil_key, doc, cert.value());
  return env.value();
}

inline TrustAnchorSet fixture_anchors(const Fixture& f) {
  return trust_anchors_from_view(f.store->snapshot());
}

}  // namespace safe::test
