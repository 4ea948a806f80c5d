#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "safe/canonical.hpp"
#include "safe/crypto.hpp"

using namespace safe;
using namespace safe::test;
using nlohmann::json;

TEST_CASE("platform registration") {
  GovernanceStore store;
  const Timestamp t0 = ts("2025-01-01T00:00:00Z");
  CHECK(store.register_platform(platform_record(kGdc, "arid:iso3166:US", "GDC"), "a", t0)
            .ok());
  // ATO record is initialized alongside the platform.
  CHECK(compute_ato_status(store.snapshot().atos.at(Apid{kGdc}), t0) ==
        AtoStatus::NotAuthorized);

  auto dup = store.register_platform(platform_record(kGdc, "arid:iso3166:US", "GDC"), "a",
                                     t0);
  CHECK(dup.error().code == "DuplicateApid");

  auto global = store.register_platform(platform_record(kAnvil, "arid:global", "AnVIL"),
                                        "a", t0);
  CHECK(global.error().code == "BadRegion");
}

TEST_CASE("network membership is mirrored on both sides") {
  Fixture f = make_fixture();
  GovernanceStore& store = *f.store;
  const Timestamp t1 = ts("2025-02-01T00:00:00Z");

  auto view = store.snapshot();
  CHECK(view.networks.at(Apni{kNetwork}).members.contains(Apid{kGdc}));
  CHECK(view.platforms.at(Apid{kGdc}).apni_memberships.contains(Apni{kNetwork}));
  CHECK_FALSE(view.platforms.at(Apid{kPlatformC}).apni_memberships.contains(Apni{kNetwork}));

  CHECK(store.add_platform_to_network(Apni{kNetwork}, Apid{kPlatformC}, "a", t1).ok());
  view = store.snapshot();
  CHECK(view.networks.at(Apni{kNetwork}).members.contains(Apid{kPlatformC}));
  CHECK(view.platforms.at(Apid{kPlatformC}).apni_memberships.contains(Apni{kNetwork}));

  CHECK(store.add_platform_to_network(Apni{kNetwork}, Apid{kPlatformC}, "a", t1)
            .error()
            .code == "AlreadyMember");
  CHECK(store.remove_platform_from_network(Apni{kNetwork}, Apid{kPlatformC}, "a", t1).ok());
  CHECK(store.remove_platform_from_network(Apni{kNetwork}, Apid{kPlatformC}, "a", t1)
            .error()
            .code == "NotMember");
  CHECK(store.add_platform_to_network(Apni{"apni:none:here"}, Apid{kGdc}, "a", t1)
            .error()
            .code == "NotFound");

  NetworkRecord dangling;
  dangling.apni = Apni{"apni:demo:two"};
  dangling.authority_name = "x";
  dangling.authority_public_key.assign(32, 1);
  dangling.members = {Apid{"apid:no:such"}};
  CHECK(store.create_network(std::move(dangling), "a", t1).error().code ==
        "DanglingMember");
}

TEST_CASE("ato lifecycle ordering") {
  GovernanceStore store;
  const Timestamp t0 = ts("2025-01-01T00:00:00Z");
  const Apid apid{kGdc};
  CHECK(store.register_platform(platform_record(kGdc, "arid:iso3166:US", "GDC"), "a", t0)
            .ok());

  // Issuing before the independent assessment is out of order.
  CHECK(store.issue_ato(apid, ts("2027-01-01T00:00:00Z"), "a", t0).error().code ==
        "OutOfOrderTransition");
  CHECK(store.record_independent_assessment(apid, "a", t0).error().code ==
        "OutOfOrderTransition");
  CHECK(store.record_pentest_review(apid, "a", t0).error().code == "OutOfOrderTransition");

  CHECK(store.submit_assessment(apid, kFramework, "a", t0).ok());
  CHECK(store.submit_assessment(apid, kFramework, "a", t0).error().code ==
        "OutOfOrderTransition");
  CHECK(store.record_independent_assessment(apid, "a", t0).ok());
  CHECK(store.issue_ato(apid, t0, "a", t0).error().code == "BadInterval");
  CHECK(store.issue_ato(apid, ts("2027-01-01T00:00:00Z"), "a", t0).ok());

  const AtoRecord rec = store.snapshot().atos.at(apid);
  CHECK(rec.framework_id == kFramework);
  CHECK(rec.issuer == "a");
  CHECK(rec.ato_issued_at == t0);
  CHECK(rec.last_pentest_review_at == t0);  // review clock starts at issuance
  CHECK(compute_ato_status(rec, ts("2025-06-01T00:00:00Z")) == AtoStatus::Active);

  CHECK(store.revoke_ato(apid, "a", ts("2025-02-01T00:00:00Z")).ok());
  CHECK(store.record_pentest_review(apid, "a", ts("2025-03-01T00:00:00Z")).error().code ==
        "AlreadyRevoked");
  CHECK(store.revoke_ato(apid, "a", ts("2025-03-01T00:00:00Z")).error().code ==
        "AlreadyRevoked");
  CHECK(store
            .issue_ato(Apid{"apid:no:where"}, ts("2027-01-01T00:00:00Z"), "a",
                       ts("2025-03-01T00:00:00Z"))
            .error()
            .code == "NotFound");
}

TEST_CASE("compute_ato_status five-branch rule") {
  AtoRecord rec;
  rec.apid = Apid{kGdc};
  const Timestamp issued = ts("2024-01-01T00:00:00Z");
  const Timestamp until = ts("2026-01-01T00:00:00Z");

  CHECK(compute_ato_status(rec, issued) == AtoStatus::NotAuthorized);

  rec.assessment_submitted_at = issued;
  rec.independent_assessment_at = issued;
  rec.ato_issued_at = issued;
  rec.ato_valid_until = until;
  rec.last_pentest_review_at = issued;

  CHECK(compute_ato_status(rec, ts("2024-06-01T00:00:00Z")) == AtoStatus::Active);
  // Validity is half-open: expired exactly at valid_until. One second before,
  // the record is not yet expired (though its review is long overdue by then).
  CHECK(compute_ato_status(rec, until) == AtoStatus::Expired);
  CHECK(compute_ato_status(rec, until.plus_seconds(-1)) ==
        AtoStatus::SuspendedReviewOverdue);
  AtoRecord reviewed = rec;
  reviewed.last_pentest_review_at = until.plus_seconds(-kSecondsPerDay);
  CHECK(compute_ato_status(reviewed, until.plus_seconds(-1)) == AtoStatus::Active);
  CHECK(compute_ato_status(reviewed, until) == AtoStatus::Expired);

  // Review window: 365 days is still fine, strictly more is overdue.
  CHECK(compute_ato_status(rec, issued.plus_seconds(365 * kSecondsPerDay)) ==
        AtoStatus::Active);
  CHECK(compute_ato_status(rec, issued.plus_seconds(365 * kSecondsPerDay + 1)) ==
        AtoStatus::SuspendedReviewOverdue);
  // 2024 is a leap year: 2025-01-02 is 367 days after 2024-01-01.
  CHECK(compute_ato_status(rec, ts("2025-01-02T00:00:00Z")) ==
        AtoStatus::SuspendedReviewOverdue);

  rec.revoked_at = ts("2024-03-01T00:00:00Z");
  CHECK(compute_ato_status(rec, ts("2024-06-01T00:00:00Z")) == AtoStatus::Revoked);
  // Before the revocation instant the other branches still apply.
  CHECK(compute_ato_status(rec, ts("2024-02-01T00:00:00Z")) == AtoStatus::Active);
}

TEST_CASE("suspension is reversible by a review; revocation is terminal") {
  Fixture f = make_fixture();
  const Apid anvil{kAnvil};
  const Timestamp late = ts("2026-06-01T00:00:00Z");  // > 365d after issuance
  CHECK(compute_ato_status(f.store->snapshot().atos.at(anvil), late) ==
        AtoStatus::SuspendedReviewOverdue);
  CHECK(f.store->record_pentest_review(anvil, "a", late).ok());
  CHECK(compute_ato_status(f.store->snapshot().atos.at(anvil), late) == AtoStatus::Active);
}

TEST_CASE("rtd_holders mirrors active grants") {
  Fixture f = make_fixture();
  GovernanceStore& store = *f.store;
  const DatasetId ds{kDataset};
  const Timestamp t1 = ts("2025-02-01T00:00:00Z");

  CHECK(store.snapshot().datasets.at(ds).rtd_holders.contains(Apid{kGdc}));
  CHECK(store.grant_right_to_distribute(ds, Apid{kGdc}, "a", t1).error().code ==
        "DuplicateGrant");

  CHECK(store.grant_right_to_distribute(ds, Apid{kAnvil}, "a", t1).ok());
  CHECK(store.snapshot().datasets.at(ds).rtd_holders.contains(Apid{kAnvil}));

  CHECK(store.revoke_right_to_distribute(ds, Apid{kAnvil}, "a", t1).ok());
  CHECK_FALSE(store.snapshot().datasets.at(ds).rtd_holders.contains(Apid{kAnvil}));
  CHECK(store.revoke_right_to_distribute(ds, Apid{kAnvil}, "a", t1).error().code ==
        "NoSuchGrant");

  // Re-grant after revocation is allowed; the mirror follows.
  CHECK(store.grant_right_to_distribute(ds, Apid{kAnvil}, "a", t1).ok());
  CHECK(store.snapshot().datasets.at(ds).rtd_holders.contains(Apid{kAnvil}));

  CHECK(store.grant_right_to_distribute(DatasetId{"ds:no:such"}, Apid{kGdc}, "a", t1)
            .error()
            .code == "NotFound");

  // Re-registration (boundary update) preserves grant-derived holders.
  DatasetSafeMetadata updated;
  updated.dataset_id = ds;
  updated.sponsor = "NCI";
  updated.authorized_networks = {};
  CHECK(store.register_dataset(updated, "a", t1).ok());
  const auto meta = store.snapshot().datasets.at(ds);
  CHECK(meta.authorized_networks.empty());
  CHECK(meta.rtd_holders.contains(Apid{kGdc}));
  CHECK(meta.rtd_holders.contains(Apid{kAnvil}));
}

TEST_CASE("user authorizations") {
  Fixture f = make_fixture();
  GovernanceStore& store = *f.store;
  const Timestamp t1 = ts("2025-02-01T00:00:00Z");

  UserAuthorization dup;
  dup.authorization_id = kAuth;
  dup.user_id = kUser;
  dup.dataset_id = DatasetId{kDataset};
  dup.granted_at = t1;
  dup.expires_at = t1.plus_seconds(10);
  CHECK(store.authorize_user(dup, "a", t1).error().code == "DuplicateAuthorization");

  UserAuthorization bad;
  bad.authorization_id = "auth:bad";
  bad.user_id = kUser;
  bad.dataset_id = DatasetId{kDataset};
  bad.granted_at = t1;
  bad.expires_at = t1;
  CHECK(store.authorize_user(bad, "a", t1).error().code == "BadInterval");

  const UserAuthorization alice = store.snapshot().user_authorizations.at(kAuth);
  CHECK(alice.active_at(ts("2025-06-01T00:00:00Z")));
  CHECK_FALSE(alice.active_at(f.auth_expires));  // half-open interval
  CHECK(alice.active_at(f.t0));

  CHECK(store.revoke_user_authorization(kAuth, "a", t1).ok());
  CHECK_FALSE(store.snapshot().user_authorizations.at(kAuth).active_at(
      ts("2025-06-01T00:00:00Z")));
  CHECK(store.revoke_user_authorization(kAuth, "a", t1).error().code == "AlreadyRevoked");
  CHECK(store.revoke_user_authorization("auth:none", "a", t1).error().code == "NotFound");
}

TEST_CASE("StaleClock rejects time regressions; equal timestamps are fine") {
  GovernanceStore store;
  const Timestamp t0 = ts("2025-01-01T00:00:00Z");
  CHECK(store.register_platform(platform_record(kGdc, "arid:iso3166:US", "GDC"), "a", t0)
            .ok());
  CHECK(store.register_platform(platform_record(kAnvil, "arid:iso3166:US", "AnVIL"), "a",
                                t0)
            .ok());
  CHECK(store
            .register_platform(platform_record(kPlatformC, "arid:iso3166:CA", "C"), "a",
                               t0.plus_seconds(-1))
            .error()
            .code == "StaleClock");
}

TEST_CASE("snapshot is deterministic and validates") {
  Fixture f = make_fixture();
  const std::string a = must_canonical(to_json(f.store->snapshot()));
  const std::string b = must_canonical(to_json(f.store->snapshot()));
  CHECK(a == b);
  CHECK(validate_registry_view(f.store->snapshot()).empty());
  CHECK(validate_registry_view(RegistryView{}).empty());

  // Idempotent: repeated validation of the same view reports the same
  // violations in the same order.
  RegistryView broken = f.store->snapshot();
  broken.networks.at(Apni{kNetwork}).members.insert(Apid{"apid:x:y"});
  broken.user_authorizations.at(kAuth).expires_at = f.t0;
  const auto first = validate_registry_view(broken);
  const auto second = validate_registry_view(broken);
  CHECK(first == second);
  CHECK(first.size() == 2);
}

TEST_CASE("validate_registry_view reports broken references") {
  RegistryView view;
  NetworkRecord net;
  net.apni = Apni{kNetwork};
  net.authority_public_key.assign(32, 1);
  net.members = {Apid{"apid:x:y"}};
  view.networks[net.apni] = net;
  const auto violations = validate_registry_view(view);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].code == "DanglingApid");

  RegistryView bad_region;
  PlatformRecord rec = platform_record(kGdc, "arid:iso3166:US", "GDC");
  rec.region = Arid{"arid:global"};
  bad_region.platforms[rec.apid] = rec;
  CHECK(validate_registry_view(bad_region).size() == 1);
  CHECK(validate_registry_view(bad_region)[0].code == "BadRegion");
}

TEST_CASE("audit log hash chain") {
  Fixture f = make_fixture();
  const auto log = f.store->audit_log();
  REQUIRE(!log.empty());
  CHECK(verify_audit_chain(log).ok());
  CHECK(log[0].prev_hash == kGenesisHash);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].seq == i);
    if (i > 0) CHECK(log[i].prev_hash == log[i - 1].hash);
  }

  auto tampered = log;
  tampered[2].payload["record"]["display_name"] = "evil";
  CHECK(verify_audit_chain(tampered).error().code == "BrokenHashChain");

  auto gap = log;
  gap.erase(gap.begin() + 3);
  const auto gap_err = verify_audit_chain(gap).error();
  CHECK(gap_err.code == "GapInSequence");
}

TEST_CASE("replay reproduces the store bit-exactly") {
  Fixture f = make_fixture();
  f.store->record_decision(json{{"decision", "ALLOW"}, {"reasons", json::array()}},
                           "agent:test", ts("2025-06-01T00:00:00Z"));
  const std::string jsonl = f.store->audit_log_jsonl();

  GovernanceStore replayed;
  REQUIRE(replay_audit_jsonl(jsonl, replayed).ok());
  CHECK(must_canonical(to_json(replayed.snapshot())) ==
        must_canonical(to_json(f.store->snapshot())));
  CHECK(replayed.audit_log_jsonl() == jsonl);

  // Grant records replay identically too.
  const auto grants_a = f.store->grants();
  const auto grants_b = replayed.grants();
  REQUIRE(grants_a.size() == grants_b.size());
  for (std::size_t i = 0; i < grants_a.size(); ++i) CHECK(grants_a[i] == grants_b[i]);
}

TEST_CASE("replay rejects tampered and gapped logs") {
  Fixture f = make_fixture();
  const std::string jsonl = f.store->audit_log_jsonl();

  std::string flipped = jsonl;
  flipped[jsonl.find("fixture")] = 'F';
  GovernanceStore out1;
  CHECK(replay_audit_jsonl(flipped, out1).error().code == "BrokenHashChain");

  GovernanceStore out2;
  CHECK(replay_audit_jsonl("not json\n", out2).error().code == "BrokenHashChain");

  GovernanceStore out3;
  CHECK(replay_audit_jsonl("", out3).ok());
  CHECK(out3.snapshot() == RegistryView{});
}
