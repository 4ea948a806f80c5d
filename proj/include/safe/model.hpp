#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe/ids.hpp"
#include "safe/result.hpp"
#include "safe/timestamp.hpp"

namespace safe {

struct PlatformRecord {
  Apid apid;
  std::string display_name;
  Arid region;  // concrete region, never arid:global
  std::string public_key_id;
  std::set<Apni> apni_memberships;
  std::string operator_name;

  bool operator==(const PlatformRecord&) const = default;
};

struct NetworkRecord {
  Apni apni;
  std::string authority_name;
  std::vector<std::uint8_t> authority_public_key;  // Ed25519, 32 bytes
  std::string framework_id;
  std::set<Apid> members;

  bool operator==(const NetworkRecord&) const = default;
};

struct DatasetSafeMetadata {
  DatasetId dataset_id;
  std::string sponsor;
  std::set<Apid> rtd_holders;  // derived: mirrors the active RtdGrants
  std::set<Apni> authorized_networks;
  // Absent = no regional restriction; empty set = denied everywhere.
  std::optional<std::set<Arid>> region_restrictions;

  bool operator==(const DatasetSafeMetadata&) const = default;
};

struct UserAuthorization {
  std::string authorization_id;
  std::string user_id;
  DatasetId dataset_id;
  Timestamp granted_at;
  Timestamp expires_at;
  bool revoked = false;

  bool operator==(const UserAuthorization&) const = default;

  // Half-open validity window; revocation wins unconditionally.
  bool active_at(Timestamp t) const {
    return !revoked && granted_at <= t && t < expires_at;
  }
};

// ATO lifecycle record. Stage timestamps are monotone: submission <=
// independent assessment <= issuance, and issuance implies an independent
// assessment happened first.
struct AtoRecord {
  Apid apid;
  std::string framework_id;
  std::optional<Timestamp> assessment_submitted_at;
  std::optional<Timestamp> independent_assessment_at;
  std::optional<Timestamp> ato_issued_at;
  std::optional<Timestamp> ato_valid_until;
  std::optional<Timestamp> last_pentest_review_at;
  std::optional<Timestamp> revoked_at;
  std::string issuer;

  bool operator==(const AtoRecord&) const = default;
};

struct RtdGrant {
  std::string grant_id;
  DatasetId dataset_id;
  Apid apid;
  Timestamp granted_at;
  std::optional<Timestamp> revoked_at;
  std::string granted_by;

  bool operator==(const RtdGrant&) const = default;

  bool active_at(Timestamp t) const {
    return granted_at <= t && (!revoked_at.has_value() || t < *revoked_at);
  }
};

// Immutable, referentially closed snapshot consumed by the policy engine.
struct RegistryView {
  std::map<Apid, PlatformRecord> platforms;
  std::map<Apni, NetworkRecord> networks;
  std::map<DatasetId, DatasetSafeMetadata> datasets;
  std::map<std::string, UserAuthorization> user_authorizations;
  std::map<Apid, AtoRecord> atos;

  bool operator==(const RegistryView&) const = default;
};

struct Violation {
  std::string code;
  std::string detail;
  bool operator==(const Violation&) const = default;
};

// Empty iff the view is referentially closed and all per-record invariants
// hold. One violation per broken reference or invariant; deterministic order.
std::vector<Violation> validate_registry_view(const RegistryView& view);

// JSON conversions. All emitters produce canonical-ready values (no floats,
// no nulls; absent optionals are omitted). Parsers validate grammar and
// reject wrong shapes with code "BadField".
nlohmann::json to_json(const PlatformRecord& rec);
nlohmann::json to_json(const NetworkRecord& rec);
nlohmann::json to_json(const DatasetSafeMetadata& meta);
nlohmann::json to_json(const UserAuthorization& auth);
nlohmann::json to_json(const AtoRecord& rec);
nlohmann::json to_json(const RtdGrant& grant);
nlohmann::json to_json(const RegistryView& view);

Result<PlatformRecord> platform_record_from_json(const nlohmann::json& j);
Result<NetworkRecord> network_record_from_json(const nlohmann::json& j);
Result<DatasetSafeMetadata> dataset_metadata_from_json(const nlohmann::json& j);
Result<UserAuthorization> user_authorization_from_json(const nlohmann::json& j);
Result<AtoRecord> ato_record_from_json(const nlohmann::json& j);
Result<RegistryView> registry_view_from_json(const nlohmann::json& j);

}  // namespace safe
