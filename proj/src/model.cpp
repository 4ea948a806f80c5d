#include "safe/model.hpp"

#include "safe/crypto.hpp"

namespace safe {

namespace {

using nlohmann::json;

// First-error-wins field extraction for wire/persistence parsing.
class Fields {
 public:
  explicit Fields(const json& j) : j_(j) {
    if (!j.is_object()) err_ = Error{"BadField", "expected a JSON object"};
  }

  bool failed() const { return err_.has_value(); }
  const Error& error() const { return *err_; }

  std::string str(const char* key) {
    if (err_) return {};
    const auto it = j_.find(key);
    if (it == j_.end() || !it->is_string()) {
      err_ = Error{"BadField", std::string("missing or non-string field '") + key + "'"};
      return {};
    }
    return it->get<std::string>();
  }

  std::string str_or(const char* key, std::string fallback) {
    if (err_) return {};
    const auto it = j_.find(key);
    if (it == j_.end()) return fallback;
    if (!it->is_string()) {
      err_ = Error{"BadField", std::string("non-string field '") + key + "'"};
      return {};
    }
    return it->get<std::string>();
  }

  bool boolean_or(const char* key, bool fallback) {
    if (err_) return false;
    const auto it = j_.find(key);
    if (it == j_.end()) return fallback;
    if (!it->is_boolean()) {
      err_ = Error{"BadField", std::string("non-boolean field '") + key + "'"};
      return false;
    }
    return it->get<bool>();
  }

  std::optional<std::vector<std::string>> string_list(const char* key, bool required) {
    if (err_) return std::nullopt;
    const auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) {
        err_ = Error{"BadField", std::string("missing list field '") + key + "'"};
      }
      return std::nullopt;
    }
    if (!it->is_array()) {
      err_ = Error{"BadField", std::string("field '") + key + "' must be a list"};
      return std::nullopt;
    }
    std::vector<std::string> out;
    for (const auto& item : *it) {
      if (!item.is_string()) {
        err_ = Error{"BadField", std::string("field '") + key + "' must contain strings"};
        return std::nullopt;
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  template <typename T>
  T parsed(const char* key, Result<T> (*parse)(std::string_view)) {
    if (err_) return T{};
    auto r = parse(str(key));
    if (err_) return T{};
    if (!r.ok()) {
      err_ = Error{r.error().code, std::string(key) + ": " + r.error().detail};
      return T{};
    }
    return std::move(r).value();
  }

  Timestamp timestamp(const char* key) {
    if (err_) return {};
    auto r = parse_timestamp(str(key));
    if (err_) return {};
    if (!r.ok()) {
      err_ = Error{r.error().code, std::string(key) + ": " + r.error().detail};
      return {};
    }
    return r.value();
  }

  std::optional<Timestamp> timestamp_opt(const char* key) {
    if (err_ || !j_.contains(key)) return std::nullopt;
    return timestamp(key);
  }

 private:
  const json& j_;
  std::optional<Error> err_;
};

template <typename T>
json id_set_to_json(const std::set<T>& ids) {
  json arr = json::array();
  for (const auto& id : ids) arr.push_back(id.value);
  return arr;
}

template <typename T>
bool parse_id_set(Fields& f, const char* key, Result<T> (*parse)(std::string_view),
                  bool required, std::set<T>& out, Error& err) {
  auto list = f.string_list(key, required);
  if (f.failed()) {
    err = f.error();
    return false;
  }
  if (!list) return true;
  for (const auto& s : *list) {
    auto r = parse(s);
    if (!r.ok()) {
      err = Error{r.error().code, std::string(key) + ": " + r.error().detail};
      return false;
    }
    out.insert(std::move(r).value());
  }
  return true;
}

void put_opt(json& j, const char* key, const std::optional<Timestamp>& ts) {
  if (ts) j[key] = render_timestamp(*ts);
}

}  // namespace

json to_json(const PlatformRecord& rec) {
  return json{{"apid", rec.apid.value},
              {"display_name", rec.display_name},
              {"region", rec.region.value},
              {"public_key_id", rec.public_key_id},
              {"apni_memberships", id_set_to_json(rec.apni_memberships)},
              {"operator", rec.operator_name}};
}

json to_json(const NetworkRecord& rec) {
  return json{{"apni", rec.apni.value},
              {"authority_name", rec.authority_name},
              {"authority_public_key", to_hex(rec.authority_public_key)},
              {"framework_id", rec.framework_id},
              {"members", id_set_to_json(rec.members)}};
}

json to_json(const DatasetSafeMetadata& meta) {
  json j{{"dataset_id", meta.dataset_id.value},
         {"sponsor", meta.sponsor},
         {"rtd_holders", id_set_to_json(meta.rtd_holders)},
         {"authorized_networks", id_set_to_json(meta.authorized_networks)}};
  if (meta.region_restrictions) {
    j["region_restrictions"] = id_set_to_json(*meta.region_restrictions);
  }
  return j;
}

json to_json(const UserAuthorization& auth) {
  return json{{"authorization_id", auth.authorization_id},
              {"user_id", auth.user_id},
              {"dataset_id", auth.dataset_id.value},
              {"granted_at", render_timestamp(auth.granted_at)},
              {"expires_at", render_timestamp(auth.expires_at)},
              {"revoked", auth.revoked}};
}

json to_json(const AtoRecord& rec) {
  json j{{"apid", rec.apid.value},
         {"framework_id", rec.framework_id},
         {"issuer", rec.issuer}};
  put_opt(j, "assessment_submitted_at", rec.assessment_submitted_at);
  put_opt(j, "independent_assessment_at", rec.independent_assessment_at);
  put_opt(j, "ato_issued_at", rec.ato_issued_at);
  put_opt(j, "ato_valid_until", rec.ato_valid_until);
  put_opt(j, "last_pentest_review_at", rec.last_pentest_review_at);
  put_opt(j, "revoked_at", rec.revoked_at);
  return j;
}

json to_json(const RtdGrant& grant) {
  json j{{"grant_id", grant.grant_id},
         {"dataset_id", grant.dataset_id.value},
         {"apid", grant.apid.value},
         {"granted_at", render_timestamp(grant.granted_at)},
         {"granted_by", grant.granted_by}};
  put_opt(j, "revoked_at", grant.revoked_at);
  return j;
}

json to_json(const RegistryView& view) {
  json platforms = json::object();
  for (const auto& [apid, rec] : view.platforms) platforms[apid.value] = to_json(rec);
  json networks = json::object();
  for (const auto& [apni, rec] : view.networks) networks[apni.value] = to_json(rec);
  json datasets = json::object();
  for (const auto& [id, meta] : view.datasets) datasets[id.value] = to_json(meta);
  json auths = json::object();
  for (const auto& [id, auth] : view.user_authorizations) auths[id] = to_json(auth);
  json atos = json::object();
  for (const auto& [apid, rec] : view.atos) atos[apid.value] = to_json(rec);
  return json{{"platforms", platforms},
              {"networks", networks},
              {"datasets", datasets},
              {"user_authorizations", auths},
              {"atos", atos}};
}

Result<PlatformRecord> platform_record_from_json(const json& j) {
  Fields f(j);
  PlatformRecord rec;
  rec.apid = f.parsed<Apid>("apid", parse_apid);
  rec.display_name = f.str_or("display_name", "");
  rec.region = f.parsed<Arid>("region", parse_arid);
  rec.public_key_id = f.str_or("public_key_id", "");
  rec.operator_name = f.str_or("operator", "");
  if (f.failed()) return f.error();
  Error err;
  if (!parse_id_set(f, "apni_memberships", parse_apni, false, rec.apni_memberships, err)) {
    return err;
  }
  return rec;
}

Result<NetworkRecord> network_record_from_json(const json& j) {
  Fields f(j);
  NetworkRecord rec;
  rec.apni = f.parsed<Apni>("apni", parse_apni);
  rec.authority_name = f.str_or("authority_name", "");
  const std::string key_hex = f.str("authority_public_key");
  rec.framework_id = f.str_or("framework_id", "");
  if (f.failed()) return f.error();
  auto key = from_hex(key_hex);
  if (!key.ok() || key.value().size() != 32) {
    return Result<NetworkRecord>::failure(
        "BadAuthorityKey", "authority_public_key must be 64 lowercase hex chars");
  }
  rec.authority_public_key = std::move(key).value();
  Error err;
  if (!parse_id_set(f, "members", parse_apid, false, rec.members, err)) return err;
  return rec;
}

Result<DatasetSafeMetadata> dataset_metadata_from_json(const json& j) {
  Fields f(j);
  DatasetSafeMetadata meta;
  meta.dataset_id = f.parsed<DatasetId>("dataset_id", parse_dataset_id);
  meta.sponsor = f.str_or("sponsor", "");
  if (f.failed()) return f.error();
  Error err;
  if (!parse_id_set(f, "rtd_holders", parse_apid, false, meta.rtd_holders, err)) {
    return err;
  }
  if (!parse_id_set(f, "authorized_networks", parse_apni, false,
                    meta.authorized_networks, err)) {
    return err;
  }
  if (j.contains("region_restrictions")) {
    std::set<Arid> regions;
    if (!parse_id_set(f, "region_restrictions", parse_arid, true, regions, err)) {
      return err;
    }
    meta.region_restrictions = std::move(regions);
  }
  return meta;
}

Result<UserAuthorization> user_authorization_from_json(const json& j) {
  Fields f(j);
  UserAuthorization auth;
  auth.authorization_id = f.str("authorization_id");
  auth.user_id = f.str("user_id");
  auth.dataset_id = f.parsed<DatasetId>("dataset_id", parse_dataset_id);
  auth.granted_at = f.timestamp("granted_at");
  auth.expires_at = f.timestamp("expires_at");
  auth.revoked = f.boolean_or("revoked", false);
  if (f.failed()) return f.error();
  return auth;
}

Result<AtoRecord> ato_record_from_json(const json& j) {
  Fields f(j);
  AtoRecord rec;
  rec.apid = f.parsed<Apid>("apid", parse_apid);
  rec.framework_id = f.str_or("framework_id", "");
  rec.issuer = f.str_or("issuer", "");
  rec.assessment_submitted_at = f.timestamp_opt("assessment_submitted_at");
  rec.independent_assessment_at = f.timestamp_opt("independent_assessment_at");
  rec.ato_issued_at = f.timestamp_opt("ato_issued_at");
  rec.ato_valid_until = f.timestamp_opt("ato_valid_until");
  rec.last_pentest_review_at = f.timestamp_opt("last_pentest_review_at");
  rec.revoked_at = f.timestamp_opt("revoked_at");
  if (f.failed()) return f.error();
  return rec;
}

Result<RegistryView> registry_view_from_json(const json& j) {
  if (!j.is_object()) {
    return Result<RegistryView>::failure("BadField", "expected a JSON object");
  }
  RegistryView view;
  const auto each = [&](const char* key, auto parse_one, auto insert) -> Status {
    const auto it = j.find(key);
    if (it == j.end()) return Status::success();
    if (!it->is_object()) return Status::failure("BadField", std::string(key) + " must be an object");
    for (auto entry = it->begin(); entry != it->end(); ++entry) {
      auto r = parse_one(entry.value());
      if (!r.ok()) return Status(Error{r.error().code, r.error().detail});
      insert(std::move(r).value());
    }
    return Status::success();
  };
  Status s = each("platforms", platform_record_from_json,
                  [&](PlatformRecord rec) { view.platforms[rec.apid] = std::move(rec); });
  if (!s.ok()) return s.error();
  s = each("networks", network_record_from_json,
           [&](NetworkRecord rec) { view.networks[rec.apni] = std::move(rec); });
  if (!s.ok()) return s.error();
  s = each("datasets", dataset_metadata_from_json, [&](DatasetSafeMetadata meta) {
    view.datasets[meta.dataset_id] = std::move(meta);
  });
  if (!s.ok()) return s.error();
  s = each("user_authorizations", user_authorization_from_json,
           [&](UserAuthorization auth) {
             view.user_authorizations[auth.authorization_id] = std::move(auth);
           });
  if (!s.ok()) return s.error();
  s = each("atos", ato_record_from_json,
           [&](AtoRecord rec) { view.atos[rec.apid] = std::move(rec); });
  if (!s.ok()) return s.error();
  return view;
}

std::vector<Violation> validate_registry_view(const RegistryView& view) {
  std::vector<Violation> out;
  const auto violation = [&](const char* code, std::string detail) {
    out.push_back(Violation{code, std::move(detail)});
  };

  for (const auto& [apid, rec] : view.platforms) {
    if (rec.apid != apid) {
      violation("KeyMismatch", "platform map key " + apid.value + " != record apid");
    }
    if (rec.region.is_global()) {
      violation("BadRegion", "platform " + apid.value + " has wildcard region");
    }
    for (const auto& apni : rec.apni_memberships) {
      const auto it = view.networks.find(apni);
      if (it == view.networks.end()) {
        violation("DanglingApni",
                  "platform " + apid.value + " claims membership in unknown " + apni.value);
      } else if (!it->second.members.contains(apid)) {
        violation("MembershipMismatch",
                  apni.value + " does not list member " + apid.value);
      }
    }
  }

  for (const auto& [apni, rec] : view.networks) {
    if (rec.authority_public_key.empty()) {
      violation("EmptyAuthorityKey", apni.value + " has no authority key");
    }
    for (const auto& member : rec.members) {
      const auto it = view.platforms.find(member);
      if (it == view.platforms.end()) {
        violation("DanglingApid", apni.value + " lists unknown member " + member.value);
      } else if (!it->second.apni_memberships.contains(apni)) {
        violation("MembershipMismatch",
                  member.value + " does not claim membership in " + apni.value);
      }
    }
  }

  for (const auto& [id, meta] : view.datasets) {
    for (const auto& holder : meta.rtd_holders) {
      if (!view.platforms.contains(holder)) {
        violation("DanglingApid", id.value + " rtd holder " + holder.value + " unknown");
      }
    }
    for (const auto& apni : meta.authorized_networks) {
      if (!view.networks.contains(apni)) {
        violation("DanglingApni", id.value + " authorizes unknown network " + apni.value);
      }
    }
  }

  for (const auto& [id, auth] : view.user_authorizations) {
    if (!view.datasets.contains(auth.dataset_id)) {
      violation("DanglingDataset",
                "authorization " + id + " references unknown " + auth.dataset_id.value);
    }
    if (!(auth.granted_at < auth.expires_at)) {
      violation("BadInterval", "authorization " + id + " has granted_at >= expires_at");
    }
  }

  for (const auto& [apid, rec] : view.atos) {
    if (!view.platforms.contains(apid)) {
      violation("DanglingApid", "ato record for unknown platform " + apid.value);
    }
    const auto stage_ordered = [](const std::optional<Timestamp>& a,
                                  const std::optional<Timestamp>& b) {
      return !a || !b || *a <= *b;
    };
    if (!stage_ordered(rec.assessment_submitted_at, rec.independent_assessment_at) ||
        !stage_ordered(rec.independent_assessment_at, rec.ato_issued_at)) {
      violation("StageOrder", "ato for " + apid.value + " violates stage monotonicity");
    }
    if (rec.ato_issued_at && !rec.independent_assessment_at) {
      violation("StageOrder",
                "ato for " + apid.value + " issued without independent assessment");
    }
  }

  return out;
}

}  // namespace safe
