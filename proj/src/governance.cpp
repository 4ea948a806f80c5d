#include "safe/governance.hpp"

#include "safe/canonical.hpp"
#include "safe/crypto.hpp"

namespace safe {

using nlohmann::json;

std::string_view to_string(AtoStatus status) {
  switch (status) {
    case AtoStatus::NotAuthorized: return "NOT_AUTHORIZED";
    case AtoStatus::Active: return "ACTIVE";
    case AtoStatus::SuspendedReviewOverdue: return "SUSPENDED_REVIEW_OVERDUE";
    case AtoStatus::Expired: return "EXPIRED";
    case AtoStatus::Revoked: return "REVOKED";
  }
  return "UNKNOWN";
}

AtoStatus compute_ato_status(const AtoRecord& rec, Timestamp now) {
  if (rec.revoked_at && *rec.revoked_at <= now) return AtoStatus::Revoked;
  if (!rec.ato_issued_at) return AtoStatus::NotAuthorized;
  if (rec.ato_valid_until && now >= *rec.ato_valid_until) return AtoStatus::Expired;
  if (rec.last_pentest_review_at &&
      now.seconds_since(*rec.last_pentest_review_at) > kReviewWindowSeconds) {
    return AtoStatus::SuspendedReviewOverdue;
  }
  return AtoStatus::Active;
}

json audit_event_to_json(const AuditEvent& event) {
  return json{{"seq", event.seq},
              {"at", render_timestamp(event.at)},
              {"actor", event.actor},
              {"action", event.action},
              {"payload", event.payload},
              {"prev_hash", event.prev_hash},
              {"hash", event.hash}};
}

Result<AuditEvent> audit_event_from_json(const json& j) {
  if (!j.is_object()) {
    return Result<AuditEvent>::failure("BadField", "audit event must be an object");
  }
  AuditEvent ev;
  const auto seq_it = j.find("seq");
  if (seq_it == j.end() || !seq_it->is_number_unsigned()) {
    return Result<AuditEvent>::failure("BadField", "missing or invalid 'seq'");
  }
  ev.seq = seq_it->get<std::uint64_t>();
  const auto at_it = j.find("at");
  if (at_it == j.end() || !at_it->is_string()) {
    return Result<AuditEvent>::failure("BadField", "missing 'at'");
  }
  auto at = parse_timestamp(at_it->get<std::string>());
  if (!at.ok()) return at.error();
  ev.at = at.value();
  for (const auto& [key, member] : {std::pair{"actor", &ev.actor},
                                    std::pair{"action", &ev.action},
                                    std::pair{"prev_hash", &ev.prev_hash},
                                    std::pair{"hash", &ev.hash}}) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      return Result<AuditEvent>::failure("BadField",
                                         std::string("missing '") + key + "'");
    }
    *member = it->get<std::string>();
  }
  const auto payload_it = j.find("payload");
  if (payload_it == j.end()) {
    return Result<AuditEvent>::failure("BadField", "missing 'payload'");
  }
  ev.payload = *payload_it;
  if (auto canon = canonical_bytes(ev.payload); !canon.ok()) return canon.error();
  return ev;
}

std::string audit_event_canonical(const AuditEvent& event, bool with_hash) {
  AuditEvent copy = event;
  if (!with_hash) copy.hash = "";
  return must_canonical(audit_event_to_json(copy));
}

Status verify_audit_chain(const std::vector<AuditEvent>& events) {
  std::string prev{kGenesisHash};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const AuditEvent& ev = events[i];
    if (sha256_hex(audit_event_canonical(ev, false)) != ev.hash) {
      return Status::failure("BrokenHashChain",
                             "event hash mismatch at seq " + std::to_string(i));
    }
    if (ev.seq != i) {
      return Status::failure("GapInSequence",
                             "expected seq " + std::to_string(i) + ", found " +
                                 std::to_string(ev.seq));
    }
    if (ev.prev_hash != prev) {
      return Status::failure("BrokenHashChain",
                             "prev_hash linkage broken at seq " + std::to_string(i));
    }
    prev = ev.hash;
  }
  return Status::success();
}

namespace {

Status out_of_order(const std::string& detail) {
  return Status::failure("OutOfOrderTransition", detail);
}

}  // namespace

Status GovernanceStore::find_ato(const Apid& apid, AtoRecord** out) {
  const auto it = state_.atos.find(apid);
  if (it == state_.atos.end()) {
    return Status::failure("NotFound", "unknown platform " + apid.value);
  }
  *out = &it->second;
  return Status::success();
}

// Validates against current state and mutates only after every check passes,
// so a failed operation leaves the store untouched.
Status GovernanceStore::apply(const std::string& action, const json& payload,
                              const std::string& actor, Timestamp at,
                              std::uint64_t seq) {
  if (action == "register_platform") {
    auto rec = platform_record_from_json(payload.value("record", json::object()));
    if (!rec.ok()) return rec.error();
    PlatformRecord platform = std::move(rec).value();
    if (state_.platforms.contains(platform.apid)) {
      return Status::failure("DuplicateApid", platform.apid.value + " already registered");
    }
    if (platform.region.is_global()) {
      return Status::failure("BadRegion", "platform region must be concrete, not arid:global");
    }
    if (!platform.apni_memberships.empty()) {
      return Status::failure("BadField",
                             "apni_memberships are managed through network membership");
    }
    AtoRecord ato;
    ato.apid = platform.apid;
    state_.atos.emplace(platform.apid, std::move(ato));
    state_.platforms.emplace(platform.apid, std::move(platform));
    return Status::success();
  }

  if (action == "create_network") {
    auto rec = network_record_from_json(payload.value("record", json::object()));
    if (!rec.ok()) return rec.error();
    NetworkRecord network = std::move(rec).value();
    if (state_.networks.contains(network.apni)) {
      return Status::failure("DuplicateApni", network.apni.value + " already exists");
    }
    for (const auto& member : network.members) {
      if (!state_.platforms.contains(member)) {
        return Status::failure("DanglingMember", "unregistered member " + member.value);
      }
    }
    for (const auto& member : network.members) {
      state_.platforms.at(member).apni_memberships.insert(network.apni);
    }
    state_.networks.emplace(network.apni, std::move(network));
    return Status::success();
  }

  if (action == "add_platform_to_network" || action == "remove_platform_from_network") {
    auto apni = parse_apni(payload.value("apni", ""));
    auto apid = parse_apid(payload.value("apid", ""));
    if (!apni.ok()) return apni.error();
    if (!apid.ok()) return apid.error();
    const auto net_it = state_.networks.find(apni.value());
    if (net_it == state_.networks.end()) {
      return Status::failure("NotFound", "unknown network " + apni.value().value);
    }
    const auto plat_it = state_.platforms.find(apid.value());
    if (plat_it == state_.platforms.end()) {
      return Status::failure("NotFound", "unknown platform " + apid.value().value);
    }
    const bool member = net_it->second.members.contains(apid.value());
    if (action == "add_platform_to_network") {
      if (member) {
        return Status::failure("AlreadyMember",
                               apid.value().value + " already in " + apni.value().value);
      }
      net_it->second.members.insert(apid.value());
      plat_it->second.apni_memberships.insert(apni.value());
    } else {
      if (!member) {
        return Status::failure("NotMember",
                               apid.value().value + " not in " + apni.value().value);
      }
      net_it->second.members.erase(apid.value());
      plat_it->second.apni_memberships.erase(apni.value());
    }
    return Status::success();
  }

  if (action == "submit_assessment") {
    auto apid = parse_apid(payload.value("apid", ""));
    if (!apid.ok()) return apid.error();
    AtoRecord* ato = nullptr;
    if (Status s = find_ato(apid.value(), &ato); !s.ok()) return s;
    if (ato->revoked_at) return Status::failure("AlreadyRevoked", "ato is revoked");
    if (ato->assessment_submitted_at) {
      return out_of_order("assessment already submitted");
    }
    ato->assessment_submitted_at = at;
    ato->framework_id = payload.value("framework_id", "");
    return Status::success();
  }

  if (action == "record_independent_assessment") {
    auto apid = parse_apid(payload.value("apid", ""));
    if (!apid.ok()) return apid.error();
    AtoRecord* ato = nullptr;
    if (Status s = find_ato(apid.value(), &ato); !s.ok()) return s;
    if (ato->revoked_at) return Status::failure("AlreadyRevoked", "ato is revoked");
    if (!ato->assessment_submitted_at) {
      return out_of_order("no assessment submitted");
    }
    if (ato->independent_assessment_at) {
      return out_of_order("independent assessment already recorded");
    }
    ato->independent_assessment_at = at;
    return Status::success();
  }

  if (action == "issue_ato") {
    auto apid = parse_apid(payload.value("apid", ""));
    if (!apid.ok()) return apid.error();
    auto valid_until = parse_timestamp(payload.value("valid_until", ""));
    if (!valid_until.ok()) return valid_until.error();
    AtoRecord* ato = nullptr;
    if (Status s = find_ato(apid.value(), &ato); !s.ok()) return s;
    if (ato->revoked_at) return Status::failure("AlreadyRevoked", "ato is revoked");
    if (!ato->independent_assessment_at) {
      return out_of_order("independent assessment must precede issuance");
    }
    if (ato->ato_issued_at) return out_of_order("ato already issued");
    if (!(valid_until.value() > at)) {
      return Status::failure("BadInterval", "valid_until must be after issuance time");
    }
    ato->ato_issued_at = at;
    ato->ato_valid_until = valid_until.value();
    ato->last_pentest_review_at = at;  // review clock starts at issuance
    ato->issuer = actor;
    return Status::success();
  }

  if (action == "record_pentest_review") {
    auto apid = parse_apid(payload.value("apid", ""));
    if (!apid.ok()) return apid.error();
    AtoRecord* ato = nullptr;
    if (Status s = find_ato(apid.value(), &ato); !s.ok()) return s;
    if (ato->revoked_at) return Status::failure("AlreadyRevoked", "ato is revoked");
    if (!ato->ato_issued_at) return out_of_order("cannot review before issuance");
    ato->last_pentest_review_at = at;
    return Status::success();
  }

  if (action == "revoke_ato") {
    auto apid = parse_apid(payload.value("apid", ""));
    if (!apid.ok()) return apid.error();
    AtoRecord* ato = nullptr;
    if (Status s = find_ato(apid.value(), &ato); !s.ok()) return s;
    if (ato->revoked_at) return Status::failure("AlreadyRevoked", "ato already revoked");
    if (!ato->ato_issued_at) return out_of_order("cannot revoke before issuance");
    ato->revoked_at = at;
    return Status::success();
  }

  if (action == "register_dataset") {
    auto meta_r = dataset_metadata_from_json(payload.value("metadata", json::object()));
    if (!meta_r.ok()) return meta_r.error();
    DatasetSafeMetadata meta = std::move(meta_r).value();
    if (!meta.rtd_holders.empty()) {
      return Status::failure("BadField",
                             "rtd_holders is derived from grants and must be empty");
    }
    for (const auto& apni : meta.authorized_networks) {
      if (!state_.networks.contains(apni)) {
        return Status::failure("NotFound", "unknown network " + apni.value);
      }
    }
    // Re-registration updates governance metadata; active grants persist.
    const auto it = state_.datasets.find(meta.dataset_id);
    if (it != state_.datasets.end()) meta.rtd_holders = it->second.rtd_holders;
    state_.datasets[meta.dataset_id] = std::move(meta);
    return Status::success();
  }

  if (action == "grant_right_to_distribute") {
    auto dataset = parse_dataset_id(payload.value("dataset_id", ""));
    auto apid = parse_apid(payload.value("apid", ""));
    if (!dataset.ok()) return dataset.error();
    if (!apid.ok()) return apid.error();
    const auto ds_it = state_.datasets.find(dataset.value());
    if (ds_it == state_.datasets.end()) {
      return Status::failure("NotFound", "unknown dataset " + dataset.value().value);
    }
    if (!state_.platforms.contains(apid.value())) {
      return Status::failure("NotFound", "unknown platform " + apid.value().value);
    }
    for (const auto& [id, grant] : grants_) {
      if (grant.dataset_id == dataset.value() && grant.apid == apid.value() &&
          !grant.revoked_at) {
        return Status::failure("DuplicateGrant",
                               "active grant already exists: " + id);
      }
    }
    RtdGrant grant;
    grant.grant_id = "grant:" + std::to_string(seq);
    grant.dataset_id = dataset.value();
    grant.apid = apid.value();
    grant.granted_at = at;
    grant.granted_by = actor;
    ds_it->second.rtd_holders.insert(apid.value());
    grants_.emplace(grant.grant_id, std::move(grant));
    return Status::success();
  }

  if (action == "revoke_right_to_distribute") {
    auto dataset = parse_dataset_id(payload.value("dataset_id", ""));
    auto apid = parse_apid(payload.value("apid", ""));
    if (!dataset.ok()) return dataset.error();
    if (!apid.ok()) return apid.error();
    for (auto& [id, grant] : grants_) {
      if (grant.dataset_id == dataset.value() && grant.apid == apid.value() &&
          !grant.revoked_at) {
        grant.revoked_at = at;
        state_.datasets.at(dataset.value()).rtd_holders.erase(apid.value());
        return Status::success();
      }
    }
    return Status::failure("NoSuchGrant", "no active grant for " + apid.value().value +
                                              " on " + dataset.value().value);
  }

  if (action == "authorize_user") {
    auto auth_r = user_authorization_from_json(payload.value("authorization", json::object()));
    if (!auth_r.ok()) return auth_r.error();
    UserAuthorization auth = std::move(auth_r).value();
    if (!state_.datasets.contains(auth.dataset_id)) {
      return Status::failure("NotFound", "unknown dataset " + auth.dataset_id.value);
    }
    if (state_.user_authorizations.contains(auth.authorization_id)) {
      return Status::failure("DuplicateAuthorization",
                             auth.authorization_id + " already exists");
    }
    if (!(auth.granted_at < auth.expires_at)) {
      return Status::failure("BadInterval", "expires_at must be after granted_at");
    }
    if (auth.revoked) {
      return Status::failure("BadField", "new authorization cannot be revoked");
    }
    state_.user_authorizations.emplace(auth.authorization_id, std::move(auth));
    return Status::success();
  }

  if (action == "revoke_user_authorization") {
    const std::string id = payload.value("authorization_id", "");
    const auto it = state_.user_authorizations.find(id);
    if (it == state_.user_authorizations.end()) {
      return Status::failure("NotFound", "unknown authorization " + id);
    }
    if (it->second.revoked) {
      return Status::failure("AlreadyRevoked", id + " already revoked");
    }
    it->second.revoked = true;
    return Status::success();
  }

  if (action == "evaluate_transfer") {
    return Status::success();  // decision record; no state to change
  }

  return Status::failure("UnknownAction", "unrecognized action '" + action + "'");
}

Result<std::uint64_t> GovernanceStore::mutate(const std::string& actor, Timestamp now,
                                              const std::string& action, json payload) {
  std::lock_guard lock(mu_);
  if (!log_.empty() && now < log_.back().at) {
    return Result<std::uint64_t>::failure("StaleClock",
                                          "now precedes the last audit event");
  }
  const std::uint64_t seq = log_.size();
  if (Status s = apply(action, payload, actor, now, seq); !s.ok()) return s.error();
  AuditEvent ev;
  ev.seq = seq;
  ev.at = now;
  ev.actor = actor;
  ev.action = action;
  ev.payload = std::move(payload);
  ev.prev_hash = log_.empty() ? std::string(kGenesisHash) : log_.back().hash;
  ev.hash = sha256_hex(audit_event_canonical(ev, false));
  log_.push_back(ev);
  if (sink_) sink_(ev);
  return seq;
}

namespace {

Status to_status(Result<std::uint64_t> r) {
  if (r.ok()) return Status::success();
  return Status(r.error());
}

}  // namespace

Status GovernanceStore::register_platform(PlatformRecord rec, const std::string& actor,
                                          Timestamp now) {
  return to_status(mutate(actor, now, "register_platform", json{{"record", to_json(rec)}}));
}

Status GovernanceStore::create_network(NetworkRecord rec, const std::string& actor,
                                       Timestamp now) {
  return to_status(mutate(actor, now, "create_network", json{{"record", to_json(rec)}}));
}

Status GovernanceStore::add_platform_to_network(const Apni& apni, const Apid& apid,
                                                const std::string& actor, Timestamp now) {
  return to_status(mutate(actor, now, "add_platform_to_network",
                json{{"apni", apni.value}, {"apid", apid.value}}));
}

Status GovernanceStore::remove_platform_from_network(const Apni& apni, const Apid& apid,
                                                     const std::string& actor,
                                                     Timestamp now) {
  return to_status(mutate(actor, now, "remove_platform_from_network",
                json{{"apni", apni.value}, {"apid", apid.value}}));
}

Status GovernanceStore::submit_assessment(const Apid& apid, const std::string& framework_id,
                                          const std::string& actor, Timestamp now) {
  return to_status(mutate(actor, now, "submit_assessment",
                json{{"apid", apid.value}, {"framework_id", framework_id}}));
}

Status GovernanceStore::record_independent_assessment(const Apid& apid,
                                                      const std::string& actor,
                                                      Timestamp now) {
  return to_status(mutate(actor, now, "record_independent_assessment", json{{"apid", apid.value}}));
}

Status GovernanceStore::issue_ato(const Apid& apid, Timestamp valid_until,
                                  const std::string& actor, Timestamp now) {
  return to_status(mutate(actor, now, "issue_ato",
                json{{"apid", apid.value}, {"valid_until", render_timestamp(valid_until)}}));
}

Status GovernanceStore::record_pentest_review(const Apid& apid, const std::string& actor,
                                              Timestamp now) {
  return to_status(mutate(actor, now, "record_pentest_review", json{{"apid", apid.value}}));
}

Status GovernanceStore::revoke_ato(const Apid& apid, const std::string& actor,
                                   Timestamp now) {
  return to_status(mutate(actor, now, "revoke_ato", json{{"apid", apid.value}}));
}

Status GovernanceStore::register_dataset(DatasetSafeMetadata meta, const std::string& actor,
                                         Timestamp now) {
  return to_status(mutate(actor, now, "register_dataset", json{{"metadata", to_json(meta)}}));
}

Status GovernanceStore::grant_right_to_distribute(const DatasetId& dataset_id,
                                                  const Apid& apid,
                                                  const std::string& actor, Timestamp now) {
  return to_status(mutate(actor, now, "grant_right_to_distribute",
                json{{"dataset_id", dataset_id.value}, {"apid", apid.value}}));
}

Status GovernanceStore::revoke_right_to_distribute(const DatasetId& dataset_id,
                                                   const Apid& apid,
                                                   const std::string& actor, Timestamp now) {
  return to_status(mutate(actor, now, "revoke_right_to_distribute",
                json{{"dataset_id", dataset_id.value}, {"apid", apid.value}}));
}

Status GovernanceStore::authorize_user(UserAuthorization auth, const std::string& actor,
                                       Timestamp now) {
  return to_status(mutate(actor, now, "authorize_user", json{{"authorization", to_json(auth)}}));
}

Status GovernanceStore::revoke_user_authorization(const std::string& authorization_id,
                                                  const std::string& actor, Timestamp now) {
  return to_status(mutate(actor, now, "revoke_user_authorization",
                json{{"authorization_id", authorization_id}}));
}

Result<std::uint64_t> GovernanceStore::record_decision(json payload,
                                                       const std::string& actor,
                                                       Timestamp now) {
  return mutate(actor, now, "evaluate_transfer", std::move(payload));
}

RegistryView GovernanceStore::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::vector<AuditEvent> GovernanceStore::audit_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::uint64_t GovernanceStore::audit_size() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::string GovernanceStore::audit_log_jsonl() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const AuditEvent& ev : log_) {
    out += audit_event_canonical(ev, true);
    out += '\n';
  }
  return out;
}

std::vector<RtdGrant> GovernanceStore::grants() const {
  std::lock_guard lock(mu_);
  std::vector<RtdGrant> out;
  out.reserve(grants_.size());
  for (const auto& [id, grant] : grants_) out.push_back(grant);
  return out;
}

void GovernanceStore::set_event_sink(std::function<void(const AuditEvent&)> sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

Status replay_audit_events(const std::vector<AuditEvent>& events, GovernanceStore& out) {
  if (Status s = verify_audit_chain(events); !s.ok()) return s;
  for (const AuditEvent& ev : events) {
    if (ev.seq > 0 && ev.at < events[ev.seq - 1].at) {
      return Status::failure("InvalidTransition",
                             "timestamp regression at seq " + std::to_string(ev.seq));
    }
    Status s = out.apply(ev.action, ev.payload, ev.actor, ev.at, ev.seq);
    if (!s.ok()) {
      return Status::failure("InvalidTransition",
                             "seq " + std::to_string(ev.seq) + ": " + s.error().code +
                                 " (" + s.error().detail + ")");
    }
    out.log_.push_back(ev);
  }
  return Status::success();
}

Status replay_audit_jsonl(std::string_view jsonl, GovernanceStore& out) {
  std::vector<AuditEvent> events;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const json parsed = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) {
      return Status::failure("BrokenHashChain",
                             "unparseable audit line at seq " + std::to_string(line_no));
    }
    auto ev = audit_event_from_json(parsed);
    if (!ev.ok()) {
      return Status::failure("BrokenHashChain",
                             "malformed audit event at seq " + std::to_string(line_no) +
                                 ": " + ev.error().detail);
    }
    events.push_back(std::move(ev).value());
    ++line_no;
  }
  return replay_audit_events(events, out);
}

}  // namespace safe
