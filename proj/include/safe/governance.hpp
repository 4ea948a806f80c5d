#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe/model.hpp"
#include "safe/result.hpp"

namespace safe {

enum class AtoStatus {
  NotAuthorized,
  Active,
  SuspendedReviewOverdue,
  Expired,
  Revoked,
};

std::string_view to_string(AtoStatus status);

// Annual review window. Overdue means strictly more than 365 days since the
// last review.
inline constexpr std::int64_t kReviewWindowSeconds = 365 * kSecondsPerDay;

// Pure five-branch rule, evaluated in order:
//   revoked_at <= now                      -> Revoked
//   no ato_issued_at                       -> NotAuthorized
//   now >= ato_valid_until                 -> Expired (boundary exclusive of validity)
//   now - last_pentest_review_at > 365d    -> SuspendedReviewOverdue
//   otherwise                              -> Active
AtoStatus compute_ato_status(const AtoRecord& rec, Timestamp now);

// One audit log entry. hash = SHA-256 over the event's canonical bytes with
// the hash field set to ""; prev_hash chains to the previous entry (the first
// entry chains to 64 zeros).
struct AuditEvent {
  std::uint64_t seq = 0;
  Timestamp at;
  std::string actor;
  std::string action;
  nlohmann::json payload;
  std::string prev_hash;
  std::string hash;
};

inline constexpr std::string_view kGenesisHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

nlohmann::json audit_event_to_json(const AuditEvent& event);
Result<AuditEvent> audit_event_from_json(const nlohmann::json& j);
// Canonical bytes of the event; with_hash=false substitutes "" for the hash
// field (the preimage the hash is computed over).
std::string audit_event_canonical(const AuditEvent& event, bool with_hash);

// Chain check only (no transition validation): seq contiguous from 0,
// prev_hash linkage, self hash. Error codes: BrokenHashChain, GapInSequence.
Status verify_audit_chain(const std::vector<AuditEvent>& events);

// Event-sourced governance store. Single writer: every mutation validates,
// appends exactly one audit event, then applies it; replaying the log from
// empty reproduces the state bit-exactly. Snapshots are immutable copies.
class GovernanceStore {
 public:
  GovernanceStore() = default;
  GovernanceStore(const GovernanceStore&) = delete;
  GovernanceStore& operator=(const GovernanceStore&) = delete;

  // Platform governance.
  Status register_platform(PlatformRecord rec, const std::string& actor, Timestamp now);
  Status create_network(NetworkRecord rec, const std::string& actor, Timestamp now);
  Status add_platform_to_network(const Apni& apni, const Apid& apid,
                                 const std::string& actor, Timestamp now);
  Status remove_platform_from_network(const Apni& apni, const Apid& apid,
                                      const std::string& actor, Timestamp now);
  Status submit_assessment(const Apid& apid, const std::string& framework_id,
                           const std::string& actor, Timestamp now);
  Status record_independent_assessment(const Apid& apid, const std::string& actor,
                                       Timestamp now);
  Status issue_ato(const Apid& apid, Timestamp valid_until, const std::string& actor,
                   Timestamp now);
  Status record_pentest_review(const Apid& apid, const std::string& actor, Timestamp now);
  Status revoke_ato(const Apid& apid, const std::string& actor, Timestamp now);

  // Data governance.
  Status register_dataset(DatasetSafeMetadata meta, const std::string& actor,
                          Timestamp now);
  Status grant_right_to_distribute(const DatasetId& dataset_id, const Apid& apid,
                                   const std::string& actor, Timestamp now);
  Status revoke_right_to_distribute(const DatasetId& dataset_id, const Apid& apid,
                                    const std::string& actor, Timestamp now);
  Status authorize_user(UserAuthorization auth, const std::string& actor, Timestamp now);
  Status revoke_user_authorization(const std::string& authorization_id,
                                   const std::string& actor, Timestamp now);

  // Non-mutating audit append used by the wire layer to record transfer
  // decisions. Replays as a no-op. Returns the appended event's seq.
  Result<std::uint64_t> record_decision(nlohmann::json payload, const std::string& actor,
                                        Timestamp now);

  RegistryView snapshot() const;
  std::vector<AuditEvent> audit_log() const;
  std::uint64_t audit_size() const;
  // One canonical JSON event per line.
  std::string audit_log_jsonl() const;
  std::vector<RtdGrant> grants() const;

  // Invoked with each freshly appended event (used for file persistence).
  void set_event_sink(std::function<void(const AuditEvent&)> sink);

 private:
  Result<std::uint64_t> mutate(const std::string& actor, Timestamp now,
                               const std::string& action, nlohmann::json payload);
  Status apply(const std::string& action, const nlohmann::json& payload,
               const std::string& actor, Timestamp at, std::uint64_t seq);
  Status find_ato(const Apid& apid, AtoRecord** out);

  friend Status replay_audit_events(const std::vector<AuditEvent>& events,
                                    GovernanceStore& out);

  mutable std::mutex mu_;
  RegistryView state_;
  std::map<std::string, RtdGrant> grants_;
  std::vector<AuditEvent> log_;
  std::function<void(const AuditEvent&)> sink_;
};

// Rebuilds a store from an audit log. Errors: BrokenHashChain, GapInSequence,
// InvalidTransition; the offending seq is named in the detail.
Status replay_audit_events(const std::vector<AuditEvent>& events, GovernanceStore& out);
// Lines that fail to parse are reported as BrokenHashChain at that position.
Status replay_audit_jsonl(std::string_view jsonl, GovernanceStore& out);

}  // namespace safe
