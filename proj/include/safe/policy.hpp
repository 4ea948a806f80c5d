#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe/attestation.hpp"
#include "safe/governance.hpp"
#include "safe/model.hpp"

namespace safe {

// Stable wire spellings; these strings are the contract.
enum class ReasonCode {
  DatasetUnknown,
  PlatformUnknown,
  UserNotAuthorized,
  UserAuthorizationExpired,
  SourceNoRightToDistribute,
  DestNotInAuthorizedNetwork,
  DestAtoInvalid,
  RegionNotAuthorized,
  AttestationInvalid,
  AttestationApidMismatch,
};

std::string_view to_string(ReasonCode code);
std::optional<ReasonCode> reason_code_from_string(std::string_view s);

// "May dataset D, hosted on source, be transferred to user U's environment on
// dest at time now?" Self-transfer (source == dest) is legal.
struct TransferQuery {
  DatasetId dataset_id;
  Apid source_apid;
  Apid dest_apid;
  std::string user_id;
  std::string authorization_id;
  Timestamp now;
  // Absent means the attestation layer did not verify an envelope; the
  // attestation check then fails for cross-platform transfers.
  std::optional<VerifiedIdentity> verified_attestation;
};

inline constexpr std::array<std::string_view, 6> kCheckNames = {
    "resolution",
    "user-authorization",
    "source-right-to-distribute",
    "destination-authorized-environment",
    "region",
    "attestation",
};

struct CheckResult {
  std::string check_name;
  bool passed = false;
  std::optional<ReasonCode> reason;  // present iff !passed
  std::string detail;
};

struct Decision {
  bool allow = false;
  std::vector<ReasonCode> reasons;  // failing trace entries' codes, in trace order
  std::array<CheckResult, 6> trace;
  TransferQuery query_echo;
  Timestamp decided_at;
};

using AtoStatusFn = std::function<AtoStatus(const Apid&)>;

// Borrows the view; keep it alive for the lifetime of the returned function.
AtoStatusFn make_ato_status_fn(const RegistryView& view, Timestamp now);

// Thrown only when the referential-closure precondition on the view is
// violated (a reachable reference fails to resolve during evaluation).
class MalformedViewError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs all six checks in fixed order with no short-circuit so a DENY trace is
// complete. Pure: identical inputs yield identical decisions.
Decision evaluate_transfer(const TransferQuery& query, const RegistryView& view,
                           const AtoStatusFn& ato_status_of);

// One line per check plus a final verdict line (7 lines total).
std::string render_trace(const Decision& decision);

nlohmann::json to_json(const TransferQuery& query);
nlohmann::json to_json(const CheckResult& check);
nlohmann::json to_json(const Decision& decision);

}  // namespace safe
