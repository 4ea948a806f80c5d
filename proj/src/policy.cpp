#include "safe/policy.hpp"

namespace safe {

using nlohmann::json;

std::string_view to_string(ReasonCode code) {
  switch (code) {
    case ReasonCode::DatasetUnknown: return "DATASET_UNKNOWN";
    case ReasonCode::PlatformUnknown: return "PLATFORM_UNKNOWN";
    case ReasonCode::UserNotAuthorized: return "USER_NOT_AUTHORIZED";
    case ReasonCode::UserAuthorizationExpired: return "USER_AUTHORIZATION_EXPIRED";
    case ReasonCode::SourceNoRightToDistribute: return "SOURCE_NO_RIGHT_TO_DISTRIBUTE";
    case ReasonCode::DestNotInAuthorizedNetwork: return "DEST_NOT_IN_AUTHORIZED_NETWORK";
    case ReasonCode::DestAtoInvalid: return "DEST_ATO_INVALID";
    case ReasonCode::RegionNotAuthorized: return "REGION_NOT_AUTHORIZED";
    case ReasonCode::AttestationInvalid: return "ATTESTATION_INVALID";
    case ReasonCode::AttestationApidMismatch: return "ATTESTATION_APID_MISMATCH";
  }
  return "UNKNOWN";
}

std::optional<ReasonCode> reason_code_from_string(std::string_view s) {
  static constexpr std::array<ReasonCode, 10> kAll = {
      ReasonCode::DatasetUnknown,        ReasonCode::PlatformUnknown,
      ReasonCode::UserNotAuthorized,     ReasonCode::UserAuthorizationExpired,
      ReasonCode::SourceNoRightToDistribute,
      ReasonCode::DestNotInAuthorizedNetwork,
      ReasonCode::DestAtoInvalid,        ReasonCode::RegionNotAuthorized,
      ReasonCode::AttestationInvalid,    ReasonCode::AttestationApidMismatch,
  };
  for (const ReasonCode code : kAll) {
    if (to_string(code) == s) return code;
  }
  return std::nullopt;
}

AtoStatusFn make_ato_status_fn(const RegistryView& view, Timestamp now) {
  return [&view, now](const Apid& apid) {
    const auto it = view.atos.find(apid);
    if (it == view.atos.end()) return AtoStatus::NotAuthorized;
    return compute_ato_status(it->second, now);
  };
}

namespace {

CheckResult pass(std::size_t idx, std::string detail) {
  return CheckResult{std::string(kCheckNames[idx]), true, std::nullopt, std::move(detail)};
}

CheckResult fail(std::size_t idx, ReasonCode reason, std::string detail) {
  return CheckResult{std::string(kCheckNames[idx]), false, reason, std::move(detail)};
}

CheckResult not_evaluable(std::size_t idx, ReasonCode resolution_reason) {
  return fail(idx, resolution_reason, "not evaluable: required entity failed to resolve");
}

}  // namespace

Decision evaluate_transfer(const TransferQuery& query, const RegistryView& view,
                           const AtoStatusFn& ato_status_of) {
  Decision decision;
  decision.query_echo = query;
  decision.decided_at = query.now;

  const auto dataset_it = view.datasets.find(query.dataset_id);
  const bool dataset_known = dataset_it != view.datasets.end();
  const auto source_it = view.platforms.find(query.source_apid);
  const bool source_known = source_it != view.platforms.end();
  const auto dest_it = view.platforms.find(query.dest_apid);
  const bool dest_known = dest_it != view.platforms.end();
  const bool self_transfer = query.source_apid == query.dest_apid;

  // Check 1: resolution. A missing dataset dominates the reported reason;
  // downstream checks that depend on a missing entity fail with the same code.
  if (dataset_known && source_known && dest_known) {
    decision.trace[0] =
        pass(0, "dataset, source platform and destination platform resolved");
  } else if (!dataset_known) {
    decision.trace[0] =
        fail(0, ReasonCode::DatasetUnknown, "unknown dataset " + query.dataset_id.value);
  } else {
    const std::string which = !source_known ? query.source_apid.value
                                            : query.dest_apid.value;
    decision.trace[0] = fail(0, ReasonCode::PlatformUnknown, "unknown platform " + which);
  }

  // Check 2: user authorization (needs the dataset).
  if (!dataset_known) {
    decision.trace[1] = not_evaluable(1, ReasonCode::DatasetUnknown);
  } else {
    const auto auth_it = view.user_authorizations.find(query.authorization_id);
    if (auth_it == view.user_authorizations.end()) {
      decision.trace[1] = fail(1, ReasonCode::UserNotAuthorized,
                               "no authorization " + query.authorization_id);
    } else {
      const UserAuthorization& auth = auth_it->second;
      if (auth.user_id != query.user_id || auth.dataset_id != query.dataset_id) {
        decision.trace[1] = fail(1, ReasonCode::UserNotAuthorized,
                                 query.authorization_id +
                                     " does not cover this user and dataset");
      } else if (auth.revoked) {
        decision.trace[1] =
            fail(1, ReasonCode::UserNotAuthorized, query.authorization_id + " is revoked");
      } else if (query.now >= auth.expires_at) {
        decision.trace[1] = fail(1, ReasonCode::UserAuthorizationExpired,
                                 query.authorization_id + " expired at " +
                                     render_timestamp(auth.expires_at));
      } else if (query.now < auth.granted_at) {
        decision.trace[1] = fail(1, ReasonCode::UserNotAuthorized,
                                 query.authorization_id + " is not yet active");
      } else {
        decision.trace[1] = pass(1, query.user_id + " authorized via " +
                                        query.authorization_id);
      }
    }
  }

  // Check 3: source right-to-distribute (needs dataset and source).
  if (!dataset_known) {
    decision.trace[2] = not_evaluable(2, ReasonCode::DatasetUnknown);
  } else if (!source_known) {
    decision.trace[2] = not_evaluable(2, ReasonCode::PlatformUnknown);
  } else if (dataset_it->second.rtd_holders.contains(query.source_apid)) {
    decision.trace[2] =
        pass(2, query.source_apid.value + " holds the right to distribute");
  } else {
    decision.trace[2] = fail(2, ReasonCode::SourceNoRightToDistribute,
                             query.source_apid.value +
                                 " holds no active right-to-distribute grant for " +
                                 query.dataset_id.value);
  }

  // Check 4: destination is in an authorized network AND its ATO is Active.
  if (!dataset_known) {
    decision.trace[3] = not_evaluable(3, ReasonCode::DatasetUnknown);
  } else if (!dest_known) {
    decision.trace[3] = not_evaluable(3, ReasonCode::PlatformUnknown);
  } else {
    bool in_network = false;
    for (const Apni& apni : dataset_it->second.authorized_networks) {
      const auto net_it = view.networks.find(apni);
      if (net_it == view.networks.end()) {
        throw MalformedViewError("authorized network " + apni.value +
                                 " does not resolve in the registry view");
      }
      if (net_it->second.members.contains(query.dest_apid)) {
        in_network = true;
        break;
      }
    }
    if (!in_network) {
      decision.trace[3] = fail(3, ReasonCode::DestNotInAuthorizedNetwork,
                               query.dest_apid.value +
                                   " is in none of the dataset's authorized networks");
    } else {
      const AtoStatus status = ato_status_of(query.dest_apid);
      if (status == AtoStatus::Active) {
        decision.trace[3] = pass(3, query.dest_apid.value +
                                        " is in an authorized network with an active ATO");
      } else {
        decision.trace[3] = fail(3, ReasonCode::DestAtoInvalid,
                                 query.dest_apid.value + " ATO status is " +
                                     std::string(to_string(status)));
      }
    }
  }

  // Check 5: regional restrictions (absent list = unrestricted; empty = deny).
  if (!dataset_known) {
    decision.trace[4] = not_evaluable(4, ReasonCode::DatasetUnknown);
  } else if (!dest_known) {
    decision.trace[4] = not_evaluable(4, ReasonCode::PlatformUnknown);
  } else if (!dataset_it->second.region_restrictions.has_value()) {
    decision.trace[4] = pass(4, "dataset has no regional restriction");
  } else {
    const auto& allowed = *dataset_it->second.region_restrictions;
    const Arid& dest_region = dest_it->second.region;
    if (allowed.contains(dest_region) || allowed.contains(Arid{"arid:global"})) {
      decision.trace[4] = pass(4, dest_region.value + " is an authorized region");
    } else {
      decision.trace[4] = fail(4, ReasonCode::RegionNotAuthorized,
                               dest_region.value + " is not an authorized region");
    }
  }

  // Check 6: attestation. Mandatory for cross-platform transfers; vacuous for
  // self-transfer. Registry knowledge of the destination is not proof of
  // possession, so an absent attestation fails.
  if (self_transfer) {
    decision.trace[5] = pass(5, "self-transfer: attestation passes vacuously");
  } else if (!query.verified_attestation.has_value()) {
    decision.trace[5] = fail(5, ReasonCode::AttestationInvalid,
                             "no verified attestation for the destination");
  } else {
    const VerifiedIdentity& identity = *query.verified_attestation;
    if (identity.apid != query.dest_apid) {
      decision.trace[5] = fail(5, ReasonCode::AttestationApidMismatch,
                               "attested identity " + identity.apid.value +
                                   " is not the destination " + query.dest_apid.value);
    } else if (!dataset_known) {
      decision.trace[5] = not_evaluable(5, ReasonCode::DatasetUnknown);
    } else {
      bool intersects = false;
      for (const Apni& apni : identity.apnis) {
        if (dataset_it->second.authorized_networks.contains(apni)) {
          intersects = true;
          break;
        }
      }
      if (intersects) {
        decision.trace[5] = pass(5, "attested memberships intersect the authorized networks");
      } else {
        decision.trace[5] = fail(5, ReasonCode::AttestationInvalid,
                                 "attested memberships do not intersect the dataset's "
                                 "authorized networks");
      }
    }
  }

  decision.allow = true;
  for (const CheckResult& check : decision.trace) {
    if (!check.passed) {
      decision.allow = false;
      decision.reasons.push_back(*check.reason);
    }
  }
  return decision;
}

std::string render_trace(const Decision& decision) {
  std::string out;
  for (std::size_t i = 0; i < decision.trace.size(); ++i) {
    const CheckResult& check = decision.trace[i];
    out += std::to_string(i + 1);
    out += ". ";
    out += check.passed ? "PASS " : "FAIL ";
    out += check.check_name;
    if (!check.passed) {
      out += " [";
      out += to_string(*check.reason);
      out += "]";
    }
    out += ": ";
    out += check.detail;
    out += '\n';
  }
  if (decision.allow) {
    out += "VERDICT: ALLOW";
  } else {
    out += "VERDICT: DENY (";
    for (std::size_t i = 0; i < decision.reasons.size(); ++i) {
      if (i > 0) out += ", ";
      out += to_string(decision.reasons[i]);
    }
    out += ")";
  }
  return out;
}

json to_json(const TransferQuery& query) {
  json j{{"dataset_id", query.dataset_id.value},
         {"source_apid", query.source_apid.value},
         {"dest_apid", query.dest_apid.value},
         {"user_id", query.user_id},
         {"authorization_id", query.authorization_id},
         {"now", render_timestamp(query.now)}};
  if (query.verified_attestation) {
    j["verified_attestation"] = to_json(*query.verified_attestation);
  }
  return j;
}

json to_json(const CheckResult& check) {
  json j{{"check", check.check_name}, {"passed", check.passed}, {"detail", check.detail}};
  if (check.reason) j["reason"] = std::string(to_string(*check.reason));
  return j;
}

json to_json(const Decision& decision) {
  json reasons = json::array();
  for (const ReasonCode code : decision.reasons) {
    reasons.push_back(std::string(to_string(code)));
  }
  json trace = json::array();
  for (const CheckResult& check : decision.trace) trace.push_back(to_json(check));
  return json{{"decision", decision.allow ? "ALLOW" : "DENY"},
              {"reasons", reasons},
              {"trace", trace},
              {"query", to_json(decision.query_echo)},
              {"decided_at", render_timestamp(decision.decided_at)}};
}

}  // namespace safe
