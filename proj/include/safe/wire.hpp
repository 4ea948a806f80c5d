#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "safe/attestation.hpp"
#include "safe/crypto.hpp"
#include "safe/governance.hpp"
#include "safe/policy.hpp"

namespace safe::wire {

inline constexpr std::string_view kServiceVersion = "0.1.0";
inline constexpr std::size_t kMaxBodyBytes = 64 * 1024;

// Transport-independent request/response. The scenario harness invokes
// handle() directly; `safe ... serve` adapts the same handlers onto HTTP, so
// the wire bytes are identical either way.
struct WireRequest {
  std::string method;  // GET | POST | DELETE
  std::string path;    // path with optional ?query
  std::string body;
  std::string bearer_token;
};

struct WireResponse {
  int status = 0;
  std::string body;  // canonical JSON
};

using Clock = std::function<Timestamp()>;

WireResponse error_response(int status, std::string_view code, std::string_view detail);
int status_for_error(const Error& err);

// Registry administration + dry-run decision endpoint + audit access.
//
//   POST   /registry/v1/platforms
//   POST   /registry/v1/networks
//   POST   /registry/v1/networks/{apni}/members
//   DELETE /registry/v1/networks/{apni}/members/{apid}
//   POST   /registry/v1/assessments              {"apid", "framework_id"} or
//                                                {"apid", "stage":"independent"}
//   POST   /registry/v1/atos                     {"apid", "valid_until"}
//   POST   /registry/v1/atos/{apid}/reviews
//   POST   /registry/v1/atos/{apid}/revocation
//   POST   /registry/v1/datasets
//   POST   /registry/v1/datasets/{id}/rtd-grants {"apid"}
//   DELETE /registry/v1/datasets/{id}/rtd-grants/{apid}
//   POST   /registry/v1/users/authorizations
//   DELETE /registry/v1/users/authorizations/{id}
//   POST   /registry/v1/decisions:evaluate
//   GET    /registry/v1/audit?offset=N&limit=N
//
// Mutation bodies may carry optional "actor" and "now" overrides; the clock
// default keeps single-process deployments consistent.
class RegistryService {
 public:
  RegistryService(std::shared_ptr<GovernanceStore> store, Clock clock,
                  std::string admin_token = "");

  WireResponse handle(const WireRequest& req);

  GovernanceStore& store() { return *store_; }

 private:
  WireResponse handle_checked(const WireRequest& req);
  WireResponse handle_post(const std::string& path, const nlohmann::json& body,
                           const std::string& actor, Timestamp now);
  WireResponse handle_delete(const std::string& path, const std::string& actor,
                             Timestamp now);
  WireResponse handle_audit(const std::string& query);
  WireResponse evaluate(const nlohmann::json& body, Timestamp fallback_now);

  std::shared_ptr<GovernanceStore> store_;
  Clock clock_;
  std::string admin_token_;
};

struct AgentIdentity {
  Apid apid;
  Arid region;
  KeyPair key;
  std::vector<PlatformCertificate> certificates;
  // Absent = the agent hosts every dataset in the registry view.
  std::optional<std::set<DatasetId>> hosted_datasets;
};

// The SAFE platform API one platform serves to its peers.
//
//   GET  /safe/v1/platform
//   GET  /safe/v1/datasets/{dataset_id}
//   POST /safe/v1/transfer-challenges
//   POST /safe/v1/transfer-requests
//
// Challenges are single-use and expire after the freshness window. Every
// transfer decision is appended to the governance audit log.
class PlatformAgent {
 public:
  PlatformAgent(AgentIdentity identity, std::shared_ptr<GovernanceStore> store,
                Clock clock, std::shared_ptr<EntropySource> entropy,
                std::int64_t freshness_window_seconds = kDefaultFreshnessWindowSeconds);

  WireResponse handle(const WireRequest& req);

  const AgentIdentity& identity() const { return identity_; }
  std::int64_t freshness_window_seconds() const { return freshness_window_seconds_; }

 private:
  WireResponse handle_checked(const WireRequest& req);
  WireResponse platform_metadata();
  WireResponse dataset_metadata(const std::string& raw_id);
  WireResponse issue_challenge();
  WireResponse transfer_request(const std::string& body);
  bool hosts(const DatasetId& id, const RegistryView& view) const;

  AgentIdentity identity_;
  std::shared_ptr<GovernanceStore> store_;
  Clock clock_;
  std::shared_ptr<EntropySource> entropy_;
  std::int64_t freshness_window_seconds_;

  std::mutex mu_;
  std::map<std::string, Timestamp> challenges_;  // nonce -> expires_at
};

}  // namespace safe::wire
