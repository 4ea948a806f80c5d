#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe/model.hpp"
#include "safe/policy.hpp"
#include "safe/result.hpp"

namespace safe::harness {

struct PlatformSeed {
  Apid apid;
  std::string display_name;
  Arid region;
  std::string operator_name;
};

struct NetworkSeed {
  Apni apni;
  std::string authority_name;
  std::string framework_id;
  std::vector<Apid> members;
};

struct ScenarioAction {
  std::int64_t at_offset_seconds = 0;
  std::string op;
  nlohmann::json args;
};

struct Expectation {
  bool allow = false;
  std::set<ReasonCode> deny_reasons;  // exact set, compared in full
};

struct ScenarioRequest {
  std::int64_t at_offset_seconds = 0;
  DatasetId dataset_id;
  Apid source;
  Apid dest;
  std::string user_id;
  std::string authorization_id;
  Expectation expect;
};

// A declarative multi-platform run: seeds are installed at clock_start, then
// actions and requests execute in offset order (actions first at equal
// offsets). Platform and authority keys are generated from the run seed.
struct Scenario {
  std::string name;
  Timestamp clock_start;
  std::vector<PlatformSeed> platforms;
  std::vector<NetworkSeed> networks;
  std::vector<DatasetSafeMetadata> datasets;
  std::vector<ScenarioAction> actions;
  std::vector<ScenarioRequest> requests;
};

nlohmann::json scenario_to_json(const Scenario& scenario);
// Errors: ParseError, UnresolvedReference, NonMonotonicOffsets.
Result<Scenario> scenario_from_json(const nlohmann::json& j);
Result<Scenario> load_scenario(const std::string& path);

struct RequestOutcome {
  ScenarioRequest request;
  std::string actual_verdict;  // "ALLOW" | "DENY" | "ERROR"
  std::set<ReasonCode> actual_reasons;
  nlohmann::json trace = nlohmann::json::array();
  int http_status = 0;
  bool matched = false;
};

struct ScenarioReport {
  std::string scenario;
  std::vector<RequestOutcome> results;
  bool pass = false;
  std::string audit_log_digest;
  std::string error;  // non-empty when a governance action failed mid-run
};

nlohmann::json report_to_json(const ScenarioReport& report);
std::string report_human(const ScenarioReport& report);

enum class Transport {
  InProcess,     // direct handler invocation with serialized bodies
  LoopbackHttp,  // real sockets on 127.0.0.1
};

// Deterministic given (scenario, seed): the simulated clock advances by
// offsets, keys and nonces come from seeded entropy, and agents exchange
// challenge -> envelope -> transfer-request through the real wire handlers.
// audit_log_out, when given, receives the final audit log (JSON lines).
ScenarioReport run_scenario(const Scenario& scenario, std::uint64_t seed,
                            Transport transport = Transport::InProcess,
                            std::string* audit_log_out = nullptr);

// The four interoperability blockers, bundled: extend-boundary,
// single-distributor, environment-vetting, network-trust.
std::vector<Scenario> builtin_blocker_scenarios();

}  // namespace safe::harness
