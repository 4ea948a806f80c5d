#include "safe/harness.hpp"

#include <atomic>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "safe/http_adapter.hpp"

#include "safe/attestation.hpp"
#include "safe/canonical.hpp"
#include "safe/crypto.hpp"
#include "safe/governance.hpp"
#include "safe/wire.hpp"

namespace safe::harness {

using nlohmann::json;

namespace {

constexpr std::int64_t kCertValiditySeconds = 3650 * kSecondsPerDay;

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

json scenario_to_json(const Scenario& scenario) {
  json platforms = json::array();
  for (const PlatformSeed& p : scenario.platforms) {
    platforms.push_back(json{{"apid", p.apid.value},
                             {"display_name", p.display_name},
                             {"region", p.region.value},
                             {"operator", p.operator_name}});
  }
  json networks = json::array();
  for (const NetworkSeed& n : scenario.networks) {
    json members = json::array();
    for (const Apid& apid : n.members) members.push_back(apid.value);
    networks.push_back(json{{"apni", n.apni.value},
                            {"authority_name", n.authority_name},
                            {"framework_id", n.framework_id},
                            {"members", members}});
  }
  json datasets = json::array();
  for (const DatasetSafeMetadata& meta : scenario.datasets) {
    json d = to_json(meta);
    d.erase("rtd_holders");  // grants are scenario actions, never seed state
    datasets.push_back(d);
  }
  json actions = json::array();
  for (const ScenarioAction& a : scenario.actions) {
    actions.push_back(json{{"at_offset_seconds", a.at_offset_seconds},
                           {"op", a.op},
                           {"args", a.args}});
  }
  json requests = json::array();
  for (const ScenarioRequest& r : scenario.requests) {
    json expect;
    if (r.expect.allow) {
      expect = json{{"verdict", "ALLOW"}};
    } else {
      json reasons = json::array();
      for (const ReasonCode code : r.expect.deny_reasons) {
        reasons.push_back(std::string(to_string(code)));
      }
      expect = json{{"verdict", "DENY"}, {"reasons", reasons}};
    }
    requests.push_back(json{{"at_offset_seconds", r.at_offset_seconds},
                            {"dataset_id", r.dataset_id.value},
                            {"source", r.source.value},
                            {"dest", r.dest.value},
                            {"user_id", r.user_id},
                            {"authorization_id", r.authorization_id},
                            {"expect", expect}});
  }
  return json{{"name", scenario.name},
              {"clock_start", render_timestamp(scenario.clock_start)},
              {"platforms", platforms},
              {"networks", networks},
              {"datasets", datasets},
              {"actions", actions},
              {"requests", requests}};
}

namespace {

Result<Scenario> parse_error(std::string detail) {
  return Result<Scenario>::failure("ParseError", std::move(detail));
}

Result<Scenario> unresolved(std::string detail) {
  return Result<Scenario>::failure("UnresolvedReference", std::move(detail));
}

struct KnownEntities {
  std::set<Apid> platforms;
  std::set<Apni> networks;
  std::set<DatasetId> datasets;
  std::set<std::string> authorizations;
};

// Static reference check for one action, updating the known-entity sets the
// way executing it would.
Status check_action(const ScenarioAction& action, KnownEntities& known) {
  const json& args = action.args;
  const auto need_platform = [&](const std::string& raw) -> Status {
    auto apid = parse_apid(raw);
    if (!apid.ok()) return Status(apid.error());
    if (!known.platforms.contains(apid.value())) {
      return Status::failure("UnresolvedReference", "unknown platform " + raw);
    }
    return Status::success();
  };
  const auto need_dataset = [&](const std::string& raw) -> Status {
    auto id = parse_dataset_id(raw);
    if (!id.ok()) return Status(id.error());
    if (!known.datasets.contains(id.value())) {
      return Status::failure("UnresolvedReference", "unknown dataset " + raw);
    }
    return Status::success();
  };

  if (action.op == "add_platform_to_network" ||
      action.op == "remove_platform_from_network") {
    auto apni = parse_apni(args.value("apni", ""));
    if (!apni.ok()) return Status(apni.error());
    if (!known.networks.contains(apni.value())) {
      return Status::failure("UnresolvedReference",
                             "unknown network " + args.value("apni", ""));
    }
    return need_platform(args.value("apid", ""));
  }
  if (action.op == "submit_assessment" || action.op == "record_independent_assessment" ||
      action.op == "record_pentest_review" || action.op == "revoke_ato") {
    return need_platform(args.value("apid", ""));
  }
  if (action.op == "issue_ato") {
    if (Status s = need_platform(args.value("apid", "")); !s.ok()) return s;
    auto ts = parse_timestamp(args.value("valid_until", ""));
    if (!ts.ok()) return Status(ts.error());
    return Status::success();
  }
  if (action.op == "register_dataset") {
    auto meta = dataset_metadata_from_json(args.value("metadata", json::object()));
    if (!meta.ok()) return Status(meta.error());
    if (!meta.value().rtd_holders.empty()) {
      return Status::failure("ParseError", "dataset seeds cannot carry rtd_holders");
    }
    for (const Apni& apni : meta.value().authorized_networks) {
      if (!known.networks.contains(apni)) {
        return Status::failure("UnresolvedReference", "unknown network " + apni.value);
      }
    }
    known.datasets.insert(meta.value().dataset_id);
    return Status::success();
  }
  if (action.op == "grant_right_to_distribute" ||
      action.op == "revoke_right_to_distribute") {
    if (Status s = need_dataset(args.value("dataset_id", "")); !s.ok()) return s;
    return need_platform(args.value("apid", ""));
  }
  if (action.op == "authorize_user") {
    auto auth = user_authorization_from_json(args.value("authorization", json::object()));
    if (!auth.ok()) return Status(auth.error());
    if (Status s = need_dataset(auth.value().dataset_id.value); !s.ok()) return s;
    known.authorizations.insert(auth.value().authorization_id);
    return Status::success();
  }
  if (action.op == "revoke_user_authorization") {
    const std::string id = args.value("authorization_id", "");
    if (!known.authorizations.contains(id)) {
      return Status::failure("UnresolvedReference", "unknown authorization " + id);
    }
    return Status::success();
  }
  return Status::failure("ParseError", "unsupported scenario op '" + action.op + "'");
}

}  // namespace

Result<Scenario> scenario_from_json(const json& j) {
  if (!j.is_object()) return parse_error("scenario must be a JSON object");
  Scenario scenario;
  if (!j.contains("name") || !j["name"].is_string()) return parse_error("missing 'name'");
  scenario.name = j["name"].get<std::string>();
  auto start = parse_timestamp(j.value("clock_start", ""));
  if (!start.ok()) return parse_error("clock_start: " + start.error().detail);
  scenario.clock_start = start.value();

  for (const char* key : {"platforms", "networks", "datasets", "actions", "requests"}) {
    if (j.contains(key) && !j[key].is_array()) {
      return parse_error(std::string("'") + key + "' must be a list");
    }
  }

  KnownEntities known;
  for (const json& p : j.value("platforms", json::array())) {
    PlatformSeed seed;
    auto apid = parse_apid(p.value("apid", ""));
    if (!apid.ok()) return parse_error("platform apid: " + apid.error().detail);
    seed.apid = std::move(apid).value();
    auto region = parse_arid(p.value("region", ""));
    if (!region.ok()) return parse_error("platform region: " + region.error().detail);
    if (region.value().is_global()) {
      return parse_error("platform region must be concrete, not arid:global");
    }
    seed.region = std::move(region).value();
    seed.display_name = p.value("display_name", "");
    seed.operator_name = p.value("operator", "");
    if (!known.platforms.insert(seed.apid).second) {
      return parse_error("duplicate platform seed " + seed.apid.value);
    }
    scenario.platforms.push_back(std::move(seed));
  }

  for (const json& n : j.value("networks", json::array())) {
    NetworkSeed seed;
    auto apni = parse_apni(n.value("apni", ""));
    if (!apni.ok()) return parse_error("network apni: " + apni.error().detail);
    seed.apni = std::move(apni).value();
    seed.authority_name = n.value("authority_name", "");
    seed.framework_id = n.value("framework_id", "");
    for (const json& m : n.value("members", json::array())) {
      auto apid = parse_apid(m.is_string() ? m.get<std::string>() : "");
      if (!apid.ok()) return parse_error("network member: " + apid.error().detail);
      if (!known.platforms.contains(apid.value())) {
        return unresolved("network member " + apid.value().value + " is not declared");
      }
      seed.members.push_back(std::move(apid).value());
    }
    if (!known.networks.insert(seed.apni).second) {
      return parse_error("duplicate network seed " + seed.apni.value);
    }
    scenario.networks.push_back(std::move(seed));
  }

  for (const json& d : j.value("datasets", json::array())) {
    auto meta = dataset_metadata_from_json(d);
    if (!meta.ok()) return parse_error("dataset: " + meta.error().detail);
    if (!meta.value().rtd_holders.empty()) {
      return parse_error("dataset seeds cannot carry rtd_holders; grant via actions");
    }
    for (const Apni& apni : meta.value().authorized_networks) {
      if (!known.networks.contains(apni)) {
        return unresolved("dataset authorizes undeclared network " + apni.value);
      }
    }
    if (!known.datasets.insert(meta.value().dataset_id).second) {
      return parse_error("duplicate dataset seed " + meta.value().dataset_id.value);
    }
    scenario.datasets.push_back(std::move(meta).value());
  }

  std::int64_t last_offset = 0;
  for (const json& a : j.value("actions", json::array())) {
    ScenarioAction action;
    if (!a.contains("at_offset_seconds") || !a["at_offset_seconds"].is_number_integer()) {
      return parse_error("action requires integer at_offset_seconds");
    }
    action.at_offset_seconds = a["at_offset_seconds"].get<std::int64_t>();
    if (action.at_offset_seconds < 0) return parse_error("offsets must be >= 0");
    if (!scenario.actions.empty() && action.at_offset_seconds < last_offset) {
      return Result<Scenario>::failure("NonMonotonicOffsets",
                                       "action offsets must be non-decreasing");
    }
    last_offset = action.at_offset_seconds;
    action.op = a.value("op", "");
    action.args = a.value("args", json::object());
    scenario.actions.push_back(std::move(action));
  }

  last_offset = 0;
  for (const json& r : j.value("requests", json::array())) {
    ScenarioRequest request;
    if (!r.contains("at_offset_seconds") || !r["at_offset_seconds"].is_number_integer()) {
      return parse_error("request requires integer at_offset_seconds");
    }
    request.at_offset_seconds = r["at_offset_seconds"].get<std::int64_t>();
    if (request.at_offset_seconds < 0) return parse_error("offsets must be >= 0");
    if (!scenario.requests.empty() && request.at_offset_seconds < last_offset) {
      return Result<Scenario>::failure("NonMonotonicOffsets",
                                       "request offsets must be non-decreasing");
    }
    last_offset = request.at_offset_seconds;
    auto dataset = parse_dataset_id(r.value("dataset_id", ""));
    if (!dataset.ok()) return parse_error("request dataset_id: " + dataset.error().detail);
    request.dataset_id = std::move(dataset).value();
    auto source = parse_apid(r.value("source", ""));
    if (!source.ok()) return parse_error("request source: " + source.error().detail);
    request.source = std::move(source).value();
    auto dest = parse_apid(r.value("dest", ""));
    if (!dest.ok()) return parse_error("request dest: " + dest.error().detail);
    request.dest = std::move(dest).value();
    request.user_id = r.value("user_id", "");
    request.authorization_id = r.value("authorization_id", "");
    const json expect = r.value("expect", json::object());
    const std::string verdict = expect.value("verdict", "");
    if (verdict == "ALLOW") {
      request.expect.allow = true;
    } else if (verdict == "DENY") {
      request.expect.allow = false;
      if (!expect.contains("reasons") || !expect["reasons"].is_array()) {
        return parse_error("DENY expectation requires 'reasons'");
      }
      for (const json& reason : expect["reasons"]) {
        auto code = reason_code_from_string(reason.is_string()
                                                ? reason.get<std::string>()
                                                : "");
        if (!code) return parse_error("unknown reason code in expectation");
        request.expect.deny_reasons.insert(*code);
      }
    } else {
      return parse_error("expect.verdict must be ALLOW or DENY");
    }
    scenario.requests.push_back(std::move(request));
  }

  // Chronological reference check: actions execute before requests that share
  // an offset.
  std::size_t ai = 0, ri = 0;
  while (ai < scenario.actions.size() || ri < scenario.requests.size()) {
    const bool take_action =
        ai < scenario.actions.size() &&
        (ri >= scenario.requests.size() ||
         scenario.actions[ai].at_offset_seconds <=
             scenario.requests[ri].at_offset_seconds);
    if (take_action) {
      if (Status s = check_action(scenario.actions[ai], known); !s.ok()) {
        return Result<Scenario>(Error{s.error().code == "UnresolvedReference" ||
                                              s.error().code == "ParseError" ||
                                              s.error().code == "NonMonotonicOffsets"
                                          ? s.error().code
                                          : "ParseError",
                                      "action " + std::to_string(ai) + ": " +
                                          s.error().detail});
      }
      ++ai;
      continue;
    }
    const ScenarioRequest& req = scenario.requests[ri];
    if (!known.datasets.contains(req.dataset_id)) {
      return unresolved("request references unknown dataset " + req.dataset_id.value);
    }
    if (!known.platforms.contains(req.source)) {
      return unresolved("request references unknown platform " + req.source.value);
    }
    if (!known.platforms.contains(req.dest)) {
      return unresolved("request references unknown platform " + req.dest.value);
    }
    if (!known.authorizations.contains(req.authorization_id)) {
      return unresolved("request references unknown authorization " +
                        req.authorization_id);
    }
    ++ri;
  }

  return scenario;
}

Result<Scenario> load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Result<Scenario>::failure("IoError", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  json parsed = json::parse(buffer.str(), nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    return parse_error(path + " is not valid JSON");
  }
  return scenario_from_json(parsed);
}

json report_to_json(const ScenarioReport& report) {
  json results = json::array();
  for (const RequestOutcome& outcome : report.results) {
    json expected;
    if (outcome.request.expect.allow) {
      expected = json{{"verdict", "ALLOW"}};
    } else {
      json reasons = json::array();
      for (const ReasonCode code : outcome.request.expect.deny_reasons) {
        reasons.push_back(std::string(to_string(code)));
      }
      expected = json{{"verdict", "DENY"}, {"reasons", reasons}};
    }
    json actual_reasons = json::array();
    for (const ReasonCode code : outcome.actual_reasons) {
      actual_reasons.push_back(std::string(to_string(code)));
    }
    results.push_back(json{
        {"at_offset_seconds", outcome.request.at_offset_seconds},
        {"dataset_id", outcome.request.dataset_id.value},
        {"source", outcome.request.source.value},
        {"dest", outcome.request.dest.value},
        {"user_id", outcome.request.user_id},
        {"authorization_id", outcome.request.authorization_id},
        {"expected", expected},
        {"actual", json{{"verdict", outcome.actual_verdict},
                        {"reasons", actual_reasons},
                        {"http_status", outcome.http_status}}},
        {"trace", outcome.trace},
        {"matched", outcome.matched}});
  }
  json j{{"scenario", report.scenario},
         {"pass", report.pass},
         {"audit_log_digest", report.audit_log_digest},
         {"results", results}};
  if (!report.error.empty()) j["error"] = report.error;
  return j;
}

std::string report_human(const ScenarioReport& report) {
  std::string out = "scenario " + report.scenario + ": " +
                    (report.pass ? "PASS" : "FAIL") + "\n";
  for (const RequestOutcome& outcome : report.results) {
    out += "  [t+" + std::to_string(outcome.request.at_offset_seconds) + "s] " +
           outcome.request.dataset_id.value + " " + outcome.request.source.value +
           " -> " + outcome.request.dest.value + ": expected " +
           (outcome.request.expect.allow ? "ALLOW" : "DENY") + ", got " +
           outcome.actual_verdict;
    if (!outcome.actual_reasons.empty()) {
      out += " (";
      bool first = true;
      for (const ReasonCode code : outcome.actual_reasons) {
        if (!first) out += ", ";
        first = false;
        out += to_string(code);
      }
      out += ")";
    }
    out += outcome.matched ? "  [ok]" : "  [MISMATCH]";
    out += '\n';
  }
  if (!report.error.empty()) out += "  error: " + report.error + "\n";
  out += "  audit digest: " + report.audit_log_digest + "\n";
  return out;
}

namespace {

using Channel = std::function<wire::WireResponse(const wire::WireRequest&)>;

struct SimClock {
  std::atomic<std::int64_t> now_seconds{0};
  Timestamp now() const { return Timestamp{now_seconds.load()}; }
};

struct LoopbackAgent {
  std::unique_ptr<httplib::Server> server;
  std::thread thread;
  int port = 0;

  ~LoopbackAgent() {
    if (server) server->stop();
    if (thread.joinable()) thread.join();
  }
};

Status apply_scenario_action(GovernanceStore& store, const ScenarioAction& action,
                             Timestamp now) {
  const json& args = action.args;
  const std::string actor = "harness";
  if (action.op == "add_platform_to_network") {
    return store.add_platform_to_network(Apni{args.value("apni", "")},
                                         Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "remove_platform_from_network") {
    return store.remove_platform_from_network(Apni{args.value("apni", "")},
                                              Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "submit_assessment") {
    return store.submit_assessment(Apid{args.value("apid", "")},
                                   args.value("framework_id", ""), actor, now);
  }
  if (action.op == "record_independent_assessment") {
    return store.record_independent_assessment(Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "issue_ato") {
    auto ts = parse_timestamp(args.value("valid_until", ""));
    if (!ts.ok()) return Status(ts.error());
    return store.issue_ato(Apid{args.value("apid", "")}, ts.value(), actor, now);
  }
  if (action.op == "record_pentest_review") {
    return store.record_pentest_review(Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "revoke_ato") {
    return store.revoke_ato(Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "register_dataset") {
    auto meta = dataset_metadata_from_json(args.value("metadata", json::object()));
    if (!meta.ok()) return Status(meta.error());
    return store.register_dataset(std::move(meta).value(), actor, now);
  }
  if (action.op == "grant_right_to_distribute") {
    return store.grant_right_to_distribute(DatasetId{args.value("dataset_id", "")},
                                           Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "revoke_right_to_distribute") {
    return store.revoke_right_to_distribute(DatasetId{args.value("dataset_id", "")},
                                            Apid{args.value("apid", "")}, actor, now);
  }
  if (action.op == "authorize_user") {
    auto auth = user_authorization_from_json(args.value("authorization", json::object()));
    if (!auth.ok()) return Status(auth.error());
    return store.authorize_user(std::move(auth).value(), actor, now);
  }
  if (action.op == "revoke_user_authorization") {
    return store.revoke_user_authorization(args.value("authorization_id", ""), actor, now);
  }
  return Status::failure("ParseError", "unsupported scenario op '" + action.op + "'");
}

}  // namespace

ScenarioReport run_scenario(const Scenario& scenario, std::uint64_t seed,
                            Transport transport, std::string* audit_log_out) {
  ScenarioReport report;
  report.scenario = scenario.name;

  auto clock = std::make_shared<SimClock>();
  clock->now_seconds = scenario.clock_start.epoch_seconds;
  const wire::Clock clock_fn = [clock]() { return clock->now(); };

  auto store = std::make_shared<GovernanceStore>();
  const std::string actor = "harness";
  const Timestamp start = scenario.clock_start;

  const auto abort_run = [&](const std::string& what, const Error& err) {
    report.pass = false;
    report.error = what + ": " + err.code + " (" + err.detail + ")";
    const std::string jsonl = store->audit_log_jsonl();
    report.audit_log_digest = sha256_hex(jsonl);
    if (audit_log_out) *audit_log_out = jsonl;
    return report;
  };

  // Key material is derived from the run seed in declaration order, so a
  // fixed (scenario, seed) pair always produces identical bytes everywhere.
  std::map<Apid, KeyPair> platform_keys;
  std::map<Apni, KeyPair> authority_keys;
  std::map<Apid, std::vector<PlatformCertificate>> platform_certs;
  {
    SeededEntropy key_entropy(seed ^ 0x5afe5afe5afe5afeULL);
    for (const PlatformSeed& p : scenario.platforms) {
      platform_keys.emplace(p.apid, generate_keypair(key_entropy));
    }
    for (const NetworkSeed& n : scenario.networks) {
      authority_keys.emplace(n.apni, generate_keypair(key_entropy));
    }
  }

  for (const PlatformSeed& p : scenario.platforms) {
    PlatformRecord rec;
    rec.apid = p.apid;
    rec.display_name = p.display_name;
    rec.region = p.region;
    rec.operator_name = p.operator_name;
    const KeyPair& key = platform_keys.at(p.apid);
    rec.public_key_id = "ed25519:" + to_hex(key.public_key).substr(0, 16);
    if (Status s = store->register_platform(std::move(rec), actor, start); !s.ok()) {
      return abort_run("register_platform " + p.apid.value, s.error());
    }
  }

  const auto issue_member_certificate = [&](const Apni& apni, const Apid& apid,
                                            Timestamp at) -> Status {
    const KeyPair& authority = authority_keys.at(apni);
    const KeyPair& platform = platform_keys.at(apid);
    auto cert = issue_certificate(authority, apid, platform.public_key, apni, at,
                                  at.plus_seconds(kCertValiditySeconds));
    if (!cert.ok()) return Status(cert.error());
    platform_certs[apid].push_back(std::move(cert).value());
    return Status::success();
  };

  for (const NetworkSeed& n : scenario.networks) {
    NetworkRecord rec;
    rec.apni = n.apni;
    rec.authority_name = n.authority_name;
    rec.framework_id = n.framework_id;
    const KeyPair& authority = authority_keys.at(n.apni);
    rec.authority_public_key.assign(authority.public_key.begin(),
                                    authority.public_key.end());
    rec.members.insert(n.members.begin(), n.members.end());
    if (Status s = store->create_network(std::move(rec), actor, start); !s.ok()) {
      return abort_run("create_network " + n.apni.value, s.error());
    }
    for (const Apid& member : n.members) {
      if (Status s = issue_member_certificate(n.apni, member, start); !s.ok()) {
        return abort_run("issue_certificate " + member.value, s.error());
      }
    }
  }

  for (const DatasetSafeMetadata& meta : scenario.datasets) {
    if (Status s = store->register_dataset(meta, actor, start); !s.ok()) {
      return abort_run("register_dataset " + meta.dataset_id.value, s.error());
    }
  }

  // One agent per platform, each with its own deterministic entropy stream.
  std::map<Apid, std::unique_ptr<wire::PlatformAgent>> agents;
  for (const PlatformSeed& p : scenario.platforms) {
    wire::AgentIdentity identity;
    identity.apid = p.apid;
    identity.region = p.region;
    identity.key = platform_keys.at(p.apid);
    auto entropy = std::make_shared<SeededEntropy>(seed ^ fnv1a64(p.apid.value));
    agents.emplace(p.apid, std::make_unique<wire::PlatformAgent>(
                               identity, store, clock_fn, std::move(entropy)));
  }

  std::map<Apid, Channel> channels;
  std::vector<std::unique_ptr<LoopbackAgent>> loopback;
  if (transport == Transport::InProcess) {
    for (auto& [apid, agent] : agents) {
      wire::PlatformAgent* raw = agent.get();
      channels.emplace(apid, [raw](const wire::WireRequest& req) {
        return raw->handle(req);
      });
    }
  } else {
    for (auto& [apid, agent] : agents) {
      auto node = std::make_unique<LoopbackAgent>();
      node->server = std::make_unique<httplib::Server>();
      wire::PlatformAgent* raw = agent.get();
      wire::attach_handler(*node->server,
                           [raw](const wire::WireRequest& req) { return raw->handle(req); });
      node->port = node->server->bind_to_any_port("127.0.0.1");
      httplib::Server* srv = node->server.get();
      node->thread = std::thread([srv]() { srv->listen_after_bind(); });
      srv->wait_until_ready();
      const int port = node->port;
      channels.emplace(apid, [port](const wire::WireRequest& req) {
        httplib::Client client("127.0.0.1", port);
        client.set_connection_timeout(5, 0);
        httplib::Result result;
        if (req.method == "GET") {
          result = client.Get(req.path);
        } else if (req.method == "POST") {
          result = client.Post(req.path, req.body, "application/json");
        } else {
          result = client.Delete(req.path, req.body, "application/json");
        }
        if (!result) return wire::WireResponse{599, ""};
        return wire::WireResponse{result->status, result->body};
      });
      loopback.push_back(std::move(node));
    }
  }

  // Challenge -> attested envelope -> transfer request, through the real wire
  // handlers of the source platform.
  const auto execute_request = [&](const ScenarioRequest& request) -> RequestOutcome {
    RequestOutcome outcome;
    outcome.request = request;
    const Channel& source_channel = channels.at(request.source);
    const Timestamp now = clock->now();

    const wire::WireResponse challenge_res = source_channel(
        {"POST", "/safe/v1/transfer-challenges", "", ""});
    const json challenge = json::parse(challenge_res.body, nullptr, false);
    if (challenge_res.status != 200 || challenge.is_discarded()) {
      outcome.actual_verdict = "ERROR";
      outcome.http_status = challenge_res.status;
      return outcome;
    }
    const std::string nonce = challenge.value("nonce", "");

    // The requester consults the source's dataset metadata to pick which of
    // its certificates to present.
    std::set<Apni> wanted_networks;
    const wire::WireResponse meta_res = source_channel(
        {"GET", "/safe/v1/datasets/" + request.dataset_id.value, "", ""});
    if (meta_res.status == 200) {
      const json meta = json::parse(meta_res.body, nullptr, false);
      if (!meta.is_discarded()) {
        for (const json& apni : meta.value("authorized_networks", json::array())) {
          if (apni.is_string()) wanted_networks.insert(Apni{apni.get<std::string>()});
        }
      }
    }

    const RegistryView view = store->snapshot();
    AttestationDocument doc;
    doc.apid = request.dest;
    const auto platform_it = view.platforms.find(request.dest);
    if (platform_it != view.platforms.end()) {
      doc.apni_memberships.assign(platform_it->second.apni_memberships.begin(),
                                  platform_it->second.apni_memberships.end());
      doc.region = platform_it->second.region;
    } else {
      doc.region = Arid{"arid:global"};
    }
    const auto ato_it = view.atos.find(request.dest);
    doc.framework_id = ato_it != view.atos.end() ? ato_it->second.framework_id : "";
    doc.nonce = nonce;
    doc.issued_at = now;

    const KeyPair& dest_key = platform_keys.at(request.dest);
    const std::vector<PlatformCertificate>& certs = platform_certs[request.dest];
    const PlatformCertificate* chosen = nullptr;
    for (const PlatformCertificate& cert : certs) {
      if (wanted_networks.contains(cert.apni)) {
        chosen = &cert;
        break;
      }
    }
    if (!chosen && !certs.empty()) chosen = &certs.front();
    PlatformCertificate self_signed;
    if (!chosen) {
      // No authority has certified this platform; it can only present a
      // self-signed certificate that no verifier will anchor.
      self_signed = issue_certificate(dest_key, request.dest, dest_key.public_key,
                                      Apni{"apni:unattested:self"}, now,
                                      now.plus_seconds(kCertValiditySeconds))
                        .value();
      chosen = &self_signed;
    }
    auto envelope = sign_attestation(dest_key, doc, *chosen);
    if (!envelope.ok()) {
      outcome.actual_verdict = "ERROR";
      return outcome;
    }

    const json body{{"dataset_id", request.dataset_id.value},
                    {"user_id", request.user_id},
                    {"authorization_id", request.authorization_id},
                    {"destination_envelope", to_json(envelope.value())},
                    {"nonce", nonce}};
    const wire::WireResponse res = source_channel(
        {"POST", "/safe/v1/transfer-requests", must_canonical(body), ""});
    outcome.http_status = res.status;
    const json decision = json::parse(res.body, nullptr, false);
    if (decision.is_discarded() || !decision.contains("decision")) {
      outcome.actual_verdict = "ERROR";
      return outcome;
    }
    outcome.actual_verdict = decision.value("decision", "ERROR");
    for (const json& reason : decision.value("reasons", json::array())) {
      if (auto code = reason_code_from_string(
              reason.is_string() ? reason.get<std::string>() : "")) {
        outcome.actual_reasons.insert(*code);
      }
    }
    outcome.trace = decision.value("trace", json::array());
    if (request.expect.allow) {
      outcome.matched = res.status == 200 && outcome.actual_verdict == "ALLOW";
    } else {
      outcome.matched = res.status == 403 && outcome.actual_verdict == "DENY" &&
                        outcome.actual_reasons == request.expect.deny_reasons;
    }
    return outcome;
  };

  std::size_t ai = 0, ri = 0;
  while (ai < scenario.actions.size() || ri < scenario.requests.size()) {
    const bool take_action =
        ai < scenario.actions.size() &&
        (ri >= scenario.requests.size() ||
         scenario.actions[ai].at_offset_seconds <=
             scenario.requests[ri].at_offset_seconds);
    if (take_action) {
      const ScenarioAction& action = scenario.actions[ai];
      clock->now_seconds = start.epoch_seconds + action.at_offset_seconds;
      if (Status s = apply_scenario_action(*store, action, clock->now()); !s.ok()) {
        return abort_run("action " + std::to_string(ai) + " (" + action.op + ")",
                         s.error());
      }
      if (action.op == "add_platform_to_network") {
        const Apni apni{action.args.value("apni", "")};
        const Apid apid{action.args.value("apid", "")};
        if (Status s = issue_member_certificate(apni, apid, clock->now()); !s.ok()) {
          return abort_run("issue_certificate " + apid.value, s.error());
        }
      }
      ++ai;
      continue;
    }
    const ScenarioRequest& request = scenario.requests[ri];
    clock->now_seconds = start.epoch_seconds + request.at_offset_seconds;
    report.results.push_back(execute_request(request));
    ++ri;
  }

  report.pass = report.error.empty();
  for (const RequestOutcome& outcome : report.results) {
    if (!outcome.matched) report.pass = false;
  }
  const std::string jsonl = store->audit_log_jsonl();
  report.audit_log_digest = sha256_hex(jsonl);
  if (audit_log_out) *audit_log_out = jsonl;
  return report;
}

namespace {

constexpr const char* kGdc = "apid:nih.nci:gdc";
constexpr const char* kAnvil = "apid:nhgri:anvil";
constexpr const char* kPlatformC = "apid:demo:platform-c";
constexpr const char* kNetwork = "apni:ncpi:main";
constexpr const char* kDataset = "ds:nih.nci:tcga-x";
constexpr const char* kUser = "u:alice";
constexpr const char* kAuth = "auth:alice:tcga-x";
constexpr const char* kFramework = "NIST-SP-800-53-Moderate";
constexpr const char* kStart = "2025-01-01T00:00:00Z";

PlatformSeed gdc_seed() {
  return {Apid{kGdc}, "Genomic Data Commons", Arid{"arid:iso3166:US"}, "UChicago CTDS"};
}

PlatformSeed anvil_seed() {
  return {Apid{kAnvil}, "AnVIL", Arid{"arid:iso3166:US"}, "AnVIL Team"};
}

PlatformSeed platform_c_seed() {
  return {Apid{kPlatformC}, "Platform C", Arid{"arid:iso3166:CA"}, "Demo Operator"};
}

std::vector<ScenarioAction> ato_chain(const char* apid, const char* valid_until) {
  return {
      {0, "submit_assessment", json{{"apid", apid}, {"framework_id", kFramework}}},
      {0, "record_independent_assessment", json{{"apid", apid}}},
      {0, "issue_ato", json{{"apid", apid}, {"valid_until", valid_until}}},
  };
}

ScenarioAction grant_rtd(const char* dataset, const char* apid) {
  return {0, "grant_right_to_distribute", json{{"dataset_id", dataset}, {"apid", apid}}};
}

ScenarioAction authorize_alice(const char* expires) {
  return {0, "authorize_user",
          json{{"authorization", json{{"authorization_id", kAuth},
                                      {"user_id", kUser},
                                      {"dataset_id", kDataset},
                                      {"granted_at", kStart},
                                      {"expires_at", expires}}}}};
}

DatasetSafeMetadata tcga_dataset(std::set<Apni> networks) {
  DatasetSafeMetadata meta;
  meta.dataset_id = DatasetId{kDataset};
  meta.sponsor = "NCI";
  meta.authorized_networks = std::move(networks);
  return meta;
}

ScenarioRequest make_request(std::int64_t offset, const char* source, const char* dest,
                             Expectation expect) {
  ScenarioRequest r;
  r.at_offset_seconds = offset;
  r.dataset_id = DatasetId{kDataset};
  r.source = Apid{source};
  r.dest = Apid{dest};
  r.user_id = kUser;
  r.authorization_id = kAuth;
  r.expect = std::move(expect);
  return r;
}

Expectation allow() { return Expectation{true, {}}; }

Expectation deny(std::set<ReasonCode> reasons) {
  return Expectation{false, std::move(reasons)};
}

}  // namespace

std::vector<Scenario> builtin_blocker_scenarios() {
  std::vector<Scenario> scenarios;

  // Blocker 1: data may not leave the platform until the sponsor extends the
  // boundary. Represented as an empty authorized-network list, later updated.
  {
    Scenario s;
    s.name = "blocker1-extend-boundary";
    s.clock_start = parse_timestamp(kStart).value();
    s.platforms = {gdc_seed(), anvil_seed()};
    s.networks = {{Apni{kNetwork}, "NCPI Coordination", kFramework,
                   {Apid{kGdc}, Apid{kAnvil}}}};
    s.datasets = {tcga_dataset({})};
    for (const char* apid : {kGdc, kAnvil}) {
      for (ScenarioAction a : ato_chain(apid, "2027-01-01T00:00:00Z")) {
        s.actions.push_back(std::move(a));
      }
    }
    s.actions.push_back(grant_rtd(kDataset, kGdc));
    s.actions.push_back(authorize_alice("2026-01-01T00:00:00Z"));
    s.requests.push_back(make_request(
        10, kGdc, kAnvil,
        deny({ReasonCode::DestNotInAuthorizedNetwork, ReasonCode::AttestationInvalid})));
    // The sponsor extends the dataset's boundary to the network.
    DatasetSafeMetadata updated = tcga_dataset({Apni{kNetwork}});
    s.actions.push_back({20, "register_dataset", json{{"metadata", [&] {
                           json m = to_json(updated);
                           m.erase("rtd_holders");
                           return m;
                         }()}}});
    s.requests.push_back(make_request(30, kGdc, kAnvil, allow()));
    scenarios.push_back(std::move(s));
  }

  // Blocker 2: only one platform holds the right to distribute; a platform
  // holding a copy cannot release it.
  {
    Scenario s;
    s.name = "blocker2-single-distributor";
    s.clock_start = parse_timestamp(kStart).value();
    s.platforms = {gdc_seed(), anvil_seed(), platform_c_seed()};
    s.networks = {{Apni{kNetwork}, "NCPI Coordination", kFramework,
                   {Apid{kGdc}, Apid{kAnvil}, Apid{kPlatformC}}}};
    s.datasets = {tcga_dataset({Apni{kNetwork}})};
    for (const char* apid : {kGdc, kAnvil, kPlatformC}) {
      for (ScenarioAction a : ato_chain(apid, "2027-01-01T00:00:00Z")) {
        s.actions.push_back(std::move(a));
      }
    }
    s.actions.push_back(grant_rtd(kDataset, kGdc));
    s.actions.push_back(authorize_alice("2026-01-01T00:00:00Z"));
    s.requests.push_back(make_request(10, kPlatformC, kAnvil,
                                      deny({ReasonCode::SourceNoRightToDistribute})));
    s.requests.push_back(make_request(20, kGdc, kAnvil, allow()));
    scenarios.push_back(std::move(s));
  }

  // Blocker 3: instead of each user's institution vetting the destination,
  // the network-level ATO carries the approval - and its expiry revokes it.
  {
    Scenario s;
    s.name = "blocker3-environment-vetting";
    s.clock_start = parse_timestamp(kStart).value();
    s.platforms = {gdc_seed(), anvil_seed()};
    s.networks = {{Apni{kNetwork}, "NCPI Coordination", kFramework,
                   {Apid{kGdc}, Apid{kAnvil}}}};
    s.datasets = {tcga_dataset({Apni{kNetwork}})};
    for (ScenarioAction a : ato_chain(kGdc, "2027-01-01T00:00:00Z")) {
      s.actions.push_back(std::move(a));
    }
    // The destination's ATO expires on 2025-07-01.
    for (ScenarioAction a : ato_chain(kAnvil, "2025-07-01T00:00:00Z")) {
      s.actions.push_back(std::move(a));
    }
    s.actions.push_back(grant_rtd(kDataset, kGdc));
    s.actions.push_back(authorize_alice("2027-01-01T00:00:00Z"));
    s.requests.push_back(make_request(10, kGdc, kAnvil, allow()));
    // 16,000,000 s ~ 185 days, past the destination ATO expiry.
    s.requests.push_back(
        make_request(16'000'000, kGdc, kAnvil, deny({ReasonCode::DestAtoInvalid})));
    scenarios.push_back(std::move(s));
  }

  // Blocker 4: network membership, not bilateral perception of risk, decides
  // who may receive; removing one platform flips only that platform.
  {
    Scenario s;
    s.name = "blocker4-network-trust";
    s.clock_start = parse_timestamp(kStart).value();
    s.platforms = {gdc_seed(), anvil_seed(), platform_c_seed()};
    s.networks = {{Apni{kNetwork}, "NCPI Coordination", kFramework,
                   {Apid{kGdc}, Apid{kAnvil}, Apid{kPlatformC}}}};
    s.datasets = {tcga_dataset({Apni{kNetwork}})};
    for (const char* apid : {kGdc, kAnvil, kPlatformC}) {
      for (ScenarioAction a : ato_chain(apid, "2027-01-01T00:00:00Z")) {
        s.actions.push_back(std::move(a));
      }
    }
    s.actions.push_back(grant_rtd(kDataset, kGdc));
    s.actions.push_back(authorize_alice("2026-01-01T00:00:00Z"));
    s.requests.push_back(make_request(10, kGdc, kGdc, allow()));
    s.requests.push_back(make_request(10, kGdc, kAnvil, allow()));
    s.requests.push_back(make_request(10, kGdc, kPlatformC, allow()));
    s.actions.push_back(
        {20, "remove_platform_from_network", json{{"apni", kNetwork}, {"apid", kPlatformC}}});
    s.requests.push_back(make_request(30, kGdc, kAnvil, allow()));
    s.requests.push_back(make_request(
        30, kGdc, kPlatformC,
        deny({ReasonCode::DestNotInAuthorizedNetwork, ReasonCode::AttestationInvalid})));
    scenarios.push_back(std::move(s));
  }

  return scenarios;
}

}  // namespace safe::harness
