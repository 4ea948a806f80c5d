#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "safe/attestation.hpp"
#include "safe/http_adapter.hpp"
#include "safe/canonical.hpp"
#include "safe/crypto.hpp"
#include "safe/governance.hpp"
#include "safe/harness.hpp"
#include "safe/wire.hpp"

namespace {

using nlohmann::json;
using namespace safe;

// Exit codes are a scripting contract:
//   0 success / ALLOW
//   1 DENY or scenario expectation failure
//   2 usage error
//   3 governance or validation error
//   4 I/O or config error
constexpr int kExitOk = 0;
constexpr int kExitDeny = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGovernance = 3;
constexpr int kExitIo = 4;

Timestamp system_now() {
  return Timestamp{static_cast<std::int64_t>(std::time(nullptr))};
}

Result<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Result<std::string>::failure("IoError", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Result<json> read_json_file(const std::string& path) {
  auto text = read_file(path);
  if (!text.ok()) return text.error();
  json parsed = json::parse(text.value(), nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    return Result<json>::failure("ParseError", path + " is not valid JSON");
  }
  return parsed;
}

int fail(int code, const std::string& message) {
  std::fprintf(stderr, "error: %s\n", message.c_str());
  return code;
}

struct ListenAddress {
  std::string host;
  int port = 0;
};

Result<ListenAddress> parse_listen_address(const std::string& text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 >= text.size()) {
    return Result<ListenAddress>::failure("BadConfig",
                                          "listen_address must be host:port");
  }
  ListenAddress addr;
  addr.host = text.substr(0, colon);
  addr.port = std::atoi(text.c_str() + colon + 1);
  if (addr.host.empty() || addr.port <= 0 || addr.port > 65535) {
    return Result<ListenAddress>::failure("BadConfig", "invalid listen_address");
  }
  return addr;
}

void log_request(const std::string& method, const std::string& path, int status) {
  const json line{{"at", render_timestamp(system_now())},
                  {"method", method},
                  {"path", path},
                  {"status", status}};
  std::printf("%s\n", must_canonical(line).c_str());
  std::fflush(stdout);
}

int serve(httplib::Server& server, const ListenAddress& addr,
          const wire::WireHandler& handler) {
  wire::attach_handler(server, handler, [](const wire::WireRequest& req, int status) {
    log_request(req.method, req.path, status);
  });
  // REUSEADDR only: with the library's default REUSEPORT a second service
  // would silently share the port instead of failing to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
               sizeof(yes));
  });
  if (!server.bind_to_port(addr.host, addr.port)) {
    return fail(kExitIo, "cannot bind " + addr.host + ":" + std::to_string(addr.port));
  }
  std::fprintf(stderr, "listening on %s:%d\n", addr.host.c_str(), addr.port);
  server.listen_after_bind();
  return kExitOk;
}

Result<std::shared_ptr<GovernanceStore>> load_store(const std::string& log_path) {
  auto store = std::make_shared<GovernanceStore>();
  std::ifstream in(log_path, std::ios::binary);
  if (in) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (Status s = replay_audit_jsonl(buffer.str(), *store); !s.ok()) {
      return Result<std::shared_ptr<GovernanceStore>>::failure(
          s.error().code, log_path + ": " + s.error().detail);
    }
  }
  return store;
}

int run_registry_serve(const std::string& config_path) {
  auto config = read_json_file(config_path);
  if (!config.ok()) return fail(kExitIo, config.error().detail);
  auto addr = parse_listen_address(config.value().value("listen_address", ""));
  if (!addr.ok()) return fail(kExitIo, addr.error().detail);
  const std::string log_path = config.value().value("registry_log_path", "");
  if (log_path.empty()) return fail(kExitIo, "config requires registry_log_path");

  auto store = load_store(log_path);
  if (!store.ok()) return fail(kExitIo, store.error().detail);

  auto sink_file = std::make_shared<std::ofstream>(log_path, std::ios::app);
  if (!*sink_file) return fail(kExitIo, "cannot open " + log_path + " for append");
  store.value()->set_event_sink([sink_file](const AuditEvent& ev) {
    *sink_file << audit_event_canonical(ev, true) << '\n';
    sink_file->flush();
  });

  wire::RegistryService service(store.value(), system_now,
                                config.value().value("admin_token", ""));
  httplib::Server server;
  return serve(server, addr.value(),
               [&service](const wire::WireRequest& req) { return service.handle(req); });
}

int run_agent_serve(const std::string& config_path) {
  auto config = read_json_file(config_path);
  if (!config.ok()) return fail(kExitIo, config.error().detail);
  auto addr = parse_listen_address(config.value().value("listen_address", ""));
  if (!addr.ok()) return fail(kExitIo, addr.error().detail);
  const std::string log_path = config.value().value("registry_log_path", "");
  if (log_path.empty()) return fail(kExitIo, "config requires registry_log_path");
  const std::string identity_path = config.value().value("platform_identity_file", "");
  if (identity_path.empty()) return fail(kExitIo, "config requires platform_identity_file");

  auto identity_json = read_json_file(identity_path);
  if (!identity_json.ok()) return fail(kExitIo, identity_json.error().detail);
  const json& idj = identity_json.value();

  wire::AgentIdentity identity;
  auto apid = parse_apid(idj.value("apid", ""));
  if (!apid.ok()) return fail(kExitIo, "identity apid: " + apid.error().detail);
  identity.apid = std::move(apid).value();
  auto region = parse_arid(idj.value("region", ""));
  if (!region.ok()) return fail(kExitIo, "identity region: " + region.error().detail);
  identity.region = std::move(region).value();
  auto seed_bytes = from_hex(idj.value("key_seed_hex", ""));
  if (!seed_bytes.ok() || seed_bytes.value().size() != 32) {
    return fail(kExitIo, "identity key_seed_hex must be 64 hex chars");
  }
  identity.key = keypair_from_seed(
      std::span<const std::uint8_t, 32>(seed_bytes.value().data(), 32));
  for (const json& cert_json : idj.value("certificates", json::array())) {
    auto cert = certificate_from_json(cert_json);
    if (!cert.ok()) return fail(kExitIo, "identity certificate: " + cert.error().detail);
    identity.certificates.push_back(std::move(cert).value());
  }
  if (idj.contains("hosted_datasets")) {
    std::set<DatasetId> hosted;
    for (const json& item : idj["hosted_datasets"]) {
      auto id = parse_dataset_id(item.is_string() ? item.get<std::string>() : "");
      if (!id.ok()) return fail(kExitIo, "hosted_datasets: " + id.error().detail);
      hosted.insert(std::move(id).value());
    }
    identity.hosted_datasets = std::move(hosted);
  }

  auto store = load_store(log_path);
  if (!store.ok()) return fail(kExitIo, store.error().detail);
  const std::string decision_log = config.value().value("decision_log_path", "");
  if (!decision_log.empty()) {
    auto sink_file = std::make_shared<std::ofstream>(decision_log, std::ios::app);
    if (!*sink_file) return fail(kExitIo, "cannot open " + decision_log + " for append");
    store.value()->set_event_sink([sink_file](const AuditEvent& ev) {
      *sink_file << audit_event_canonical(ev, true) << '\n';
      sink_file->flush();
    });
  }

  wire::PlatformAgent agent(
      std::move(identity), store.value(), system_now, std::make_shared<SystemEntropy>(),
      config.value().value("freshness_window_seconds",
                           kDefaultFreshnessWindowSeconds));
  httplib::Server server;
  return serve(server, addr.value(),
               [&agent](const wire::WireRequest& req) { return agent.handle(req); });
}

struct AdminClient {
  std::string registry_url;
  std::string token;
  std::string actor;
  std::string at;
  bool json_output = false;

  void stamp(json& body) const {
    if (!actor.empty()) body["actor"] = actor;
    if (!at.empty()) body["now"] = at;
  }

  // Returns the process exit code; prints the response body.
  int send(const std::string& method, const std::string& path, const json& body) const {
    httplib::Client client(registry_url);
    client.set_connection_timeout(5, 0);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    httplib::Result result;
    if (method == "POST") {
      result = client.Post(path, headers, must_canonical(body), "application/json");
    } else if (method == "DELETE") {
      result = client.Delete(path, headers, must_canonical(body), "application/json");
    } else {
      result = client.Get(path, headers);
    }
    if (!result) {
      return fail(kExitIo, "cannot reach registry at " + registry_url);
    }
    std::printf("%s\n", result->body.c_str());
    if (result->status >= 200 && result->status < 300) return kExitOk;
    return kExitGovernance;
  }
};

// Renders the wire decision body the way render_trace renders an engine
// decision, marking a skipped attestation check.
std::string render_wire_trace(const json& body) {
  std::string out;
  const json trace = body.value("trace", json::array());
  std::size_t i = 0;
  for (const json& check : trace) {
    ++i;
    out += std::to_string(i) + ". ";
    if (check.contains("passed") && check["passed"].is_null()) {
      out += "SKIP " + check.value("check", "");
    } else if (check.value("passed", false)) {
      out += "PASS " + check.value("check", "");
    } else {
      out += "FAIL " + check.value("check", "");
      if (check.contains("reason")) out += " [" + check.value("reason", "") + "]";
    }
    out += ": " + check.value("detail", "") + "\n";
  }
  out += "VERDICT: " + body.value("decision", "?");
  if (body.value("decision", "") == "DENY") {
    out += " (";
    const json reasons = body.value("reasons", json::array());
    for (std::size_t r = 0; r < reasons.size(); ++r) {
      if (r > 0) out += ", ";
      out += reasons[r].get<std::string>();
    }
    out += ")";
  }
  if (body.value("advisory", false)) out += " (advisory)";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAFE interoperability framework: registry, platform agent, policy "
               "queries, attestation checks and scenario runs"};
  app.require_subcommand(1);

  // --- serve ---------------------------------------------------------------
  auto* registry_cmd = app.add_subcommand("registry", "registry service");
  auto* registry_serve = registry_cmd->add_subcommand("serve", "run the registry service");
  std::string registry_config;
  registry_serve->add_option("--config", registry_config, "config file path")->required();
  auto* registry_snapshot = registry_cmd->add_subcommand(
      "snapshot", "replay an audit log and emit the canonical registry snapshot");
  std::string snapshot_log, snapshot_out;
  registry_snapshot->add_option("--log", snapshot_log, "audit log (JSON lines)")->required();
  registry_snapshot->add_option("--out", snapshot_out, "output file (default: stdout)");

  auto* agent_cmd = app.add_subcommand("agent", "platform agent");
  auto* agent_serve = agent_cmd->add_subcommand("serve", "run the platform agent");
  std::string agent_config;
  agent_serve->add_option("--config", agent_config, "config file path")->required();

  // --- admin ---------------------------------------------------------------
  AdminClient admin;
  auto* admin_cmd = app.add_subcommand("admin", "registry administration");
  admin_cmd->require_subcommand(1);
  admin_cmd->fallthrough();
  admin_cmd->add_option("--registry", admin.registry_url, "registry base URL")
      ->envname("SAFE_REGISTRY_URL");
  admin_cmd->add_option("--token", admin.token, "admin bearer token")
      ->envname("SAFE_TOKEN");
  admin_cmd->add_option("--actor", admin.actor, "audit actor name");
  admin_cmd->add_option("--at", admin.at, "timestamp override (RFC 3339 UTC)");

  struct {
    std::string apid, apni, name, region, operator_name, public_key_id;
    std::string framework, valid_until, authority_key, authority_name;
    std::vector<std::string> members, networks, region_restrictions;
    std::string dataset, sponsor, authorization, user, granted_at, expires_at;
  } a;

  auto* reg_platform = admin_cmd->add_subcommand("register-platform", "register a platform");
  reg_platform->add_option("--apid", a.apid)->required();
  reg_platform->add_option("--region", a.region)->required();
  reg_platform->add_option("--name", a.name);
  reg_platform->add_option("--operator", a.operator_name);
  reg_platform->add_option("--public-key-id", a.public_key_id);

  auto* create_network = admin_cmd->add_subcommand("create-network", "create a network");
  create_network->add_option("--apni", a.apni)->required();
  create_network->add_option("--authority-key", a.authority_key, "64 hex chars")->required();
  create_network->add_option("--authority-name", a.authority_name);
  create_network->add_option("--framework", a.framework);
  create_network->add_option("--member", a.members, "member apid (repeatable)");

  auto* add_member = admin_cmd->add_subcommand("add-member", "add a platform to a network");
  add_member->add_option("--apni", a.apni)->required();
  add_member->add_option("--apid", a.apid)->required();

  auto* remove_member =
      admin_cmd->add_subcommand("remove-member", "remove a platform from a network");
  remove_member->add_option("--apni", a.apni)->required();
  remove_member->add_option("--apid", a.apid)->required();

  auto* submit_assessment =
      admin_cmd->add_subcommand("submit-assessment", "record a framework self-assessment");
  submit_assessment->add_option("--apid", a.apid)->required();
  submit_assessment->add_option("--framework", a.framework)->required();

  auto* record_assessment = admin_cmd->add_subcommand(
      "record-assessment", "record the third-party independent assessment");
  record_assessment->add_option("--apid", a.apid)->required();

  auto* issue_ato = admin_cmd->add_subcommand("issue-ato", "issue an authority to operate");
  issue_ato->add_option("--apid", a.apid)->required();
  issue_ato->add_option("--valid-until", a.valid_until)->required();

  auto* record_review =
      admin_cmd->add_subcommand("record-review", "record an annual penetration-test review");
  record_review->add_option("--apid", a.apid)->required();

  auto* revoke_ato = admin_cmd->add_subcommand("revoke-ato", "revoke an authority to operate");
  revoke_ato->add_option("--apid", a.apid)->required();

  auto* register_dataset = admin_cmd->add_subcommand("register-dataset",
                                                     "register or update dataset metadata");
  register_dataset->add_option("--id", a.dataset)->required();
  register_dataset->add_option("--sponsor", a.sponsor);
  register_dataset->add_option("--network", a.networks, "authorized network (repeatable)");
  register_dataset->add_option("--region-restriction", a.region_restrictions,
                               "authorized region (repeatable)");

  auto* grant_rtd = admin_cmd->add_subcommand("grant-rtd", "grant the right to distribute");
  grant_rtd->add_option("--dataset", a.dataset)->required();
  grant_rtd->add_option("--apid", a.apid)->required();

  auto* revoke_rtd = admin_cmd->add_subcommand("revoke-rtd", "revoke the right to distribute");
  revoke_rtd->add_option("--dataset", a.dataset)->required();
  revoke_rtd->add_option("--apid", a.apid)->required();

  auto* authorize_user = admin_cmd->add_subcommand("authorize-user", "authorize a user");
  authorize_user->add_option("--authorization", a.authorization)->required();
  authorize_user->add_option("--user", a.user)->required();
  authorize_user->add_option("--dataset", a.dataset)->required();
  authorize_user->add_option("--granted-at", a.granted_at)->required();
  authorize_user->add_option("--expires-at", a.expires_at)->required();

  auto* revoke_user = admin_cmd->add_subcommand("revoke-user", "revoke a user authorization");
  revoke_user->add_option("--authorization", a.authorization)->required();

  // --- query ---------------------------------------------------------------
  auto* query_cmd = app.add_subcommand("query", "policy queries");
  auto* can_transfer = query_cmd->add_subcommand(
      "can-transfer", "advisory dry-run of the transfer decision (checks 1-5)");
  struct {
    std::string dataset, from, to, user, authorization, at, registry, token;
    bool json_output = false;
  } q;
  can_transfer->add_option("--dataset", q.dataset)->required();
  can_transfer->add_option("--from", q.from)->required();
  can_transfer->add_option("--to", q.to)->required();
  can_transfer->add_option("--user", q.user)->required();
  can_transfer->add_option("--authorization", q.authorization)->required();
  can_transfer->add_option("--at", q.at, "decision time (RFC 3339 UTC)");
  can_transfer->add_option("--registry", q.registry, "registry base URL")
      ->envname("SAFE_REGISTRY_URL");
  can_transfer->add_option("--token", q.token, "admin bearer token")
      ->envname("SAFE_TOKEN");
  can_transfer->add_flag("--json", q.json_output, "print the canonical JSON body");

  // --- attest --------------------------------------------------------------
  auto* attest_cmd = app.add_subcommand("attest", "attestation utilities");
  auto* attest_verify = attest_cmd->add_subcommand("verify", "verify a signed envelope");
  struct {
    std::string envelope, anchors, nonce, at;
    std::int64_t window = kDefaultFreshnessWindowSeconds;
    bool json_output = false;
  } v;
  attest_verify->add_option("--envelope", v.envelope, "envelope file")->required();
  attest_verify->add_option("--anchors", v.anchors, "trust anchor file")->required();
  attest_verify->add_option("--nonce", v.nonce, "expected nonce")->required();
  attest_verify->add_option("--at", v.at, "verification time (RFC 3339 UTC)");
  attest_verify->add_option("--window", v.window, "freshness window seconds");
  attest_verify->add_flag("--json", v.json_output);

  auto* attest_keygen = attest_cmd->add_subcommand("keygen", "generate an Ed25519 keypair");
  struct {
    std::string seed_hex;
  } kg;
  attest_keygen->add_option("--seed-hex", kg.seed_hex,
                            "32-byte seed as 64 hex chars (default: random)");

  auto* attest_issue = attest_cmd->add_subcommand(
      "issue-certificate", "sign a platform certificate as a network authority");
  struct {
    std::string authority_seed, apid, platform_public_key, apni, issued_at, valid_until;
  } ic;
  attest_issue->add_option("--authority-seed", ic.authority_seed, "64 hex chars")->required();
  attest_issue->add_option("--apid", ic.apid)->required();
  attest_issue->add_option("--platform-public-key", ic.platform_public_key, "64 hex chars")
      ->required();
  attest_issue->add_option("--apni", ic.apni)->required();
  attest_issue->add_option("--issued-at", ic.issued_at)->required();
  attest_issue->add_option("--valid-until", ic.valid_until)->required();

  auto* attest_sign = attest_cmd->add_subcommand(
      "sign", "produce a signed attestation envelope for a challenge nonce");
  struct {
    std::string identity, nonce, at, apni, framework;
    std::vector<std::string> memberships;
  } sg;
  attest_sign->add_option("--identity", sg.identity, "platform identity file")->required();
  attest_sign->add_option("--nonce", sg.nonce, "challenger-supplied nonce")->required();
  attest_sign->add_option("--at", sg.at, "issuance time (RFC 3339 UTC)");
  attest_sign->add_option("--apni", sg.apni, "present the certificate for this network");
  attest_sign->add_option("--framework", sg.framework, "framework id to attest");
  attest_sign->add_option("--membership", sg.memberships,
                          "claimed membership (repeatable; default: certificate apnis)");

  // --- scenario ------------------------------------------------------------
  auto* scenario_cmd = app.add_subcommand("scenario", "scenario harness");
  auto* scenario_run = scenario_cmd->add_subcommand("run", "run a scenario file");
  struct {
    std::string file;
    std::uint64_t seed = 0;
    bool http = false;
    bool json_output = false;
  } sc;
  scenario_run->add_option("file", sc.file, "scenario JSON file")->required();
  scenario_run->add_option("--seed", sc.seed, "entropy seed (default 0)");
  scenario_run->add_flag("--http", sc.http, "use loopback HTTP instead of in-process");
  scenario_run->add_flag("--json", sc.json_output, "print the canonical JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (registry_serve->parsed()) return run_registry_serve(registry_config);
  if (registry_snapshot->parsed()) {
    auto text = read_file(snapshot_log);
    if (!text.ok()) return fail(kExitIo, text.error().detail);
    GovernanceStore store;
    if (Status s = replay_audit_jsonl(text.value(), store); !s.ok()) {
      return fail(kExitGovernance, s.error().code + ": " + s.error().detail);
    }
    const std::string doc = must_canonical(to_json(store.snapshot()));
    if (snapshot_out.empty()) {
      std::printf("%s\n", doc.c_str());
    } else {
      std::ofstream out(snapshot_out, std::ios::binary);
      if (!out) return fail(kExitIo, "cannot open " + snapshot_out);
      out << doc << '\n';
    }
    return kExitOk;
  }
  if (agent_serve->parsed()) return run_agent_serve(agent_config);

  if (admin_cmd->parsed()) {
    if (admin.registry_url.empty()) {
      return fail(kExitUsage, "--registry or SAFE_REGISTRY_URL required");
    }
    json body = json::object();
    admin.stamp(body);
    if (reg_platform->parsed()) {
      body["record"] = json{{"apid", a.apid},
                            {"display_name", a.name},
                            {"region", a.region},
                            {"public_key_id", a.public_key_id},
                            {"apni_memberships", json::array()},
                            {"operator", a.operator_name}};
      return admin.send("POST", "/registry/v1/platforms", body);
    }
    if (create_network->parsed()) {
      json members = json::array();
      for (const std::string& m : a.members) members.push_back(m);
      body["record"] = json{{"apni", a.apni},
                            {"authority_name", a.authority_name},
                            {"authority_public_key", a.authority_key},
                            {"framework_id", a.framework},
                            {"members", members}};
      return admin.send("POST", "/registry/v1/networks", body);
    }
    if (add_member->parsed()) {
      body["apid"] = a.apid;
      return admin.send("POST", "/registry/v1/networks/" + a.apni + "/members", body);
    }
    if (remove_member->parsed()) {
      return admin.send("DELETE",
                        "/registry/v1/networks/" + a.apni + "/members/" + a.apid, body);
    }
    if (submit_assessment->parsed()) {
      body["apid"] = a.apid;
      body["framework_id"] = a.framework;
      return admin.send("POST", "/registry/v1/assessments", body);
    }
    if (record_assessment->parsed()) {
      body["apid"] = a.apid;
      body["stage"] = "independent";
      return admin.send("POST", "/registry/v1/assessments", body);
    }
    if (issue_ato->parsed()) {
      body["apid"] = a.apid;
      body["valid_until"] = a.valid_until;
      return admin.send("POST", "/registry/v1/atos", body);
    }
    if (record_review->parsed()) {
      return admin.send("POST", "/registry/v1/atos/" + a.apid + "/reviews", body);
    }
    if (revoke_ato->parsed()) {
      return admin.send("POST", "/registry/v1/atos/" + a.apid + "/revocation", body);
    }
    if (register_dataset->parsed()) {
      json networks = json::array();
      for (const std::string& n : a.networks) networks.push_back(n);
      json metadata{{"dataset_id", a.dataset},
                    {"sponsor", a.sponsor},
                    {"rtd_holders", json::array()},
                    {"authorized_networks", networks}};
      if (!a.region_restrictions.empty()) {
        json regions = json::array();
        for (const std::string& r : a.region_restrictions) regions.push_back(r);
        metadata["region_restrictions"] = regions;
      }
      body["metadata"] = metadata;
      return admin.send("POST", "/registry/v1/datasets", body);
    }
    if (grant_rtd->parsed()) {
      body["apid"] = a.apid;
      return admin.send("POST", "/registry/v1/datasets/" + a.dataset + "/rtd-grants", body);
    }
    if (revoke_rtd->parsed()) {
      return admin.send(
          "DELETE", "/registry/v1/datasets/" + a.dataset + "/rtd-grants/" + a.apid, body);
    }
    if (authorize_user->parsed()) {
      body["authorization"] = json{{"authorization_id", a.authorization},
                                   {"user_id", a.user},
                                   {"dataset_id", a.dataset},
                                   {"granted_at", a.granted_at},
                                   {"expires_at", a.expires_at},
                                   {"revoked", false}};
      return admin.send("POST", "/registry/v1/users/authorizations", body);
    }
    if (revoke_user->parsed()) {
      return admin.send("DELETE", "/registry/v1/users/authorizations/" + a.authorization,
                        body);
    }
    return kExitUsage;
  }

  if (can_transfer->parsed()) {
    if (q.registry.empty()) {
      return fail(kExitUsage, "--registry or SAFE_REGISTRY_URL required");
    }
    json body{{"dataset_id", q.dataset}, {"source_apid", q.from},
              {"dest_apid", q.to},      {"user_id", q.user},
              {"authorization_id", q.authorization}, {"advisory", true}};
    if (!q.at.empty()) body["now"] = q.at;
    httplib::Client client(q.registry);
    client.set_connection_timeout(5, 0);
    httplib::Headers headers;
    if (!q.token.empty()) headers.emplace("Authorization", "Bearer " + q.token);
    auto result = client.Post("/registry/v1/decisions:evaluate", headers,
                              must_canonical(body), "application/json");
    if (!result) return fail(kExitIo, "cannot reach registry at " + q.registry);
    if (result->status != 200) {
      std::printf("%s\n", result->body.c_str());
      return kExitGovernance;
    }
    const json decision = json::parse(result->body, nullptr, false);
    if (decision.is_discarded()) return fail(kExitIo, "malformed registry response");
    if (q.json_output) {
      std::printf("%s\n", result->body.c_str());
    } else {
      std::printf("%s\n", render_wire_trace(decision).c_str());
    }
    for (const json& reason : decision.value("reasons", json::array())) {
      const std::string code = reason.is_string() ? reason.get<std::string>() : "";
      if (code == "DATASET_UNKNOWN" || code == "PLATFORM_UNKNOWN") return kExitGovernance;
    }
    return decision.value("decision", "") == "ALLOW" ? kExitOk : kExitDeny;
  }

  if (attest_keygen->parsed()) {
    std::array<std::uint8_t, 32> seed{};
    if (kg.seed_hex.empty()) {
      SystemEntropy entropy;
      entropy.fill(seed);
    } else {
      auto bytes = from_hex(kg.seed_hex);
      if (!bytes.ok() || bytes.value().size() != 32) {
        return fail(kExitUsage, "--seed-hex must be 64 hex chars");
      }
      std::copy(bytes.value().begin(), bytes.value().end(), seed.begin());
    }
    const KeyPair key = keypair_from_seed(seed);
    std::printf("%s\n", must_canonical(json{{"algorithm", KeyPair::kAlgorithm},
                                            {"public_key", to_hex(key.public_key)},
                                            {"secret_seed", to_hex(key.seed)}})
                            .c_str());
    return kExitOk;
  }

  if (attest_issue->parsed()) {
    auto seed_bytes = from_hex(ic.authority_seed);
    if (!seed_bytes.ok() || seed_bytes.value().size() != 32) {
      return fail(kExitUsage, "--authority-seed must be 64 hex chars");
    }
    std::array<std::uint8_t, 32> seed{};
    std::copy(seed_bytes.value().begin(), seed_bytes.value().end(), seed.begin());
    auto pub_bytes = from_hex(ic.platform_public_key);
    if (!pub_bytes.ok() || pub_bytes.value().size() != 32) {
      return fail(kExitUsage, "--platform-public-key must be 64 hex chars");
    }
    std::array<std::uint8_t, 32> platform_key{};
    std::copy(pub_bytes.value().begin(), pub_bytes.value().end(), platform_key.begin());
    auto apid = parse_apid(ic.apid);
    if (!apid.ok()) return fail(kExitGovernance, "apid: " + apid.error().detail);
    auto apni = parse_apni(ic.apni);
    if (!apni.ok()) return fail(kExitGovernance, "apni: " + apni.error().detail);
    auto issued_at = parse_timestamp(ic.issued_at);
    if (!issued_at.ok()) return fail(kExitGovernance, "issued-at: " + issued_at.error().detail);
    auto valid_until = parse_timestamp(ic.valid_until);
    if (!valid_until.ok()) {
      return fail(kExitGovernance, "valid-until: " + valid_until.error().detail);
    }
    auto cert = issue_certificate(keypair_from_seed(seed), apid.value(), platform_key,
                                  apni.value(), issued_at.value(), valid_until.value());
    if (!cert.ok()) return fail(kExitGovernance, cert.error().code + ": " + cert.error().detail);
    std::printf("%s\n", must_canonical(to_json(cert.value())).c_str());
    return kExitOk;
  }

  if (attest_sign->parsed()) {
    auto identity_json = read_json_file(sg.identity);
    if (!identity_json.ok()) return fail(kExitIo, identity_json.error().detail);
    const json& idj = identity_json.value();
    auto apid = parse_apid(idj.value("apid", ""));
    if (!apid.ok()) return fail(kExitGovernance, "identity apid: " + apid.error().detail);
    auto region = parse_arid(idj.value("region", ""));
    if (!region.ok()) return fail(kExitGovernance, "identity region: " + region.error().detail);
    auto seed_bytes = from_hex(idj.value("key_seed_hex", ""));
    if (!seed_bytes.ok() || seed_bytes.value().size() != 32) {
      return fail(kExitGovernance, "identity key_seed_hex must be 64 hex chars");
    }
    std::array<std::uint8_t, 32> seed{};
    std::copy(seed_bytes.value().begin(), seed_bytes.value().end(), seed.begin());
    std::vector<PlatformCertificate> certs;
    for (const json& cert_json : idj.value("certificates", json::array())) {
      auto cert = certificate_from_json(cert_json);
      if (!cert.ok()) return fail(kExitGovernance, "certificate: " + cert.error().detail);
      certs.push_back(std::move(cert).value());
    }
    if (certs.empty()) return fail(kExitGovernance, "identity holds no certificates");
    const PlatformCertificate* chosen = &certs.front();
    if (!sg.apni.empty()) {
      chosen = nullptr;
      for (const PlatformCertificate& cert : certs) {
        if (cert.apni.value == sg.apni) chosen = &cert;
      }
      if (!chosen) return fail(kExitGovernance, "no certificate for " + sg.apni);
    }
    AttestationDocument doc;
    doc.apid = apid.value();
    doc.region = region.value();
    doc.framework_id = sg.framework;
    doc.nonce = sg.nonce;
    std::set<Apni> memberships;
    if (sg.memberships.empty()) {
      for (const PlatformCertificate& cert : certs) memberships.insert(cert.apni);
    } else {
      for (const std::string& m : sg.memberships) {
        auto apni = parse_apni(m);
        if (!apni.ok()) return fail(kExitGovernance, "membership: " + apni.error().detail);
        memberships.insert(std::move(apni).value());
      }
    }
    doc.apni_memberships.assign(memberships.begin(), memberships.end());
    doc.issued_at = system_now();
    if (!sg.at.empty()) {
      auto ts = parse_timestamp(sg.at);
      if (!ts.ok()) return fail(kExitUsage, "--at: " + ts.error().detail);
      doc.issued_at = ts.value();
    }
    auto envelope = sign_attestation(keypair_from_seed(seed), doc, *chosen);
    if (!envelope.ok()) {
      return fail(kExitGovernance, envelope.error().code + ": " + envelope.error().detail);
    }
    std::printf("%s\n", must_canonical(to_json(envelope.value())).c_str());
    return kExitOk;
  }

  if (attest_verify->parsed()) {
    auto envelope_json = read_json_file(v.envelope);
    if (!envelope_json.ok()) return fail(kExitIo, envelope_json.error().detail);
    auto anchors_json = read_json_file(v.anchors);
    if (!anchors_json.ok()) return fail(kExitIo, anchors_json.error().detail);
    auto envelope = envelope_from_json(envelope_json.value());
    if (!envelope.ok()) {
      return fail(kExitGovernance,
                  envelope.error().code + ": " + envelope.error().detail);
    }
    TrustAnchorSet anchors;
    if (!anchors_json.value().is_object()) {
      return fail(kExitGovernance, "anchors file must map apni -> hex key");
    }
    for (const auto& [key, value] : anchors_json.value().items()) {
      auto apni = parse_apni(key);
      if (!apni.ok()) return fail(kExitGovernance, "anchor apni: " + apni.error().detail);
      auto bytes = from_hex(value.is_string() ? value.get<std::string>() : "");
      if (!bytes.ok() || bytes.value().size() != 32) {
        return fail(kExitGovernance, "anchor key for " + key + " must be 64 hex chars");
      }
      std::array<std::uint8_t, 32> anchor_key{};
      std::copy(bytes.value().begin(), bytes.value().end(), anchor_key.begin());
      anchors.emplace(std::move(apni).value(), anchor_key);
    }
    Timestamp now = system_now();
    if (!v.at.empty()) {
      auto ts = parse_timestamp(v.at);
      if (!ts.ok()) return fail(kExitUsage, "--at: " + ts.error().detail);
      now = ts.value();
    }
    auto verified = verify_envelope(envelope.value(), anchors, v.nonce, now, v.window);
    if (!verified.ok()) {
      std::printf("%s\n",
                  must_canonical(json{{"error", verified.error().code},
                                      {"detail", verified.error().detail}})
                      .c_str());
      return kExitGovernance;
    }
    std::printf("%s\n", must_canonical(to_json(verified.value())).c_str());
    return kExitOk;
  }

  if (scenario_run->parsed()) {
    auto scenario = harness::load_scenario(sc.file);
    if (!scenario.ok()) {
      if (scenario.error().code == "IoError") return fail(kExitIo, scenario.error().detail);
      return fail(kExitGovernance,
                  scenario.error().code + ": " + scenario.error().detail);
    }
    const harness::ScenarioReport report = harness::run_scenario(
        scenario.value(), sc.seed,
        sc.http ? harness::Transport::LoopbackHttp : harness::Transport::InProcess);
    if (sc.json_output) {
      std::printf("%s\n", must_canonical(harness::report_to_json(report)).c_str());
    } else {
      std::printf("%s", harness::report_human(report).c_str());
    }
    return report.pass ? kExitOk : kExitDeny;
  }

  return kExitUsage;
}
