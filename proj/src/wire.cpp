#include "safe/wire.hpp"

#include <algorithm>

#include "safe/canonical.hpp"

namespace safe::wire {

using nlohmann::json;

namespace {

WireResponse json_response(int status, const json& body) {
  return WireResponse{status, must_canonical(body)};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  return json::parse(body, nullptr, /*allow_exceptions=*/false);
}

// Splits "a/b/c" into segments; empty path -> empty vector.
std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < path.size()) {
    if (path[pos] == '/') {
      ++pos;
      continue;
    }
    std::size_t end = path.find('/', pos);
    if (end == std::string_view::npos) end = path.size();
    out.emplace_back(path.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::int64_t query_param(std::string_view query, std::string_view key,
                         std::int64_t fallback) {
  std::size_t pos = 0;
  while (pos < query.size()) {
    std::size_t end = query.find('&', pos);
    if (end == std::string_view::npos) end = query.size();
    const std::string_view pair = query.substr(pos, end - pos);
    pos = end + 1;
    const std::size_t eq = pair.find('=');
    if (eq == std::string_view::npos || pair.substr(0, eq) != key) continue;
    std::int64_t value = 0;
    bool any = false;
    for (const char c : pair.substr(eq + 1)) {
      if (c < '0' || c > '9') return fallback;
      value = value * 10 + (c - '0');
      any = true;
      if (value > 1'000'000'000) return fallback;
    }
    if (any) return value;
  }
  return fallback;
}

}  // namespace

WireResponse error_response(int status, std::string_view code, std::string_view detail) {
  return json_response(status,
                       json{{"error", std::string(code)}, {"detail", std::string(detail)}});
}

int status_for_error(const Error& err) {
  const std::string& c = err.code;
  if (c == "DuplicateApid" || c == "DuplicateApni" || c == "DuplicateGrant" ||
      c == "DuplicateAuthorization" || c == "AlreadyMember" || c == "StaleClock") {
    return 409;
  }
  if (c == "NotFound" || c == "NoSuchGrant" || c == "NotMember" ||
      c == "UnknownDataset") {
    return 404;
  }
  if (c == "OutOfOrderTransition" || c == "BadInterval" || c == "BadRegion" ||
      c == "AlreadyRevoked" || c == "DanglingMember" || c == "InvalidEnvelope") {
    return 422;
  }
  return 400;  // grammar and shape errors
}

RegistryService::RegistryService(std::shared_ptr<GovernanceStore> store, Clock clock,
                                 std::string admin_token)
    : store_(std::move(store)), clock_(std::move(clock)),
      admin_token_(std::move(admin_token)) {}

WireResponse RegistryService::handle(const WireRequest& req) {
  try {
    return handle_checked(req);
  } catch (const MalformedViewError& e) {
    return error_response(500, "MalformedView", e.what());
  } catch (const std::exception& e) {
    // Type mismatches inside otherwise well-formed JSON bodies land here.
    return error_response(400, "MalformedBody", e.what());
  }
}

WireResponse RegistryService::handle_checked(const WireRequest& req) {
  if (req.body.size() > kMaxBodyBytes) {
    return error_response(400, "BodyTooLarge", "request body exceeds 64 KiB");
  }
  std::string path = req.path;
  std::string query;
  if (const std::size_t q = path.find('?'); q != std::string::npos) {
    query = path.substr(q + 1);
    path = path.substr(0, q);
  }
  if (!admin_token_.empty() && req.bearer_token != admin_token_) {
    return error_response(401, "Unauthorized", "missing or invalid bearer token");
  }

  if (req.method == "GET") {
    if (path == "/registry/v1/audit") return handle_audit(query);
    return error_response(404, "NotFound", "no such endpoint");
  }

  const json body = parse_body(req.body);
  if (body.is_discarded() || !body.is_object()) {
    return error_response(400, "MalformedBody", "body must be a JSON object");
  }
  const std::string actor = body.value("actor", "admin");
  Timestamp now = clock_();
  if (body.contains("now")) {
    auto ts = parse_timestamp(body.value("now", ""));
    if (!ts.ok()) return error_response(400, ts.error().code, ts.error().detail);
    now = ts.value();
  }

  if (req.method == "POST") return handle_post(path, body, actor, now);
  if (req.method == "DELETE") return handle_delete(path, actor, now);
  return error_response(404, "NotFound", "unsupported method");
}

WireResponse RegistryService::handle_post(const std::string& path, const json& body,
                                          const std::string& actor, Timestamp now) {
  const auto seg = split_path(path);
  const auto fail = [](const Error& e) {
    return error_response(status_for_error(e), e.code, e.detail);
  };
  if (seg.size() < 3 || seg[0] != "registry" || seg[1] != "v1") {
    return error_response(404, "NotFound", "no such endpoint");
  }

  if (seg.size() == 3 && seg[2] == "platforms") {
    auto rec = platform_record_from_json(body.value("record", body));
    if (!rec.ok()) return fail(rec.error());
    const Apid apid = rec.value().apid;
    if (Status s = store_->register_platform(std::move(rec).value(), actor, now); !s.ok()) {
      return fail(s.error());
    }
    return json_response(201, to_json(store_->snapshot().platforms.at(apid)));
  }

  if (seg.size() == 3 && seg[2] == "networks") {
    auto rec = network_record_from_json(body.value("record", body));
    if (!rec.ok()) return fail(rec.error());
    const Apni apni = rec.value().apni;
    if (Status s = store_->create_network(std::move(rec).value(), actor, now); !s.ok()) {
      return fail(s.error());
    }
    return json_response(201, to_json(store_->snapshot().networks.at(apni)));
  }

  if (seg.size() == 5 && seg[2] == "networks" && seg[4] == "members") {
    auto apni = parse_apni(seg[3]);
    if (!apni.ok()) return fail(apni.error());
    auto apid = parse_apid(body.value("apid", ""));
    if (!apid.ok()) return fail(apid.error());
    if (Status s = store_->add_platform_to_network(apni.value(), apid.value(), actor, now);
        !s.ok()) {
      return fail(s.error());
    }
    return json_response(200, to_json(store_->snapshot().networks.at(apni.value())));
  }

  if (seg.size() == 3 && seg[2] == "assessments") {
    auto apid = parse_apid(body.value("apid", ""));
    if (!apid.ok()) return fail(apid.error());
    const std::string stage = body.value("stage", "submitted");
    Status s = Status::success();
    if (stage == "submitted") {
      s = store_->submit_assessment(apid.value(), body.value("framework_id", ""), actor,
                                    now);
    } else if (stage == "independent") {
      s = store_->record_independent_assessment(apid.value(), actor, now);
    } else {
      return error_response(400, "BadField", "stage must be 'submitted' or 'independent'");
    }
    if (!s.ok()) return fail(s.error());
    return json_response(200, to_json(store_->snapshot().atos.at(apid.value())));
  }

  if (seg.size() == 3 && seg[2] == "atos") {
    auto apid = parse_apid(body.value("apid", ""));
    if (!apid.ok()) return fail(apid.error());
    auto valid_until = parse_timestamp(body.value("valid_until", ""));
    if (!valid_until.ok()) return fail(valid_until.error());
    if (Status s = store_->issue_ato(apid.value(), valid_until.value(), actor, now);
        !s.ok()) {
      return fail(s.error());
    }
    return json_response(200, to_json(store_->snapshot().atos.at(apid.value())));
  }

  if (seg.size() == 5 && seg[2] == "atos" &&
      (seg[4] == "reviews" || seg[4] == "revocation")) {
    auto apid = parse_apid(seg[3]);
    if (!apid.ok()) return fail(apid.error());
    Status s = seg[4] == "reviews" ? store_->record_pentest_review(apid.value(), actor, now)
                                   : store_->revoke_ato(apid.value(), actor, now);
    if (!s.ok()) return fail(s.error());
    return json_response(200, to_json(store_->snapshot().atos.at(apid.value())));
  }

  if (seg.size() == 3 && seg[2] == "datasets") {
    auto meta = dataset_metadata_from_json(body.value("metadata", body));
    if (!meta.ok()) return fail(meta.error());
    const DatasetId id = meta.value().dataset_id;
    if (Status s = store_->register_dataset(std::move(meta).value(), actor, now); !s.ok()) {
      return fail(s.error());
    }
    return json_response(201, to_json(store_->snapshot().datasets.at(id)));
  }

  if (seg.size() == 5 && seg[2] == "datasets" && seg[4] == "rtd-grants") {
    auto id = parse_dataset_id(seg[3]);
    if (!id.ok()) return fail(id.error());
    auto apid = parse_apid(body.value("apid", ""));
    if (!apid.ok()) return fail(apid.error());
    if (Status s = store_->grant_right_to_distribute(id.value(), apid.value(), actor, now);
        !s.ok()) {
      return fail(s.error());
    }
    for (const RtdGrant& grant : store_->grants()) {
      if (grant.dataset_id == id.value() && grant.apid == apid.value() &&
          !grant.revoked_at) {
        return json_response(201, to_json(grant));
      }
    }
    return error_response(500, "Internal", "grant not found after creation");
  }

  if (seg.size() == 4 && seg[2] == "users" && seg[3] == "authorizations") {
    auto auth = user_authorization_from_json(body.value("authorization", body));
    if (!auth.ok()) return fail(auth.error());
    const std::string id = auth.value().authorization_id;
    if (Status s = store_->authorize_user(std::move(auth).value(), actor, now); !s.ok()) {
      return fail(s.error());
    }
    return json_response(201, to_json(store_->snapshot().user_authorizations.at(id)));
  }

  if (seg.size() == 3 && seg[2] == "decisions:evaluate") {
    return evaluate(body, now);
  }

  return error_response(404, "NotFound", "no such endpoint");
}

WireResponse RegistryService::handle_delete(const std::string& path,
                                            const std::string& actor, Timestamp now) {
  const auto seg = split_path(path);
  const auto fail = [](const Error& e) {
    return error_response(status_for_error(e), e.code, e.detail);
  };
  if (seg.size() == 6 && seg[0] == "registry" && seg[2] == "networks" &&
      seg[4] == "members") {
    auto apni = parse_apni(seg[3]);
    if (!apni.ok()) return fail(apni.error());
    auto apid = parse_apid(seg[5]);
    if (!apid.ok()) return fail(apid.error());
    if (Status s =
            store_->remove_platform_from_network(apni.value(), apid.value(), actor, now);
        !s.ok()) {
      return fail(s.error());
    }
    return json_response(200, to_json(store_->snapshot().networks.at(apni.value())));
  }

  if (seg.size() == 6 && seg[0] == "registry" && seg[2] == "datasets" &&
      seg[4] == "rtd-grants") {
    auto id = parse_dataset_id(seg[3]);
    if (!id.ok()) return fail(id.error());
    auto apid = parse_apid(seg[5]);
    if (!apid.ok()) return fail(apid.error());
    if (Status s =
            store_->revoke_right_to_distribute(id.value(), apid.value(), actor, now);
        !s.ok()) {
      return fail(s.error());
    }
    for (const RtdGrant& grant : store_->grants()) {
      if (grant.dataset_id == id.value() && grant.apid == apid.value() &&
          grant.revoked_at) {
        return json_response(200, to_json(grant));
      }
    }
    return error_response(500, "Internal", "grant not found after revocation");
  }

  if (seg.size() == 5 && seg[0] == "registry" && seg[2] == "users" &&
      seg[3] == "authorizations") {
    if (Status s = store_->revoke_user_authorization(seg[4], actor, now); !s.ok()) {
      return fail(s.error());
    }
    return json_response(200, to_json(store_->snapshot().user_authorizations.at(seg[4])));
  }

  return error_response(404, "NotFound", "no such endpoint");
}

WireResponse RegistryService::handle_audit(const std::string& query) {
  const std::int64_t offset = query_param(query, "offset", 0);
  const std::int64_t limit = std::min<std::int64_t>(query_param(query, "limit", 100), 1000);
  const std::vector<AuditEvent> log = store_->audit_log();
  json events = json::array();
  for (std::int64_t i = offset; i < static_cast<std::int64_t>(log.size()) &&
                                i < offset + limit;
       ++i) {
    events.push_back(audit_event_to_json(log[static_cast<std::size_t>(i)]));
  }
  return json_response(200, json{{"events", events},
                                 {"offset", offset},
                                 {"total", log.size()}});
}

WireResponse RegistryService::evaluate(const json& body, Timestamp now) {
  TransferQuery query;
  auto dataset = parse_dataset_id(body.value("dataset_id", ""));
  if (!dataset.ok()) return error_response(400, dataset.error().code, dataset.error().detail);
  query.dataset_id = std::move(dataset).value();
  auto source = parse_apid(body.value("source_apid", ""));
  if (!source.ok()) return error_response(400, source.error().code, source.error().detail);
  query.source_apid = std::move(source).value();
  auto dest = parse_apid(body.value("dest_apid", ""));
  if (!dest.ok()) return error_response(400, dest.error().code, dest.error().detail);
  query.dest_apid = std::move(dest).value();
  const auto user_it = body.find("user_id");
  const auto auth_it = body.find("authorization_id");
  if (user_it == body.end() || !user_it->is_string() || auth_it == body.end() ||
      !auth_it->is_string()) {
    return error_response(400, "MalformedBody", "user_id and authorization_id required");
  }
  query.user_id = user_it->get<std::string>();
  query.authorization_id = auth_it->get<std::string>();
  query.now = now;
  if (body.contains("verified_attestation")) {
    const json& va = body["verified_attestation"];
    VerifiedIdentity identity;
    auto apid = parse_apid(va.value("apid", ""));
    if (!apid.ok()) return error_response(400, apid.error().code, apid.error().detail);
    identity.apid = std::move(apid).value();
    auto region = parse_arid(va.value("region", "arid:global"));
    if (!region.ok()) return error_response(400, region.error().code, region.error().detail);
    identity.region = std::move(region).value();
    if (va.contains("apnis")) {
      if (!va["apnis"].is_array()) {
        return error_response(400, "BadField", "apnis must be a list");
      }
      for (const auto& item : va["apnis"]) {
        auto apni = parse_apni(item.is_string() ? item.get<std::string>() : "");
        if (!apni.ok()) return error_response(400, apni.error().code, apni.error().detail);
        identity.apnis.insert(std::move(apni).value());
      }
    }
    identity.verified_at = now;
    query.verified_attestation = std::move(identity);
  }

  const bool advisory = body.value("advisory", false);
  const RegistryView view = store_->snapshot();
  Decision decision = evaluate_transfer(query, view, make_ato_status_fn(view, query.now));
  if (!advisory) return json_response(200, to_json(decision));

  // Advisory dry-run: the attestation check cannot run without a live
  // challenge, so it is reported as not evaluated and excluded from the
  // verdict.
  json out = to_json(decision);
  bool allow = true;
  json reasons = json::array();
  for (std::size_t i = 0; i + 1 < decision.trace.size(); ++i) {
    if (!decision.trace[i].passed) {
      allow = false;
      reasons.push_back(std::string(to_string(*decision.trace[i].reason)));
    }
  }
  out["decision"] = allow ? "ALLOW" : "DENY";
  out["reasons"] = reasons;
  out["advisory"] = true;
  out["trace"][5] = json{{"check", std::string(kCheckNames[5])},
                         {"passed", nullptr},
                         {"detail", "NOT-EVALUATED: advisory dry-run has no attestation"}};
  // The advisory trace carries a JSON null marker, which canonical bytes
  // reject; serialize this one body with the plain dumper.
  return WireResponse{200, out.dump()};
}

PlatformAgent::PlatformAgent(AgentIdentity identity, std::shared_ptr<GovernanceStore> store,
                             Clock clock, std::shared_ptr<EntropySource> entropy,
                             std::int64_t freshness_window_seconds)
    : identity_(std::move(identity)), store_(std::move(store)), clock_(std::move(clock)),
      entropy_(std::move(entropy)), freshness_window_seconds_(freshness_window_seconds) {}

WireResponse PlatformAgent::handle(const WireRequest& req) {
  try {
    return handle_checked(req);
  } catch (const MalformedViewError& e) {
    return error_response(500, "MalformedView", e.what());
  } catch (const std::exception& e) {
    return error_response(400, "MalformedBody", e.what());
  }
}

WireResponse PlatformAgent::handle_checked(const WireRequest& req) {
  if (req.body.size() > kMaxBodyBytes) {
    return error_response(400, "BodyTooLarge", "request body exceeds 64 KiB");
  }
  const auto seg = split_path(req.path);
  if (seg.size() >= 2 && seg[0] == "safe" && seg[1] == "v1") {
    if (req.method == "GET" && seg.size() == 3 && seg[2] == "platform") {
      return platform_metadata();
    }
    if (req.method == "GET" && seg.size() == 4 && seg[2] == "datasets") {
      return dataset_metadata(seg[3]);
    }
    if (req.method == "POST" && seg.size() == 3 && seg[2] == "transfer-challenges") {
      return issue_challenge();
    }
    if (req.method == "POST" && seg.size() == 3 && seg[2] == "transfer-requests") {
      return transfer_request(req.body);
    }
  }
  return error_response(404, "NotFound", "no such endpoint");
}

WireResponse PlatformAgent::platform_metadata() {
  const RegistryView view = store_->snapshot();
  json apnis = json::array();
  const auto it = view.platforms.find(identity_.apid);
  if (it != view.platforms.end()) {
    for (const Apni& apni : it->second.apni_memberships) apnis.push_back(apni.value);
  }
  return json_response(200, json{{"apid", identity_.apid.value},
                                 {"apnis", apnis},
                                 {"region", identity_.region.value},
                                 {"service_version", std::string(kServiceVersion)}});
}

bool PlatformAgent::hosts(const DatasetId& id, const RegistryView& view) const {
  if (identity_.hosted_datasets) return identity_.hosted_datasets->contains(id);
  return view.datasets.contains(id);
}

WireResponse PlatformAgent::dataset_metadata(const std::string& raw_id) {
  auto id = parse_dataset_id(raw_id);
  if (!id.ok()) return error_response(400, id.error().code, id.error().detail);
  const RegistryView view = store_->snapshot();
  const auto it = view.datasets.find(id.value());
  if (it == view.datasets.end() || !hosts(id.value(), view)) {
    return error_response(404, "UnknownDataset",
                          raw_id + " is not hosted on this platform");
  }
  const DatasetSafeMetadata& meta = it->second;
  json networks = json::array();
  for (const Apni& apni : meta.authorized_networks) networks.push_back(apni.value);
  json out{{"dataset_id", meta.dataset_id.value},
           {"right_to_distribute_here", meta.rtd_holders.contains(identity_.apid)},
           {"authorized_networks", networks}};
  if (meta.region_restrictions) {
    json regions = json::array();
    for (const Arid& arid : *meta.region_restrictions) regions.push_back(arid.value);
    out["region_restrictions"] = regions;
  }
  return json_response(200, out);
}

WireResponse PlatformAgent::issue_challenge() {
  const Timestamp now = clock_();
  std::lock_guard lock(mu_);
  // Unconsumed challenges die with the window; prune them here so the table
  // stays bounded by the issue rate.
  for (auto it = challenges_.begin(); it != challenges_.end();) {
    it = now > it->second ? challenges_.erase(it) : std::next(it);
  }
  const std::string nonce = generate_nonce(*entropy_);
  const Timestamp expires = now.plus_seconds(freshness_window_seconds_);
  challenges_[nonce] = expires;
  return json_response(200, json{{"nonce", nonce},
                                 {"expires_at", render_timestamp(expires)}});
}

WireResponse PlatformAgent::transfer_request(const std::string& body_text) {
  const json body = parse_body(body_text);
  if (body.is_discarded() || !body.is_object()) {
    return error_response(400, "MalformedBody", "body must be a JSON object");
  }
  for (const char* field :
       {"dataset_id", "user_id", "authorization_id", "nonce"}) {
    if (!body.contains(field) || !body[field].is_string()) {
      return error_response(400, "MalformedBody",
                            std::string("missing required field '") + field + "'");
    }
  }
  if (!body.contains("destination_envelope")) {
    return error_response(400, "MalformedBody", "missing 'destination_envelope'");
  }
  auto dataset = parse_dataset_id(body["dataset_id"].get<std::string>());
  if (!dataset.ok()) {
    return error_response(400, dataset.error().code, dataset.error().detail);
  }
  auto envelope = envelope_from_json(body["destination_envelope"]);
  if (!envelope.ok()) {
    return error_response(422, "InvalidEnvelope", envelope.error().detail);
  }
  const std::string nonce = body["nonce"].get<std::string>();
  const Timestamp now = clock_();

  // Challenges are single-use: consumed here whatever the outcome.
  bool nonce_ok = false;
  std::string attestation_note;
  {
    std::lock_guard lock(mu_);
    const auto it = challenges_.find(nonce);
    if (it == challenges_.end()) {
      attestation_note = "NonceMismatch: nonce was not issued here or already used";
    } else if (now > it->second) {
      challenges_.erase(it);
      attestation_note = "NonceMismatch: challenge expired";
    } else {
      challenges_.erase(it);
      nonce_ok = true;
    }
  }

  const RegistryView view = store_->snapshot();
  std::optional<VerifiedIdentity> verified;
  if (nonce_ok) {
    auto v = verify_envelope(envelope.value(), trust_anchors_from_view(view), nonce, now,
                             freshness_window_seconds_);
    if (v.ok()) {
      verified = std::move(v).value();
    } else {
      attestation_note = v.error().code + ": " + v.error().detail;
    }
  }

  TransferQuery query;
  query.dataset_id = dataset.value();
  query.source_apid = identity_.apid;
  // The destination is whoever the envelope proves itself to be; an
  // unverified envelope only contributes its claimed apid.
  query.dest_apid = verified ? verified->apid : envelope.value().payload.apid;
  query.user_id = body["user_id"].get<std::string>();
  query.authorization_id = body["authorization_id"].get<std::string>();
  query.now = now;
  query.verified_attestation = verified;

  Decision decision = evaluate_transfer(query, view, make_ato_status_fn(view, now));
  if (!attestation_note.empty() && !decision.trace[5].passed) {
    decision.trace[5].detail += " (verify: " + attestation_note + ")";
  }

  json reasons = json::array();
  for (const ReasonCode code : decision.reasons) {
    reasons.push_back(std::string(to_string(code)));
  }
  auto seq = store_->record_decision(
      json{{"query", to_json(query)},
           {"decision", decision.allow ? "ALLOW" : "DENY"},
           {"reasons", reasons}},
      "agent:" + identity_.apid.value, now);
  if (!seq.ok()) {
    return error_response(status_for_error(seq.error()), seq.error().code,
                          seq.error().detail);
  }

  json trace = json::array();
  for (const CheckResult& check : decision.trace) trace.push_back(to_json(check));
  json out{{"decision", decision.allow ? "ALLOW" : "DENY"},
           {"reasons", reasons},
           {"trace", trace}};
  if (!decision.allow) return json_response(403, out);

  // A transfer grant never confers redistribution; it expires with the user
  // authorization it was issued under.
  const auto auth_it = view.user_authorizations.find(query.authorization_id);
  const Timestamp expires =
      auth_it != view.user_authorizations.end() ? auth_it->second.expires_at : now;
  out["grant"] = json{{"grant_id", "xfer:" + std::to_string(seq.value())},
                      {"dataset_id", query.dataset_id.value},
                      {"destination_apid", query.dest_apid.value},
                      {"expires_at", render_timestamp(expires)},
                      {"redistribution", false}};
  return json_response(200, out);
}

}  // namespace safe::wire
