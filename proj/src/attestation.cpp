#include "safe/attestation.hpp"

#include <algorithm>

#include "safe/canonical.hpp"

namespace safe {

using nlohmann::json;

namespace {

bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

bool exact_keys(const json& j, std::initializer_list<const char*> keys) {
  if (!j.is_object() || j.size() != keys.size()) return false;
  for (const char* k : keys) {
    if (!j.contains(k)) return false;
  }
  return true;
}

template <std::size_t N>
Status read_hex_bytes(const json& j, const char* key, std::array<std::uint8_t, N>& out) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    return Status::failure("BadField", std::string("missing '") + key + "'");
  }
  const std::string& hex = it->get_ref<const std::string&>();
  if (hex.size() != N * 2 || !is_lower_hex(hex)) {
    return Status::failure("BadField", std::string("'") + key + "' must be " +
                                           std::to_string(N * 2) + " lowercase hex chars");
  }
  auto bytes = from_hex(hex);
  std::copy(bytes.value().begin(), bytes.value().end(), out.begin());
  return Status::success();
}

}  // namespace

TrustAnchorSet trust_anchors_from_view(const RegistryView& view) {
  TrustAnchorSet anchors;
  for (const auto& [apni, net] : view.networks) {
    if (net.authority_public_key.size() != 32) continue;
    std::array<std::uint8_t, 32> key{};
    std::copy(net.authority_public_key.begin(), net.authority_public_key.end(),
              key.begin());
    anchors.emplace(apni, key);
  }
  return anchors;
}

json to_json(const PlatformCertificate& cert) {
  return json{{"apid", cert.apid.value},
              {"platform_public_key", to_hex(cert.platform_public_key)},
              {"apni", cert.apni.value},
              {"issued_at", render_timestamp(cert.issued_at)},
              {"valid_until", render_timestamp(cert.valid_until)},
              {"authority_signature", to_hex(cert.authority_signature)}};
}

json to_json(const AttestationDocument& doc) {
  json memberships = json::array();
  for (const auto& apni : doc.apni_memberships) memberships.push_back(apni.value);
  return json{{"version", doc.version},
              {"apid", doc.apid.value},
              {"apni_memberships", memberships},
              {"framework_id", doc.framework_id},
              {"region", doc.region.value},
              {"nonce", doc.nonce},
              {"issued_at", render_timestamp(doc.issued_at)}};
}

json to_json(const SignedEnvelope& env) {
  return json{{"payload", to_json(env.payload)},
              {"certificate", to_json(env.certificate)},
              {"signature", to_hex(env.signature)}};
}

json to_json(const VerifiedIdentity& identity) {
  json apnis = json::array();
  for (const auto& apni : identity.apnis) apnis.push_back(apni.value);
  return json{{"apid", identity.apid.value},
              {"apnis", apnis},
              {"region", identity.region.value},
              {"verified_at", render_timestamp(identity.verified_at)}};
}

Result<PlatformCertificate> certificate_from_json(const json& j) {
  if (!exact_keys(j, {"apid", "platform_public_key", "apni", "issued_at", "valid_until",
                      "authority_signature"})) {
    return Result<PlatformCertificate>::failure("BadField",
                                                "certificate has wrong field set");
  }
  PlatformCertificate cert;
  auto apid = parse_apid(j["apid"].is_string() ? j["apid"].get<std::string>() : "");
  if (!apid.ok()) return apid.error();
  cert.apid = std::move(apid).value();
  auto apni = parse_apni(j["apni"].is_string() ? j["apni"].get<std::string>() : "");
  if (!apni.ok()) return apni.error();
  cert.apni = std::move(apni).value();
  if (Status s = read_hex_bytes(j, "platform_public_key", cert.platform_public_key);
      !s.ok()) {
    return s.error();
  }
  if (Status s = read_hex_bytes(j, "authority_signature", cert.authority_signature);
      !s.ok()) {
    return s.error();
  }
  for (const auto& [key, member] :
       {std::pair{"issued_at", &cert.issued_at}, std::pair{"valid_until", &cert.valid_until}}) {
    if (!j[key].is_string()) {
      return Result<PlatformCertificate>::failure("BadField",
                                                  std::string("missing '") + key + "'");
    }
    auto ts = parse_timestamp(j[key].get<std::string>());
    if (!ts.ok()) return ts.error();
    *member = ts.value();
  }
  if (!(cert.issued_at < cert.valid_until)) {
    return Result<PlatformCertificate>::failure("BadInterval",
                                                "issued_at must precede valid_until");
  }
  return cert;
}

Result<AttestationDocument> attestation_document_from_json(const json& j) {
  if (!exact_keys(j, {"version", "apid", "apni_memberships", "framework_id", "region",
                      "nonce", "issued_at"})) {
    return Result<AttestationDocument>::failure("BadField",
                                                "attestation document has wrong field set");
  }
  AttestationDocument doc;
  if (!j["version"].is_string() ||
      j["version"].get<std::string>() != kAttestationVersion) {
    return Result<AttestationDocument>::failure("BadField", "unsupported version");
  }
  doc.version = kAttestationVersion;
  auto apid = parse_apid(j["apid"].is_string() ? j["apid"].get<std::string>() : "");
  if (!apid.ok()) return apid.error();
  doc.apid = std::move(apid).value();
  if (!j["apni_memberships"].is_array()) {
    return Result<AttestationDocument>::failure("BadField",
                                                "apni_memberships must be a list");
  }
  for (const auto& item : j["apni_memberships"]) {
    auto apni = parse_apni(item.is_string() ? item.get<std::string>() : "");
    if (!apni.ok()) return apni.error();
    doc.apni_memberships.push_back(std::move(apni).value());
  }
  if (!std::is_sorted(doc.apni_memberships.begin(), doc.apni_memberships.end()) ||
      std::adjacent_find(doc.apni_memberships.begin(), doc.apni_memberships.end()) !=
          doc.apni_memberships.end()) {
    return Result<AttestationDocument>::failure(
        "BadField", "apni_memberships must be sorted and duplicate-free");
  }
  if (!j["framework_id"].is_string()) {
    return Result<AttestationDocument>::failure("BadField", "missing 'framework_id'");
  }
  doc.framework_id = j["framework_id"].get<std::string>();
  auto region = parse_arid(j["region"].is_string() ? j["region"].get<std::string>() : "");
  if (!region.ok()) return region.error();
  doc.region = std::move(region).value();
  if (!j["nonce"].is_string()) {
    return Result<AttestationDocument>::failure("BadField", "missing 'nonce'");
  }
  doc.nonce = j["nonce"].get<std::string>();
  if (doc.nonce.size() != 32 || !is_lower_hex(doc.nonce)) {
    return Result<AttestationDocument>::failure("BadField",
                                                "nonce must be 32 lowercase hex chars");
  }
  if (!j["issued_at"].is_string()) {
    return Result<AttestationDocument>::failure("BadField", "missing 'issued_at'");
  }
  auto ts = parse_timestamp(j["issued_at"].get<std::string>());
  if (!ts.ok()) return ts.error();
  doc.issued_at = ts.value();
  return doc;
}

Result<SignedEnvelope> envelope_from_json(const json& j) {
  if (!exact_keys(j, {"payload", "certificate", "signature"})) {
    return Result<SignedEnvelope>::failure("BadField", "envelope has wrong field set");
  }
  SignedEnvelope env;
  auto payload = attestation_document_from_json(j["payload"]);
  if (!payload.ok()) return payload.error();
  env.payload = std::move(payload).value();
  auto cert = certificate_from_json(j["certificate"]);
  if (!cert.ok()) return cert.error();
  env.certificate = std::move(cert).value();
  if (!j["signature"].is_string()) {
    return Result<SignedEnvelope>::failure("BadField", "missing 'signature'");
  }
  json sig_holder = json{{"signature", j["signature"]}};
  if (Status s = read_hex_bytes(sig_holder, "signature", env.signature); !s.ok()) {
    return s.error();
  }
  return env;
}

std::string certificate_signing_bytes(const PlatformCertificate& cert) {
  // All fields except the authority signature itself; the signing algorithm
  // name is bound into the payload.
  return must_canonical(json{{"algorithm", KeyPair::kAlgorithm},
                             {"apid", cert.apid.value},
                             {"platform_public_key", to_hex(cert.platform_public_key)},
                             {"apni", cert.apni.value},
                             {"issued_at", render_timestamp(cert.issued_at)},
                             {"valid_until", render_timestamp(cert.valid_until)}});
}

std::string attestation_signing_bytes(const AttestationDocument& doc) {
  json body = to_json(doc);
  body["algorithm"] = KeyPair::kAlgorithm;
  return must_canonical(body);
}

Result<PlatformCertificate> issue_certificate(const KeyPair& authority_key,
                                              const Apid& apid,
                                              std::span<const std::uint8_t, 32>
                                                  platform_public_key,
                                              const Apni& apni, Timestamp issued_at,
                                              Timestamp valid_until) {
  if (!(issued_at < valid_until)) {
    return Result<PlatformCertificate>::failure("BadInterval",
                                                "valid_until must follow issued_at");
  }
  PlatformCertificate cert;
  cert.apid = apid;
  std::copy(platform_public_key.begin(), platform_public_key.end(),
            cert.platform_public_key.begin());
  cert.apni = apni;
  cert.issued_at = issued_at;
  cert.valid_until = valid_until;
  cert.authority_signature = ed25519_sign(authority_key, certificate_signing_bytes(cert));
  return cert;
}

Result<SignedEnvelope> sign_attestation(const KeyPair& platform_key,
                                        const AttestationDocument& doc,
                                        const PlatformCertificate& cert) {
  if (doc.apid != cert.apid) {
    return Result<SignedEnvelope>::failure(
        "ApidMismatch", "document apid " + doc.apid.value +
                            " does not match certificate apid " + cert.apid.value);
  }
  SignedEnvelope env;
  env.payload = doc;
  env.certificate = cert;
  env.signature = ed25519_sign(platform_key, attestation_signing_bytes(doc));
  return env;
}

Result<VerifiedIdentity> verify_envelope(const SignedEnvelope& env,
                                         const TrustAnchorSet& anchors,
                                         const std::string& expected_nonce,
                                         Timestamp now,
                                         std::int64_t freshness_window_seconds) {
  using R = Result<VerifiedIdentity>;
  const auto anchor = anchors.find(env.certificate.apni);
  if (anchor == anchors.end()) {
    return R::failure("UnknownAnchor",
                      "no trust anchor for " + env.certificate.apni.value);
  }
  if (now >= env.certificate.valid_until) {
    return R::failure("CertificateExpired",
                      "certificate expired at " +
                          render_timestamp(env.certificate.valid_until));
  }
  if (!ed25519_verify(anchor->second, certificate_signing_bytes(env.certificate),
                      env.certificate.authority_signature)) {
    return R::failure("BadCertificateSignature",
                      "certificate does not verify under the " +
                          env.certificate.apni.value + " authority key");
  }
  if (!ed25519_verify(env.certificate.platform_public_key,
                      attestation_signing_bytes(env.payload), env.signature)) {
    return R::failure("BadEnvelopeSignature",
                      "envelope does not verify under the certified platform key");
  }
  if (env.payload.apid != env.certificate.apid) {
    return R::failure("ApidMismatch", "payload apid " + env.payload.apid.value +
                                          " != certificate apid " +
                                          env.certificate.apid.value);
  }
  if (env.payload.nonce != expected_nonce) {
    return R::failure("NonceMismatch", "nonce does not match the issued challenge");
  }
  const std::int64_t age = now.seconds_since(env.payload.issued_at);
  if (age > freshness_window_seconds || -age > freshness_window_seconds) {
    return R::failure("StaleAttestation",
                      "attestation issued outside the freshness window");
  }
  VerifiedIdentity identity;
  identity.apid = env.payload.apid;
  identity.region = env.payload.region;
  identity.verified_at = now;
  // Only the certified membership counts, and only if the payload claims it.
  if (std::find(env.payload.apni_memberships.begin(), env.payload.apni_memberships.end(),
                env.certificate.apni) != env.payload.apni_memberships.end()) {
    identity.apnis.insert(env.certificate.apni);
  }
  return identity;
}

}  // namespace safe
