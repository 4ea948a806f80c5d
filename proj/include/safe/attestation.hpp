#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safe/crypto.hpp"
#include "safe/ids.hpp"
#include "safe/model.hpp"
#include "safe/result.hpp"
#include "safe/timestamp.hpp"

namespace safe {

inline constexpr std::string_view kAttestationVersion = "safe-attest/1";
inline constexpr std::int64_t kDefaultFreshnessWindowSeconds = 300;

// Binds one platform key to one (apid, apni) pair, signed by that network's
// authority key. A platform in k networks holds k certificates.
struct PlatformCertificate {
  Apid apid;
  std::array<std::uint8_t, 32> platform_public_key{};
  Apni apni;
  Timestamp issued_at;
  Timestamp valid_until;
  Signature authority_signature{};

  bool operator==(const PlatformCertificate&) const = default;
};

// The nonce-fresh document a platform presents to prove its identity,
// memberships and region. apni_memberships is sorted and duplicate-free.
struct AttestationDocument {
  std::string version{kAttestationVersion};
  Apid apid;
  std::vector<Apni> apni_memberships;
  std::string framework_id;
  Arid region;
  std::string nonce;  // 32 lowercase hex chars, challenger-supplied
  Timestamp issued_at;

  bool operator==(const AttestationDocument&) const = default;
};

struct SignedEnvelope {
  AttestationDocument payload;
  PlatformCertificate certificate;
  Signature signature{};  // platform key over canonical payload bytes

  bool operator==(const SignedEnvelope&) const = default;
};

// apni -> network authority verification key.
using TrustAnchorSet = std::map<Apni, std::array<std::uint8_t, 32>>;

TrustAnchorSet trust_anchors_from_view(const RegistryView& view);

// Produced only by verify_envelope on success. apnis holds only memberships
// backed by a verified certificate chain.
struct VerifiedIdentity {
  Apid apid;
  std::set<Apni> apnis;
  Arid region;
  Timestamp verified_at;

  bool operator==(const VerifiedIdentity&) const = default;
};

// Canonical bytes signed by the two signatures.
std::string certificate_signing_bytes(const PlatformCertificate& cert);
std::string attestation_signing_bytes(const AttestationDocument& doc);

Result<PlatformCertificate> issue_certificate(const KeyPair& authority_key,
                                              const Apid& apid,
                                              std::span<const std::uint8_t, 32>
                                                  platform_public_key,
                                              const Apni& apni, Timestamp issued_at,
                                              Timestamp valid_until);

Result<SignedEnvelope> sign_attestation(const KeyPair& platform_key,
                                        const AttestationDocument& doc,
                                        const PlatformCertificate& cert);

// Succeeds iff (a) the certificate verifies under the anchor for its apni and
// has not expired, (b) the envelope signature verifies under the certified
// platform key, (c) payload.apid == certificate.apid, (d) the nonce matches,
// (e) |now - payload.issued_at| <= freshness_window (inclusive).
// Errors: UnknownAnchor, CertificateExpired, BadCertificateSignature,
// BadEnvelopeSignature, ApidMismatch, NonceMismatch, StaleAttestation.
Result<VerifiedIdentity> verify_envelope(
    const SignedEnvelope& env, const TrustAnchorSet& anchors,
    const std::string& expected_nonce, Timestamp now,
    std::int64_t freshness_window_seconds = kDefaultFreshnessWindowSeconds);

// Wire form: canonical JSON, signatures and keys as lowercase hex. Parsers
// are strict: exact field sets, sorted duplicate-free membership lists.
nlohmann::json to_json(const PlatformCertificate& cert);
nlohmann::json to_json(const AttestationDocument& doc);
nlohmann::json to_json(const SignedEnvelope& env);
nlohmann::json to_json(const VerifiedIdentity& identity);
Result<PlatformCertificate> certificate_from_json(const nlohmann::json& j);
Result<AttestationDocument> attestation_document_from_json(const nlohmann::json& j);
Result<SignedEnvelope> envelope_from_json(const nlohmann::json& j);

}  // namespace safe
