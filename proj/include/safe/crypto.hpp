#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "safe/result.hpp"

namespace safe {

std::string to_hex(std::span<const std::uint8_t> bytes);
Result<std::vector<std::uint8_t>> from_hex(std::string_view hex);

std::string sha256_hex(std::string_view bytes);

// Ed25519. The secret is the 32-byte seed; the 64-byte expanded form libsodium
// uses internally is derived on demand.
struct KeyPair {
  static constexpr const char* kAlgorithm = "Ed25519";
  std::array<std::uint8_t, 32> public_key{};
  std::array<std::uint8_t, 32> seed{};
};

using Signature = std::array<std::uint8_t, 64>;

KeyPair keypair_from_seed(std::span<const std::uint8_t, 32> seed);
Signature ed25519_sign(const KeyPair& key, std::string_view bytes);
bool ed25519_verify(std::span<const std::uint8_t, 32> public_key,
                    std::string_view bytes, std::span<const std::uint8_t, 64> sig);

// Injectable randomness so tests and the scenario harness are reproducible.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

class SystemEntropy final : public EntropySource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

// splitmix64 stream; identical seeds yield identical byte streams.
class SeededEntropy final : public EntropySource {
 public:
  explicit SeededEntropy(std::uint64_t seed) : state_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::uint64_t next();
  std::uint64_t state_;
};

// 16 random bytes as 32 lowercase hex chars.
std::string generate_nonce(EntropySource& entropy);

KeyPair generate_keypair(EntropySource& entropy);

}  // namespace safe
