#include "safe/crypto.hpp"

#include <sodium.h>

#include <stdexcept>
#include <vector>

namespace safe {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;  // uppercase is rejected: hex in this project is lowercase-only
}

}  // namespace

std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const std::uint8_t b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

Result<std::vector<std::uint8_t>> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    return Result<std::vector<std::uint8_t>>::failure("BadHex",
                                                      "odd number of hex digits");
  }
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = hex_nibble(hex[i]);
    const int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      return Result<std::vector<std::uint8_t>>::failure(
          "BadHex", "invalid hex digit at position " + std::to_string(i));
    }
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_hash_sha256_BYTES> digest{};
  crypto_hash_sha256(digest.data(),
                     reinterpret_cast<const unsigned char*>(bytes.data()),
                     bytes.size());
  return to_hex(digest);
}

KeyPair keypair_from_seed(std::span<const std::uint8_t, 32> seed) {
  ensure_sodium();
  KeyPair kp;
  std::copy(seed.begin(), seed.end(), kp.seed.begin());
  std::array<std::uint8_t, crypto_sign_ed25519_SECRETKEYBYTES> sk{};
  crypto_sign_ed25519_seed_keypair(kp.public_key.data(), sk.data(), kp.seed.data());
  sodium_memzero(sk.data(), sk.size());
  return kp;
}

Signature ed25519_sign(const KeyPair& key, std::string_view bytes) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_sign_ed25519_SECRETKEYBYTES> sk{};
  std::array<std::uint8_t, 32> pk{};
  crypto_sign_ed25519_seed_keypair(pk.data(), sk.data(), key.seed.data());
  Signature sig{};
  crypto_sign_ed25519_detached(sig.data(), nullptr,
                               reinterpret_cast<const unsigned char*>(bytes.data()),
                               bytes.size(), sk.data());
  sodium_memzero(sk.data(), sk.size());
  return sig;
}

bool ed25519_verify(std::span<const std::uint8_t, 32> public_key,
                    std::string_view bytes, std::span<const std::uint8_t, 64> sig) {
  ensure_sodium();
  return crypto_sign_ed25519_verify_detached(
             sig.data(), reinterpret_cast<const unsigned char*>(bytes.data()),
             bytes.size(), public_key.data()) == 0;
}

void SystemEntropy::fill(std::span<std::uint8_t> out) {
  ensure_sodium();
  randombytes_buf(out.data(), out.size());
}

std::uint64_t SeededEntropy::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SeededEntropy::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = next();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word & 0xff);
      word >>= 8;
    }
  }
}

std::string generate_nonce(EntropySource& entropy) {
  std::array<std::uint8_t, 16> bytes{};
  entropy.fill(bytes);
  return to_hex(bytes);
}

KeyPair generate_keypair(EntropySource& entropy) {
  std::array<std::uint8_t, 32> seed{};
  entropy.fill(seed);
  return keypair_from_seed(seed);
}

}  // namespace safe
