#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nm/error.hpp"

namespace nm {

// Textbook RSA with message recovery. Every block is 0x01 || chunk, where a
// chunk holds at most k-1 message bytes, raised to the key exponent and
// written as k big-endian bytes. No padding scheme and no digest: this is
// the historical construction and is not secure by modern standards.

struct RsaPublicKey {
  mpz_class n;
  mpz_class e;
  std::size_t k = 0;  // modulus length in bytes
};

struct RsaKeyPair {
  mpz_class n;
  mpz_class e;
  std::optional<mpz_class> d;
  std::size_t k = 0;

  RsaPublicKey public_key() const { return {n, e, k}; }
  bool has_private() const { return d.has_value(); }
};

/// bits must be 512, 1024 or 2048. A seed makes the result reproducible;
/// without one the system entropy source is used.
RsaKeyPair generate_keypair(unsigned bits, std::optional<std::uint64_t> seed = std::nullopt);

/// Builds a keypair from explicit primes (d = e^-1 mod (p-1)(q-1)). Used for
/// fixed test vectors such as p=61, q=53, e=17.
RsaKeyPair keypair_from_primes(const mpz_class& p, const mpz_class& q, const mpz_class& e);

std::size_t modulus_bytes(const mpz_class& n);

/// Single-block primitives: m^e mod n and c^d mod n.
mpz_class rsa_public_op(const mpz_class& m, const RsaPublicKey& key);
mpz_class rsa_private_op(const mpz_class& c, const RsaKeyPair& key);

std::vector<std::uint8_t> sign(std::span<const std::uint8_t> message, const RsaKeyPair& key);
std::vector<std::uint8_t> verify_recover(std::span<const std::uint8_t> signature, const RsaPublicKey& key);

std::vector<std::uint8_t> encrypt(std::span<const std::uint8_t> plain, const RsaPublicKey& key);
std::vector<std::uint8_t> decrypt(std::span<const std::uint8_t> cipher, const RsaKeyPair& key);

inline std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline std::string to_string(std::span<const std::uint8_t> b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

/// Key file: decimal `n=`, `e=` and optional `d=` lines.
RsaKeyPair load_key_file(const std::string& path);
void save_key_file(const RsaKeyPair& key, const std::string& path, bool include_private = true);
std::string format_key(const RsaKeyPair& key, bool include_private = true);
RsaKeyPair parse_key(const std::string& text);

}  // namespace nm
