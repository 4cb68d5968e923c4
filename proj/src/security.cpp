#include "nm/security.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace nm {

namespace {

mpz_class from_bytes(std::span<const std::uint8_t> b) {
  mpz_class z;
  if (!b.empty()) mpz_import(z.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return z;
}

std::vector<std::uint8_t> to_bytes(const mpz_class& z) {
  std::size_t count = (mpz_sizeinbase(z.get_mpz_t(), 2) + 7) / 8;
  std::vector<std::uint8_t> out(count);
  if (z != 0) mpz_export(out.data(), &count, 1, 1, 1, 0, z.get_mpz_t());
  out.resize(z == 0 ? 0 : count);
  return out;
}

void append_fixed(std::vector<std::uint8_t>& out, const mpz_class& z, std::size_t k) {
  auto b = to_bytes(z);
  out.insert(out.end(), k - b.size(), 0);
  out.insert(out.end(), b.begin(), b.end());
}

std::vector<std::uint8_t> apply_forward(std::span<const std::uint8_t> message, const mpz_class& exp,
                                        const mpz_class& n, std::size_t k) {
  if (k < 2) throw Error(Errc::BadKeyFile, "modulus too small");
  const std::size_t chunk = k - 1;
  std::vector<std::uint8_t> out;
  out.reserve((message.size() + chunk - 1) / chunk * k);
  std::vector<std::uint8_t> block;
  for (std::size_t pos = 0; pos < message.size(); pos += chunk) {
    auto part = message.subspan(pos, std::min(chunk, message.size() - pos));
    block.assign(1, 0x01);
    block.insert(block.end(), part.begin(), part.end());
    mpz_class m = from_bytes(block);
    if (m >= n) throw Error(Errc::BadBlockLength, "plaintext block exceeds modulus");
    mpz_class c;
    mpz_powm(c.get_mpz_t(), m.get_mpz_t(), exp.get_mpz_t(), n.get_mpz_t());
    append_fixed(out, c, k);
  }
  return out;
}

std::vector<std::uint8_t> apply_inverse(std::span<const std::uint8_t> blocks, const mpz_class& exp,
                                        const mpz_class& n, std::size_t k) {
  if (k == 0 || blocks.size() % k != 0)
    throw Error(Errc::BadBlockLength, "block data of " + std::to_string(blocks.size()) + " bytes, block size " +
                                          std::to_string(k));
  std::vector<std::uint8_t> out;
  for (std::size_t pos = 0; pos < blocks.size(); pos += k) {
    mpz_class c = from_bytes(blocks.subspan(pos, k));
    if (c >= n) throw Error(Errc::SentinelMismatch, "block value exceeds modulus");
    mpz_class m;
    mpz_powm(m.get_mpz_t(), c.get_mpz_t(), exp.get_mpz_t(), n.get_mpz_t());
    auto plain = to_bytes(m);
    if (plain.empty() || plain.front() != 0x01) throw Error(Errc::SentinelMismatch, "block sentinel mismatch");
    out.insert(out.end(), plain.begin() + 1, plain.end());
  }
  return out;
}

mpz_class random_prime(gmp_randclass& rng, unsigned bits) {
  while (true) {
    mpz_class c = rng.get_z_bits(bits);
    mpz_setbit(c.get_mpz_t(), bits - 1);
    mpz_setbit(c.get_mpz_t(), bits - 2);
    mpz_setbit(c.get_mpz_t(), 0);
    mpz_class p;
    mpz_nextprime(p.get_mpz_t(), c.get_mpz_t());
    if (mpz_sizeinbase(p.get_mpz_t(), 2) == bits) return p;
  }
}

}  // namespace

std::size_t modulus_bytes(const mpz_class& n) { return (mpz_sizeinbase(n.get_mpz_t(), 2) + 7) / 8; }

mpz_class rsa_public_op(const mpz_class& m, const RsaPublicKey& key) {
  mpz_class c;
  mpz_powm(c.get_mpz_t(), m.get_mpz_t(), key.e.get_mpz_t(), key.n.get_mpz_t());
  return c;
}

mpz_class rsa_private_op(const mpz_class& c, const RsaKeyPair& key) {
  if (!key.d) throw Error(Errc::MissingPrivateExponent, "private operation requires d");
  mpz_class m;
  mpz_powm(m.get_mpz_t(), c.get_mpz_t(), key.d->get_mpz_t(), key.n.get_mpz_t());
  return m;
}

RsaKeyPair keypair_from_primes(const mpz_class& p, const mpz_class& q, const mpz_class& e) {
  mpz_class phi = (p - 1) * (q - 1);
  mpz_class d;
  if (mpz_invert(d.get_mpz_t(), e.get_mpz_t(), phi.get_mpz_t()) == 0)
    throw Error(Errc::BadKeyFile, "public exponent not invertible");
  RsaKeyPair key;
  key.n = p * q;
  key.e = e;
  key.d = d;
  key.k = modulus_bytes(key.n);
  return key;
}

RsaKeyPair generate_keypair(unsigned bits, std::optional<std::uint64_t> seed) {
  if (bits != 512 && bits != 1024 && bits != 2048)
    throw Error(Errc::BadKeyFile, "key size must be 512, 1024 or 2048 bits");
  gmp_randclass rng(gmp_randinit_mt);
  if (seed) {
    rng.seed(mpz_class(std::to_string(*seed)));
  } else {
    std::random_device rd;
    mpz_class s = (mpz_class(rd()) << 32) | mpz_class(rd());
    rng.seed(s);
  }
  while (true) {
    mpz_class p = random_prime(rng, bits / 2);
    mpz_class q = random_prime(rng, bits / 2);
    if (p == q) continue;
    mpz_class phi = (p - 1) * (q - 1);
    mpz_class e = 65537;
    mpz_class g;
    while (true) {
      mpz_gcd(g.get_mpz_t(), e.get_mpz_t(), phi.get_mpz_t());
      if (g == 1) break;
      e += 2;
    }
    return keypair_from_primes(p, q, e);
  }
}

std::vector<std::uint8_t> sign(std::span<const std::uint8_t> message, const RsaKeyPair& key) {
  if (!key.d) throw Error(Errc::MissingPrivateExponent, "signing requires the private exponent");
  return apply_forward(message, *key.d, key.n, key.k);
}

std::vector<std::uint8_t> verify_recover(std::span<const std::uint8_t> signature, const RsaPublicKey& key) {
  return apply_inverse(signature, key.e, key.n, key.k);
}

std::vector<std::uint8_t> encrypt(std::span<const std::uint8_t> plain, const RsaPublicKey& key) {
  return apply_forward(plain, key.e, key.n, key.k);
}

std::vector<std::uint8_t> decrypt(std::span<const std::uint8_t> cipher, const RsaKeyPair& key) {
  if (!key.d) throw Error(Errc::MissingPrivateExponent, "decryption requires the private exponent");
  return apply_inverse(cipher, *key.d, key.n, key.k);
}

std::string format_key(const RsaKeyPair& key, bool include_private) {
  std::ostringstream out;
  out << "n=" << key.n.get_str() << "\n";
  out << "e=" << key.e.get_str() << "\n";
  if (include_private && key.d) out << "d=" << key.d->get_str() << "\n";
  return out.str();
}

RsaKeyPair parse_key(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<mpz_class> n, e, d;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::BadKeyFile, "key line without '='");
    std::string name = line.substr(0, eq);
    mpz_class v;
    if (v.set_str(line.substr(eq + 1), 10) != 0 || v <= 0) throw Error(Errc::BadKeyFile, "bad number for " + name);
    if (name == "n")
      n = v;
    else if (name == "e")
      e = v;
    else if (name == "d")
      d = v;
    else
      throw Error(Errc::BadKeyFile, "unknown key field '" + name + "'");
  }
  if (!n || !e) throw Error(Errc::BadKeyFile, "key needs n= and e=");
  if (*e <= 1 || *e >= *n) throw Error(Errc::BadKeyFile, "public exponent out of range");
  RsaKeyPair key;
  key.n = *n;
  key.e = *e;
  key.d = d;
  key.k = modulus_bytes(key.n);
  return key;
}

RsaKeyPair load_key_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadKeyFile, "cannot open key file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key(ss.str());
}

void save_key_file(const RsaKeyPair& key, const std::string& path, bool include_private) {
  std::ofstream out(path, std::ios::trunc);
  out << format_key(key, include_private);
  if (!out) throw Error(Errc::Io, "cannot write key file " + path);
}

}  // namespace nm
