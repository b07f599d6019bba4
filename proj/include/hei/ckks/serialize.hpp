#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "hei/ckks/context.hpp"
#include "hei/ckks/types.hpp"

// Binary container: "HEI1" | tag (1 byte) | payload length (u32 LE) | payload.
// Payloads are sequences of 64-bit little-endian words. Every key and
// ciphertext object carries the params hash, checked on load.
namespace hei::ckks::serial {

enum class Tag : std::uint8_t {
  params = 1,
  secret_key = 2,
  public_key = 3,
  relin_key = 4,
  galois_keys = 5,
  plaintext = 6,
  ciphertext = 7,
};

using Bytes = std::vector<std::uint8_t>;

struct Container {
  Tag tag;
  std::span<const std::uint8_t> payload;
  std::size_t consumed;  // header + payload bytes
};

// Parses one container at the front of `bytes`.
Container parse(std::span<const std::uint8_t> bytes);
Tag peek_tag(std::span<const std::uint8_t> bytes);

Bytes save(const CkksParams& p);
Bytes save(const SecretKey& k);
Bytes save(const PublicKey& k);
Bytes save(const RelinKey& k);
Bytes save(const GaloisKeys& k);
Bytes save(const Plaintext& p);
Bytes save(const Ciphertext& c);

CkksParams load_params(std::span<const std::uint8_t> bytes);
SecretKey load_secret_key(std::span<const std::uint8_t> bytes, const Context& ctx);
PublicKey load_public_key(std::span<const std::uint8_t> bytes, const Context& ctx);
RelinKey load_relin_key(std::span<const std::uint8_t> bytes, const Context& ctx);
GaloisKeys load_galois_keys(std::span<const std::uint8_t> bytes, const Context& ctx);
Plaintext load_plaintext(std::span<const std::uint8_t> bytes, const Context& ctx);
Ciphertext load_ciphertext(std::span<const std::uint8_t> bytes, const Context& ctx);

// Concatenated public key, relinearization key and Galois keys.
Bytes save(const EvaluationKeys& k);
EvaluationKeys load_evaluation_keys(std::span<const std::uint8_t> bytes, const Context& ctx);

// Whole key file: params followed by every key object, secret key included.
Bytes save_key_file(const CkksParams& params, const KeyMaterial& km);
struct KeyFile {
  CkksParams params;
  std::shared_ptr<const Context> context;
  KeyMaterial keys;
};
KeyFile load_key_file(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace hei::ckks::serial
