#include "hei/ckks/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hei/ckks/lattice_backend.hpp"
#include "hei/errors.hpp"

namespace hei::ckks::serial {

namespace {

constexpr char kMagic[4] = {'H', 'E', 'I', '1'};
constexpr std::size_t kHeader = 9;

class Writer {
 public:
  void u64(std::uint64_t v) { words_.push_back(v); }
  void f64(double v) { words_.push_back(std::bit_cast<std::uint64_t>(v)); }
  void seed(const Seed& s) {
    for (std::size_t i = 0; i < 4; ++i) {
      std::uint64_t w = 0;
      for (std::size_t b = 0; b < 8; ++b) w |= static_cast<std::uint64_t>(s[i * 8 + b]) << (8 * b);
      u64(w);
    }
  }
  void text(const std::string& s) {
    u64(s.size());
    for (std::size_t i = 0; i < s.size(); i += 8) {
      std::uint64_t w = 0;
      for (std::size_t b = 0; b < 8 && i + b < s.size(); ++b) {
        w |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i + b])) << (8 * b);
      }
      u64(w);
    }
  }
  void poly(const RnsPoly& p) {
    u64(p.n);
    u64(p.num_q);
    u64(p.num_p);
    words_.insert(words_.end(), p.data.begin(), p.data.end());
  }
  void header(const KeyHeader& h) {
    u64(h.params_hash);
    u64(static_cast<std::uint64_t>(h.backend));
    u64(h.key_id);
  }

  Bytes finish(Tag tag) const {
    const std::size_t len = words_.size() * 8;
    if (len > 0xFFFFFFFFull) throw FormatError("object too large for the container format");
    Bytes out(kHeader + len);
    std::memcpy(out.data(), kMagic, 4);
    out[4] = static_cast<std::uint8_t>(tag);
    for (int b = 0; b < 4; ++b) out[5 + b] = static_cast<std::uint8_t>(len >> (8 * b));
    std::uint8_t* dst = out.data() + kHeader;
    for (std::uint64_t w : words_) {
      for (int b = 0; b < 8; ++b) *dst++ = static_cast<std::uint8_t>(w >> (8 * b));
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> words_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> payload) : data_(payload) {
    if (payload.size() % 8 != 0) throw FormatError("payload length is not a multiple of 8");
  }

  std::uint64_t u64() {
    if (pos_ + 8 > data_.size()) throw FormatError("payload truncated");
    std::uint64_t w = 0;
    for (int b = 0; b < 8; ++b) w |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(b)]) << (8 * b);
    pos_ += 8;
    return w;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t bounded(std::uint64_t max, const char* what) {
    const std::uint64_t v = u64();
    if (v > max) throw FormatError(std::string("field out of range: ") + what);
    return v;
  }
  Seed seed() {
    Seed s;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::uint64_t w = u64();
      for (std::size_t b = 0; b < 8; ++b) s[i * 8 + b] = static_cast<std::uint8_t>(w >> (8 * b));
    }
    return s;
  }
  std::string text() {
    const std::uint64_t len = bounded(remaining(), "string length");
    std::string s;
    for (std::uint64_t i = 0; i < len; i += 8) {
      const std::uint64_t w = u64();
      for (std::uint64_t b = 0; b < 8 && i + b < len; ++b) s.push_back(static_cast<char>(w >> (8 * b)));
    }
    return s;
  }
  // Ring element validated against the context: shape and residue ranges.
  RnsPoly poly(const Context& ctx) {
    const std::uint64_t n = u64();
    const std::uint64_t nq = u64();
    const std::uint64_t np = u64();
    if (n != ctx.n()) throw FormatError("ring element has the wrong dimension");
    if (nq > ctx.q().size()) throw FormatError("ring element has too many ciphertext limbs");
    if (np != 0 && np != ctx.num_special()) throw FormatError("ring element has a malformed special basis");
    if ((nq + np) * n > remaining() / 8) throw FormatError("ring element truncated");
    RnsPoly p(n, nq, np);
    for (std::size_t i = 0; i < p.limbs(); ++i) {
      const std::uint64_t q = ctx.limb_modulus(i, p.num_q).value();
      for (auto& v : p.limb(i)) {
        v = u64();
        if (v >= q) throw FormatError("ring element residue out of range");
      }
    }
    return p;
  }
  KeyHeader header(const Context& ctx) {
    KeyHeader h;
    h.params_hash = static_cast<std::uint32_t>(bounded(0xFFFFFFFFu, "params hash"));
    h.backend = static_cast<BackendKind>(bounded(1, "backend"));
    h.key_id = u64();
    if (h.params_hash != ctx.params_hash()) throw IncompatibleError("object was produced under different parameters");
    return h;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  void finish() const {
    if (pos_ != data_.size()) throw FormatError("trailing bytes in payload");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

Reader open(std::span<const std::uint8_t> bytes, Tag expected) {
  const Container c = parse(bytes);
  if (c.tag != expected) throw FormatError("unexpected object tag " + std::to_string(static_cast<int>(c.tag)));
  if (c.consumed != bytes.size()) throw FormatError("trailing bytes after object");
  return Reader(c.payload);
}

void write_switch_key(Writer& w, const KeySwitchKey& k) {
  w.u64(static_cast<std::uint64_t>(k.level));
  w.seed(k.seed);
  w.poly(k.b);
}

KeySwitchKey read_switch_key(Reader& r, const Context& ctx, BackendKind backend) {
  KeySwitchKey k;
  k.level = static_cast<int>(r.bounded(static_cast<std::uint64_t>(ctx.max_level()), "key level"));
  k.seed = r.seed();
  if (backend == BackendKind::exact) {
    const std::uint64_t n = r.u64();
    const std::uint64_t nq = r.u64();
    const std::uint64_t np = r.u64();
    if (n || nq || np) throw FormatError("exact-backend key carries ring data");
    return k;
  }
  k.b = r.poly(ctx);
  if (k.b.num_q != static_cast<std::size_t>(k.level) + 1 || k.b.num_p != ctx.num_special()) {
    throw FormatError("switching key shape does not match its level");
  }
  k.a = LatticeBackend::expand_uniform(ctx, k.seed, k.level, true);
  return k;
}

void check_ring_shape(const RnsPoly& p, std::size_t num_q, std::size_t num_p, const char* what) {
  if (p.num_q != num_q || p.num_p != num_p) throw FormatError(std::string(what) + " has the wrong shape");
}

void check_level_scale(int level, double scale) {
  (void)level;
  if (!std::isfinite(scale) || !(scale > 0.0)) throw FormatError("scale must be finite and positive");
}

}  // namespace

Container parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeader) throw FormatError("container truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic (expected HEI1)");
  const auto tag = bytes[4];
  if (tag < 1 || tag > 7) throw FormatError("unknown object tag " + std::to_string(tag));
  std::size_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::size_t>(bytes[5 + static_cast<std::size_t>(b)]) << (8 * b);
  if (bytes.size() - kHeader < len) throw FormatError("container payload truncated");
  return {static_cast<Tag>(tag), bytes.subspan(kHeader, len), kHeader + len};
}

Tag peek_tag(std::span<const std::uint8_t> bytes) { return parse(bytes).tag; }

Bytes save(const CkksParams& p) {
  Writer w;
  w.u64(p.ring_dim);
  w.u64(static_cast<std::uint64_t>(p.scale_bits));
  w.u64(p.modulus_bits.size());
  for (int b : p.modulus_bits) w.u64(static_cast<std::uint64_t>(b));
  w.text(p.security_profile);
  return w.finish(Tag::params);
}

CkksParams load_params(std::span<const std::uint8_t> bytes) {
  Reader r = open(bytes, Tag::params);
  CkksParams p;
  p.ring_dim = r.bounded(1u << 20, "ring_dim");
  p.scale_bits = static_cast<int>(r.bounded(64, "scale bits"));
  const std::uint64_t count = r.bounded(64, "modulus count");
  p.modulus_bits.clear();
  for (std::uint64_t i = 0; i < count; ++i) p.modulus_bits.push_back(static_cast<int>(r.bounded(64, "modulus bits")));
  p.security_profile = r.text();
  r.finish();
  p.validate();
  return p;
}

Bytes save(const SecretKey& k) {
  Writer w;
  w.header(k.header);
  w.poly(k.s);
  return w.finish(Tag::secret_key);
}

SecretKey load_secret_key(std::span<const std::uint8_t> bytes, const Context& ctx) {
  Reader r = open(bytes, Tag::secret_key);
  SecretKey k;
  k.header = r.header(ctx);
  if (k.header.backend == BackendKind::lattice) {
    k.s = r.poly(ctx);
    check_ring_shape(k.s, ctx.q().size(), ctx.num_special(), "secret key");
  } else {
    if (r.u64() || r.u64() || r.u64()) throw FormatError("exact-backend key carries ring data");
  }
  r.finish();
  return k;
}

Bytes save(const PublicKey& k) {
  Writer w;
  w.header(k.header);
  w.seed(k.seed);
  w.poly(k.b);
  return w.finish(Tag::public_key);
}

PublicKey load_public_key(std::span<const std::uint8_t> bytes, const Context& ctx) {
  Reader r = open(bytes, Tag::public_key);
  PublicKey k;
  k.header = r.header(ctx);
  k.seed = r.seed();
  if (k.header.backend == BackendKind::lattice) {
    k.b = r.poly(ctx);
    check_ring_shape(k.b, ctx.q().size(), 0, "public key");
    k.a = LatticeBackend::expand_uniform(ctx, k.seed, ctx.max_level(), false);
  } else {
    if (r.u64() || r.u64() || r.u64()) throw FormatError("exact-backend key carries ring data");
  }
  r.finish();
  return k;
}

Bytes save(const RelinKey& k) {
  Writer w;
  w.header(k.header);
  write_switch_key(w, k.key);
  return w.finish(Tag::relin_key);
}

RelinKey load_relin_key(std::span<const std::uint8_t> bytes, const Context& ctx) {
  Reader r = open(bytes, Tag::relin_key);
  RelinKey k;
  k.header = r.header(ctx);
  k.key = read_switch_key(r, ctx, k.header.backend);
  r.finish();
  return k;
}

Bytes save(const GaloisKeys& k) {
  Writer w;
  w.header(k.header);
  w.u64(k.keys.size());
  for (const auto& [step, key] : k.keys) {
    w.u64(step);
    write_switch_key(w, key);
  }
  return w.finish(Tag::galois_keys);
}

GaloisKeys load_galois_keys(std::span<const std::uint8_t> bytes, const Context& ctx) {
  Reader r = open(bytes, Tag::galois_keys);
  GaloisKeys k;
  k.header = r.header(ctx);
  const std::uint64_t count = r.bounded(ctx.slots(), "Galois key count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t step = r.u64();
    if (step == 0 || step >= ctx.slots()) throw FormatError("Galois key step out of range");
    if (k.keys.contains(step)) throw FormatError("duplicate Galois key step");
    k.keys[step] = read_switch_key(r, ctx, k.header.backend);
  }
  r.finish();
  return k;
}

Bytes save(const Plaintext& p) {
  Writer w;
  w.u64(static_cast<std::uint64_t>(p.level));
  w.f64(p.scale);
  w.u64(p.slots.size());
  for (double v : p.slots) w.f64(v);
  w.u64(p.poly ? 1 : 0);
  if (p.poly) w.poly(*p.poly);
  return w.finish(Tag::plaintext);
}

Plaintext load_plaintext(std::span<const std::uint8_t> bytes, const Context& ctx) {
  Reader r = open(bytes, Tag::plaintext);
  Plaintext p;
  p.level = static_cast<int>(r.bounded(static_cast<std::uint64_t>(ctx.max_level()), "level"));
  p.scale = r.f64();
  check_level_scale(p.level, p.scale);
  const std::uint64_t count = r.u64();
  if (count != ctx.slots()) throw FormatError("plaintext slot count does not match the parameters");
  p.slots.resize(count);
  for (auto& v : p.slots) v = r.f64();
  if (r.bounded(1, "poly flag")) {
    p.poly = r.poly(ctx);
    if (p.poly->num_q != static_cast<std::size_t>(p.level) + 1) throw FormatError("plaintext poly level mismatch");
  }
  r.finish();
  return p;
}

Bytes save(const Ciphertext& c) {
  Writer w;
  w.u64(c.params_hash);
  w.u64(static_cast<std::uint64_t>(c.backend));
  w.u64(c.key_id);
  w.u64(static_cast<std::uint64_t>(c.level));
  w.f64(c.scale);
  w.u64(c.valid_slots);
  if (const auto* s = std::get_if<SlotBody>(&c.body)) {
    w.u64(s->size());
    for (double v : *s) w.f64(v);
  } else {
    const auto& ring = std::get<RingBody>(c.body);
    w.poly(ring[0]);
    w.poly(ring[1]);
  }
  return w.finish(Tag::ciphertext);
}

Ciphertext load_ciphertext(std::span<const std::uint8_t> bytes, const Context& ctx) {
  Reader r = open(bytes, Tag::ciphertext);
  Ciphertext c;
  KeyHeader h = r.header(ctx);
  c.params_hash = h.params_hash;
  c.backend = h.backend;
  c.key_id = h.key_id;
  c.level = static_cast<int>(r.bounded(static_cast<std::uint64_t>(ctx.max_level()), "level"));
  c.scale = r.f64();
  check_level_scale(c.level, c.scale);
  c.valid_slots = r.bounded(ctx.slots(), "valid slots");
  if (c.backend == BackendKind::exact) {
    const std::uint64_t count = r.u64();
    if (count != ctx.slots()) throw FormatError("ciphertext slot count does not match the parameters");
    SlotBody s(count);
    for (auto& v : s) v = r.f64();
    c.body = std::move(s);
  } else {
    RnsPoly c0 = r.poly(ctx);
    RnsPoly c1 = r.poly(ctx);
    const std::size_t nq = static_cast<std::size_t>(c.level) + 1;
    check_ring_shape(c0, nq, 0, "ciphertext");
    check_ring_shape(c1, nq, 0, "ciphertext");
    c.body = RingBody{std::move(c0), std::move(c1)};
  }
  r.finish();
  return c;
}

Bytes save(const EvaluationKeys& k) {
  Bytes out = save(k.public_key);
  for (const Bytes& part : {save(k.relin_key), save(k.galois_keys)}) out.insert(out.end(), part.begin(), part.end());
  return out;
}

EvaluationKeys load_evaluation_keys(std::span<const std::uint8_t> bytes, const Context& ctx) {
  EvaluationKeys k;
  Container c = parse(bytes);
  k.public_key = load_public_key(bytes.first(c.consumed), ctx);
  bytes = bytes.subspan(c.consumed);
  c = parse(bytes);
  k.relin_key = load_relin_key(bytes.first(c.consumed), ctx);
  bytes = bytes.subspan(c.consumed);
  c = parse(bytes);
  k.galois_keys = load_galois_keys(bytes.first(c.consumed), ctx);
  if (c.consumed != bytes.size()) throw FormatError("trailing bytes after evaluation keys");
  if (k.relin_key.header.key_id != k.public_key.header.key_id ||
      k.galois_keys.header.key_id != k.public_key.header.key_id ||
      k.relin_key.header.backend != k.public_key.header.backend ||
      k.galois_keys.header.backend != k.public_key.header.backend) {
    throw IncompatibleError("evaluation keys do not belong to one key set");
  }
  return k;
}

Bytes save_key_file(const CkksParams& params, const KeyMaterial& km) {
  Bytes out = save(params);
  for (const Bytes& part : {save(km.secret_key), save(km.public_key), save(km.relin_key), save(km.galois_keys)}) {
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

KeyFile load_key_file(std::span<const std::uint8_t> bytes) {
  KeyFile f;
  Container c = parse(bytes);
  f.params = load_params(bytes.first(c.consumed));
  f.context = Context::create(f.params);
  const Context& ctx = *f.context;
  bytes = bytes.subspan(c.consumed);
  c = parse(bytes);
  f.keys.secret_key = load_secret_key(bytes.first(c.consumed), ctx);
  bytes = bytes.subspan(c.consumed);
  c = parse(bytes);
  f.keys.public_key = load_public_key(bytes.first(c.consumed), ctx);
  bytes = bytes.subspan(c.consumed);
  c = parse(bytes);
  f.keys.relin_key = load_relin_key(bytes.first(c.consumed), ctx);
  bytes = bytes.subspan(c.consumed);
  c = parse(bytes);
  f.keys.galois_keys = load_galois_keys(bytes.first(c.consumed), ctx);
  if (c.consumed != bytes.size()) throw FormatError("trailing bytes after key file");
  return f;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

}  // namespace hei::ckks::serial
