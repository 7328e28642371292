#include "poi/crypto.hpp"

#include <sodium.h>

#include <mutex>

namespace poi {

namespace {

void ensure_sodium() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

}  // namespace

NodeId node_id_from_hex(const std::string& hex) {
    Bytes raw = from_hex(hex);
    if (raw.size() != 32) throw std::invalid_argument("node id must be 32 bytes");
    NodeId id;
    std::memcpy(id.bytes.data(), raw.data(), 32);
    return id;
}

Hash32 sha256(ByteSpan msg) {
    ensure_sodium();
    Hash32 out;
    crypto_hash_sha256(out.bytes.data(), msg.data(), msg.size());
    return out;
}

Hash32 sha256(std::initializer_list<ByteSpan> parts) {
    ensure_sodium();
    crypto_hash_sha256_state state;
    crypto_hash_sha256_init(&state);
    for (ByteSpan part : parts)
        crypto_hash_sha256_update(&state, part.data(), part.size());
    Hash32 out;
    crypto_hash_sha256_final(&state, out.bytes.data());
    return out;
}

uint64_t SeededRng::next() { return word(seed_, counter_++); }

uint64_t SeededRng::word(const Hash32& seed, uint64_t index) {
    Bytes ctr(8);
    for (int i = 0; i < 8; ++i) ctr[i] = static_cast<uint8_t>(index >> (56 - 8 * i));
    Hash32 digest = sha256({seed.span(), as_span(ctr)});
    return read_u64be(digest.bytes.data());
}

double SeededRng::next_unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

Ed25519Scheme::Ed25519Scheme() { ensure_sodium(); }

KeyPair Ed25519Scheme::keypair_from_seed(const Hash32& seed) {
    KeyPair kp;
    kp.sk.bytes.resize(crypto_sign_SECRETKEYBYTES);
    unsigned char pk[crypto_sign_PUBLICKEYBYTES];
    crypto_sign_seed_keypair(pk, kp.sk.bytes.data(), seed.bytes.data());
    static_assert(crypto_sign_PUBLICKEYBYTES == 32);
    std::memcpy(kp.id.bytes.data(), pk, 32);
    return kp;
}

Signature Ed25519Scheme::sign(const PrivateKey& sk, ByteSpan msg) const {
    if (sk.bytes.size() != crypto_sign_SECRETKEYBYTES)
        throw std::invalid_argument("bad ed25519 secret key length");
    Signature sig;
    sig.bytes.resize(crypto_sign_BYTES);
    crypto_sign_detached(sig.bytes.data(), nullptr, msg.data(), msg.size(), sk.bytes.data());
    return sig;
}

bool Ed25519Scheme::verify_impl(const NodeId& pk, const Signature& sig, ByteSpan msg) const {
    if (sig.bytes.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(sig.bytes.data(), msg.data(), msg.size(),
                                       pk.bytes.data()) == 0;
}

KeyPair TransparentScheme::keypair_from_seed(const Hash32& seed) {
    KeyPair kp;
    kp.sk.bytes.assign(seed.bytes.begin(), seed.bytes.end());
    Hash32 pk = sha256({str_span("poi-transparent-pk"), seed.span()});
    std::memcpy(kp.id.bytes.data(), pk.bytes.data(), 32);
    registry_[kp.id] = kp.sk.bytes;
    return kp;
}

Signature TransparentScheme::sign(const PrivateKey& sk, ByteSpan msg) const {
    Hash32 tag = sha256({as_span(sk.bytes), msg});
    Signature sig;
    sig.bytes.assign(tag.bytes.begin(), tag.bytes.end());
    return sig;
}

bool TransparentScheme::verify_impl(const NodeId& pk, const Signature& sig, ByteSpan msg) const {
    if (sig.bytes.size() != 32) return false;
    auto it = registry_.find(pk);
    if (it == registry_.end()) return false;
    Hash32 tag = sha256({as_span(it->second), msg});
    return std::memcmp(tag.bytes.data(), sig.bytes.data(), 32) == 0;
}

std::unique_ptr<SignatureScheme> make_scheme(CryptoScheme kind) {
    switch (kind) {
        case CryptoScheme::ed25519: return std::make_unique<Ed25519Scheme>();
        case CryptoScheme::transparent: return std::make_unique<TransparentScheme>();
    }
    throw std::logic_error("unknown crypto scheme");
}

const char* to_string(CryptoScheme kind) {
    return kind == CryptoScheme::ed25519 ? "ed25519" : "transparent";
}

std::optional<CryptoScheme> crypto_scheme_from_string(const std::string& name) {
    if (name == "ed25519") return CryptoScheme::ed25519;
    if (name == "transparent") return CryptoScheme::transparent;
    return std::nullopt;
}

}  // namespace poi
