#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "poi/bytes.hpp"

namespace poi {

//! Node identity: the 32-byte public key. Network-wide ordering is
//! lexicographic on the key bytes.
struct NodeId {
    std::array<uint8_t, 32> bytes{};

    auto operator<=>(const NodeId&) const = default;

    ByteSpan span() const { return ByteSpan{bytes.data(), bytes.size()}; }
    std::string hex() const { return to_hex(span()); }
    std::string short_hex() const { return hex().substr(0, 8); }
};

NodeId node_id_from_hex(const std::string& hex);

//! A detached signature. Length is fixed per scheme (64 bytes for ed25519,
//! 32 for the transparent test scheme); containers stay length-agnostic.
struct Signature {
    Bytes bytes;

    bool operator==(const Signature&) const = default;
    ByteSpan span() const { return as_span(bytes); }
};

struct PrivateKey {
    Bytes bytes;
};

struct KeyPair {
    PrivateKey sk;
    NodeId id;
};

// SHA-256. The single hash function H used everywhere in the protocol.
Hash32 sha256(ByteSpan msg);
Hash32 sha256(std::initializer_list<ByteSpan> parts);

//! Counter-mode hash RNG: word i is the first 8 bytes (big-endian) of
//! H(seed || i_as_u64_be). Reproducible bit-exactly from SHA-256 alone.
class SeededRng {
public:
    explicit SeededRng(const Hash32& seed) : seed_(seed) {}

    uint64_t next();
    //! Stateless form: the i-th word of the stream for `seed`.
    static uint64_t word(const Hash32& seed, uint64_t index);

    //! Uniform double in [0, 1) using the top 53 bits of the next word.
    double next_unit();

    uint64_t counter() const { return counter_; }

private:
    Hash32 seed_;
    uint64_t counter_ = 0;
};

//! Deterministic signature scheme: signing the same message with the same
//! key always yields identical bytes. Implementations keep a verification
//! counter so tests can audit exactly how many verifies an operation does.
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;

    virtual KeyPair keypair_from_seed(const Hash32& seed) = 0;
    virtual Signature sign(const PrivateKey& sk, ByteSpan msg) const = 0;
    bool verify(const NodeId& pk, const Signature& sig, ByteSpan msg) const {
        ++verify_count_;
        return verify_impl(pk, sig, msg);
    }

    uint64_t verify_count() const { return verify_count_; }
    void reset_verify_count() { verify_count_ = 0; }

protected:
    virtual bool verify_impl(const NodeId& pk, const Signature& sig, ByteSpan msg) const = 0;

private:
    mutable uint64_t verify_count_ = 0;
};

//! Ed25519 (libsodium). Deterministic by construction (RFC 8032).
class Ed25519Scheme : public SignatureScheme {
public:
    Ed25519Scheme();

    KeyPair keypair_from_seed(const Hash32& seed) override;
    Signature sign(const PrivateKey& sk, ByteSpan msg) const override;

protected:
    bool verify_impl(const NodeId& pk, const Signature& sig, ByteSpan msg) const override;
};

//! Test double: the "signature" is H(sk || msg) and verification looks the
//! private key up in a registry held by whoever owns the scheme instance.
//! Orders of magnitude faster than ed25519; used for statistical runs and
//! oracle tests where real signatures would only add wall-clock time.
class TransparentScheme : public SignatureScheme {
public:
    KeyPair keypair_from_seed(const Hash32& seed) override;
    Signature sign(const PrivateKey& sk, ByteSpan msg) const override;

protected:
    bool verify_impl(const NodeId& pk, const Signature& sig, ByteSpan msg) const override;

private:
    std::map<NodeId, Bytes> registry_;
};

enum class CryptoScheme { ed25519, transparent };

const char* to_string(CryptoScheme kind);
std::optional<CryptoScheme> crypto_scheme_from_string(const std::string& name);

std::unique_ptr<SignatureScheme> make_scheme(CryptoScheme kind);

}  // namespace poi
