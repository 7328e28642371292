#pragma once

#include <variant>

#include "poi/proof.hpp"

namespace poi {

//! Evidence that `accused` signed two tour requests with the same dependency
//! but different messages: the on-chain form of a double-touring report.
struct FraudClaim {
    NodeId accused;
    NodeId claimant;
    SignRequest first;
    SignRequest second;

    bool operator==(const FraudClaim&) const = default;
};

//! Either an opaque payload (semantics out of scope) or a fraud claim.
struct Transaction {
    struct Opaque {
        Bytes payload;
        bool operator==(const Opaque&) const = default;
    };

    std::variant<Opaque, FraudClaim> body;

    bool operator==(const Transaction&) const = default;

    static Transaction opaque(Bytes payload) { return Transaction{Opaque{std::move(payload)}}; }
    static Transaction fraud(FraudClaim claim) { return Transaction{std::move(claim)}; }

    bool is_fraud_claim() const { return std::holds_alternative<FraudClaim>(body); }
    const FraudClaim* fraud_claim() const { return std::get_if<FraudClaim>(&body); }

    Bytes serialize() const;
    static Transaction deserialize(ByteSpan data);
    Hash32 hash() const { return sha256(as_span(serialize())); }
};

//! A claim is well-formed evidence iff both requests carry a valid signature
//! by the accused, share the dependency, and commit to different messages.
bool fraud_claim_valid(const SignatureScheme& scheme, const FraudClaim& claim);

//! Merkle root over transaction hashes. Leaves are H(serialized tx); odd
//! level widths duplicate the last node; a single leaf is the root itself;
//! the empty list hashes to H("").
Hash32 merkle_root(const std::vector<Transaction>& txs);

constexpr size_t kHeaderSize = 112;

//! Fixed 112-byte header: four 4-byte words then three 32-byte digests.
//! `extra` is a producer-chosen word with no consensus meaning. All integers
//! big-endian. The block id is H(serialized header).
struct BlockHeader {
    uint32_t version = 1;
    uint32_t time = 0;       // virtual milliseconds since simulation start
    uint32_t difficulty = 1; // mean tour length in force at this height
    uint32_t extra = 0;
    Hash32 prev_hash;
    Hash32 merkle_root;
    Hash32 proof_hash;

    bool operator==(const BlockHeader&) const = default;

    std::array<uint8_t, kHeaderSize> serialize() const;
    static BlockHeader deserialize(ByteSpan data);
    Hash32 id() const;
};

//! Header plus the data it commits to. `producer` is carried for convenience;
//! it is implied by the proof's first signature and is not part of the block
//! file format.
struct Block {
    BlockHeader header;
    std::vector<Transaction> transactions;
    Proof proof;
    NodeId producer;

    Hash32 id() const { return header.id(); }

    //! File format: header || u32 tx count || per-tx u32 length + body || proof.
    Bytes serialize() const;
    static Block deserialize(ByteSpan data);
};

//! Recover the producer of a deserialized block by matching the proof's s0
//! against the roster. Returns nullopt if no roster key signed prev_hash.
std::optional<NodeId> recover_producer(const SignatureScheme& scheme, const Block& block,
                                       const Roster& roster);

}  // namespace poi
