#include "poi/block.hpp"

namespace poi {

namespace {
constexpr uint8_t kKindOpaque = 0;
constexpr uint8_t kKindFraudClaim = 1;
}  // namespace

Bytes Transaction::serialize() const {
    Bytes out;
    if (const auto* opaque = std::get_if<Opaque>(&body)) {
        out.push_back(kKindOpaque);
        put_u32be(out, static_cast<uint32_t>(opaque->payload.size()));
        append(out, as_span(opaque->payload));
    } else {
        const auto& claim = std::get<FraudClaim>(body);
        out.push_back(kKindFraudClaim);
        append(out, claim.accused.span());
        append(out, claim.claimant.span());
        append(out, as_span(claim.first.serialize()));
        append(out, as_span(claim.second.serialize()));
    }
    return out;
}

Transaction Transaction::deserialize(ByteSpan data) {
    ByteReader reader(data);
    uint8_t kind = reader.u8();
    Transaction tx;
    if (kind == kKindOpaque) {
        uint32_t len = reader.u32be();
        tx.body = Opaque{reader.take(len)};
    } else if (kind == kKindFraudClaim) {
        FraudClaim claim;
        Bytes accused = reader.take(32);
        Bytes claimant = reader.take(32);
        std::memcpy(claim.accused.bytes.data(), accused.data(), 32);
        std::memcpy(claim.claimant.bytes.data(), claimant.data(), 32);
        claim.first = SignRequest::read_from(reader);
        claim.second = SignRequest::read_from(reader);
        tx.body = std::move(claim);
    } else {
        throw std::invalid_argument("unknown transaction kind");
    }
    if (!reader.done()) throw std::invalid_argument("trailing bytes after transaction");
    return tx;
}

bool fraud_claim_valid(const SignatureScheme& scheme, const FraudClaim& claim) {
    if (claim.first.initiator != claim.accused || claim.second.initiator != claim.accused)
        return false;
    if (claim.first.d != claim.second.d) return false;
    if (claim.first.m == claim.second.m) return false;
    return verify_request(scheme, claim.first) && verify_request(scheme, claim.second);
}

Hash32 merkle_root(const std::vector<Transaction>& txs) {
    if (txs.empty()) return sha256(ByteSpan{});
    std::vector<Hash32> level;
    level.reserve(txs.size());
    for (const Transaction& tx : txs) level.push_back(tx.hash());
    while (level.size() > 1) {
        if (level.size() % 2 != 0) level.push_back(level.back());
        std::vector<Hash32> next;
        next.reserve(level.size() / 2);
        for (size_t i = 0; i < level.size(); i += 2)
            next.push_back(sha256({level[i].span(), level[i + 1].span()}));
        level = std::move(next);
    }
    return level[0];
}

std::array<uint8_t, kHeaderSize> BlockHeader::serialize() const {
    Bytes buf;
    buf.reserve(kHeaderSize);
    put_u32be(buf, version);
    put_u32be(buf, time);
    put_u32be(buf, difficulty);
    put_u32be(buf, extra);
    append(buf, prev_hash);
    append(buf, merkle_root);
    append(buf, proof_hash);
    std::array<uint8_t, kHeaderSize> out;
    std::memcpy(out.data(), buf.data(), kHeaderSize);
    return out;
}

BlockHeader BlockHeader::deserialize(ByteSpan data) {
    if (data.size() < kHeaderSize) throw std::invalid_argument("header shorter than 112 bytes");
    ByteReader reader(data.first(kHeaderSize));
    BlockHeader h;
    h.version = reader.u32be();
    h.time = reader.u32be();
    h.difficulty = reader.u32be();
    h.extra = reader.u32be();
    h.prev_hash = reader.hash32();
    h.merkle_root = reader.hash32();
    h.proof_hash = reader.hash32();
    return h;
}

Hash32 BlockHeader::id() const {
    auto bytes = serialize();
    return sha256(ByteSpan{bytes.data(), bytes.size()});
}

Bytes Block::serialize() const {
    Bytes out;
    auto head = header.serialize();
    append(out, ByteSpan{head.data(), head.size()});
    put_u32be(out, static_cast<uint32_t>(transactions.size()));
    for (const Transaction& tx : transactions) {
        Bytes body = tx.serialize();
        put_u32be(out, static_cast<uint32_t>(body.size()));
        append(out, as_span(body));
    }
    append(out, as_span(proof.serialize()));
    return out;
}

Block Block::deserialize(ByteSpan data) {
    Block block;
    block.header = BlockHeader::deserialize(data);
    ByteReader reader(data.subspan(kHeaderSize));
    uint32_t count = reader.u32be();
    block.transactions.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = reader.u32be();
        block.transactions.push_back(Transaction::deserialize(as_span(reader.take(len))));
    }
    Bytes rest = reader.take(reader.remaining());
    block.proof = Proof::deserialize(as_span(rest));
    return block;
}

std::optional<NodeId> recover_producer(const SignatureScheme& scheme, const Block& block,
                                       const Roster& roster) {
    if (block.proof.signatures.empty()) return std::nullopt;
    for (const NodeId& id : roster.members()) {
        if (scheme.verify(id, block.proof.signatures[0], block.header.prev_hash.span()))
            return id;
    }
    return std::nullopt;
}

}  // namespace poi
