#include "poi/proof.hpp"

#include <algorithm>

namespace poi {

Roster::Roster(std::vector<NodeId> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    auto dup = std::adjacent_find(members_.begin(), members_.end());
    if (dup != members_.end()) throw std::invalid_argument("duplicate node id in roster");
}

bool Roster::contains(const NodeId& id) const {
    return std::binary_search(members_.begin(), members_.end(), id);
}

size_t Roster::index_of(const NodeId& id) const {
    auto it = std::lower_bound(members_.begin(), members_.end(), id);
    if (it == members_.end() || *it != id) throw std::invalid_argument("node not in roster");
    return static_cast<size_t>(it - members_.begin());
}

size_t service_set_size(size_t roster_size) {
    return std::min<size_t>(20, roster_size / 2);
}

Bytes Proof::serialize() const {
    Bytes out;
    if (signatures.size() > 0xffff) throw std::length_error("proof too long to serialize");
    put_u16be(out, static_cast<uint16_t>(signatures.size()));
    for (const Signature& sig : signatures) {
        if (sig.bytes.size() > 0xffff) throw std::length_error("signature too long");
        put_u16be(out, static_cast<uint16_t>(sig.bytes.size()));
        append(out, as_span(sig.bytes));
    }
    return out;
}

Proof Proof::deserialize(ByteSpan data) {
    ByteReader reader(data);
    Proof proof;
    uint16_t count = reader.u16be();
    proof.signatures.reserve(count);
    for (uint16_t i = 0; i < count; ++i) {
        uint16_t len = reader.u16be();
        proof.signatures.push_back(Signature{reader.take(len)});
    }
    if (!reader.done()) throw std::invalid_argument("trailing bytes after proof");
    return proof;
}

Bytes SignRequest::signing_payload() const {
    Bytes out;
    out.reserve(96);
    append(out, h);
    append(out, d);
    append(out, m);
    return out;
}

Bytes SignRequest::serialize() const {
    Bytes out;
    append(out, h);
    append(out, d);
    append(out, m);
    append(out, initiator.span());
    if (req_sig.bytes.size() > 0xffff) throw std::length_error("signature too long");
    put_u16be(out, static_cast<uint16_t>(req_sig.bytes.size()));
    append(out, as_span(req_sig.bytes));
    return out;
}

SignRequest SignRequest::read_from(ByteReader& reader) {
    SignRequest req;
    req.h = reader.hash32();
    req.d = reader.hash32();
    req.m = reader.hash32();
    Bytes id = reader.take(32);
    std::memcpy(req.initiator.bytes.data(), id.data(), 32);
    uint16_t len = reader.u16be();
    req.req_sig.bytes = reader.take(len);
    return req;
}

SignRequest SignRequest::deserialize(ByteSpan data) {
    ByteReader reader(data);
    SignRequest req = read_from(reader);
    if (!reader.done()) throw std::invalid_argument("trailing bytes after sign request");
    return req;
}

bool verify_request(const SignatureScheme& scheme, const SignRequest& req) {
    return scheme.verify(req.initiator, req.req_sig, as_span(req.signing_payload()));
}

ServiceSet create_services(const Roster& roster, const Signature& seed) {
    if (roster.size() < 2) throw std::invalid_argument("roster needs at least 2 nodes");
    std::vector<NodeId> shuffled = roster.members();
    SeededRng rng(sha256(as_span(seed.bytes)));
    for (size_t i = shuffled.size() - 1; i > 0; --i) {
        size_t j = static_cast<size_t>(rng.next() % (i + 1));
        std::swap(shuffled[i], shuffled[j]);
    }
    shuffled.resize(service_set_size(roster.size()));
    return ServiceSet{std::move(shuffled)};
}

uint32_t tour_length(Difficulty difficulty, const Signature& seed) {
    if (difficulty.mean == 0) throw std::invalid_argument("difficulty mean must be >= 1");
    Hash32 len_seed = sha256({as_span(seed.bytes), str_span("len")});
    uint64_t word = SeededRng::word(len_seed, 0);
    uint64_t range = 2ull * difficulty.mean - 1;
    return static_cast<uint32_t>(1 + word % range);
}

const NodeId& next_hop(const Hash32& current_hash, const ServiceSet& services) {
    uint64_t word = read_u64be(current_hash.bytes.data());
    return services.members[word % services.members.size()];
}

namespace {

SignRequest make_request(const SignatureScheme& scheme, const KeyPair& initiator,
                         const Hash32& h, const Hash32& d, const Hash32& m) {
    SignRequest req;
    req.h = h;
    req.d = d;
    req.m = m;
    req.initiator = initiator.id;
    req.req_sig = scheme.sign(initiator.sk, as_span(req.signing_payload()));
    return req;
}

}  // namespace

TourBegin tour_begin(const SignatureScheme& scheme, const KeyPair& initiator,
                     const Roster& roster, const Hash32& dependency, const Hash32& message,
                     Difficulty difficulty) {
    TourBegin out;
    Signature s0 = scheme.sign(initiator.sk, dependency.span());
    out.state.initiator = initiator.id;
    out.state.dependency = dependency;
    out.state.message = message;
    out.state.difficulty = difficulty;
    out.state.services = create_services(roster, s0);
    out.state.target_len = tour_length(difficulty, s0);
    out.state.current_hash = sha256({as_span(s0.bytes), message.span()});
    out.state.partial = {s0};
    out.request = make_request(scheme, initiator, out.state.current_hash, dependency, message);
    return out;
}

AdvanceResult tour_advance(const SignatureScheme& scheme, TourState& state,
                           const KeyPair& initiator, const Signature& response) {
    const NodeId& visited = state.addressed_node();
    Bytes payload;
    payload.reserve(96);
    append(payload, state.current_hash);
    append(payload, state.dependency);
    append(payload, state.message);
    if (!scheme.verify(visited, response, as_span(payload)))
        return {AdvanceResult::Status::bad_response, std::nullopt, std::nullopt};

    Signature counter = scheme.sign(initiator.sk, as_span(response.bytes));
    state.partial.push_back(response);
    state.partial.push_back(counter);
    state.current_hash = sha256(as_span(counter.bytes));
    ++state.step;

    if (state.step == state.target_len) {
        Proof proof{state.partial};
        return {AdvanceResult::Status::completed, std::nullopt, std::move(proof)};
    }
    SignRequest next = make_request(scheme, initiator, state.current_hash, state.dependency,
                                    state.message);
    return {AdvanceResult::Status::next_request, std::move(next), std::nullopt};
}

Signature answer_request(const SignatureScheme& scheme, const PrivateKey& sk,
                         const SignRequest& req) {
    return scheme.sign(sk, as_span(req.signing_payload()));
}

CheckReport check_poi_detailed(const SignatureScheme& scheme, const Proof& proof,
                               const NodeId& initiator, const Hash32& dependency,
                               const Hash32& message, Difficulty difficulty,
                               const Roster& roster) {
    CheckReport report;
    if (proof.signatures.empty() || difficulty.mean == 0) {
        report.failure = CheckFailure::length;
        return report;
    }
    const Signature& s0 = proof.signatures[0];
    if (!scheme.verify(initiator, s0, dependency.span())) {
        report.failure = CheckFailure::initial_signature;
        report.failing_index = 0;
        return report;
    }
    uint32_t len = tour_length(difficulty, s0);
    report.expected_len = len;
    if (proof.signatures.size() != 2ull * len + 1) {
        report.failure = CheckFailure::length;
        return report;
    }
    if (roster.size() < 2) {
        report.failure = CheckFailure::roster;
        return report;
    }
    ServiceSet services = create_services(roster, s0);
    Hash32 current = sha256({as_span(s0.bytes), message.span()});
    for (uint32_t i = 0; i < len; ++i) {
        const NodeId& visited = next_hop(current, services);
        const Signature& s = proof.signatures[2 * i + 1];
        const Signature& s_prime = proof.signatures[2 * i + 2];
        Bytes payload;
        payload.reserve(96);
        append(payload, current);
        append(payload, dependency);
        append(payload, message);
        if (!scheme.verify(visited, s, as_span(payload))) {
            report.failure = CheckFailure::visited_signature;
            report.failing_index = 2 * i + 1;
            return report;
        }
        if (!scheme.verify(initiator, s_prime, as_span(s.bytes))) {
            report.failure = CheckFailure::counter_signature;
            report.failing_index = 2 * i + 2;
            return report;
        }
        current = sha256(as_span(s_prime.bytes));
    }
    report.valid = true;
    return report;
}

bool check_poi(const SignatureScheme& scheme, const Proof& proof, const NodeId& initiator,
               const Hash32& dependency, const Hash32& message, Difficulty difficulty,
               const Roster& roster) {
    return check_poi_detailed(scheme, proof, initiator, dependency, message, difficulty, roster)
        .valid;
}

std::vector<NodeId> tour_visits(const Proof& proof, const Hash32& message,
                                const Roster& roster) {
    std::vector<NodeId> visits;
    if (proof.signatures.size() < 3 || proof.signatures.size() % 2 == 0) return visits;
    ServiceSet services = create_services(roster, proof.signatures[0]);
    Hash32 current = sha256({as_span(proof.signatures[0].bytes), message.span()});
    size_t len = (proof.signatures.size() - 1) / 2;
    visits.reserve(len);
    for (size_t i = 0; i < len; ++i) {
        visits.push_back(next_hop(current, services));
        current = sha256(as_span(proof.signatures[2 * i + 2].bytes));
    }
    return visits;
}

const char* to_string(CheckFailure f) {
    switch (f) {
        case CheckFailure::none: return "none";
        case CheckFailure::initial_signature: return "initial-signature";
        case CheckFailure::length: return "length";
        case CheckFailure::roster: return "roster";
        case CheckFailure::visited_signature: return "visited-signature";
        case CheckFailure::counter_signature: return "counter-signature";
    }
    return "unknown";
}

}  // namespace poi
