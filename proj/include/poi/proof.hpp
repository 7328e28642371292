#pragma once

#include <optional>
#include <vector>

#include "poi/crypto.hpp"

namespace poi {

//! Tour difficulty. Lengths are drawn uniformly from [1, 2*mean - 1], so the
//! stored mean is the expected tour length.
struct Difficulty {
    uint32_t mean = 1;

    bool operator==(const Difficulty&) const = default;
};

//! The network membership, sorted by node id. All service-subset derivation
//! and reward accounting assume this canonical ordering.
class Roster {
public:
    Roster() = default;
    explicit Roster(std::vector<NodeId> members);

    size_t size() const { return members_.size(); }
    const NodeId& operator[](size_t i) const { return members_[i]; }
    const std::vector<NodeId>& members() const { return members_; }
    bool contains(const NodeId& id) const;
    //! Index in the sorted order; throws if absent.
    size_t index_of(const NodeId& id) const;

private:
    std::vector<NodeId> members_;
};

//! The subset of nodes a tour interacts with: the length-n_S prefix of the
//! seeded shuffle of the roster, n_S = min(20, floor(n/2)).
struct ServiceSet {
    std::vector<NodeId> members;

    size_t size() const { return members.size(); }
};

size_t service_set_size(size_t roster_size);

//! The full interaction proof: [s0, s1, s1', s2, s2', ..., sL, sL'].
struct Proof {
    std::vector<Signature> signatures;

    bool operator==(const Proof&) const = default;

    Bytes serialize() const;
    static Proof deserialize(ByteSpan data);
};

//! What an initiator sends to the node it visits. The tuple (h, d, m) is the
//! protocol payload; req_sig is the initiator's signature over h||d||m and is
//! what makes equivocation evidence third-party verifiable.
struct SignRequest {
    Hash32 h;
    Hash32 d;
    Hash32 m;
    NodeId initiator;
    Signature req_sig;

    bool operator==(const SignRequest&) const = default;

    //! The 96-byte message h||d||m that both req_sig and the visited node's
    //! reply sign. Fixed-width fields keep the concatenation injective.
    Bytes signing_payload() const;

    Bytes serialize() const;
    static SignRequest deserialize(ByteSpan data);
    static SignRequest read_from(ByteReader& reader);
};

bool verify_request(const SignatureScheme& scheme, const SignRequest& req);

// -- Tour derivation -------------------------------------------------------

//! Seeded Fisher-Yates shuffle of the roster, first n_S members kept.
//! Deterministic in (roster, seed). Throws std::invalid_argument if n < 2.
ServiceSet create_services(const Roster& roster, const Signature& seed);

//! Tour length for this difficulty and seed signature: uniform on
//! [1, 2*mean - 1] from a domain-separated stream, so the length draw is
//! independent of the shuffle that consumes H(seed) directly.
uint32_t tour_length(Difficulty difficulty, const Signature& seed);

//! Which service-set member the hash points at: the first 8 bytes of the
//! hash, big-endian, modulo the set size.
const NodeId& next_hop(const Hash32& current_hash, const ServiceSet& services);

// -- Tour state machine ----------------------------------------------------

//! Resumable state of an in-progress proof generation by one initiator.
//! Single-writer: owned by one logical task at a time.
struct TourState {
    NodeId initiator;
    Hash32 dependency;    // d
    Hash32 message;       // m
    Difficulty difficulty;
    ServiceSet services;
    uint32_t target_len = 0;  // L, known before the tour starts
    uint32_t step = 0;        // completed interactions; partial has 2*step+1 sigs
    Hash32 current_hash;
    std::vector<Signature> partial;

    //! The node the outstanding request is addressed to.
    const NodeId& addressed_node() const { return next_hop(current_hash, services); }
};

struct TourBegin {
    TourState state;
    SignRequest request;
};

TourBegin tour_begin(const SignatureScheme& scheme, const KeyPair& initiator,
                     const Roster& roster, const Hash32& dependency, const Hash32& message,
                     Difficulty difficulty);

struct AdvanceResult {
    enum class Status { next_request, completed, bad_response };
    Status status;
    std::optional<SignRequest> request;  // set when status == next_request
    std::optional<Proof> proof;          // set when status == completed
};

//! Consume the visited node's response. On a verification failure the state
//! is left untouched and the caller may retry or resend.
AdvanceResult tour_advance(const SignatureScheme& scheme, TourState& state,
                           const KeyPair& initiator, const Signature& response);

//! The visited node's reply: its signature over h||d||m. Policy (whether to
//! answer at all) is the caller's job.
Signature answer_request(const SignatureScheme& scheme, const PrivateKey& sk,
                         const SignRequest& req);

// -- Verification ----------------------------------------------------------

enum class CheckFailure {
    none,
    initial_signature,  // s0 is not u's signature of d
    length,             // |P| != 2L+1
    roster,             // roster too small to derive services
    visited_signature,  // some s_i fails under the derived visited node
    counter_signature,  // some s_i' is not u's signature of s_i
};

struct CheckReport {
    bool valid = false;
    CheckFailure failure = CheckFailure::none;
    uint32_t expected_len = 0;   // L derived from s0 (0 if s0 failed)
    size_t failing_index = 0;    // index into the signature list, when applicable
};

//! Full standalone verification: exactly 2L+1 signature verifications on the
//! success path. All failures map to false; callers never need to distinguish.
bool check_poi(const SignatureScheme& scheme, const Proof& proof, const NodeId& initiator,
               const Hash32& dependency, const Hash32& message, Difficulty difficulty,
               const Roster& roster);

CheckReport check_poi_detailed(const SignatureScheme& scheme, const Proof& proof,
                               const NodeId& initiator, const Hash32& dependency,
                               const Hash32& message, Difficulty difficulty,
                               const Roster& roster);

//! Visited nodes of a structurally valid proof, in visit order (repeats
//! preserved). Only recomputes the hash chain; run check_poi first.
std::vector<NodeId> tour_visits(const Proof& proof, const Hash32& message,
                                const Roster& roster);

const char* to_string(CheckFailure f);

}  // namespace poi
