#pragma once

#include <set>
#include <variant>

#include "poi/chain.hpp"

namespace poi {

// -- Wire messages -----------------------------------------------------------
//
// Blocks travel as shared pointers: the simulated network is in-process, and
// the bit-exact serialization (Block::serialize) is exercised separately by
// the file formats and their tests.

struct SignResponse {
    NodeId responder;
    Hash32 request_h;  // the h of the request this answers
    Signature sig;
};

struct BlockAnnounce {
    std::shared_ptr<const Block> block;
};

struct BlockRequest {
    Hash32 id;
};

struct BlockResponse {
    std::shared_ptr<const Block> block;
};

using Message = std::variant<SignRequest, SignResponse, BlockAnnounce, BlockRequest, BlockResponse>;

enum class MessageType { sign_request, sign_response, block_announce, block_request, block_response };

MessageType message_type(const Message& msg);
const char* to_string(MessageType t);

// -- What a node hands back to the simulator ---------------------------------

struct Outbound {
    NodeId to;
    Message msg;
};

struct TimerRequest {
    uint64_t delay_us = 0;
    uint64_t tag = 0;
};

// Observations for metrics; the simulator records them, nodes never read them.
struct EvTourStarted {
    Hash32 d;
    Hash32 m;
    uint32_t target_len = 0;
    std::vector<NodeId> services;
};
struct EvTourCompleted {
    Hash32 d;
    Hash32 m;
    uint32_t len = 0;
};
struct EvTourAbandoned {
    Hash32 d;
};
struct EvConflictDetected {
    NodeId accused;
    Hash32 d;
};
struct EvBlockProduced {
    std::shared_ptr<const Block> block;
    bool withheld = false;
};
struct EvBlockServed {  // a previously withheld block sent on request
    Hash32 id;
};
struct EvHeadChanged {
    Hash32 new_head;
    uint64_t height = 0;
    bool reorg = false;
    uint32_t reorg_depth = 0;
};
struct EvInvalidBlock {
    Hash32 id;
    std::string reason;
};
// Announces a parallel-tour batch so the transport can attribute each
// in-flight request (keyed by its m) to one tour of the batch.
struct EvTourBatch {
    Hash32 d;
    std::vector<Hash32> messages;
};

using LogEvent = std::variant<EvTourStarted, EvTourCompleted, EvTourAbandoned, EvConflictDetected,
                              EvBlockProduced, EvBlockServed, EvHeadChanged, EvInvalidBlock,
                              EvTourBatch>;

struct Actions {
    std::vector<Outbound> sends;
    std::vector<TimerRequest> timers;
    std::vector<LogEvent> events;

    void merge(Actions&& other);
};

// -- Participant state machines ----------------------------------------------

//! Per-node wiring fixed for the whole run.
struct NodeContext {
    const SignatureScheme* scheme = nullptr;
    Roster roster;
    KeyPair keys;
    ChainParams chain_params;
    uint64_t retry_interval_us = 0;  // resend cadence for unanswered requests
    uint32_t roster_index = 0;       // used as the header's extra word
    bool initiate = true;            // pure responders never start tours
};

//! One simulated participant: a single-threaded event handler fed by the
//! simulator. All mutation happens inside the on_* calls.
class Participant {
public:
    explicit Participant(NodeContext ctx);
    virtual ~Participant() = default;

    const NodeId& id() const { return ctx_.keys.id; }
    const NodeContext& context() const { return ctx_; }
    const ChainStore& chain() const { return chain_; }
    ChainStore& chain() { return chain_; }

    virtual Actions on_start(uint64_t now_us) = 0;
    virtual Actions on_message(uint64_t now_us, const NodeId& from, const Message& msg) = 0;
    virtual Actions on_timer(uint64_t now_us, uint64_t tag) = 0;
    //! Crash wipes volatile state (tour, received table, orphans); the chain
    //! and mempool survive as "disk" state.
    virtual void on_crash() = 0;
    virtual Actions on_reboot(uint64_t now_us) = 0;

protected:
    NodeContext ctx_;
    ChainStore chain_;
};

//! The honest protocol node.
class HonestNode : public Participant {
public:
    explicit HonestNode(NodeContext ctx);

    Actions on_start(uint64_t now_us) override;
    Actions on_message(uint64_t now_us, const NodeId& from, const Message& msg) override;
    Actions on_timer(uint64_t now_us, uint64_t tag) override;
    void on_crash() override;
    Actions on_reboot(uint64_t now_us) override;

    //! Queue a transaction for inclusion in future candidate blocks.
    void submit_transaction(Transaction tx);

    const std::vector<Transaction>& mempool() const { return mempool_; }
    bool tour_active() const { return tour_.has_value(); }
    const TourState* tour() const { return tour_ ? &*tour_ : nullptr; }

protected:
    // Policy outcome for an incoming sign request (the Received-table check).
    enum class RequestVerdict { accept, repeat, conflict, need_block, stale, bad };
    RequestVerdict check_message(const SignRequest& req);

    virtual Actions handle_sign_request(uint64_t now_us, const NodeId& from,
                                        const SignRequest& req);
    virtual Actions handle_sign_response(uint64_t now_us, const SignResponse& resp);
    virtual Actions handle_block_request(uint64_t now_us, const NodeId& from,
                                         const BlockRequest& req);
    Actions handle_block(uint64_t now_us, const NodeId& from, std::shared_ptr<const Block> block);

    //! Abandon any current tour and start touring the current head.
    virtual Actions restart_tour(uint64_t now_us);
    //! React to a head change: drop stale received entries, retour.
    virtual Actions after_head_change(uint64_t now_us, Actions actions);
    //! Put the outstanding request on the wire and arm its retry timer.
    //! Strategies that can answer some hops without the network override this.
    virtual Actions dispatch_outstanding(uint64_t now_us);
    //! Whether freshly produced blocks are announced (withholders say no).
    virtual bool announce_own_blocks() const { return true; }

    Actions start_tour(uint64_t now_us);
    void abandon_tour(Actions& actions);
    //! Candidate transactions for the next block: mempool order, minus
    //! anything already on the head path or moot (claims on slashed nodes).
    std::vector<Transaction> assemble_candidate() const;
    Block build_block(uint64_t now_us, const TourState& tour, std::vector<Transaction> txs,
                      Proof proof) const;
    Actions finalize_block(uint64_t now_us, Proof proof);
    Actions broadcast_block(std::shared_ptr<const Block> block);
    Outbound request_send() const;
    uint32_t header_time(uint64_t now_us, const Hash32& dependency) const;
    uint64_t retry_tag() const;

    std::optional<TourState> tour_;
    std::optional<SignRequest> outstanding_;   // the request awaiting a response
    std::vector<Transaction> tour_txs_;        // candidate set frozen at tour start
    uint64_t tour_generation_ = 0;             // bumped on every abandon/start
    std::map<std::pair<NodeId, Hash32>, SignRequest> received_;  // (initiator, d) -> request
    std::vector<Transaction> mempool_;
    std::set<Hash32> mempool_hashes_;
    std::set<NodeId> claimed_;                 // accused nodes we already hold a claim for
    std::map<Hash32, std::vector<std::shared_ptr<const Block>>> orphans_;  // parent -> blocks
    std::set<Hash32> orphan_ids_;
    std::set<Hash32> announced_;
};

//! Packs (generation, step) into a timer tag so stale retries self-identify.
uint64_t make_retry_tag(uint64_t generation, uint32_t step);

}  // namespace poi
