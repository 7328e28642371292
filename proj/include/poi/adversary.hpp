#pragma once

#include "poi/node.hpp"

namespace poi {

//! Runs several tours in parallel on the same dependency, each committing to
//! a different transaction set, and publishes whichever finishes first. Signs
//! any request it receives without keeping the Received table, so it never
//! reports anyone (including itself).
class DoubleTourNode : public HonestNode {
public:
    DoubleTourNode(NodeContext ctx, uint32_t tour_count);

    Actions on_start(uint64_t now_us) override;
    Actions on_timer(uint64_t now_us, uint64_t tag) override;
    void on_crash() override;
    Actions on_reboot(uint64_t now_us) override;

protected:
    Actions handle_sign_request(uint64_t now_us, const NodeId& from,
                                const SignRequest& req) override;
    Actions handle_sign_response(uint64_t now_us, const SignResponse& resp) override;
    Actions restart_tour(uint64_t now_us) override;

private:
    struct ParallelTour {
        TourState state;
        SignRequest outstanding;
        std::vector<Transaction> txs;
    };

    Actions start_batch(uint64_t now_us);
    void abandon_batch(Actions& actions);
    uint64_t batch_retry_tag(size_t tour_idx, uint32_t step) const;

    uint32_t tour_count_;
    uint64_t attempt_ = 0;
    std::vector<ParallelTour> tours_;
};

//! Produces blocks but never announces them; keeps extending its private
//! head. With serve_requests on it still answers explicit block fetches,
//! which is exactly how the protocol forces the block into the open.
class SelfishNode : public HonestNode {
public:
    SelfishNode(NodeContext ctx, bool serve_requests);

protected:
    bool announce_own_blocks() const override { return false; }
    Actions handle_block_request(uint64_t now_us, const NodeId& from,
                                 const BlockRequest& req) override;

private:
    bool serve_requests_;
    std::set<Hash32> served_;
};

//! Holds the private keys of a colluder set and answers any tour step
//! addressed to a colluder locally, skipping the network round trip.
class SharedKeysNode : public HonestNode {
public:
    SharedKeysNode(NodeContext ctx, std::map<NodeId, PrivateKey> colluder_keys);

    Actions on_start(uint64_t now_us) override;
    Actions on_message(uint64_t now_us, const NodeId& from, const Message& msg) override;
    Actions on_timer(uint64_t now_us, uint64_t tag) override;
    Actions on_reboot(uint64_t now_us) override;

protected:
    Actions dispatch_outstanding(uint64_t now_us) override;

private:
    bool local_hop() const;
    //! Step every colluder-addressed hop synchronously until the tour either
    //! needs an honest node or completes (possibly chaining into new tours).
    Actions drain(uint64_t now_us, Actions actions);

    std::map<NodeId, PrivateKey> colluder_keys_;
};

}  // namespace poi
