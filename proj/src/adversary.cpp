#include "poi/adversary.hpp"

namespace poi {

// -- DoubleTourNode ----------------------------------------------------------

DoubleTourNode::DoubleTourNode(NodeContext ctx, uint32_t tour_count)
    : HonestNode(std::move(ctx)), tour_count_(tour_count < 1 ? 1 : tour_count) {}

Actions DoubleTourNode::on_start(uint64_t now_us) {
    return start_batch(now_us);
}

Actions DoubleTourNode::restart_tour(uint64_t now_us) {
    Actions actions;
    abandon_batch(actions);
    actions.merge(start_batch(now_us));
    return actions;
}

Actions DoubleTourNode::start_batch(uint64_t now_us) {
    (void)now_us;
    Actions actions;
    if (ctx_.roster.size() < 2) return actions;

    ++tour_generation_;
    const Hash32 d = chain_.head();
    const Difficulty difficulty{chain_.expected_difficulty(d)};
    EvTourBatch batch{d, {}};

    for (uint32_t j = 0; j < tour_count_; ++j) {
        // Distinct dummy payloads give every tour its own merkle root.
        const ByteSpan tag = str_span("fork ");
        Bytes payload(tag.begin(), tag.end());
        put_u64be(payload, attempt_);
        payload.push_back(static_cast<uint8_t>(j));
        std::vector<Transaction> txs{Transaction::opaque(std::move(payload))};
        const Hash32 m = merkle_root(txs);

        TourBegin begun = tour_begin(*ctx_.scheme, ctx_.keys, ctx_.roster, d, m, difficulty);
        batch.messages.push_back(m);
        actions.events.push_back(
            EvTourStarted{d, m, begun.state.target_len, begun.state.services.members});
        actions.sends.push_back({begun.state.addressed_node(), begun.request});
        actions.timers.push_back({ctx_.retry_interval_us, batch_retry_tag(j, 0)});
        tours_.push_back({std::move(begun.state), std::move(begun.request), std::move(txs)});
    }
    ++attempt_;
    actions.events.push_back(std::move(batch));
    return actions;
}

void DoubleTourNode::abandon_batch(Actions& actions) {
    for (const ParallelTour& t : tours_) {
        actions.events.push_back(EvTourAbandoned{t.state.dependency});
    }
    tours_.clear();
}

uint64_t DoubleTourNode::batch_retry_tag(size_t tour_idx, uint32_t step) const {
    return make_retry_tag(tour_generation_, (static_cast<uint32_t>(tour_idx) << 20) | step);
}

Actions DoubleTourNode::on_timer(uint64_t now_us, uint64_t tag) {
    (void)now_us;
    Actions actions;
    if (!(tag >> 60)) return actions;
    const uint64_t generation = (tag >> 24) & ((uint64_t{1} << 36) - 1);
    const size_t tour_idx = (tag >> 20) & 0xf;
    const uint32_t step = static_cast<uint32_t>(tag & 0xfffff);
    if (generation != tour_generation_ || tour_idx >= tours_.size()) return actions;
    const ParallelTour& t = tours_[tour_idx];
    if (t.state.step != step) return actions;
    actions.sends.push_back({t.state.addressed_node(), t.outstanding});
    actions.timers.push_back({ctx_.retry_interval_us, tag});
    return actions;
}

void DoubleTourNode::on_crash() {
    HonestNode::on_crash();
    tours_.clear();
}

Actions DoubleTourNode::on_reboot(uint64_t now_us) {
    return start_batch(now_us);
}

Actions DoubleTourNode::handle_sign_request(uint64_t now_us, const NodeId& from,
                                            const SignRequest& req) {
    (void)now_us;
    (void)from;
    Actions actions;
    if (!verify_request(*ctx_.scheme, req)) return actions;
    // No Received table, no policy: sign whatever arrives.
    actions.sends.push_back(
        {req.initiator,
         SignResponse{id(), req.h, answer_request(*ctx_.scheme, ctx_.keys.sk, req)}});
    return actions;
}

Actions DoubleTourNode::handle_sign_response(uint64_t now_us, const SignResponse& resp) {
    Actions actions;
    for (size_t j = 0; j < tours_.size(); ++j) {
        ParallelTour& t = tours_[j];
        if (resp.request_h != t.state.current_hash || resp.responder != t.state.addressed_node()) {
            continue;
        }
        AdvanceResult adv = tour_advance(*ctx_.scheme, t.state, ctx_.keys, resp.sig);
        if (adv.status == AdvanceResult::Status::bad_response) return actions;
        if (adv.status == AdvanceResult::Status::next_request) {
            t.outstanding = std::move(*adv.request);
            actions.sends.push_back({t.state.addressed_node(), t.outstanding});
            actions.timers.push_back({ctx_.retry_interval_us, batch_retry_tag(j, t.state.step)});
            return actions;
        }

        // First tour to finish becomes the published block.
        Block block = build_block(now_us, t.state, std::move(t.txs), std::move(*adv.proof));
        actions.events.push_back(EvTourCompleted{t.state.dependency, t.state.message,
                                                 t.state.target_len});
        auto sp = std::make_shared<const Block>(std::move(block));
        if (!chain_.validate(*sp).ok()) return actions;  // defensive; should not happen
        ChainStore::InsertResult res = chain_.insert(sp);
        actions.events.push_back(EvBlockProduced{sp, false});
        if (res.head_changed()) {
            actions.events.push_back(EvHeadChanged{chain_.head(), chain_.head_height(),
                                                   res.outcome == ChainStore::InsertOutcome::reorg,
                                                   res.reorg_depth});
        }
        actions.merge(broadcast_block(sp));
        // after_head_change -> restart_tour override -> next batch
        return after_head_change(now_us, std::move(actions));
    }
    return actions;
}

// -- SelfishNode -------------------------------------------------------------

SelfishNode::SelfishNode(NodeContext ctx, bool serve_requests)
    : HonestNode(std::move(ctx)), serve_requests_(serve_requests) {}

Actions SelfishNode::handle_block_request(uint64_t now_us, const NodeId& from,
                                          const BlockRequest& req) {
    (void)now_us;
    Actions actions;
    auto block = chain_.get(req.id);
    if (!block) return actions;
    if (block->producer == id()) {  // one of the withheld blocks
        if (!serve_requests_) return actions;  // starve the network instead
        if (served_.insert(req.id).second) {
            actions.events.push_back(EvBlockServed{req.id});
        }
    }
    actions.sends.push_back({from, BlockResponse{std::move(block)}});
    return actions;
}

// -- SharedKeysNode ----------------------------------------------------------

SharedKeysNode::SharedKeysNode(NodeContext ctx, std::map<NodeId, PrivateKey> colluder_keys)
    : HonestNode(std::move(ctx)), colluder_keys_(std::move(colluder_keys)) {}

bool SharedKeysNode::local_hop() const {
    return tour_ && outstanding_ && colluder_keys_.count(tour_->addressed_node()) > 0;
}

Actions SharedKeysNode::dispatch_outstanding(uint64_t now_us) {
    if (local_hop()) return {};  // drain() answers it without the network
    return HonestNode::dispatch_outstanding(now_us);
}

Actions SharedKeysNode::drain(uint64_t now_us, Actions actions) {
    while (local_hop()) {
        const PrivateKey& sk = colluder_keys_.at(tour_->addressed_node());
        const Signature resp = answer_request(*ctx_.scheme, sk, *outstanding_);
        AdvanceResult adv = tour_advance(*ctx_.scheme, *tour_, ctx_.keys, resp);
        if (adv.status == AdvanceResult::Status::bad_response) break;  // unreachable
        if (adv.status == AdvanceResult::Status::next_request) {
            outstanding_ = std::move(*adv.request);
            if (!local_hop()) actions.merge(HonestNode::dispatch_outstanding(now_us));
            continue;
        }
        // finalize_block restarts a tour; if its first hops are colluders
        // again the loop keeps absorbing them synchronously.
        actions.merge(finalize_block(now_us, std::move(*adv.proof)));
    }
    return actions;
}

Actions SharedKeysNode::on_start(uint64_t now_us) {
    return drain(now_us, HonestNode::on_start(now_us));
}

Actions SharedKeysNode::on_message(uint64_t now_us, const NodeId& from, const Message& msg) {
    return drain(now_us, HonestNode::on_message(now_us, from, msg));
}

Actions SharedKeysNode::on_timer(uint64_t now_us, uint64_t tag) {
    return drain(now_us, HonestNode::on_timer(now_us, tag));
}

Actions SharedKeysNode::on_reboot(uint64_t now_us) {
    return drain(now_us, HonestNode::on_reboot(now_us));
}

}  // namespace poi
