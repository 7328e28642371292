#include "poi/node.hpp"

#include <algorithm>

namespace poi {

MessageType message_type(const Message& msg) {
    switch (msg.index()) {
        case 0: return MessageType::sign_request;
        case 1: return MessageType::sign_response;
        case 2: return MessageType::block_announce;
        case 3: return MessageType::block_request;
        default: return MessageType::block_response;
    }
}

const char* to_string(MessageType t) {
    switch (t) {
        case MessageType::sign_request: return "sign_request";
        case MessageType::sign_response: return "sign_response";
        case MessageType::block_announce: return "block_announce";
        case MessageType::block_request: return "block_request";
        case MessageType::block_response: return "block_response";
    }
    return "?";
}

void Actions::merge(Actions&& other) {
    std::move(other.sends.begin(), other.sends.end(), std::back_inserter(sends));
    std::move(other.timers.begin(), other.timers.end(), std::back_inserter(timers));
    std::move(other.events.begin(), other.events.end(), std::back_inserter(events));
}

uint64_t make_retry_tag(uint64_t generation, uint32_t step) {
    return (uint64_t{1} << 60) | (generation << 24) | step;
}

Participant::Participant(NodeContext ctx)
    : ctx_(std::move(ctx)), chain_(*ctx_.scheme, ctx_.chain_params, ctx_.roster) {}

HonestNode::HonestNode(NodeContext ctx) : Participant(std::move(ctx)) {}

Actions HonestNode::on_start(uint64_t now_us) {
    return restart_tour(now_us);
}

Actions HonestNode::on_message(uint64_t now_us, const NodeId& from, const Message& msg) {
    if (const auto* req = std::get_if<SignRequest>(&msg)) {
        return handle_sign_request(now_us, from, *req);
    }
    if (const auto* resp = std::get_if<SignResponse>(&msg)) {
        return handle_sign_response(now_us, *resp);
    }
    if (const auto* ann = std::get_if<BlockAnnounce>(&msg)) {
        return handle_block(now_us, from, ann->block);
    }
    if (const auto* breq = std::get_if<BlockRequest>(&msg)) {
        return handle_block_request(now_us, from, *breq);
    }
    return handle_block(now_us, from, std::get<BlockResponse>(msg).block);
}

Actions HonestNode::on_timer(uint64_t now_us, uint64_t tag) {
    (void)now_us;
    Actions actions;
    if (!(tag >> 60)) return actions;
    const uint64_t generation = (tag >> 24) & ((uint64_t{1} << 36) - 1);
    const uint32_t step = static_cast<uint32_t>(tag & 0xffffff);
    if (!tour_ || !outstanding_ || generation != tour_generation_ || step != tour_->step) {
        return actions;  // the tour moved on; let the stale timer die
    }
    actions.sends.push_back(request_send());
    actions.timers.push_back({ctx_.retry_interval_us, tag});
    return actions;
}

void HonestNode::on_crash() {
    tour_.reset();
    outstanding_.reset();
    tour_txs_.clear();
    received_.clear();
    orphans_.clear();
    orphan_ids_.clear();
    ++tour_generation_;  // orphan any pre-crash retry timers that still fire
}

Actions HonestNode::on_reboot(uint64_t now_us) {
    return restart_tour(now_us);
}

void HonestNode::submit_transaction(Transaction tx) {
    const Hash32 h = tx.hash();
    if (!mempool_hashes_.insert(h).second) return;
    if (const FraudClaim* claim = tx.fraud_claim()) claimed_.insert(claim->accused);
    mempool_.push_back(std::move(tx));
}

HonestNode::RequestVerdict HonestNode::check_message(const SignRequest& req) {
    if (!verify_request(*ctx_.scheme, req)) return RequestVerdict::bad;
    if (chain_.is_excluded(req.initiator)) return RequestVerdict::stale;
    if (!chain_.contains(req.d)) return RequestVerdict::need_block;
    if (!chain_.is_max_height_tip(req.d)) return RequestVerdict::stale;

    const auto key = std::make_pair(req.initiator, req.d);
    auto it = received_.find(key);
    if (it == received_.end()) {
        received_.emplace(key, req);
        return RequestVerdict::accept;
    }
    return it->second.m == req.m ? RequestVerdict::repeat : RequestVerdict::conflict;
}

Actions HonestNode::handle_sign_request(uint64_t now_us, const NodeId& from,
                                        const SignRequest& req) {
    (void)now_us;
    Actions actions;
    if (chain_.is_excluded(id())) return actions;  // slashed nodes stop serving

    switch (check_message(req)) {
        case RequestVerdict::accept:
        case RequestVerdict::repeat:
            // Repeats get the identical deterministic signature, so a retry
            // after a lost response converges instead of stalling.
            actions.sends.push_back(
                {req.initiator,
                 SignResponse{id(), req.h, answer_request(*ctx_.scheme, ctx_.keys.sk, req)}});
            break;
        case RequestVerdict::conflict: {
            actions.events.push_back(EvConflictDetected{req.initiator, req.d});
            if (!claimed_.count(req.initiator)) {
                FraudClaim claim{req.initiator, id(),
                                 received_.at({req.initiator, req.d}), req};
                submit_transaction(Transaction::fraud(std::move(claim)));
            }
            break;
        }
        case RequestVerdict::need_block:
            actions.sends.push_back({from, BlockRequest{req.d}});
            break;
        case RequestVerdict::stale:
        case RequestVerdict::bad:
            break;
    }
    return actions;
}

Actions HonestNode::handle_sign_response(uint64_t now_us, const SignResponse& resp) {
    Actions actions;
    if (!tour_ || !outstanding_) return actions;
    if (resp.request_h != tour_->current_hash) return actions;  // stale or duplicate
    if (resp.responder != tour_->addressed_node()) return actions;

    AdvanceResult adv = tour_advance(*ctx_.scheme, *tour_, ctx_.keys, resp.sig);
    switch (adv.status) {
        case AdvanceResult::Status::bad_response:
            return actions;  // keep waiting; the retry timer re-asks
        case AdvanceResult::Status::next_request:
            outstanding_ = std::move(*adv.request);
            actions.merge(dispatch_outstanding(now_us));
            return actions;
        case AdvanceResult::Status::completed:
            return finalize_block(now_us, std::move(*adv.proof));
    }
    return actions;
}

Actions HonestNode::handle_block_request(uint64_t now_us, const NodeId& from,
                                         const BlockRequest& req) {
    (void)now_us;
    Actions actions;
    if (auto block = chain_.get(req.id)) {
        actions.sends.push_back({from, BlockResponse{std::move(block)}});
    }
    return actions;
}

Actions HonestNode::handle_block(uint64_t now_us, const NodeId& from,
                                 std::shared_ptr<const Block> block) {
    Actions actions;
    const Hash32 head_before = chain_.head();
    std::vector<std::shared_ptr<const Block>> pending{std::move(block)};

    while (!pending.empty()) {
        std::shared_ptr<const Block> blk = std::move(pending.back());
        pending.pop_back();
        const Hash32 blk_id = blk->id();
        if (chain_.contains(blk_id)) continue;

        ChainStore::ValidationResult v = chain_.validate(*blk);
        if (v.verdict == ChainStore::Validity::missing_parent) {
            if (orphan_ids_.insert(blk_id).second) {
                const Hash32 parent = blk->header.prev_hash;
                orphans_[parent].push_back(std::move(blk));
                actions.sends.push_back({from, BlockRequest{parent}});
            }
            continue;
        }
        if (!v.ok()) {
            actions.events.push_back(EvInvalidBlock{blk_id, v.reason});
            continue;
        }

        ChainStore::InsertResult res = chain_.insert(blk);
        if (res.head_changed()) {
            actions.events.push_back(EvHeadChanged{chain_.head(), chain_.head_height(),
                                                   res.outcome == ChainStore::InsertOutcome::reorg,
                                                   res.reorg_depth});
        }
        actions.merge(broadcast_block(blk));

        auto it = orphans_.find(blk_id);
        if (it != orphans_.end()) {
            for (auto& child : it->second) {
                orphan_ids_.erase(child->id());
                pending.push_back(std::move(child));
            }
            orphans_.erase(it);
        }
    }

    if (chain_.head() != head_before) return after_head_change(now_us, std::move(actions));
    return actions;
}

Actions HonestNode::after_head_change(uint64_t now_us, Actions actions) {
    // Entries for dependencies that fell off the longest-tip set can never
    // conflict again (max height only grows), so they are safe to drop.
    for (auto it = received_.begin(); it != received_.end();) {
        if (!chain_.is_max_height_tip(it->first.second)) {
            it = received_.erase(it);
        } else {
            ++it;
        }
    }
    actions.merge(restart_tour(now_us));
    return actions;
}

Actions HonestNode::restart_tour(uint64_t now_us) {
    Actions actions;
    abandon_tour(actions);
    actions.merge(start_tour(now_us));
    return actions;
}

void HonestNode::abandon_tour(Actions& actions) {
    if (!tour_) return;
    actions.events.push_back(EvTourAbandoned{tour_->dependency});
    tour_.reset();
    outstanding_.reset();
    tour_txs_.clear();
}

std::vector<Transaction> HonestNode::assemble_candidate() const {
    std::vector<Transaction> txs;
    for (const Transaction& tx : mempool_) {
        if (chain_.tx_on_head_path(tx.hash())) continue;
        const FraudClaim* claim = tx.fraud_claim();
        if (claim && chain_.is_excluded(claim->accused)) continue;  // already slashed
        txs.push_back(tx);
    }
    return txs;
}

Actions HonestNode::start_tour(uint64_t now_us) {
    Actions actions;
    if (!ctx_.initiate || chain_.is_excluded(id())) return actions;
    if (ctx_.roster.size() < 2) return actions;

    ++tour_generation_;
    tour_txs_ = assemble_candidate();
    const Hash32 m = merkle_root(tour_txs_);
    const Difficulty difficulty{chain_.expected_difficulty(chain_.head())};
    TourBegin begun =
        tour_begin(*ctx_.scheme, ctx_.keys, ctx_.roster, chain_.head(), m, difficulty);
    tour_ = std::move(begun.state);
    outstanding_ = std::move(begun.request);

    actions.events.push_back(
        EvTourStarted{tour_->dependency, m, tour_->target_len, tour_->services.members});
    actions.merge(dispatch_outstanding(now_us));
    return actions;
}

Actions HonestNode::dispatch_outstanding(uint64_t now_us) {
    (void)now_us;
    Actions actions;
    actions.sends.push_back(request_send());
    actions.timers.push_back({ctx_.retry_interval_us, retry_tag()});
    return actions;
}

Block HonestNode::build_block(uint64_t now_us, const TourState& tour,
                              std::vector<Transaction> txs, Proof proof) const {
    Block block;
    block.header.version = 1;
    block.header.time = header_time(now_us, tour.dependency);
    block.header.difficulty = tour.difficulty.mean;
    block.header.extra = ctx_.roster_index;
    block.header.prev_hash = tour.dependency;
    block.header.merkle_root = tour.message;
    block.header.proof_hash = sha256(as_span(proof.serialize()));
    block.transactions = std::move(txs);
    block.proof = std::move(proof);
    block.producer = id();
    return block;
}

Actions HonestNode::finalize_block(uint64_t now_us, Proof proof) {
    Actions actions;
    Block block = build_block(now_us, *tour_, std::move(tour_txs_), std::move(proof));

    actions.events.push_back(
        EvTourCompleted{tour_->dependency, tour_->message, tour_->target_len});
    tour_.reset();
    outstanding_.reset();
    tour_txs_.clear();

    auto sp = std::make_shared<const Block>(std::move(block));
    ChainStore::ValidationResult v = chain_.validate(*sp);
    if (!v.ok()) {  // never expected; refuse to broadcast junk
        actions.events.push_back(EvInvalidBlock{sp->id(), "own block: " + v.reason});
        return actions;
    }
    ChainStore::InsertResult res = chain_.insert(sp);
    const bool announce = announce_own_blocks();
    actions.events.push_back(EvBlockProduced{sp, !announce});
    if (res.head_changed()) {
        actions.events.push_back(EvHeadChanged{chain_.head(), chain_.head_height(),
                                               res.outcome == ChainStore::InsertOutcome::reorg,
                                               res.reorg_depth});
    }
    if (announce) {
        actions.merge(broadcast_block(sp));
    } else {
        announced_.insert(sp->id());  // never announce it later either
    }
    return after_head_change(now_us, std::move(actions));
}

Actions HonestNode::broadcast_block(std::shared_ptr<const Block> block) {
    Actions actions;
    if (!announced_.insert(block->id()).second) return actions;
    for (const NodeId& member : ctx_.roster.members()) {
        if (member == id()) continue;
        actions.sends.push_back({member, BlockAnnounce{block}});
    }
    return actions;
}

Outbound HonestNode::request_send() const {
    return Outbound{tour_->addressed_node(), *outstanding_};
}

uint32_t HonestNode::header_time(uint64_t now_us, const Hash32& dependency) const {
    const auto parent = chain_.get(dependency);
    const uint32_t now_ms = static_cast<uint32_t>(now_us / 1000);
    return std::max(parent->header.time + 1, now_ms);
}

uint64_t HonestNode::retry_tag() const {
    return make_retry_tag(tour_generation_, tour_->step);
}

}  // namespace poi
