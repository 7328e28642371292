#include "poi/chain.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace poi {

namespace {

const LedgerEntry kEmptyLedgerEntry{};
const std::vector<Hash32> kNoChildren{};

}  // namespace

Block ChainStore::make_genesis(const ChainParams& params) {
    Block genesis;
    genesis.header.version = 1;
    genesis.header.time = params.genesis_time;
    genesis.header.difficulty = params.initial_mean;
    genesis.header.extra = 0;
    genesis.header.prev_hash = Hash32{};
    genesis.header.merkle_root = merkle_root(genesis.transactions);
    genesis.header.proof_hash = sha256(as_span(genesis.proof.serialize()));
    genesis.producer = NodeId{};
    return genesis;
}

ChainStore::ChainStore(const SignatureScheme& scheme, ChainParams params, Roster roster)
    : scheme_(&scheme), params_(std::move(params)), roster_(std::move(roster)) {
    if (params_.retarget_period == 0) throw std::invalid_argument("retarget period must be > 0");
    if (params_.initial_mean == 0) throw std::invalid_argument("initial mean must be > 0");

    auto genesis = std::make_shared<const Block>(make_genesis(params_));
    genesis_id_ = genesis->id();
    head_ = genesis_id_;

    Entry e;
    e.block = std::move(genesis);
    e.height = 0;
    e.period_mean = params_.initial_mean;
    entries_.emplace(genesis_id_, std::move(e));

    for (const NodeId& member : roster_.members()) {
        ledger_[member] = LedgerEntry{0, params_.initial_stake, false};
    }
}

std::shared_ptr<const Block> ChainStore::get(const Hash32& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : it->second.block;
}

uint64_t ChainStore::height_of(const Hash32& id) const {
    return entry(id).height;
}

bool ChainStore::is_max_height_tip(const Hash32& id) const {
    auto it = entries_.find(id);
    return it != entries_.end() && it->second.height == head_height();
}

const ChainStore::Entry& ChainStore::entry(const Hash32& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw std::out_of_range("block not in store");
    return it->second;
}

const LedgerEntry& ChainStore::ledger_entry(const NodeId& id) const {
    auto it = ledger_.find(id);
    return it == ledger_.end() ? kEmptyLedgerEntry : it->second;
}

bool ChainStore::tx_on_head_path(const Hash32& tx_hash) const {
    return head_path_txs_.count(tx_hash) > 0;
}

const std::vector<NodeId>& ChainStore::recipients_of(const Hash32& id) const {
    return entry(id).recipients;
}

const std::vector<Hash32>& ChainStore::children_of(const Hash32& id) const {
    auto it = children_.find(id);
    return it == children_.end() ? kNoChildren : it->second;
}

std::vector<Hash32> ChainStore::path_to(const Hash32& tip) const {
    std::vector<Hash32> path;
    Hash32 cursor = tip;
    while (true) {
        const Entry& e = entry(cursor);
        path.push_back(cursor);
        if (e.height == 0) break;
        cursor = e.block->header.prev_hash;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<Hash32> ChainStore::head_path() const {
    return path_to(head_);
}

uint32_t ChainStore::retarget_mean(uint32_t old_mean, uint64_t observed_ms, uint32_t period,
                                   uint64_t target_interval_ms) {
    if (observed_ms == 0) observed_ms = 1;
    const unsigned __int128 scaled =
        static_cast<unsigned __int128>(old_mean) * period * target_interval_ms;
    unsigned __int128 next = (scaled + observed_ms / 2) / observed_ms;

    const uint64_t lower = std::max<uint64_t>(1, old_mean / 4);
    const uint64_t upper = std::max<uint64_t>(1, uint64_t{old_mean} * 4);
    if (next < lower) next = lower;
    if (next > upper) next = upper;
    if (next > std::numeric_limits<uint32_t>::max()) next = std::numeric_limits<uint32_t>::max();
    return static_cast<uint32_t>(next);
}

uint32_t ChainStore::mean_for_child(const Entry& parent) const {
    const uint64_t child_height = parent.height + 1;
    const uint32_t period = params_.retarget_period;
    if ((child_height - 1) % period != 0) return parent.period_mean;  // same period
    if (child_height == 1) return params_.initial_mean;

    // The child opens a new period: the parent closed the previous one, whose
    // duration runs from the block `period` levels up to the parent itself.
    const Entry* start = &parent;
    for (uint32_t i = 0; i < period; ++i) start = &entry(start->block->header.prev_hash);
    const uint64_t duration = uint64_t{parent.block->header.time} - start->block->header.time;
    return retarget_mean(parent.period_mean, duration, period, params_.target_interval_ms);
}

uint32_t ChainStore::expected_difficulty(const Hash32& parent_id) const {
    return mean_for_child(entry(parent_id));
}

ChainStore::ValidationResult ChainStore::validate(const Block& block) const {
    auto fail = [](std::string reason) {
        return ValidationResult{Validity::invalid, std::move(reason)};
    };

    auto parent_it = entries_.find(block.header.prev_hash);
    if (parent_it == entries_.end()) return ValidationResult{Validity::missing_parent, "parent unknown"};
    const Entry& parent = parent_it->second;

    if (block.header.time <= parent.block->header.time) return fail("time not increasing");
    if (!roster_.contains(block.producer)) return fail("producer not in roster");
    if (block.header.merkle_root != merkle_root(block.transactions))
        return fail("merkle root mismatch");
    if (block.header.proof_hash != sha256(as_span(block.proof.serialize())))
        return fail("proof hash mismatch");

    const uint32_t expected = mean_for_child(parent);
    if (block.header.difficulty != expected) return fail("wrong difficulty");

    if (!check_poi(*scheme_, block.proof, block.producer, block.header.prev_hash,
                   block.header.merkle_root, Difficulty{block.header.difficulty}, roster_)) {
        return fail("invalid proof");
    }

    for (const Transaction& tx : block.transactions) {
        if (const FraudClaim* claim = tx.fraud_claim()) {
            if (!fraud_claim_valid(*scheme_, *claim)) return fail("invalid fraud claim");
        }
    }
    return ValidationResult{Validity::ok, ""};
}

ChainStore::InsertResult ChainStore::insert(std::shared_ptr<const Block> block) {
    const Hash32 id = block->id();
    if (entries_.count(id)) return InsertResult{InsertOutcome::duplicate, 0};

    auto parent_it = entries_.find(block->header.prev_hash);
    if (parent_it == entries_.end()) throw std::logic_error("insert without parent; validate first");
    const Entry& parent = parent_it->second;

    Entry e;
    e.height = parent.height + 1;
    e.period_mean = mean_for_child(parent);
    std::vector<NodeId> visited =
        tour_visits(block->proof, block->header.merkle_root, roster_);
    visited.push_back(block->producer);
    std::sort(visited.begin(), visited.end());
    visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
    e.recipients = std::move(visited);
    e.block = std::move(block);

    const Hash32 parent_id = e.block->header.prev_hash;
    const uint64_t old_head_height = head_height();
    const Hash32 old_head = head_;
    const uint64_t new_height = e.height;

    children_[parent_id].push_back(id);
    entries_.emplace(id, std::move(e));

    // Longest chain wins; an equal-height tip never displaces the incumbent,
    // which is exactly first-seen tie-breaking.
    if (new_height <= old_head_height) return InsertResult{InsertOutcome::head_unchanged, 0};

    head_ = id;
    if (parent_id == old_head) {
        apply_ledger(entries_.at(id));
        return InsertResult{InsertOutcome::extended_head, 0};
    }

    const Hash32 ancestor = common_ancestor(old_head, id);
    const uint64_t ancestor_height = entry(ancestor).height;
    while (applied_.size() > ancestor_height) undo_ledger();
    std::vector<Hash32> fresh = path_to(id);
    for (size_t h = ancestor_height + 1; h < fresh.size(); ++h) apply_ledger(entry(fresh[h]));
    return InsertResult{InsertOutcome::reorg,
                        static_cast<uint32_t>(old_head_height - ancestor_height)};
}

Hash32 ChainStore::common_ancestor(const Hash32& a, const Hash32& b) const {
    const Entry* ea = &entry(a);
    const Entry* eb = &entry(b);
    while (ea->height > eb->height) ea = &entry(ea->block->header.prev_hash);
    while (eb->height > ea->height) eb = &entry(eb->block->header.prev_hash);
    while (ea->block->id() != eb->block->id()) {
        ea = &entry(ea->block->header.prev_hash);
        eb = &entry(eb->block->header.prev_hash);
    }
    return ea->block->id();
}

void ChainStore::apply_ledger(const Entry& e) {
    AppliedBlock rec;
    rec.id = e.block->id();

    if (!e.recipients.empty()) {
        const uint64_t share = params_.block_reward / e.recipients.size();
        const uint64_t remainder = params_.block_reward % e.recipients.size();
        for (const NodeId& r : e.recipients) {
            uint64_t credit = share + (r == e.block->producer ? remainder : 0);
            ledger_[r].balance += credit;
            rec.reward_credits.emplace_back(r, credit);
        }
    }
    total_minted_ += params_.block_reward;

    for (const Transaction& tx : e.block->transactions) {
        rec.tx_hashes.push_back(tx.hash());
        ++head_path_txs_[rec.tx_hashes.back()];
        const FraudClaim* claim = tx.fraud_claim();
        if (!claim) continue;
        LedgerEntry& accused = ledger_[claim->accused];
        rec.slashes.push_back({claim->accused, claim->claimant, accused.locked, accused.excluded});
        ledger_[claim->claimant].balance += accused.locked;
        accused.locked = 0;
        if (!accused.excluded) ++excluded_count_;
        accused.excluded = true;
    }
    applied_.push_back(std::move(rec));
}

void ChainStore::undo_ledger() {
    if (applied_.empty()) throw std::logic_error("ledger undo past genesis");
    const AppliedBlock& rec = applied_.back();
    for (auto it = rec.slashes.rbegin(); it != rec.slashes.rend(); ++it) {
        ledger_[it->claimant].balance -= it->amount;
        LedgerEntry& accused = ledger_[it->accused];
        accused.locked = it->amount;
        if (accused.excluded && !it->was_excluded) --excluded_count_;
        accused.excluded = it->was_excluded;
    }
    for (const auto& [node, credit] : rec.reward_credits) ledger_[node].balance -= credit;
    for (const Hash32& h : rec.tx_hashes) {
        auto it = head_path_txs_.find(h);
        if (it != head_path_txs_.end() && --it->second == 0) head_path_txs_.erase(it);
    }
    total_minted_ -= params_.block_reward;
    applied_.pop_back();
}

}  // namespace poi
