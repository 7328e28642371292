#pragma once

#include <map>
#include <memory>
#include <string>

#include "poi/block.hpp"

namespace poi {

struct ChainParams {
    uint32_t initial_mean = 10;       // difficulty for the first period
    uint32_t retarget_period = 100;   // blocks per difficulty period
    uint64_t target_interval_ms = 100;  // B: wanted time between blocks
    uint64_t block_reward = 100;      // R: minted per block, split over the tour
    uint64_t initial_stake = 1000;    // locked per node at genesis
    uint32_t genesis_time = 0;
};

struct LedgerEntry {
    uint64_t balance = 0;
    uint64_t locked = 0;
    bool excluded = false;

    bool operator==(const LedgerEntry&) const = default;
};

//! Block DAG with longest-chain head selection (first-seen tie-break) and the
//! balance/stake ledger maintained along the head path. Single-writer.
class ChainStore {
public:
    ChainStore(const SignatureScheme& scheme, ChainParams params, Roster roster);

    const ChainParams& params() const { return params_; }
    const Roster& roster() const { return roster_; }
    const Block& genesis() const { return *get(genesis_id_); }
    const Hash32& genesis_id() const { return genesis_id_; }

    bool contains(const Hash32& id) const { return entries_.count(id) > 0; }
    std::shared_ptr<const Block> get(const Hash32& id) const;
    uint64_t height_of(const Hash32& id) const;

    const Hash32& head() const { return head_; }
    uint64_t head_height() const { return height_of(head_); }
    //! True iff id is the tip of one of the longest branches, i.e. a block at
    //! maximal height. Tour requests are only answered for such dependencies.
    bool is_max_height_tip(const Hash32& id) const;

    enum class Validity { ok, missing_parent, invalid };
    struct ValidationResult {
        Validity verdict = Validity::invalid;
        std::string reason;
        bool ok() const { return verdict == Validity::ok; }
    };
    //! Full consensus validation against this store's branch state. Requires
    //! the parent to be present; reports missing_parent otherwise so the
    //! caller can fetch it.
    ValidationResult validate(const Block& block) const;

    enum class InsertOutcome { duplicate, head_unchanged, extended_head, reorg };
    struct InsertResult {
        InsertOutcome outcome = InsertOutcome::duplicate;
        uint32_t reorg_depth = 0;
        bool head_changed() const {
            return outcome == InsertOutcome::extended_head || outcome == InsertOutcome::reorg;
        }
    };
    //! Insert a block that already passed validate(). Updates the head by
    //! maximal height (first-seen tie-break) and replays ledger effects along
    //! the new head path, rolling back any abandoned suffix.
    InsertResult insert(std::shared_ptr<const Block> block);
    InsertResult insert(Block block) {
        return insert(std::make_shared<const Block>(std::move(block)));
    }

    //! Difficulty a child of `parent_id` must carry.
    uint32_t expected_difficulty(const Hash32& parent_id) const;

    const LedgerEntry& ledger_entry(const NodeId& id) const;
    const std::map<NodeId, LedgerEntry>& ledger() const { return ledger_; }
    bool is_excluded(const NodeId& id) const { return ledger_entry(id).excluded; }
    size_t excluded_count() const { return excluded_count_; }
    uint64_t total_minted() const { return total_minted_; }

    //! True iff a transaction with this hash sits in a block on the current
    //! head path. Used to keep mempool contents and candidate blocks free of
    //! already-included transactions across reorgs.
    bool tx_on_head_path(const Hash32& tx_hash) const;

    //! Distinct reward recipients of a stored block (tour visits + producer).
    const std::vector<NodeId>& recipients_of(const Hash32& id) const;

    //! Block ids from genesis to head, inclusive.
    std::vector<Hash32> head_path() const;
    std::vector<Hash32> path_to(const Hash32& tip) const;

    const std::vector<Hash32>& children_of(const Hash32& id) const;

    //! Pure retarget rule: next mean from the previous one and the measured
    //! period duration, clamped to [old/4, old*4] and floored at 1.
    static uint32_t retarget_mean(uint32_t old_mean, uint64_t observed_ms, uint32_t period,
                                  uint64_t target_interval_ms);

    //! The genesis block a given parameter set produces (shared by all nodes).
    static Block make_genesis(const ChainParams& params);

private:
    struct Entry {
        std::shared_ptr<const Block> block;
        uint64_t height = 0;
        uint32_t period_mean = 1;  // difficulty in force at this block's height
        std::vector<NodeId> recipients;
    };

    struct SlashUndo {
        NodeId accused;
        NodeId claimant;
        uint64_t amount = 0;
        bool was_excluded = false;
    };
    struct AppliedBlock {
        Hash32 id;
        std::vector<std::pair<NodeId, uint64_t>> reward_credits;
        std::vector<SlashUndo> slashes;
        std::vector<Hash32> tx_hashes;
    };

    const Entry& entry(const Hash32& id) const;
    uint32_t mean_for_child(const Entry& parent) const;
    void apply_ledger(const Entry& e);
    void undo_ledger();
    Hash32 common_ancestor(const Hash32& a, const Hash32& b) const;

    const SignatureScheme* scheme_;
    ChainParams params_;
    Roster roster_;
    Hash32 genesis_id_;
    Hash32 head_;
    std::map<Hash32, Entry> entries_;
    std::map<Hash32, std::vector<Hash32>> children_;
    std::map<NodeId, LedgerEntry> ledger_;
    std::vector<AppliedBlock> applied_;  // head path above genesis, in order
    std::map<Hash32, uint32_t> head_path_txs_;
    uint64_t total_minted_ = 0;
    size_t excluded_count_ = 0;
};

}  // namespace poi
