#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "poi/chain.hpp"

using namespace poi;

namespace {

struct Net {
    std::unique_ptr<SignatureScheme> scheme;
    std::vector<KeyPair> keys;
    Roster roster;
    ChainParams params;

    explicit Net(size_t n, ChainParams p = {}) : scheme(make_scheme(CryptoScheme::transparent)),
                                                 params(p) {
        for (size_t i = 0; i < n; ++i) {
            Bytes buf;
            append(buf, str_span("chain-key"));
            buf.push_back(static_cast<uint8_t>(i));
            keys.push_back(scheme->keypair_from_seed(sha256(as_span(buf))));
        }
        std::sort(keys.begin(), keys.end(),
                  [](const KeyPair& a, const KeyPair& b) { return a.id < b.id; });
        std::vector<NodeId> ids;
        for (const KeyPair& kp : keys) ids.push_back(kp.id);
        roster = Roster(std::move(ids));
    }

    ChainStore store() const { return ChainStore(*scheme, params, roster); }

    const KeyPair& key_of(const NodeId& id) const {
        for (const KeyPair& kp : keys) {
            if (kp.id == id) return kp;
        }
        throw std::logic_error("unknown id");
    }

    //! Produce a fully valid block on `parent` at `time_ms` by running the
    //! producer's tour against every key locally.
    Block make_block(const ChainStore& st, size_t producer, const Hash32& parent,
                     uint32_t time_ms, std::vector<Transaction> txs = {}) const {
        const KeyPair& u = keys[producer];
        Block b;
        b.header.time = time_ms;
        b.header.difficulty = st.expected_difficulty(parent);
        b.header.prev_hash = parent;
        b.transactions = std::move(txs);
        b.header.merkle_root = merkle_root(b.transactions);
        b.producer = u.id;

        TourBegin begun = tour_begin(*scheme, u, roster, parent, b.header.merkle_root,
                                     Difficulty{b.header.difficulty});
        TourState state = std::move(begun.state);
        SignRequest req = std::move(begun.request);
        for (;;) {
            const Signature resp = answer_request(*scheme, key_of(state.addressed_node()).sk, req);
            AdvanceResult res = tour_advance(*scheme, state, u, resp);
            REQUIRE(res.status != AdvanceResult::Status::bad_response);
            if (res.status == AdvanceResult::Status::completed) {
                b.proof = std::move(*res.proof);
                break;
            }
            req = std::move(*res.request);
        }
        b.header.proof_hash = sha256(as_span(b.proof.serialize()));
        return b;
    }

    //! Two sign requests by `accused` sharing a dependency with different
    //! messages: the raw material of a fraud claim.
    FraudClaim make_claim(size_t accused, size_t claimant, const Hash32& d) const {
        TourBegin one = tour_begin(*scheme, keys[accused], roster, d, sha256(str_span("ma")),
                                   Difficulty{2});
        TourBegin two = tour_begin(*scheme, keys[accused], roster, d, sha256(str_span("mb")),
                                   Difficulty{2});
        return FraudClaim{keys[accused].id, keys[claimant].id, one.request, two.request};
    }
};

Hash32 hash_of(std::initializer_list<ByteSpan> parts) { return sha256(parts); }

}  // namespace

TEST_CASE("merkle root recomputed by hand") {
    Transaction t1 = Transaction::opaque(Bytes{1});
    Transaction t2 = Transaction::opaque(Bytes{2});
    Transaction t3 = Transaction::opaque(Bytes{3});
    const Hash32 l1 = t1.hash();
    const Hash32 l2 = t2.hash();
    const Hash32 l3 = t3.hash();

    SUBCASE("empty list hashes the empty string") {
        CHECK(merkle_root({}) == sha256(ByteSpan{}));
        CHECK(to_hex(merkle_root({})) ==
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
    SUBCASE("single leaf is the root") { CHECK(merkle_root({t1}) == l1); }
    SUBCASE("two leaves") {
        CHECK(merkle_root({t1, t2}) == hash_of({l1.span(), l2.span()}));
    }
    SUBCASE("odd width duplicates the last node") {
        const Hash32 left = hash_of({l1.span(), l2.span()});
        const Hash32 right = hash_of({l3.span(), l3.span()});
        CHECK(merkle_root({t1, t2, t3}) == hash_of({left.span(), right.span()}));
    }
    SUBCASE("order matters") { CHECK(merkle_root({t1, t2}) != merkle_root({t2, t1})); }
}

TEST_CASE("transaction serialization round trip") {
    Transaction op = Transaction::opaque(Bytes{9, 9, 9});
    CHECK(Transaction::deserialize(as_span(op.serialize())) == op);

    Net net(4);
    FraudClaim claim = net.make_claim(1, 2, sha256(str_span("dep")));
    Transaction fr = Transaction::fraud(claim);
    CHECK(Transaction::deserialize(as_span(fr.serialize())) == fr);
    CHECK(fr.is_fraud_claim());
    CHECK_FALSE(op.is_fraud_claim());
    CHECK(fr.hash() != op.hash());
}

TEST_CASE("fraud claim validity conditions") {
    Net net(4);
    const Hash32 d = sha256(str_span("dep"));
    FraudClaim claim = net.make_claim(1, 2, d);
    CHECK(fraud_claim_valid(*net.scheme, claim));

    SUBCASE("same message twice is not equivocation") {
        FraudClaim same = claim;
        same.second = same.first;
        CHECK_FALSE(fraud_claim_valid(*net.scheme, same));
    }
    SUBCASE("different dependencies are two honest tours") {
        TourBegin other = tour_begin(*net.scheme, net.keys[1], net.roster,
                                     sha256(str_span("other-d")), sha256(str_span("mb")),
                                     Difficulty{2});
        FraudClaim cross = claim;
        cross.second = other.request;
        CHECK_FALSE(fraud_claim_valid(*net.scheme, cross));
    }
    SUBCASE("forged request signature") {
        FraudClaim forged = claim;
        forged.first.req_sig.bytes[0] ^= 1;
        CHECK_FALSE(fraud_claim_valid(*net.scheme, forged));
    }
    SUBCASE("accused must have signed both") {
        FraudClaim wrong = claim;
        wrong.accused = net.keys[3].id;
        CHECK_FALSE(fraud_claim_valid(*net.scheme, wrong));
    }
}

TEST_CASE("block header has a fixed 112 byte layout") {
    BlockHeader h;
    h.version = 1;
    h.time = 0x01020304;
    h.difficulty = 0x0a0b0c0d;
    h.extra = 0xffeeddcc;
    h.prev_hash.bytes.fill(0x11);
    h.merkle_root.bytes.fill(0x22);
    h.proof_hash.bytes.fill(0x33);

    const auto wire = h.serialize();
    REQUIRE(wire.size() == kHeaderSize);
    std::string expected = "00000001" "01020304" "0a0b0c0d" "ffeeddcc";
    expected += std::string(64, '1');
    expected += std::string(64, '2');
    expected += std::string(64, '3');
    CHECK(to_hex(ByteSpan{wire.data(), wire.size()}) == expected);

    CHECK(BlockHeader::deserialize(ByteSpan{wire.data(), wire.size()}) == h);
    CHECK(h.id() == sha256(ByteSpan{wire.data(), wire.size()}));
}

TEST_CASE("block serialization round trip") {
    Net net(6);
    ChainStore st = net.store();
    Block b = net.make_block(st, 0, st.genesis_id(), 5,
                             {Transaction::opaque(Bytes{1, 2, 3})});
    const Bytes wire = b.serialize();
    Block back = Block::deserialize(as_span(wire));
    CHECK(back.header == b.header);
    CHECK(back.transactions == b.transactions);
    CHECK(back.proof == b.proof);
    // The wire form omits the producer; it is recovered from the proof.
    CHECK(back.producer == NodeId{});
    auto who = recover_producer(*net.scheme, back, net.roster);
    REQUIRE(who.has_value());
    CHECK(*who == b.producer);

    Bytes garbage = wire;
    garbage.pop_back();
    CHECK_THROWS(Block::deserialize(as_span(garbage)));
}

TEST_CASE("genesis is a pure function of the parameters") {
    ChainParams p;
    p.initial_mean = 7;
    p.genesis_time = 123;
    const Block g1 = ChainStore::make_genesis(p);
    const Block g2 = ChainStore::make_genesis(p);
    CHECK(g1.id() == g2.id());
    CHECK(g1.header.time == 123);
    CHECK(g1.header.difficulty == 7);
    CHECK(g1.header.prev_hash.is_zero());
    CHECK(g1.transactions.empty());
    CHECK(g1.proof.signatures.empty());

    ChainParams q = p;
    q.initial_mean = 8;
    CHECK(ChainStore::make_genesis(q).id() != g1.id());
}

TEST_CASE("store starts at genesis with staked ledger") {
    Net net(5);
    ChainStore st = net.store();
    CHECK(st.head() == st.genesis_id());
    CHECK(st.head_height() == 0);
    CHECK(st.contains(st.genesis_id()));
    CHECK(st.is_max_height_tip(st.genesis_id()));
    CHECK(st.total_minted() == 0);
    CHECK(st.excluded_count() == 0);
    for (const KeyPair& kp : net.keys) {
        const LedgerEntry& e = st.ledger_entry(kp.id);
        CHECK(e.balance == 0);
        CHECK(e.locked == net.params.initial_stake);
        CHECK_FALSE(e.excluded);
    }
}

TEST_CASE("insert extends validates and rejects") {
    Net net(6);
    ChainStore st = net.store();
    Block b1 = net.make_block(st, 0, st.genesis_id(), 10);

    CHECK(st.validate(b1).ok());
    auto r1 = st.insert(b1);
    CHECK(r1.outcome == ChainStore::InsertOutcome::extended_head);
    CHECK(st.head() == b1.id());
    CHECK(st.head_height() == 1);

    SUBCASE("duplicate insert is reported") {
        CHECK(st.insert(b1).outcome == ChainStore::InsertOutcome::duplicate);
    }
    SUBCASE("validation failures name the defect") {
        Block bad = net.make_block(st, 1, b1.id(), 20);
        Block tweaked = bad;
        tweaked.header.time = 10;  // not greater than parent
        CHECK(st.validate(tweaked).reason == "time not increasing");

        tweaked = bad;
        tweaked.transactions.push_back(Transaction::opaque(Bytes{1}));
        CHECK(st.validate(tweaked).reason == "merkle root mismatch");

        tweaked = bad;
        tweaked.proof.signatures.pop_back();
        tweaked.proof.signatures.pop_back();
        CHECK(st.validate(tweaked).reason == "proof hash mismatch");

        tweaked = bad;
        tweaked.header.difficulty += 1;
        CHECK(st.validate(tweaked).reason == "wrong difficulty");

        tweaked = bad;
        tweaked.producer = NodeId{};  // nobody
        CHECK(st.validate(tweaked).reason == "producer not in roster");

        tweaked = bad;
        tweaked.proof.signatures[1].bytes[0] ^= 1;
        tweaked.header.proof_hash = sha256(as_span(tweaked.proof.serialize()));
        CHECK(st.validate(tweaked).reason == "invalid proof");

        CHECK(st.validate(bad).ok());  // the untouched block is fine
    }
    SUBCASE("unknown parent is missing_parent, insert refuses it") {
        Block orphan = net.make_block(st, 1, b1.id(), 30);
        ChainStore fresh = net.store();
        CHECK(fresh.validate(orphan).verdict == ChainStore::Validity::missing_parent);
        CHECK_THROWS_AS(fresh.insert(orphan), std::logic_error);
    }
}

TEST_CASE("fork choice prefers height with first seen tie break") {
    Net net(6);
    ChainStore st = net.store();
    Block a1 = net.make_block(st, 0, st.genesis_id(), 10);
    st.insert(a1);
    Block a2 = net.make_block(st, 1, a1.id(), 20);
    st.insert(a2);
    CHECK(st.head() == a2.id());

    // Sibling fork of equal final height: arrives later, never displaces.
    Block b1 = net.make_block(st, 2, st.genesis_id(), 11);
    auto rb1 = st.insert(b1);
    CHECK(rb1.outcome == ChainStore::InsertOutcome::head_unchanged);
    Block b2 = net.make_block(st, 3, b1.id(), 21);
    auto rb2 = st.insert(b2);
    CHECK(rb2.outcome == ChainStore::InsertOutcome::head_unchanged);
    CHECK(st.head() == a2.id());
    CHECK(st.is_max_height_tip(a2.id()));
    CHECK(st.is_max_height_tip(b2.id()));  // equal height: both are tips
    CHECK_FALSE(st.is_max_height_tip(a1.id()));

    // One more block on the B branch wins the race and forces a reorg.
    Block b3 = net.make_block(st, 2, b2.id(), 31);
    auto rb3 = st.insert(b3);
    CHECK(rb3.outcome == ChainStore::InsertOutcome::reorg);
    CHECK(rb3.reorg_depth == 2);  // a1, a2 abandoned
    CHECK(st.head() == b3.id());
    CHECK(st.head_height() == 3);

    const auto path = st.head_path();
    REQUIRE(path.size() == 4);
    CHECK(path[0] == st.genesis_id());
    CHECK(path[1] == b1.id());
    CHECK(path[3] == b3.id());

    const auto& kids = st.children_of(st.genesis_id());
    CHECK(kids.size() == 2);
}

TEST_CASE("ledger matches an independent fold over the head path") {
    Net net(6);
    ChainStore st = net.store();

    struct Folded {
        uint64_t balance = 0;
        uint64_t locked = 0;
        bool excluded = false;
    };
    std::map<NodeId, Folded> fold;
    for (const KeyPair& kp : net.keys) fold[kp.id] = {0, net.params.initial_stake, false};

    Hash32 parent = st.genesis_id();
    uint32_t t = 1;
    std::vector<Block> blocks;
    for (size_t producer = 0; producer < 5; ++producer) {
        Block b = net.make_block(st, producer, parent, t++);
        REQUIRE(st.validate(b).ok());
        st.insert(b);
        parent = b.id();
        blocks.push_back(b);
    }

    for (const Block& b : blocks) {
        // Reward split: distinct tour members plus producer, remainder to the
        // producer. Recomputed here from the proof alone.
        std::vector<NodeId> who = tour_visits(b.proof, b.header.merkle_root, net.roster);
        who.push_back(b.producer);
        std::sort(who.begin(), who.end());
        who.erase(std::unique(who.begin(), who.end()), who.end());
        const uint64_t share = net.params.block_reward / who.size();
        for (const NodeId& id : who) fold[id].balance += share;
        fold[b.producer].balance += net.params.block_reward - share * who.size();
    }

    for (const KeyPair& kp : net.keys) {
        const LedgerEntry& e = st.ledger_entry(kp.id);
        CAPTURE(kp.id.short_hex());
        CHECK(e.balance == fold[kp.id].balance);
        CHECK(e.locked == fold[kp.id].locked);
        CHECK(e.excluded == fold[kp.id].excluded);
    }
    CHECK(st.total_minted() == 5 * net.params.block_reward);

    // Every recipient list the store kept matches the recomputation.
    for (const Block& b : blocks) {
        std::vector<NodeId> who = tour_visits(b.proof, b.header.merkle_root, net.roster);
        who.push_back(b.producer);
        std::sort(who.begin(), who.end());
        who.erase(std::unique(who.begin(), who.end()), who.end());
        CHECK(st.recipients_of(b.id()) == who);
    }
}

TEST_CASE("fraud claim slashes stake to the claimant and excludes") {
    Net net(6);
    ChainStore st = net.store();
    const size_t accused = 2, claimant = 4, producer = 0;

    FraudClaim claim = net.make_claim(accused, claimant, st.genesis_id());
    Block b = net.make_block(st, producer, st.genesis_id(), 7, {Transaction::fraud(claim)});
    REQUIRE(st.validate(b).ok());
    st.insert(b);

    const LedgerEntry& acc = st.ledger_entry(net.keys[accused].id);
    CHECK(acc.locked == 0);
    CHECK(acc.excluded);
    CHECK(st.excluded_count() == 1);
    CHECK(st.is_excluded(net.keys[accused].id));

    const LedgerEntry& cl = st.ledger_entry(net.keys[claimant].id);
    // Claimant gains the full stake on top of any tour reward share.
    CHECK(cl.balance >= net.params.initial_stake);
    CHECK(st.tx_on_head_path(Transaction::fraud(claim).hash()));
}

TEST_CASE("reorg rolls ledger effects back and forward") {
    Net net(6);
    ChainStore st = net.store();

    // Branch A: two blocks, one carrying a slash of node 3 by node 1.
    Block a1 = net.make_block(st, 0, st.genesis_id(), 10,
                              {Transaction::fraud(net.make_claim(3, 1, st.genesis_id()))});
    st.insert(a1);
    Block a2 = net.make_block(st, 1, a1.id(), 20);
    st.insert(a2);
    CHECK(st.is_excluded(net.keys[3].id));

    // Branch B from genesis: three clean blocks. Building them needs a
    // store whose head is the B branch, so use a scratch replica.
    ChainStore scratch = net.store();
    Block b1 = net.make_block(scratch, 2, scratch.genesis_id(), 11);
    scratch.insert(b1);
    Block b2 = net.make_block(scratch, 4, b1.id(), 21);
    scratch.insert(b2);
    Block b3 = net.make_block(scratch, 5, b2.id(), 31);
    scratch.insert(b3);

    st.insert(b1);
    st.insert(b2);
    auto res = st.insert(b3);
    CHECK(res.outcome == ChainStore::InsertOutcome::reorg);
    CHECK(st.head() == b3.id());

    // After abandoning branch A the slash must be fully undone, and the
    // ledger must equal a fresh store that only ever saw branch B.
    CHECK_FALSE(st.is_excluded(net.keys[3].id));
    CHECK(st.excluded_count() == 0);
    CHECK(st.ledger() == scratch.ledger());
    CHECK(st.total_minted() == scratch.total_minted());
    CHECK_FALSE(st.tx_on_head_path(a1.transactions[0].hash()));

    // Reorg back: extend A to height 4.
    ChainStore scratch_a = net.store();
    scratch_a.insert(a1);
    scratch_a.insert(a2);
    Block a3 = net.make_block(scratch_a, 2, a2.id(), 40);
    scratch_a.insert(a3);
    Block a4 = net.make_block(scratch_a, 2, a3.id(), 50);
    scratch_a.insert(a4);

    st.insert(a3);
    auto back = st.insert(a4);
    CHECK(back.outcome == ChainStore::InsertOutcome::reorg);
    CHECK(st.head() == a4.id());
    CHECK(st.is_excluded(net.keys[3].id));
    CHECK(st.ledger() == scratch_a.ledger());
}

TEST_CASE("retarget rule golden values") {
    // new = round(old * period * target / duration), clamped to [old/4, old*4].
    CHECK(ChainStore::retarget_mean(10, 10000, 100, 100) == 10);  // on target
    CHECK(ChainStore::retarget_mean(10, 5000, 100, 100) == 20);   // twice too fast
    CHECK(ChainStore::retarget_mean(10, 20000, 100, 100) == 5);   // twice too slow
    CHECK(ChainStore::retarget_mean(10, 40000, 100, 100) == 3);   // 2.5 rounds up
    CHECK(ChainStore::retarget_mean(10, 100, 100, 100) == 40);    // clamp at 4x
    CHECK(ChainStore::retarget_mean(10, 10000000, 100, 100) == 2);  // clamp at /4
    CHECK(ChainStore::retarget_mean(1, 1000000, 10, 100) == 1);   // floor at 1
    CHECK(ChainStore::retarget_mean(1, 100, 10, 100) == 4);
    CHECK(ChainStore::retarget_mean(10, 0, 100, 100) == 40);      // zero duration
    CHECK(ChainStore::retarget_mean(0xffffffffu, 1, 1, 100) == 0xffffffffu);
}

TEST_CASE("difficulty retargets at period boundaries during growth") {
    ChainParams p;
    p.initial_mean = 2;
    p.retarget_period = 2;
    p.target_interval_ms = 100;
    Net net(6, p);
    ChainStore st = net.store();

    // Heights 1 and 2 run at the initial mean; times 50 and 100 make the
    // first period last 100ms against a 200ms target: retarget to
    // round(2*2*100/100) = 4.
    Block b1 = net.make_block(st, 0, st.genesis_id(), 50);
    CHECK(b1.header.difficulty == 2);
    st.insert(b1);
    Block b2 = net.make_block(st, 1, b1.id(), 100);
    CHECK(b2.header.difficulty == 2);
    st.insert(b2);
    CHECK(st.expected_difficulty(b2.id()) == 4);

    Block b3 = net.make_block(st, 2, b2.id(), 150);
    CHECK(b3.header.difficulty == 4);
    st.insert(b3);
    Block b4 = net.make_block(st, 3, b3.id(), 500);
    CHECK(b4.header.difficulty == 4);
    st.insert(b4);
    // Second period spanned 100 -> 500 = 400ms against 200: halve back to 2.
    CHECK(st.expected_difficulty(b4.id()) == 2);

    // A block claiming the wrong difficulty is rejected outright.
    Block wrong = net.make_block(st, 4, b4.id(), 600);
    wrong.header.difficulty = 4;
    CHECK(st.validate(wrong).reason == "wrong difficulty");
}

TEST_CASE("store accessors reject unknown blocks") {
    Net net(4);
    ChainStore st = net.store();
    Hash32 nowhere = sha256(str_span("nowhere"));
    CHECK_FALSE(st.contains(nowhere));
    CHECK(st.get(nowhere) == nullptr);
    CHECK_THROWS(st.height_of(nowhere));
    // Unknown identities read as empty: no balance, no stake, not excluded.
    const LedgerEntry& ghost = st.ledger_entry(NodeId{});
    CHECK(ghost.balance == 0);
    CHECK(ghost.locked == 0);
    CHECK_FALSE(ghost.excluded);
}
