#include "poi/simnet.hpp"

#include <cmath>
#include <stdexcept>

#include "poi/adversary.hpp"

namespace poi {

const char* to_string(AdversaryKind k) {
    switch (k) {
        case AdversaryKind::none: return "none";
        case AdversaryKind::double_tour: return "double_tour";
        case AdversaryKind::selfish: return "selfish";
        case AdversaryKind::shared_keys: return "shared_keys";
    }
    return "?";
}

void SimConfig::validate() const {
    auto bad = [](const std::string& what) { throw std::invalid_argument(what); };
    if (n < 2) bad("n: need at least 2 nodes");
    if (!(com_mean_ms > 0)) bad("com_mean_ms: must be positive");
    if (com_jitter < 0) bad("com_jitter: must be >= 0");
    if (delta_max_ms < com_mean_ms) bad("delta_max_ms: must be >= com_mean_ms");
    if (chain.initial_mean < 1) bad("initial_difficulty_mean: must be >= 1");
    if (chain.retarget_period < 1) bad("retarget_period: must be >= 1");
    if (chain.target_interval_ms < 1) bad("target_block_interval_ms: must be >= 1");
    if (max_time_ms < 1) bad("max_time_ms: must be >= 1");
    for (const CrashEvent& c : crashes) {
        if (c.node >= n) bad("crashes: node index out of range");
        if (c.reboot_at_us && *c.reboot_at_us <= c.crash_at_us) {
            bad("crashes: reboot_at_ms must be after crash_at_ms");
        }
    }
    if (adversary == AdversaryKind::double_tour || adversary == AdversaryKind::selfish) {
        if (adversary_node >= n) bad("adversary_node: out of range");
    }
    if (adversary == AdversaryKind::double_tour) {
        if (double_tour_count < 2 || double_tour_count > 16) {
            bad("double_tour_count: must be in [2, 16]");
        }
    }
    if (adversary == AdversaryKind::shared_keys) {
        if (colluders.empty()) bad("colluders: must name at least one node");
        std::set<uint32_t> seen;
        for (uint32_t c : colluders) {
            if (c >= n) bad("colluders: index out of range");
            if (!seen.insert(c).second) bad("colluders: duplicate index");
        }
    }
}

Simulation::Simulation(SimConfig config)
    : config_(std::move(config)),
      latency_rng_(Hash32{}) {
    config_.validate();
    scheme_ = make_scheme(config_.scheme);

    Bytes rng_seed;
    put_u64be(rng_seed, config_.seed);
    append(rng_seed, str_span("latency"));
    latency_rng_ = SeededRng(sha256(as_span(rng_seed)));

    // Key every node off the master seed, then index by roster (sorted) order
    // so scenario files can name nodes by a stable index.
    std::vector<KeyPair> keys;
    for (uint32_t i = 0; i < config_.n; ++i) {
        Bytes buf;
        put_u64be(buf, config_.seed);
        append(buf, str_span("node-key"));
        put_u64be(buf, i);
        keys.push_back(scheme_->keypair_from_seed(sha256(as_span(buf))));
    }
    std::sort(keys.begin(), keys.end(),
              [](const KeyPair& a, const KeyPair& b) { return a.id < b.id; });
    std::vector<NodeId> members;
    for (const KeyPair& kp : keys) members.push_back(kp.id);
    roster_ = Roster(members);

    std::set<uint32_t> colluder_set(config_.colluders.begin(), config_.colluders.end());
    std::map<NodeId, PrivateKey> colluder_keys;
    if (config_.adversary == AdversaryKind::shared_keys) {
        for (uint32_t c : colluder_set) colluder_keys[keys[c].id] = keys[c].sk;
    }

    const uint64_t retry_us =
        static_cast<uint64_t>(std::llround(4.0 * config_.com_mean_ms * 1000.0));
    for (uint32_t i = 0; i < config_.n; ++i) {
        const bool is_adversary =
            (config_.adversary == AdversaryKind::double_tour ||
             config_.adversary == AdversaryKind::selfish) &&
            i == config_.adversary_node;
        const bool is_colluder =
            config_.adversary == AdversaryKind::shared_keys && colluder_set.count(i) > 0;

        NodeContext ctx;
        ctx.scheme = scheme_.get();
        ctx.roster = roster_;
        ctx.keys = keys[i];
        ctx.chain_params = config_.chain;
        ctx.retry_interval_us = retry_us;
        ctx.roster_index = i;
        ctx.initiate = config_.honest_initiate || is_adversary || is_colluder;

        if (is_adversary && config_.adversary == AdversaryKind::double_tour) {
            participants_.push_back(
                std::make_unique<DoubleTourNode>(std::move(ctx), config_.double_tour_count));
        } else if (is_adversary && config_.adversary == AdversaryKind::selfish) {
            participants_.push_back(
                std::make_unique<SelfishNode>(std::move(ctx), config_.selfish_serve_requests));
        } else if (is_colluder) {
            participants_.push_back(
                std::make_unique<SharedKeysNode>(std::move(ctx), colluder_keys));
        } else {
            participants_.push_back(std::make_unique<HonestNode>(std::move(ctx)));
        }
    }

    up_.assign(config_.n, true);
    epoch_.assign(config_.n, 0);
    metrics_.first_tour_all_honest.resize(config_.n);
}

Simulation::~Simulation() = default;

uint32_t Simulation::index_of(const NodeId& id) const {
    return static_cast<uint32_t>(roster_.index_of(id));
}

size_t Simulation::reference_node() const {
    for (size_t i = 0; i < participants_.size(); ++i) {
        if (config_.adversary == AdversaryKind::none) return i;
        if ((config_.adversary == AdversaryKind::double_tour ||
             config_.adversary == AdversaryKind::selfish) &&
            i == config_.adversary_node) {
            continue;
        }
        if (config_.adversary == AdversaryKind::shared_keys &&
            std::count(config_.colluders.begin(), config_.colluders.end(), i)) {
            continue;
        }
        return i;
    }
    return 0;  // fully adversarial network: any chain will do
}

void Simulation::schedule(uint64_t at_us, EventBody body) {
    queue_.emplace(std::make_pair(at_us, seq_++), std::move(body));
}

uint64_t Simulation::sample_latency_us() {
    double ms = config_.com_mean_ms;
    if (config_.com_jitter > 0) {
        const double u1 = 1.0 - latency_rng_.next_unit();  // (0, 1]
        const double u2 = latency_rng_.next_unit();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        const double sigma = config_.com_jitter;
        const double mu = std::log(config_.com_mean_ms) - sigma * sigma / 2.0;
        ms = std::exp(mu + sigma * z);
        if (ms > config_.delta_max_ms) ms = config_.delta_max_ms;
    }
    const auto us = static_cast<uint64_t>(std::llround(ms * 1000.0));
    return us < 1 ? 1 : us;
}

void Simulation::run() {
    if (ran_) throw std::logic_error("simulation already ran");
    ran_ = true;

    for (const CrashEvent& c : config_.crashes) {
        schedule(c.crash_at_us, CrashEv{c.node});
        if (c.reboot_at_us) schedule(*c.reboot_at_us, RebootEv{c.node});
    }
    for (uint32_t i = 0; i < config_.n; ++i) schedule(0, StartEv{i});

    const uint64_t deadline_us = config_.max_time_ms * 1000;
    while (!queue_.empty() && !halted()) {
        auto it = queue_.begin();
        const uint64_t at = it->first.first;
        if (at > deadline_us) {
            now_us_ = deadline_us;
            halt_why_ = "time limit";
            break;
        }
        now_us_ = at;
        EventBody body = std::move(it->second);
        queue_.erase(it);

        if (auto* d = std::get_if<Deliver>(&body)) {
            deliver(now_us_, *d);
        } else if (auto* t = std::get_if<TimerEv>(&body)) {
            if (up_[t->node] && epoch_[t->node] == t->epoch) {
                process_actions(t->node, now_us_,
                                participants_[t->node]->on_timer(now_us_, t->tag));
            }
        } else if (auto* c = std::get_if<CrashEv>(&body)) {
            if (up_[c->node]) {
                up_[c->node] = false;
                ++epoch_[c->node];
                crashed_now_.insert(c->node);
                participants_[c->node]->on_crash();
            }
        } else if (auto* r = std::get_if<RebootEv>(&body)) {
            if (!up_[r->node]) {
                up_[r->node] = true;
                ++epoch_[r->node];
                crashed_now_.erase(r->node);
                process_actions(r->node, now_us_,
                                participants_[r->node]->on_reboot(now_us_));
            }
        } else if (auto* s = std::get_if<StartEv>(&body)) {
            if (up_[s->node]) {
                process_actions(s->node, now_us_, participants_[s->node]->on_start(now_us_));
            }
        }
        check_halt(now_us_);
    }
    if (halt_why_.empty()) halt_why_ = "quiescent";
    metrics_.halt_reason = halt_why_;
    metrics_.end_time_us = halt_why_ == "time limit" ? deadline_us : now_us_;
}

void Simulation::check_halt(uint64_t now_us) {
    (void)now_us;
    if (!halt_why_.empty()) return;
    if (config_.max_blocks > 0) {
        for (const auto& p : participants_) {
            if (p->chain().head_height() >= config_.max_blocks) {
                halt_why_ = "height limit";
                return;
            }
        }
    }
    if (config_.halt_on_first_slash) {
        for (const auto& p : participants_) {
            if (p->chain().excluded_count() > 0) {
                halt_why_ = "first slash";
                return;
            }
        }
    }
}

void Simulation::deliver(uint64_t now_us, const Deliver& d) {
    if (!up_[d.to]) {
        ++metrics_.dropped_to_crashed;
        if (const auto* req = std::get_if<SignRequest>(&d.msg)) {
            metrics_.stalled_requests.insert({index_of(req->initiator), req->h});
        }
        return;
    }
    ++metrics_.delivered_total;

    if (const auto* req = std::get_if<SignRequest>(&d.msg)) {
        // A request is "live" if the receiver could act on it right now:
        // that is the transport-level ground truth the conflict-detection
        // oracle compares against.
        const ChainStore& ch = participants_[d.to]->chain();
        if (ch.contains(req->d) && ch.is_max_height_tip(req->d) &&
            !ch.is_excluded(req->initiator)) {
            metrics_.live_targets[{index_of(req->initiator), req->d, req->m}].insert(d.to);
        }
    }

    process_actions(d.to, now_us,
                    participants_[d.to]->on_message(now_us, roster_[d.from], d.msg));
}

void Simulation::process_actions(uint32_t from, uint64_t now_us, Actions actions) {
    for (const LogEvent& ev : actions.events) record_event(from, now_us, ev);
    for (const TimerRequest& t : actions.timers) {
        schedule(now_us + t.delay_us, TimerEv{from, t.tag, epoch_[from]});
    }
    for (Outbound& out : actions.sends) {
        const MessageType type = message_type(out.msg);
        ++metrics_.sent[type];
        ++metrics_.sent_total;
        if (const auto* req = std::get_if<SignRequest>(&out.msg)) {
            ++metrics_.tour_request_sends[{index_of(req->initiator), req->d, req->m}];
        }
        const uint32_t to = index_of(out.to);
        schedule(now_us + sample_latency_us(), Deliver{from, to, std::move(out.msg)});
    }
}

void Simulation::record_event(uint32_t from, uint64_t now_us, const LogEvent& ev) {
    if (const auto* ts = std::get_if<EvTourStarted>(&ev)) {
        ++metrics_.tours_started;
        Metrics::TourStart rec;
        rec.time_us = now_us;
        rec.initiator = from;
        rec.d = ts->d;
        rec.m = ts->m;
        rec.target_len = ts->target_len;
        bool all_honest = true;
        for (const NodeId& member : ts->services) {
            const uint32_t idx = index_of(member);
            rec.services.push_back(idx);
            if (crashed_now_.count(idx)) all_honest = false;
        }
        if (!metrics_.first_tour_all_honest[from].has_value()) {
            metrics_.first_tour_all_honest[from] = all_honest;
        }
        metrics_.tour_starts.push_back(std::move(rec));
        return;
    }
    if (std::get_if<EvTourCompleted>(&ev)) {
        ++metrics_.tours_completed;
        return;
    }
    if (std::get_if<EvTourAbandoned>(&ev)) {
        ++metrics_.tours_abandoned;
        return;
    }
    if (const auto* det = std::get_if<EvConflictDetected>(&ev)) {
        metrics_.detections.push_back({now_us, from, index_of(det->accused), det->d});
        return;
    }
    if (const auto* bp = std::get_if<EvBlockProduced>(&ev)) {
        const Block& b = *bp->block;
        Metrics::BlockProduced rec;
        rec.time_us = now_us;
        rec.producer = from;
        rec.id = b.id();
        rec.parent = b.header.prev_hash;
        rec.merkle = b.header.merkle_root;
        rec.height = participants_[from]->chain().height_of(rec.id);
        rec.tour_len = static_cast<uint32_t>((b.proof.signatures.size() - 1) / 2);
        rec.difficulty = b.header.difficulty;
        rec.tx_count = b.transactions.size();
        rec.withheld = bp->withheld;
        for (const NodeId& v : tour_visits(b.proof, b.header.merkle_root, roster_)) {
            rec.visits.push_back(index_of(v));
        }
        metrics_.block_index[rec.id] = metrics_.blocks.size();
        if (bp->withheld) metrics_.withheld_at[rec.id] = now_us;
        metrics_.blocks.push_back(std::move(rec));
        return;
    }
    if (const auto* served = std::get_if<EvBlockServed>(&ev)) {
        metrics_.first_served_at.try_emplace(served->id, now_us);
        return;
    }
    if (const auto* hc = std::get_if<EvHeadChanged>(&ev)) {
        ++metrics_.head_changes;
        if (hc->reorg) metrics_.reorg_depths.push_back(hc->reorg_depth);
        return;
    }
    if (std::get_if<EvInvalidBlock>(&ev)) {
        ++metrics_.invalid_blocks;
        return;
    }
    if (const auto* batch = std::get_if<EvTourBatch>(&ev)) {
        metrics_.batches.push_back({from, batch->d, batch->messages});
        return;
    }
}

}  // namespace poi
