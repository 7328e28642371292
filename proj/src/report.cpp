// Post-run report generation: the JSON summary document and the per-block
// line records. Pure functions of the finished Simulation, so repeated calls
// produce identical bytes.
#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "poi/simnet.hpp"

namespace poi {

namespace {

using ojson = nlohmann::ordered_json;

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string fmt_ms(uint64_t time_us) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llu.%03llu",
                  static_cast<unsigned long long>(time_us / 1000),
                  static_cast<unsigned long long>(time_us % 1000));
    return buf;
}

//! P(an s-subset drawn uniformly from n nodes avoids all k marked ones).
double subset_avoids_all(uint32_t n, uint32_t k, uint32_t s) {
    if (k + s > n) return 0.0;
    double p = 1.0;
    for (uint32_t i = 0; i < s; ++i) {
        p *= static_cast<double>(n - k - i) / static_cast<double>(n - i);
    }
    return p;
}

}  // namespace

std::string Simulation::summary_json(int indent) const {
    const Metrics& m = metrics_;
    const Participant& ref = *participants_[reference_node()];
    const ChainStore& chain = ref.chain();

    ojson doc;

    ojson cfg;
    cfg["n"] = config_.n;
    cfg["seed"] = config_.seed;
    cfg["scheme"] = to_string(config_.scheme);
    cfg["com_mean_ms"] = config_.com_mean_ms;
    cfg["com_jitter"] = config_.com_jitter;
    cfg["delta_max_ms"] = config_.delta_max_ms;
    cfg["initial_difficulty_mean"] = config_.chain.initial_mean;
    cfg["retarget_period"] = config_.chain.retarget_period;
    cfg["target_block_interval_ms"] = config_.chain.target_interval_ms;
    cfg["block_reward"] = config_.chain.block_reward;
    cfg["initial_stake"] = config_.chain.initial_stake;
    cfg["max_time_ms"] = config_.max_time_ms;
    cfg["max_blocks"] = config_.max_blocks;
    cfg["halt_on_first_slash"] = config_.halt_on_first_slash;
    cfg["honest_initiate"] = config_.honest_initiate;
    ojson crashes = ojson::array();
    for (const CrashEvent& c : config_.crashes) {
        ojson e;
        e["node"] = c.node;
        e["crash_at_ms"] = round3(static_cast<double>(c.crash_at_us) / 1000.0);
        if (c.reboot_at_us) {
            e["reboot_at_ms"] = round3(static_cast<double>(*c.reboot_at_us) / 1000.0);
        } else {
            e["reboot_at_ms"] = nullptr;
        }
        crashes.push_back(std::move(e));
    }
    cfg["crashes"] = std::move(crashes);
    ojson adv;
    adv["kind"] = to_string(config_.adversary);
    switch (config_.adversary) {
        case AdversaryKind::double_tour:
            adv["node"] = config_.adversary_node;
            adv["tour_count"] = config_.double_tour_count;
            break;
        case AdversaryKind::selfish:
            adv["node"] = config_.adversary_node;
            adv["serve_requests"] = config_.selfish_serve_requests;
            break;
        case AdversaryKind::shared_keys:
            adv["colluders"] = config_.colluders;
            break;
        case AdversaryKind::none:
            break;
    }
    cfg["adversary"] = std::move(adv);
    doc["config"] = std::move(cfg);

    doc["halt_reason"] = m.halt_reason;
    doc["virtual_time_ms"] = round3(static_cast<double>(m.end_time_us) / 1000.0);

    // Chain statistics are taken from the reference node's view.
    const std::vector<Hash32> path = chain.head_path();
    double interval_sum = 0.0;
    uint64_t interval_count = 0;
    double len_sum = 0.0;
    uint64_t len_count = 0;
    uint64_t claims_included = 0;
    uint64_t prev_time = 0;
    bool have_prev = false;
    for (const Hash32& id : path) {
        auto it = m.block_index.find(id);
        if (it != m.block_index.end()) {
            const Metrics::BlockProduced& rec = m.blocks[it->second];
            if (have_prev) {
                interval_sum += static_cast<double>(rec.time_us - prev_time) / 1000.0;
                ++interval_count;
            }
            prev_time = rec.time_us;
            have_prev = true;
            len_sum += rec.tour_len;
            ++len_count;
        }
        for (const Transaction& tx : chain.get(id)->transactions) {
            if (tx.is_fraud_claim()) ++claims_included;
        }
    }
    std::map<Hash32, std::set<Hash32>> children;
    for (const Metrics::BlockProduced& rec : m.blocks) children[rec.parent].insert(rec.id);
    uint64_t forks = 0;
    for (const auto& [parent, kids] : children) {
        if (kids.size() >= 2) ++forks;
    }

    ojson ch;
    ch["head"] = to_hex(chain.head());
    ch["height"] = chain.head_height();
    ch["difficulty_at_head"] = chain.get(chain.head())->header.difficulty;
    ch["next_difficulty"] = chain.expected_difficulty(chain.head());
    ch["blocks_produced"] = m.blocks.size();
    ch["mean_interval_ms"] =
        interval_count ? round3(interval_sum / static_cast<double>(interval_count)) : 0.0;
    ch["mean_winning_tour_len"] =
        len_count ? round3(len_sum / static_cast<double>(len_count)) : 0.0;
    ch["forks"] = forks;
    ch["reorgs"] = m.reorg_depths.size();
    ch["max_reorg_depth"] =
        m.reorg_depths.empty() ? 0u : *std::max_element(m.reorg_depths.begin(), m.reorg_depths.end());
    ch["head_changes"] = m.head_changes;
    ch["invalid_blocks"] = m.invalid_blocks;
    ch["fraud_claims_included"] = claims_included;
    ch["total_minted"] = chain.total_minted();
    doc["chain"] = std::move(ch);

    ojson msgs;
    for (MessageType t : {MessageType::sign_request, MessageType::sign_response,
                          MessageType::block_announce, MessageType::block_request,
                          MessageType::block_response}) {
        auto it = m.sent.find(t);
        msgs[to_string(t)] = it == m.sent.end() ? 0 : it->second;
    }
    msgs["sent_total"] = m.sent_total;
    msgs["delivered"] = m.delivered_total;
    msgs["dropped_to_crashed"] = m.dropped_to_crashed;
    doc["messages"] = std::move(msgs);

    ojson tours;
    tours["started"] = m.tours_started;
    tours["completed"] = m.tours_completed;
    tours["abandoned"] = m.tours_abandoned;
    tours["stalled"] = m.stalled_requests.size();
    doc["tours"] = std::move(tours);

    ojson dets = ojson::array();
    for (const Metrics::Detection& d : m.detections) {
        ojson e;
        e["time_ms"] = round3(static_cast<double>(d.time_us) / 1000.0);
        e["detector"] = d.detector;
        e["accused"] = d.accused;
        e["dependency"] = to_hex(d.d);
        dets.push_back(std::move(e));
    }
    doc["detections"] = std::move(dets);

    if (!config_.crashes.empty()) {
        uint32_t crashed_at_start = 0;
        for (const CrashEvent& c : config_.crashes) {
            if (c.crash_at_us == 0) ++crashed_at_start;
        }
        uint64_t samples = 0;
        uint64_t clean = 0;
        for (const auto& flag : m.first_tour_all_honest) {
            if (flag.has_value()) {
                ++samples;
                if (*flag) ++clean;
            }
        }
        const auto n_s =
            static_cast<uint32_t>(service_set_size(roster_.size()));
        const double p_exact =
            subset_avoids_all(config_.n, crashed_at_start, n_s);
        const double frac_up =
            static_cast<double>(config_.n - crashed_at_start) / config_.n;
        ojson cs;
        cs["crashed_at_start"] = crashed_at_start;
        cs["first_tours_sampled"] = samples;
        cs["first_tours_crash_free"] = clean;
        cs["crash_free_fraction"] =
            samples ? round3(static_cast<double>(clean) / static_cast<double>(samples)) : 0.0;
        cs["crash_free_p_exact"] = p_exact;
        cs["crash_free_p_independent"] = std::pow(frac_up, n_s);
        cs["any_progress_p"] =
            1.0 - std::pow(1.0 - p_exact, static_cast<double>(config_.n - crashed_at_start));
        doc["crash_stats"] = std::move(cs);
    }

    if (config_.adversary != AdversaryKind::none) {
        ojson as;
        if (config_.adversary == AdversaryKind::double_tour) {
            const NodeId& accused_id = roster_[config_.adversary_node];
            std::set<Hash32> attempt_deps;
            for (const Metrics::TourBatch& b : m.batches) attempt_deps.insert(b.d);
            std::set<Hash32> detected_deps;
            for (const Metrics::Detection& d : m.detections) {
                if (d.accused == config_.adversary_node) detected_deps.insert(d.d);
            }
            as["attempts"] = m.batches.size();
            as["distinct_attempt_dependencies"] = attempt_deps.size();
            as["detected_dependencies"] = detected_deps.size();
            as["excluded"] = chain.is_excluded(accused_id);
            const LedgerEntry& e = chain.ledger_entry(accused_id);
            as["stake_slashed"] = config_.chain.initial_stake - e.locked;
        } else if (config_.adversary == AdversaryKind::selfish) {
            const NodeId& adv_id = roster_[config_.adversary_node];
            uint64_t on_head = 0;
            for (const Hash32& id : path) {
                auto it = m.block_index.find(id);
                if (it != m.block_index.end() &&
                    m.blocks[it->second].producer == config_.adversary_node) {
                    ++on_head;
                }
            }
            double delay_sum = 0.0;
            uint64_t delay_count = 0;
            for (const auto& [id, at] : m.first_served_at) {
                auto wit = m.withheld_at.find(id);
                if (wit != m.withheld_at.end()) {
                    delay_sum += static_cast<double>(at - wit->second) / 1000.0;
                    ++delay_count;
                }
            }
            as["node"] = config_.adversary_node;
            as["withheld_blocks"] = m.withheld_at.size();
            as["served_blocks"] = m.first_served_at.size();
            as["withheld_on_head_path"] = on_head;
            as["mean_serve_delay_ms"] =
                delay_count ? round3(delay_sum / static_cast<double>(delay_count)) : 0.0;
            as["balance"] = chain.ledger_entry(adv_id).balance;
        } else if (config_.adversary == AdversaryKind::shared_keys) {
            std::set<uint32_t> colluders(config_.colluders.begin(), config_.colluders.end());
            uint64_t produced = 0;
            uint64_t all_local = 0;
            for (const Metrics::BlockProduced& rec : m.blocks) {
                if (!colluders.count(rec.producer)) continue;
                ++produced;
                auto it = m.tour_request_sends.find({rec.producer, rec.parent, rec.merkle});
                if (it == m.tour_request_sends.end() || it->second == 0) ++all_local;
            }
            uint64_t colluder_balance = 0;
            for (uint32_t c : config_.colluders) {
                colluder_balance += chain.ledger_entry(roster_[c]).balance;
            }
            as["colluders"] = config_.colluders.size();
            as["blocks_produced"] = produced;
            as["all_local_blocks"] = all_local;
            as["colluder_balance"] = colluder_balance;
            as["colluder_minted_share"] =
                chain.total_minted()
                    ? round3(static_cast<double>(colluder_balance) /
                             static_cast<double>(chain.total_minted()))
                    : 0.0;
        }
        doc["adversary_stats"] = std::move(as);
    }

    ojson ledger;
    for (uint32_t i = 0; i < config_.n; ++i) {
        const LedgerEntry& e = chain.ledger_entry(roster_[i]);
        ojson le;
        le["balance"] = e.balance;
        le["locked"] = e.locked;
        le["excluded"] = e.excluded;
        ledger[std::to_string(i)] = std::move(le);
    }
    doc["ledger"] = std::move(ledger);

    ojson produced;
    std::map<uint32_t, uint64_t> by_producer;
    for (const Metrics::BlockProduced& rec : m.blocks) ++by_producer[rec.producer];
    for (const auto& [idx, count] : by_producer) produced[std::to_string(idx)] = count;
    doc["blocks_by_producer"] = std::move(produced);

    return doc.dump(indent) + "\n";
}

std::string Simulation::line_records() const {
    const Metrics& m = metrics_;
    std::string out;
    char buf[256];

    // Merge block and detection records chronologically; ties keep blocks
    // first (a detection can only react to traffic already recorded).
    size_t bi = 0;
    size_t di = 0;
    while (bi < m.blocks.size() || di < m.detections.size()) {
        const bool take_block =
            di >= m.detections.size() ||
            (bi < m.blocks.size() && m.blocks[bi].time_us <= m.detections[di].time_us);
        if (take_block) {
            const Metrics::BlockProduced& b = m.blocks[bi++];
            std::snprintf(buf, sizeof(buf),
                          "block t_ms=%s producer=%u height=%llu difficulty=%u len=%u "
                          "txs=%zu withheld=%d id=%s\n",
                          fmt_ms(b.time_us).c_str(), b.producer,
                          static_cast<unsigned long long>(b.height), b.difficulty, b.tour_len,
                          b.tx_count, b.withheld ? 1 : 0, to_hex(b.id).c_str());
        } else {
            const Metrics::Detection& d = m.detections[di++];
            std::snprintf(buf, sizeof(buf),
                          "detection t_ms=%s detector=%u accused=%u dependency=%s\n",
                          fmt_ms(d.time_us).c_str(), d.detector, d.accused,
                          to_hex(d.d).c_str());
        }
        out += buf;
    }

    std::snprintf(buf, sizeof(buf), "tours started=%llu completed=%llu abandoned=%llu stalled=%zu\n",
                  static_cast<unsigned long long>(m.tours_started),
                  static_cast<unsigned long long>(m.tours_completed),
                  static_cast<unsigned long long>(m.tours_abandoned), m.stalled_requests.size());
    out += buf;
    std::snprintf(buf, sizeof(buf), "messages sent=%llu delivered=%llu dropped=%llu\n",
                  static_cast<unsigned long long>(m.sent_total),
                  static_cast<unsigned long long>(m.delivered_total),
                  static_cast<unsigned long long>(m.dropped_to_crashed));
    out += buf;
    std::snprintf(buf, sizeof(buf), "halt reason=\"%s\" t_ms=%s\n", m.halt_reason.c_str(),
                  fmt_ms(m.end_time_us).c_str());
    out += buf;
    return out;
}

}  // namespace poi
