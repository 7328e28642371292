#pragma once

#include <tuple>

#include "poi/node.hpp"

namespace poi {

enum class AdversaryKind { none, double_tour, selfish, shared_keys };

const char* to_string(AdversaryKind k);

struct CrashEvent {
    uint32_t node = 0;
    uint64_t crash_at_us = 0;
    std::optional<uint64_t> reboot_at_us;
};

struct SimConfig {
    uint32_t n = 10;
    uint64_t seed = 1;
    CryptoScheme scheme = CryptoScheme::transparent;

    double com_mean_ms = 10.0;   // Com: mean one-way latency
    double com_jitter = 0.0;     // lognormal sigma; 0 means fixed latency
    double delta_max_ms = 100.0; // hard delivery bound, samples truncated here

    ChainParams chain;

    uint64_t max_time_ms = 10'000;  // halt when virtual time passes this
    uint64_t max_blocks = 0;        // halt when any head reaches this height (0 = off)
    bool halt_on_first_slash = false;
    bool honest_initiate = true;

    std::vector<CrashEvent> crashes;

    AdversaryKind adversary = AdversaryKind::none;
    uint32_t adversary_node = 1;      // roster index running the strategy
    uint32_t double_tour_count = 2;   // parallel tours for the double-tour strategy
    std::vector<uint32_t> colluders;  // roster indices for shared-keys
    bool selfish_serve_requests = true;

    //! Throws std::invalid_argument naming the offending field.
    void validate() const;
};

//! Everything the simulator observes during a run. Append-only; derived
//! figures (intervals, shares, fits) are computed from these at the end.
struct Metrics {
    struct BlockProduced {
        uint64_t time_us = 0;
        uint32_t producer = 0;  // roster index
        Hash32 id;
        Hash32 parent;
        Hash32 merkle;
        uint64_t height = 0;
        uint32_t tour_len = 0;
        uint32_t difficulty = 0;
        size_t tx_count = 0;
        bool withheld = false;
        std::vector<uint32_t> visits;  // realized tour, roster indices, repeats kept
    };
    struct Detection {
        uint64_t time_us = 0;
        uint32_t detector = 0;
        uint32_t accused = 0;
        Hash32 d;
    };
    struct TourBatch {  // one multi-tour attempt by the double-tour strategy
        uint32_t initiator = 0;
        Hash32 d;
        std::vector<Hash32> messages;
    };
    struct TourStart {
        uint64_t time_us = 0;
        uint32_t initiator = 0;
        Hash32 d;
        Hash32 m;
        uint32_t target_len = 0;
        std::vector<uint32_t> services;  // roster indices, shuffle order
    };
    //! Key identifying one logical tour on the wire.
    using TourKey = std::tuple<uint32_t, Hash32, Hash32>;  // initiator, d, m

    std::map<MessageType, uint64_t> sent;
    uint64_t sent_total = 0;
    uint64_t delivered_total = 0;
    uint64_t dropped_to_crashed = 0;

    std::vector<BlockProduced> blocks;
    std::map<Hash32, size_t> block_index;  // block id -> index into blocks

    uint64_t head_changes = 0;
    std::vector<uint32_t> reorg_depths;
    uint64_t invalid_blocks = 0;

    uint64_t tours_started = 0;
    uint64_t tours_completed = 0;
    uint64_t tours_abandoned = 0;
    std::vector<TourStart> tour_starts;

    std::vector<Detection> detections;
    std::vector<TourBatch> batches;

    //! Network sign-request sends per logical tour.
    std::map<TourKey, uint64_t> tour_request_sends;
    //! Honest receivers that got a request for this tour while its d was
    //! still a longest-branch tip for them (i.e. the request was actionable).
    std::map<TourKey, std::set<uint32_t>> live_targets;

    //! Tours that addressed a node which was crashed at send time.
    std::set<std::pair<uint32_t, Hash32>> stalled_requests;

    //! Per node: whether its first tour's service set avoided every node
    //! crashed at that moment (unset if the node never started a tour).
    std::vector<std::optional<bool>> first_tour_all_honest;

    std::map<Hash32, uint64_t> withheld_at;     // withheld block id -> production time
    std::map<Hash32, uint64_t> first_served_at; // withheld block id -> first serve time

    uint64_t end_time_us = 0;
    std::string halt_reason;
};

//! Deterministic discrete-event run of the full protocol. Everything —
//! latencies, keys, event order — is a pure function of the config.
class Simulation {
public:
    explicit Simulation(SimConfig config);
    Simulation(Simulation&&) noexcept = default;
    ~Simulation();

    //! Execute until a halt condition; callable once.
    void run();

    const SimConfig& config() const { return config_; }
    const Metrics& metrics() const { return metrics_; }
    const Roster& roster() const { return roster_; }
    const SignatureScheme& scheme() const { return *scheme_; }
    size_t node_count() const { return participants_.size(); }
    Participant& node(size_t i) { return *participants_[i]; }
    const Participant& node(size_t i) const { return *participants_[i]; }
    uint32_t index_of(const NodeId& id) const;
    bool crashed(size_t i) const { return !up_[i]; }

    //! Lowest-index node running the plain honest strategy (metrics reference
    //! point for chain-level statistics).
    size_t reference_node() const;

    //! Ordered JSON document with config echo, counters, and derived stats.
    std::string summary_json(int indent = 2) const;
    //! One line per produced block plus trailing counter lines.
    std::string line_records() const;

private:
    struct Deliver {
        uint32_t from;
        uint32_t to;
        Message msg;
    };
    struct TimerEv {
        uint32_t node;
        uint64_t tag;
        uint64_t epoch;
    };
    struct CrashEv {
        uint32_t node;
    };
    struct RebootEv {
        uint32_t node;
    };
    struct StartEv {
        uint32_t node;
    };
    using EventBody = std::variant<Deliver, TimerEv, CrashEv, RebootEv, StartEv>;

    void schedule(uint64_t at_us, EventBody body);
    void process_actions(uint32_t from, uint64_t now_us, Actions actions);
    void record_event(uint32_t from, uint64_t now_us, const LogEvent& ev);
    void deliver(uint64_t now_us, const Deliver& d);
    uint64_t sample_latency_us();
    bool halted() const { return !halt_why_.empty(); }
    void check_halt(uint64_t now_us);

    SimConfig config_;
    std::unique_ptr<SignatureScheme> scheme_;
    Roster roster_;
    std::vector<std::unique_ptr<Participant>> participants_;
    std::vector<bool> up_;
    std::vector<uint64_t> epoch_;
    std::set<uint32_t> crashed_now_;

    std::map<std::pair<uint64_t, uint64_t>, EventBody> queue_;
    uint64_t seq_ = 0;
    uint64_t now_us_ = 0;
    SeededRng latency_rng_;
    Metrics metrics_;
    std::string halt_why_;
    bool ran_ = false;
};

}  // namespace poi
