#include "poi/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace poi {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

uint64_t get_uint(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer() && v.get<int64_t>() >= 0) return v.get<uint64_t>();
    fail("scenario key \"" + key + "\": expected a non-negative integer");
}

double get_ms(const json& v, const std::string& key) {
    if (!v.is_number()) fail("scenario key \"" + key + "\": expected a number");
    return v.get<double>();
}

bool get_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) fail("scenario key \"" + key + "\": expected a boolean");
    return v.get<bool>();
}

uint64_t ms_to_us(double ms, const std::string& key) {
    if (!(ms >= 0) || !std::isfinite(ms)) fail("scenario key \"" + key + "\": expected >= 0");
    return static_cast<uint64_t>(std::llround(ms * 1000.0));
}

CrashEvent parse_crash(const json& v) {
    if (!v.is_object()) fail("scenario key \"crashes\": expected an array of objects");
    CrashEvent ev;
    for (const auto& [key, val] : v.items()) {
        if (key == "node") {
            ev.node = static_cast<uint32_t>(get_uint(val, "crashes.node"));
        } else if (key == "crash_at_ms") {
            ev.crash_at_us = ms_to_us(get_ms(val, key), key);
        } else if (key == "reboot_at_ms") {
            if (val.is_null()) continue;
            ev.reboot_at_us = ms_to_us(get_ms(val, key), key);
        } else {
            fail("unknown scenario key \"crashes." + key + "\"");
        }
    }
    return ev;
}

void parse_adversary(const json& v, SimConfig& cfg) {
    if (!v.is_object()) fail("scenario key \"adversary\": expected an object");
    for (const auto& [key, val] : v.items()) {
        if (key == "kind") {
            if (!val.is_string()) fail("scenario key \"adversary.kind\": expected a string");
            const std::string kind = val.get<std::string>();
            if (kind == "none") {
                cfg.adversary = AdversaryKind::none;
            } else if (kind == "double_tour") {
                cfg.adversary = AdversaryKind::double_tour;
            } else if (kind == "selfish") {
                cfg.adversary = AdversaryKind::selfish;
            } else if (kind == "shared_keys") {
                cfg.adversary = AdversaryKind::shared_keys;
            } else {
                fail("scenario key \"adversary.kind\": unknown kind \"" + kind + "\"");
            }
        } else if (key == "node") {
            cfg.adversary_node = static_cast<uint32_t>(get_uint(val, "adversary.node"));
        } else if (key == "tour_count") {
            cfg.double_tour_count = static_cast<uint32_t>(get_uint(val, "adversary.tour_count"));
        } else if (key == "serve_requests") {
            cfg.selfish_serve_requests = get_bool(val, "adversary.serve_requests");
        } else if (key == "colluders") {
            if (!val.is_array()) fail("scenario key \"adversary.colluders\": expected an array");
            cfg.colluders.clear();
            for (const json& c : val) {
                cfg.colluders.push_back(
                    static_cast<uint32_t>(get_uint(c, "adversary.colluders")));
            }
        } else {
            fail("unknown scenario key \"adversary." + key + "\"");
        }
    }
}

}  // namespace

SimConfig scenario_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail("scenario must be a JSON object");

    SimConfig cfg;
    for (const auto& [key, val] : doc.items()) {
        if (key == "n") {
            cfg.n = static_cast<uint32_t>(get_uint(val, key));
        } else if (key == "seed") {
            cfg.seed = get_uint(val, key);
        } else if (key == "scheme") {
            if (!val.is_string()) fail("scenario key \"scheme\": expected a string");
            auto scheme = crypto_scheme_from_string(val.get<std::string>());
            if (!scheme) {
                fail("scenario key \"scheme\": unknown scheme \"" + val.get<std::string>() + "\"");
            }
            cfg.scheme = *scheme;
        } else if (key == "com_mean_ms") {
            cfg.com_mean_ms = get_ms(val, key);
        } else if (key == "com_jitter") {
            cfg.com_jitter = get_ms(val, key);
        } else if (key == "delta_max_ms") {
            cfg.delta_max_ms = get_ms(val, key);
        } else if (key == "initial_difficulty_mean") {
            cfg.chain.initial_mean = static_cast<uint32_t>(get_uint(val, key));
        } else if (key == "retarget_period") {
            cfg.chain.retarget_period = static_cast<uint32_t>(get_uint(val, key));
        } else if (key == "target_block_interval_ms") {
            cfg.chain.target_interval_ms = get_uint(val, key);
        } else if (key == "block_reward") {
            cfg.chain.block_reward = get_uint(val, key);
        } else if (key == "initial_stake") {
            cfg.chain.initial_stake = get_uint(val, key);
        } else if (key == "max_time_ms") {
            cfg.max_time_ms = get_uint(val, key);
        } else if (key == "max_blocks") {
            cfg.max_blocks = get_uint(val, key);
        } else if (key == "halt_on_first_slash") {
            cfg.halt_on_first_slash = get_bool(val, key);
        } else if (key == "honest_initiate") {
            cfg.honest_initiate = get_bool(val, key);
        } else if (key == "crashes") {
            if (!val.is_array()) fail("scenario key \"crashes\": expected an array");
            for (const json& c : val) cfg.crashes.push_back(parse_crash(c));
        } else if (key == "adversary") {
            parse_adversary(val, cfg);
        } else {
            fail("unknown scenario key \"" + key + "\"");
        }
    }
    cfg.validate();
    return cfg;
}

SimConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return scenario_from_json(buf.str());
    } catch (const std::exception& e) {
        fail(path + ": " + e.what());
    }
}

std::string scenario_to_json(const SimConfig& config, int indent) {
    nlohmann::ordered_json doc;
    doc["n"] = config.n;
    doc["seed"] = config.seed;
    doc["scheme"] = to_string(config.scheme);
    doc["com_mean_ms"] = config.com_mean_ms;
    doc["com_jitter"] = config.com_jitter;
    doc["delta_max_ms"] = config.delta_max_ms;
    doc["initial_difficulty_mean"] = config.chain.initial_mean;
    doc["retarget_period"] = config.chain.retarget_period;
    doc["target_block_interval_ms"] = config.chain.target_interval_ms;
    doc["block_reward"] = config.chain.block_reward;
    doc["initial_stake"] = config.chain.initial_stake;
    doc["max_time_ms"] = config.max_time_ms;
    doc["max_blocks"] = config.max_blocks;
    doc["halt_on_first_slash"] = config.halt_on_first_slash;
    doc["honest_initiate"] = config.honest_initiate;
    nlohmann::ordered_json crashes = nlohmann::ordered_json::array();
    for (const CrashEvent& c : config.crashes) {
        nlohmann::ordered_json e;
        e["node"] = c.node;
        e["crash_at_ms"] = static_cast<double>(c.crash_at_us) / 1000.0;
        if (c.reboot_at_us) {
            e["reboot_at_ms"] = static_cast<double>(*c.reboot_at_us) / 1000.0;
        } else {
            e["reboot_at_ms"] = nullptr;
        }
        crashes.push_back(std::move(e));
    }
    doc["crashes"] = std::move(crashes);
    nlohmann::ordered_json adv;
    adv["kind"] = to_string(config.adversary);
    switch (config.adversary) {
        case AdversaryKind::double_tour:
            adv["node"] = config.adversary_node;
            adv["tour_count"] = config.double_tour_count;
            break;
        case AdversaryKind::selfish:
            adv["node"] = config.adversary_node;
            adv["serve_requests"] = config.selfish_serve_requests;
            break;
        case AdversaryKind::shared_keys:
            adv["colluders"] = config.colluders;
            break;
        case AdversaryKind::none:
            break;
    }
    doc["adversary"] = std::move(adv);
    return doc.dump(indent) + "\n";
}

}  // namespace poi
