// poi_sim: run protocol simulations and inspect the artifacts they produce.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "poi/scenario.hpp"
#include "poi/simnet.hpp"

namespace {

poi::Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string& s = buf.str();
    return poi::Bytes(s.begin(), s.end());
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << content;
}

//! Roster file: one 64-hex-digit public key per line; blank lines and
//! #-comments allowed.
poi::Roster load_roster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open roster file: " + path);
    std::vector<poi::NodeId> members;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto end = line.find('#');
        if (end != std::string::npos) line.resize(end);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        try {
            members.push_back(poi::node_id_from_hex(line.substr(start)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (members.empty()) throw std::runtime_error(path + ": roster file has no keys");
    return poi::Roster(std::move(members));
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::optional<uint64_t>& seed, const std::optional<uint32_t>& n,
            const std::optional<double>& com, const std::optional<uint32_t>& mean,
            const std::optional<uint64_t>& blocks, bool quiet) {
    poi::SimConfig cfg;
    if (!scenario_path.empty()) cfg = poi::load_scenario_file(scenario_path);
    if (seed) cfg.seed = *seed;
    if (n) cfg.n = *n;
    if (com) cfg.com_mean_ms = *com;
    if (mean) cfg.chain.initial_mean = *mean;
    if (blocks) cfg.max_blocks = *blocks;
    cfg.validate();

    poi::Simulation sim(cfg);
    sim.run();

    const std::string summary = sim.summary_json();
    const std::string lines = sim.line_records();

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(std::filesystem::path(out_dir) / "summary.json", summary);
        write_file(std::filesystem::path(out_dir) / "metrics.txt", lines);
        write_file(std::filesystem::path(out_dir) / "scenario.json", poi::scenario_to_json(cfg));
    }
    if (!quiet) std::cout << summary;
    return 0;
}

int cmd_verify_proof(const std::string& proof_path, const std::string& roster_path,
                     const std::string& initiator_hex, const std::string& dependency_hex,
                     const std::string& message_hex, uint32_t mean) {
    const poi::Roster roster = load_roster(roster_path);
    const poi::Proof proof = poi::Proof::deserialize(poi::as_span(read_file(proof_path)));
    const poi::NodeId initiator = poi::node_id_from_hex(initiator_hex);
    const poi::Hash32 d = poi::hash_from_hex(dependency_hex);
    const poi::Hash32 m = poi::hash_from_hex(message_hex);

    auto scheme = poi::make_scheme(poi::CryptoScheme::ed25519);
    const poi::CheckReport report =
        poi::check_poi_detailed(*scheme, proof, initiator, d, m, poi::Difficulty{mean}, roster);
    if (report.valid) {
        std::cout << "valid, L=" << report.expected_len << "\n";
        return 0;
    }
    std::cout << "invalid: " << poi::to_string(report.failure);
    if (report.failure == poi::CheckFailure::visited_signature ||
        report.failure == poi::CheckFailure::counter_signature) {
        std::cout << " at signature index " << report.failing_index;
    }
    if (report.failure == poi::CheckFailure::length) {
        std::cout << " (expected " << (2 * report.expected_len + 1) << " signatures, found "
                  << proof.signatures.size() << ")";
    }
    std::cout << "\n";
    return 1;
}

int cmd_inspect_block(const std::string& block_path, const std::string& roster_path,
                      uint32_t mean) {
    const poi::Block block = poi::Block::deserialize(poi::as_span(read_file(block_path)));
    const poi::BlockHeader& h = block.header;
    std::cout << "id          " << poi::to_hex(block.id()) << "\n"
              << "version     " << h.version << "\n"
              << "time_ms     " << h.time << "\n"
              << "difficulty  " << h.difficulty << "\n"
              << "extra       " << h.extra << "\n"
              << "prev        " << poi::to_hex(h.prev_hash) << "\n"
              << "merkle      " << poi::to_hex(h.merkle_root) << "\n"
              << "proof_hash  " << poi::to_hex(h.proof_hash) << "\n"
              << "txs         " << block.transactions.size() << "\n"
              << "signatures  " << block.proof.signatures.size() << "\n";

    size_t claims = 0;
    for (const poi::Transaction& tx : block.transactions) {
        if (tx.is_fraud_claim()) ++claims;
    }
    std::cout << "fraud_claims " << claims << "\n";

    if (roster_path.empty()) return 0;

    const poi::Roster roster = load_roster(roster_path);
    auto scheme = poi::make_scheme(poi::CryptoScheme::ed25519);
    const auto producer = poi::recover_producer(*scheme, block, roster);
    if (!producer) {
        std::cout << "producer    (not recoverable from roster)\n"
                  << "proof       invalid: initial_signature\n";
        return 1;
    }
    std::cout << "producer    " << producer->hex() << "\n";
    const poi::CheckReport report =
        poi::check_poi_detailed(*scheme, block.proof, *producer, h.prev_hash, h.merkle_root,
                                poi::Difficulty{mean ? mean : h.difficulty}, roster);
    if (report.valid) {
        std::cout << "proof       valid, L=" << report.expected_len << "\n";
        return 0;
    }
    std::cout << "proof       invalid: " << poi::to_string(report.failure) << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proof-of-interaction consensus simulator"};
    app.require_subcommand(1);

    // run
    std::string scenario_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::optional<uint32_t> n;
    std::optional<double> com;
    std::optional<uint32_t> mean;
    std::optional<uint64_t> blocks;
    bool quiet = false;
    CLI::App* run = app.add_subcommand("run", "run a simulation scenario");
    run->add_option("scenario", scenario_path, "scenario JSON file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "directory for summary.json and metrics.txt");
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--n", n, "override the network size");
    run->add_option("--com", com, "override mean one-way latency, ms");
    run->add_option("--difficulty-mean", mean, "override the initial difficulty mean");
    run->add_option("--blocks", blocks, "halt once any node's head reaches this height");
    run->add_flag("--quiet", quiet, "suppress the summary on stdout");

    // verify-proof
    std::string proof_path, roster_path, initiator_hex, dependency_hex, message_hex;
    uint32_t verify_mean = 1;
    CLI::App* verify = app.add_subcommand("verify-proof", "check a serialized tour proof");
    verify->add_option("proof", proof_path, "proof file")->required()->check(CLI::ExistingFile);
    verify->add_option("--roster", roster_path, "roster file, one hex public key per line")
        ->required();
    verify->add_option("--initiator", initiator_hex, "initiator public key, hex")->required();
    verify->add_option("--dependency", dependency_hex, "dependency digest d, hex")->required();
    verify->add_option("--message", message_hex, "message digest m, hex")->required();
    verify->add_option("--mean", verify_mean, "difficulty mean in force")->required();

    // inspect-block
    std::string block_path, inspect_roster;
    uint32_t inspect_mean = 0;
    CLI::App* inspect = app.add_subcommand("inspect-block", "print a block file's contents");
    inspect->add_option("block", block_path, "block file")->required()->check(CLI::ExistingFile);
    inspect->add_option("--roster", inspect_roster,
                        "roster file; when given, also verify the block's proof");
    inspect->add_option("--mean", inspect_mean,
                        "difficulty mean for proof verification (default: header value)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(scenario_path, out_dir, seed, n, com, mean, blocks, quiet);
        }
        if (verify->parsed()) {
            return cmd_verify_proof(proof_path, roster_path, initiator_hex, dependency_hex,
                                    message_hex, verify_mean);
        }
        if (inspect->parsed()) {
            return cmd_inspect_block(block_path, inspect_roster, inspect_mean);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
