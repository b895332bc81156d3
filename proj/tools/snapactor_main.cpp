// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
//
// Command-line harness: benchmark runs with snapshot policies, the latency
// workload, snapshot inspection, restore-and-continue, and round-trip
// verification.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "snapactor/bench/benchmarks.hpp"
#include "snapactor/bench/latency.hpp"
#include "snapactor/bench/verify.hpp"
#include "snapactor/snapactor.hpp"

namespace fs = std::filesystem;
using namespace snapactor;

namespace {

// "every-k:M" / "every-n:M" / "every-ms:M" / "none" / "explicit"
bool parse_policy(const std::string& text, bench::snapshot_policy& policy, std::uint64_t& k) {
    if (text.empty() || text == "none") {
        policy = bench::snapshot_policy::none;
        return true;
    }
    if (text == "explicit") {
        policy = bench::snapshot_policy::explicit_only;
        return true;
    }
    auto colon = text.find(':');
    if (colon == std::string::npos)
        return false;
    std::string head = text.substr(0, colon);
    k = std::stoull(text.substr(colon + 1));
    if (head == "every-ms") {
        policy = bench::snapshot_policy::timer;
        return k >= 1;
    }
    if (head != "every-k" && head != "every-n")
        return false;
    policy = bench::snapshot_policy::every_k_iterations;
    return k >= 1;
}

int cmd_bench_run(const std::string& name, std::uint64_t iters, std::uint64_t warmup,
                  unsigned workers, bool det, std::uint64_t seed, std::uint64_t size,
                  const std::string& policy_text, const std::string& placement,
                  const std::string& out_dir) {
    bench::bench_config cfg;
    cfg.name = name;
    cfg.iterations = iters;
    if (warmup != static_cast<std::uint64_t>(-1))
        cfg.warmup_discard = warmup;
    cfg.workers = workers;
    cfg.deterministic = det;
    cfg.seed = seed;
    cfg.size = size;
    std::uint64_t policy_arg = cfg.every_k;
    if (!parse_policy(policy_text, cfg.policy, policy_arg)) {
        std::cerr << "bad --snapshot value '" << policy_text << "'\n";
        return 2;
    }
    if (cfg.policy == bench::snapshot_policy::timer)
        cfg.timer_ms = policy_arg;
    else
        cfg.every_k = policy_arg;
    cfg.placement = placement == "during" ? bench::trigger_placement::during_burst
                                          : bench::trigger_placement::before_burst;
    cfg.out_dir = out_dir;
    fs::create_directories(cfg.out_dir);

    bench::bench_result result = bench::run_benchmark(cfg);
    result.to_csv().write((cfg.out_dir / (name + ".csv")).string());
    bench::summary_writer summary = bench::summarize(cfg, result);
    summary.write((cfg.out_dir / (name + ".summary")).string());
    std::cout << summary.to_string();
    return result.self_check_ok ? 0 : 1;
}

int cmd_bench_latency(std::uint64_t requests, unsigned workers, std::uint64_t seed,
                      std::uint64_t flights, std::uint64_t think_us,
                      const std::string& policy_text, const std::string& out_dir) {
    bench::latency_config cfg;
    cfg.requests = requests;
    cfg.workers = workers;
    cfg.seed = seed;
    cfg.flights = flights;
    cfg.think_us = think_us;
    bench::snapshot_policy policy = bench::snapshot_policy::none;
    std::uint64_t n = 0;
    if (!parse_policy(policy_text, policy, n)) {
        std::cerr << "bad --snapshot value '" << policy_text << "'\n";
        return 2;
    }
    cfg.snapshot_every_n = policy == bench::snapshot_policy::every_k_iterations ? n : 0;
    cfg.out_dir = out_dir;
    fs::create_directories(cfg.out_dir);

    bench::latency_result result = bench::run_latency_workload(cfg);
    bench::latency_csv(result).write((cfg.out_dir / "latency.csv").string());
    bench::summary_writer summary = bench::latency_summary(cfg, result);
    summary.write((cfg.out_dir / "latency.summary").string());
    std::cout << summary.to_string();
    return 0;
}

int cmd_snapshot_dump(const std::string& file) {
    parsed_snapshot snap = read_snapshot(file);
    dump_snapshot(snap, std::cout);
    validation_report report = validate_snapshot(snap);
    std::cout << "validation: " << (report.ok() ? "ok" : "DEFECTS") << " ("
              << report.records_walked << " records walked)\n";
    for (const auto& d : report.defects)
        std::cout << "  defect @" << d.offset << ": " << d.what << "\n";
    return report.ok() ? 0 : 1;
}

int cmd_restore(const std::string& file, const std::string& program, bool cont,
                unsigned workers, bool det) {
    system_config sc;
    sc.workers = workers;
    sc.deterministic = det;
    actor_system sys(sc);
    if (program == "latency") {
        bench::install_latency_service(sys);
    } else if (!program.empty()) {
        bench::find_benchmark(program).install(sys, std::make_shared<bench::bench_shared>());
    }
    load_snapshot(sys, file);
    std::cout << "restored " << sys.actor_count() << " actors from " << file << "\n";
    if (!cont)
        return 0;
    sys.start();
    sys.await_idle(std::chrono::minutes(5));
    sys.stop();
    std::cout << "resumed and ran to quiescence: " << sys.turns_processed() << " turns\n";
    if (!program.empty() && program != "latency") {
        value observed = bench::find_benchmark(program).observe(sys);
        if (observed.kind() == value_kind::integer)
            std::cout << "observable=" << observed.as_int() << "\n";
        else if (observed.kind() == value_kind::real)
            std::cout << "observable=" << observed.as_real() << "\n";
    }
    return 0;
}

int cmd_verify(std::uint64_t seed, const std::string& program, std::uint64_t runs,
               std::uint64_t size) {
    std::vector<std::string> names;
    if (!program.empty()) {
        names.push_back(program);
    } else {
        for (const auto& [name, b] : bench::benchmark_registry())
            names.push_back(name);
    }
    std::uint64_t failures = 0;
    for (const auto& name : names) {
        for (std::uint64_t r = 0; r < runs; ++r) {
            bench::verify_outcome out = bench::verify_roundtrip(name, seed + r, size);
            std::cout << (out.pass ? "PASS" : "FAIL") << " " << name << " seed=" << out.seed
                      << " trigger_turn=" << out.trigger_turn
                      << " snapshot_bytes=" << out.snapshot_bytes;
            if (!out.pass)
                std::cout << " detail=" << out.detail;
            std::cout << "\n";
            if (!out.pass)
                ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"communicating-event-loop actor runtime with asynchronous snapshots"};
    app.require_subcommand(1);

    // bench run / bench latency
    auto* bench_cmd = app.add_subcommand("bench", "benchmark harness");
    bench_cmd->require_subcommand(1);

    std::string name;
    std::uint64_t iters = 10;
    std::uint64_t warmup = static_cast<std::uint64_t>(-1);
    unsigned workers = 2;
    bool det = false;
    std::uint64_t seed = 1;
    std::uint64_t size = 0;
    std::string policy = "none";
    std::string placement = "before";
    std::string out_dir = "bench-out";

    auto* run = bench_cmd->add_subcommand("run", "run a named benchmark");
    run->add_option("--name", name, "benchmark name")->required();
    run->add_option("--iters", iters, "iterations");
    run->add_option("--warmup-discard", warmup, "iterations to discard (default 10%)");
    run->add_option("--workers", workers, "worker threads");
    run->add_flag("--det", det, "deterministic single-worker scheduler");
    run->add_option("--seed", seed, "seed");
    run->add_option("--size", size, "per-iteration size (0: default)");
    run->add_option("--snapshot", policy, "none | explicit | every-k:M | every-ms:M");
    run->add_option("--trigger-placement", placement, "before | during (message burst)");
    run->add_option("--out", out_dir, "output directory");

    std::uint64_t requests = 100000;
    std::uint64_t flights = 500;
    std::uint64_t think_us = 0;
    std::string lat_policy = "none";
    std::string lat_out = "latency-out";
    unsigned lat_workers = 2;
    std::uint64_t lat_seed = 1;

    auto* lat = bench_cmd->add_subcommand("latency", "request/response latency workload");
    lat->add_option("--requests", requests, "request count");
    lat->add_option("--workers", lat_workers, "worker threads");
    lat->add_option("--seed", lat_seed, "seed");
    lat->add_option("--flights", flights, "cache size");
    lat->add_option("--think-us", think_us, "generator think time");
    lat->add_option("--snapshot", lat_policy, "none | every-n:M");
    lat->add_option("--out", lat_out, "output directory");

    // snapshot dump
    std::string dump_file;
    auto* snap_cmd = app.add_subcommand("snapshot", "snapshot file tools");
    auto* dump = snap_cmd->add_subcommand("dump", "print a readable walk of a snapshot");
    dump->add_option("file", dump_file, "snapshot file")->required();

    // restore
    std::string restore_file;
    std::string restore_program;
    bool restore_continue = false;
    unsigned restore_workers = 2;
    bool restore_det = false;
    auto* restore_cmd = app.add_subcommand("restore", "load a snapshot and resume");
    restore_cmd->add_option("file", restore_file, "snapshot file")->required();
    restore_cmd->add_option("--program", restore_program,
                            "behavior set to register before loading (benchmark name or "
                            "'latency')");
    restore_cmd->add_flag("--continue", restore_continue, "resume and run to quiescence");
    restore_cmd->add_option("--workers", restore_workers, "worker threads");
    restore_cmd->add_flag("--det", restore_det, "deterministic scheduler");

    // verify
    std::uint64_t verify_seed = 1;
    std::string verify_program;
    std::uint64_t verify_runs = 1;
    std::uint64_t verify_size = 0;
    auto* verify_cmd =
        app.add_subcommand("verify", "snapshot/restore round-trip check for the benchmarks");
    verify_cmd->add_option("--seed", verify_seed, "base seed");
    verify_cmd->add_option("--program", verify_program, "single benchmark (default: all)");
    verify_cmd->add_option("--runs", verify_runs, "seeds per benchmark");
    verify_cmd->add_option("--size", verify_size, "benchmark size override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_bench_run(name, iters, warmup, workers, det, seed, size, policy,
                                 placement, out_dir);
        if (lat->parsed())
            return cmd_bench_latency(requests, lat_workers, lat_seed, flights, think_us,
                                     lat_policy, lat_out);
        if (dump->parsed())
            return cmd_snapshot_dump(dump_file);
        if (restore_cmd->parsed())
            return cmd_restore(restore_file, restore_program, restore_continue, restore_workers,
                               restore_det);
        if (verify_cmd->parsed())
            return cmd_verify(verify_seed, verify_program, verify_runs, verify_size);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
