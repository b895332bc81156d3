// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "snapactor/bench/report.hpp"
#include "snapactor/capture.hpp"
#include "snapactor/runtime.hpp"

namespace snapactor::bench {

// In-process request/response workload: a seeded generator drives a small
// three-actor service (session front, lookup with a preloaded flight cache,
// booking ledger) with a fixed request mix, measuring per-request latency
// while snapshots are taken every N requests.

enum class request_type : std::uint8_t { query = 0, book = 1, profile = 2 };

inline const char* request_type_name(request_type t) {
    switch (t) {
    case request_type::query: return "query";
    case request_type::book: return "book";
    case request_type::profile: return "profile";
    }
    return "?";
}

struct latency_record {
    std::uint64_t request_id = 0;
    request_type type = request_type::query;
    std::int64_t enqueue_us = 0;
    std::int64_t response_us = 0;
    std::int64_t latency_us = 0;
    bool snapshot_active = false;
};

struct latency_config {
    std::uint64_t requests = 100000;
    unsigned workers = 2;
    std::uint64_t seed = 1;
    std::uint64_t flights = 500;
    std::uint64_t snapshot_every_n = 0; // 0: no snapshots
    std::uint64_t think_us = 0;
    std::filesystem::path out_dir;
};

struct windowed_counts {
    std::int64_t window_us = 100000;
    std::vector<std::uint64_t> per_window;
    std::uint64_t min_count = 0;
};

struct latency_result {
    std::vector<latency_record> records; // completion order
    std::vector<snapshot_report> snapshots;
    std::map<request_type, std::uint64_t> count_by_type;
    std::map<request_type, double> mean_by_type;
    std::uint64_t over_100ms = 0;
    std::uint64_t over_200ms = 0;
    std::int64_t max_latency_us = 0;
    windowed_counts responses_per_window;
    /// one entry per snapshot: true when every full 100 ms window between
    /// trigger and capture completion saw at least one application turn
    std::vector<bool> snapshot_windows_ok;
    std::int64_t booking_total = 0;
    std::vector<std::int64_t> booking_per_flight;

    double share_over_100ms() const {
        return records.empty() ? 0.0
                               : static_cast<double>(over_100ms) /
                                     static_cast<double>(records.size());
    }
};

inline void install_latency_service(actor_system& sys) {
    sys.add_behavior("Flight", 3, {}); // id, views, booked
    sys.add_behavior(
        "Lookup", 2, // flights array, booking far
        {{"init",
          [](turn_context& ctx, std::span<const value> args) {
              std::int64_t n = args[0].as_int();
              std::vector<value> flights;
              flights.reserve(static_cast<std::size_t>(n));
              for (std::int64_t i = 0; i < n; ++i)
                  flights.push_back(ctx.make_object(
                      "Flight",
                      {value::integer(i), value::integer(0), value::integer(0)}));
              ctx.set(ctx.root(), 0, ctx.make_array(std::move(flights)));
              ctx.set(ctx.root(), 1, args[1]);
              return value::null();
          }},
         {"lookup",
          [](turn_context& ctx, std::span<const value> args) {
              value flights = ctx.get(ctx.root(), 0);
              value flight = ctx.get(flights, static_cast<std::size_t>(args[0].as_int()));
              ctx.set(flight, 1, value::integer(ctx.get(flight, 1).as_int() + 1));
              return flight;
          }},
         {"reserve", [](turn_context& ctx, std::span<const value> args) {
              value flights = ctx.get(ctx.root(), 0);
              value flight = ctx.get(flights, static_cast<std::size_t>(args[0].as_int()));
              ctx.set(flight, 2, value::integer(ctx.get(flight, 2).as_int() + 1));
              ctx.tell(ctx.get(ctx.root(), 1), "record", {args[0]});
              return args[0];
          }}});
    sys.add_behavior(
        "Booking", 2, // total, per-flight array
        {{"init",
          [](turn_context& ctx, std::span<const value> args) {
              std::int64_t n = args[0].as_int();
              ctx.set(ctx.root(), 1,
                      ctx.make_array(std::vector<value>(static_cast<std::size_t>(n),
                                                        value::integer(0))));
              return value::null();
          }},
         {"record", [](turn_context& ctx, std::span<const value> args) {
              value root = ctx.root();
              ctx.set(root, 0, value::integer(ctx.get(root, 0).as_int() + 1));
              value per = ctx.get(root, 1);
              std::size_t fid = static_cast<std::size_t>(args[0].as_int());
              ctx.set(per, fid, value::integer(ctx.get(per, fid).as_int() + 1));
              return value::null();
          }}});
    sys.add_behavior(
        "Session", 3, // lookup far, booking far, handled
        {{"init",
          [](turn_context& ctx, std::span<const value> args) {
              ctx.set(ctx.root(), 0, args[0]);
              ctx.set(ctx.root(), 1, args[1]);
              return value::null();
          }},
         {"query",
          [](turn_context& ctx, std::span<const value> args) {
              value root = ctx.root();
              ctx.set(root, 2, value::integer(ctx.get(root, 2).as_int() + 1));
              return ctx.send(ctx.get(root, 0), "lookup", {args[0]});
          }},
         {"book",
          [](turn_context& ctx, std::span<const value> args) {
              value root = ctx.root();
              ctx.set(root, 2, value::integer(ctx.get(root, 2).as_int() + 1));
              return ctx.send(ctx.get(root, 0), "reserve", {args[0]});
          }},
         {"profile", [](turn_context& ctx, std::span<const value>) {
              value root = ctx.root();
              std::int64_t handled = ctx.get(root, 2).as_int() + 1;
              ctx.set(root, 2, value::integer(handled));
              return value::integer(handled);
          }}});
}

/// Spawns session (actor 1), lookup (2) and booking (3); returns the session
/// far reference. Queues the cache preload; it runs on start.
inline value setup_latency_service(actor_system& sys, std::uint64_t flights) {
    value session = sys.spawn("Session", {value::null(), value::null(), value::integer(0)});
    value lookup = sys.spawn("Lookup", {value::null(), value::null()});
    value booking = sys.spawn("Booking", {value::integer(0), value::null()});
    sys.tell(booking, "init", {value::integer(static_cast<std::int64_t>(flights))});
    sys.tell(lookup, "init", {value::integer(static_cast<std::int64_t>(flights)), booking});
    sys.tell(session, "init", {lookup, booking});
    return session;
}

namespace detail {
inline std::int64_t lat_now_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline request_type pick_type(std::uint64_t r) {
    std::uint64_t m = r % 10;
    if (m < 5)
        return request_type::query;
    if (m < 8)
        return request_type::profile;
    return request_type::book;
}
} // namespace detail

struct ledger_snapshot {
    std::int64_t total = 0;
    std::vector<std::int64_t> per_flight;

    friend bool operator==(const ledger_snapshot&, const ledger_snapshot&) = default;
};

/// Booking totals, readable once the system is stopped.
inline ledger_snapshot read_ledger(actor_system& sys, std::uint64_t flights) {
    ledger_snapshot out;
    value root = sys.roots_of(3).front();
    out.total = sys.get_field(3, root, 0).as_int();
    value per = sys.get_field(3, root, 1);
    for (std::uint64_t i = 0; i < flights; ++i)
        out.per_flight.push_back(sys.get_field(3, per, i).as_int());
    return out;
}

/// Drives `sys` with requests [first, last) of the seeded sequence. Snapshot
/// triggering (when configured) happens on the driving thread every
/// `snapshot_every_n` requests. Returns when every response has arrived.
inline void drive_requests(actor_system& sys, const value& session, const latency_config& cfg,
                           std::uint64_t first, std::uint64_t last,
                           std::vector<latency_record>& records,
                           std::vector<snapshot_report>& snapshots) {
    std::mutex rec_mu;
    std::condition_variable rec_cv;
    std::uint64_t outstanding = 0;
    std::uint64_t snap_index = snapshots.size();
    std::optional<std::uint64_t> pending_snapshot;

    std::uint64_t rng = cfg.seed ? cfg.seed : 1;
    for (std::uint64_t skip = 0; skip < first; ++skip)
        rng = bench::detail::xorshift(rng);

    for (std::uint64_t i = first; i < last; ++i) {
        rng = bench::detail::xorshift(rng);
        if (cfg.snapshot_every_n && i > 0 && i % cfg.snapshot_every_n == 0) {
            if (pending_snapshot) {
                snapshots.push_back(sys.await_snapshot(*pending_snapshot));
                pending_snapshot.reset();
            }
            std::filesystem::path path =
                cfg.out_dir / ("snap-" + std::to_string(snap_index++) + ".asnp");
            pending_snapshot = sys.trigger_snapshot(path);
        }
        request_type type = detail::pick_type(rng);
        std::int64_t fid =
            static_cast<std::int64_t>((rng >> 8) % (cfg.flights ? cfg.flights : 1));
        std::int64_t t0 = detail::lat_now_us();
        bool active = sys.snapshot_active();
        value p;
        switch (type) {
        case request_type::query:
            p = sys.send(session, "query", {value::integer(fid)});
            break;
        case request_type::book:
            p = sys.send(session, "book", {value::integer(fid)});
            break;
        case request_type::profile:
            p = sys.send(session, "profile", {});
            break;
        }
        {
            std::lock_guard lock(rec_mu);
            ++outstanding;
        }
        sys.when_resolved(p, [&, i, type, t0, active](const value&, bool) {
            std::int64_t t1 = detail::lat_now_us();
            std::lock_guard lock(rec_mu);
            records.push_back({i, type, t0, t1, t1 - t0, active});
            --outstanding;
            rec_cv.notify_all();
        });
        if (cfg.think_us) {
            std::this_thread::sleep_for(std::chrono::microseconds(cfg.think_us));
        }
    }
    {
        std::unique_lock lock(rec_mu);
        if (!rec_cv.wait_for(lock, std::chrono::minutes(5), [&] { return outstanding == 0; }))
            raise(errc::invalid_state, "latency workload did not drain");
    }
    if (pending_snapshot)
        snapshots.push_back(sys.await_snapshot(*pending_snapshot));
}

inline latency_result run_latency_workload(const latency_config& cfg) {
    system_config sc;
    sc.workers = cfg.workers;
    actor_system sys(sc);
    install_latency_service(sys);
    value session = setup_latency_service(sys, cfg.flights);

    std::mutex turn_mu;
    std::vector<std::int64_t> turn_stamps;
    sys.set_turn_observer([&](actor_id, const message&, bool, std::uint64_t, std::uint64_t, bool) {
        std::lock_guard lock(turn_mu);
        turn_stamps.push_back(detail::lat_now_us());
    });
    sys.start();

    latency_result result;
    drive_requests(sys, session, cfg, 0, cfg.requests, result.records, result.snapshots);
    sys.await_idle(std::chrono::minutes(2));
    sys.stop();

    result.booking_per_flight = read_ledger(sys, cfg.flights).per_flight;
    result.booking_total = read_ledger(sys, cfg.flights).total;

    std::map<request_type, double> sum_by_type;
    for (const auto& r : result.records) {
        ++result.count_by_type[r.type];
        sum_by_type[r.type] += static_cast<double>(r.latency_us);
        if (r.latency_us > 100000)
            ++result.over_100ms;
        if (r.latency_us > 200000)
            ++result.over_200ms;
        result.max_latency_us = std::max(result.max_latency_us, r.latency_us);
    }
    for (auto& [t, n] : result.count_by_type)
        result.mean_by_type[t] = sum_by_type[t] / static_cast<double>(n);

    if (!result.records.empty()) {
        std::int64_t t_begin = result.records.front().enqueue_us;
        std::int64_t t_end = 0;
        for (const auto& r : result.records) {
            t_begin = std::min(t_begin, r.enqueue_us);
            t_end = std::max(t_end, r.response_us);
        }
        std::int64_t w = result.responses_per_window.window_us;
        std::size_t buckets = static_cast<std::size_t>((t_end - t_begin) / w) + 1;
        result.responses_per_window.per_window.assign(buckets, 0);
        for (const auto& r : result.records)
            ++result.responses_per_window
                  .per_window[static_cast<std::size_t>((r.response_us - t_begin) / w)];
        result.responses_per_window.min_count =
            *std::min_element(result.responses_per_window.per_window.begin(),
                              result.responses_per_window.per_window.end());
    }

    for (const auto& rep : result.snapshots) {
        bool ok = true;
        std::int64_t w = result.responses_per_window.window_us;
        for (std::int64_t win = rep.trigger_us; win + w <= rep.complete_us; win += w) {
            bool any = false;
            {
                std::lock_guard lock(turn_mu);
                for (std::int64_t ts : turn_stamps)
                    if (ts >= win && ts < win + w) {
                        any = true;
                        break;
                    }
            }
            if (!any) {
                ok = false;
                break;
            }
        }
        result.snapshot_windows_ok.push_back(ok);
    }
    return result;
}

inline csv_writer latency_csv(const latency_result& r) {
    csv_writer csv({"request_id", "type", "enqueue_us", "response_us", "latency_us",
                    "snapshot_active"});
    for (const auto& rec : r.records)
        csv.add_row({std::to_string(rec.request_id), request_type_name(rec.type),
                     std::to_string(rec.enqueue_us), std::to_string(rec.response_us),
                     std::to_string(rec.latency_us), rec.snapshot_active ? "1" : "0"});
    return csv;
}

inline summary_writer latency_summary(const latency_config& cfg, const latency_result& r) {
    summary_writer s;
    s.set("requests", static_cast<std::uint64_t>(r.records.size()));
    s.set("workers", static_cast<std::uint64_t>(cfg.workers));
    s.set("snapshot_every_n", cfg.snapshot_every_n);
    s.set("snapshots", static_cast<std::uint64_t>(r.snapshots.size()));
    std::uint64_t bytes = 0;
    for (const auto& rep : r.snapshots)
        bytes += rep.bytes;
    s.set("snapshot_bytes_total", bytes);
    for (const auto& [t, n] : r.count_by_type) {
        s.set(std::string("count_") + request_type_name(t), n);
        s.set(std::string("mean_us_") + request_type_name(t), r.mean_by_type.at(t));
    }
    s.set("over_100ms", r.over_100ms);
    s.set("share_over_100ms", r.share_over_100ms());
    s.set("over_200ms", r.over_200ms);
    s.set("max_latency_us", r.max_latency_us);
    s.set("min_window_throughput", r.responses_per_window.min_count);
    bool all_ok = true;
    for (bool b : r.snapshot_windows_ok)
        all_ok = all_ok && b;
    s.set("snapshot_windows_ok", std::string(all_ok ? "1" : "0"));
    s.set("booking_total", static_cast<std::int64_t>(r.booking_total));
    return s;
}

} // namespace snapactor::bench
