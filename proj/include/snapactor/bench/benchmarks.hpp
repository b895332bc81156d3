// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "snapactor/bench/report.hpp"
#include "snapactor/capture.hpp"
#include "snapactor/runtime.hpp"

namespace snapactor::bench {

/// Shared between the runner and driver behaviors: when a path is armed the
/// next iteration's driver triggers a snapshot right after dispatching its
/// message burst (the worst-case placement: the whole burst is still
/// un-processed and must be captured).
struct bench_shared {
    std::mutex mu;
    std::optional<std::filesystem::path> pending;
    std::vector<std::uint64_t> triggered;

    void arm(std::filesystem::path p) {
        std::lock_guard lock(mu);
        pending = std::move(p);
    }

    void maybe_trigger(actor_system& sys) {
        std::optional<std::filesystem::path> p;
        {
            std::lock_guard lock(mu);
            p.swap(pending);
        }
        if (p) {
            std::uint64_t id = sys.trigger_snapshot(*p);
            std::lock_guard lock(mu);
            triggered.push_back(id);
        }
    }
};

using shared_ptr_t = std::shared_ptr<bench_shared>;

/// One registered benchmark. Iterations are driven by sending
/// `run [Int size, Bool trigger_during]` to the driver (always actor id 1);
/// the returned promise resolves with the cumulative observable, which must
/// equal expected(size, iterations_so_far) exactly.
struct benchmark {
    std::string name;
    std::uint64_t default_size = 0;
    std::function<void(actor_system&, shared_ptr_t)> install;
    std::function<value(actor_system&, std::uint64_t size, std::uint64_t seed)> setup;
    std::function<value(std::uint64_t size, std::uint64_t iterations)> expected;
    std::function<value(actor_system&)> observe;
};

namespace detail {

inline void computation_check(double theta) {
    double s = std::sin(theta);
    if (s * s <= 0)
        raise(errc::invalid_state, "unrealistic benchmark computation");
}

inline std::uint64_t xorshift(std::uint64_t x) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    return x ? x : 0x9e3779b97f4a7c15ull;
}

inline double trap_fn(double x) { return 4.0 / (1.0 + x * x); }

/// One worker's chunk sum; both the actor behavior and the host oracle run
/// exactly this, in the same order, so results compare bit-exactly.
inline double trap_chunk(double x0, double x1, std::uint64_t slices) {
    double h = (x1 - x0) / static_cast<double>(slices);
    double acc = (trap_fn(x0) + trap_fn(x1)) / 2.0;
    for (std::uint64_t i = 1; i < slices; ++i)
        acc += trap_fn(x0 + h * static_cast<double>(i));
    return acc * h;
}

inline constexpr unsigned k_trap_workers = 4;
inline constexpr unsigned k_fjt_workers = 8;
inline constexpr unsigned k_chameneos = 5;
inline constexpr unsigned k_big_actors = 8;
inline constexpr std::int64_t k_barber_room = 16;

inline double trap_expected(std::uint64_t slices, std::uint64_t iterations) {
    std::uint64_t per = slices / k_trap_workers;
    double total = 0;
    for (std::uint64_t it = 0; it < iterations; ++it) {
        double parts[k_trap_workers];
        for (unsigned w = 0; w < k_trap_workers; ++w) {
            double x0 = static_cast<double>(w) / k_trap_workers;
            double x1 = static_cast<double>(w + 1) / k_trap_workers;
            parts[w] = trap_chunk(x0, x1, per);
        }
        double sum = 0;
        for (unsigned w = 0; w < k_trap_workers; ++w)
            sum += parts[w];
        total += sum;
    }
    return total;
}

} // namespace detail

inline const std::map<std::string, benchmark>& benchmark_registry() {
    static const std::map<std::string, benchmark> registry = [] {
        std::map<std::string, benchmark> r;

        // ---- counting ------------------------------------------------------
        {
            benchmark b;
            b.name = "counting";
            b.default_size = 2000;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior("Counter", 1,
                                 {{"inc",
                                   [](turn_context& ctx, std::span<const value>) {
                                       value root = ctx.root();
                                       ctx.set(root, 0,
                                               value::integer(ctx.get(root, 0).as_int() + 1));
                                       return value::null();
                                   }},
                                  {"get", [](turn_context& ctx, std::span<const value>) {
                                       return ctx.get(ctx.root(), 0);
                                   }}});
                sys.add_behavior(
                    "CountingDriver", 1,
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.set(ctx.root(), 0, args[0]);
                          return value::null();
                      }},
                     {"run", [shared](turn_context& ctx, std::span<const value> args) {
                          value counter = ctx.get(ctx.root(), 0);
                          std::int64_t n = args[0].as_int();
                          for (std::int64_t i = 0; i < n; ++i)
                              ctx.tell(counter, "inc");
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return ctx.send(counter, "get");
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                value driver = sys.spawn("CountingDriver", {value::null()});
                value counter = sys.spawn("Counter", {value::integer(0)});
                sys.tell(driver, "init", {counter});
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(static_cast<std::int64_t>(size * iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(2, sys.roots_of(2).front(), 0);
            };
            r.emplace(b.name, b);
        }

        // ---- ping-pong -----------------------------------------------------
        {
            benchmark b;
            b.name = "ping-pong";
            b.default_size = 1000;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior("Ponger", 0,
                                 {{"ping", [](turn_context& ctx, std::span<const value> args) {
                                       ctx.tell(args[0], "pong", {args[1]});
                                       return value::null();
                                   }}});
                sys.add_behavior(
                    "PingDriver", 3,
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.set(ctx.root(), 0, args[0]);
                          return value::null();
                      }},
                     {"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value p = ctx.make_promise();
                          ctx.set(ctx.root(), 2, p);
                          ctx.tell(ctx.get(ctx.root(), 0), "ping", {ctx.self_far(), args[0]});
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"pong", [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          std::int64_t pongs = ctx.get(root, 1).as_int() + 1;
                          ctx.set(root, 1, value::integer(pongs));
                          std::int64_t k = args[0].as_int();
                          if (k > 1)
                              ctx.tell(ctx.get(root, 0), "ping",
                                       {ctx.self_far(), value::integer(k - 1)});
                          else
                              ctx.resolve(ctx.get(root, 2), value::integer(pongs));
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                value driver = sys.spawn(
                    "PingDriver", {value::null(), value::integer(0), value::null()});
                value ponger = sys.spawn("Ponger", {});
                sys.tell(driver, "init", {ponger});
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(static_cast<std::int64_t>(size * iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(1, sys.roots_of(1).front(), 1);
            };
            r.emplace(b.name, b);
        }

        // ---- fork-join actor creation --------------------------------------
        {
            benchmark b;
            b.name = "fjcreate";
            b.default_size = 500;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior("FjWorker", 0,
                                 {{"work", [](turn_context& ctx, std::span<const value> args) {
                                       detail::computation_check(37.2);
                                       ctx.tell(args[0], "done");
                                       return value::null();
                                   }}});
                sys.add_behavior(
                    "FjcDriver", 3, // done, target, pending
                    {{"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          std::int64_t n = args[0].as_int();
                          value p = ctx.make_promise();
                          ctx.set(root, 2, p);
                          ctx.set(root, 1, value::integer(ctx.get(root, 1).as_int() + n));
                          for (std::int64_t i = 0; i < n; ++i) {
                              value w = ctx.spawn("FjWorker", {});
                              ctx.tell(w, "work", {ctx.self_far()});
                          }
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"done", [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          std::int64_t done = ctx.get(root, 0).as_int() + 1;
                          ctx.set(root, 0, value::integer(done));
                          if (done == ctx.get(root, 1).as_int())
                              ctx.resolve(ctx.get(root, 2), value::integer(done));
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                return sys.spawn("FjcDriver",
                                 {value::integer(0), value::integer(0), value::null()});
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(static_cast<std::int64_t>(size * iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(1, sys.roots_of(1).front(), 0);
            };
            r.emplace(b.name, b);
        }

        // ---- fork-join throughput -------------------------------------------
        {
            benchmark b;
            b.name = "fjthrput";
            b.default_size = 200;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior("FjtWorker", 1,
                                 {{"work", [](turn_context& ctx, std::span<const value> args) {
                                       detail::computation_check(37.2);
                                       value root = ctx.root();
                                       ctx.set(root, 0,
                                               value::integer(ctx.get(root, 0).as_int() + 1));
                                       ctx.tell(args[0], "done");
                                       return value::null();
                                   }}});
                sys.add_behavior(
                    "FjtDriver", 4, // workers array, done, target, pending
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.set(ctx.root(), 0,
                                  ctx.make_array(std::vector<value>(args.begin(), args.end())));
                          return value::null();
                      }},
                     {"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          value workers = ctx.get(root, 0);
                          std::size_t nw = ctx.size(workers);
                          std::int64_t m = args[0].as_int();
                          value p = ctx.make_promise();
                          ctx.set(root, 3, p);
                          ctx.set(root, 2,
                                  value::integer(ctx.get(root, 2).as_int() +
                                                 m * static_cast<std::int64_t>(nw)));
                          for (std::int64_t j = 0; j < m; ++j)
                              for (std::size_t w = 0; w < nw; ++w)
                                  ctx.tell(ctx.get(workers, w), "work", {ctx.self_far()});
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"done", [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          std::int64_t done = ctx.get(root, 1).as_int() + 1;
                          ctx.set(root, 1, value::integer(done));
                          if (done == ctx.get(root, 2).as_int())
                              ctx.resolve(ctx.get(root, 3), value::integer(done));
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                value driver = sys.spawn("FjtDriver", {value::null(), value::integer(0),
                                                       value::integer(0), value::null()});
                std::vector<value> workers;
                for (unsigned i = 0; i < detail::k_fjt_workers; ++i)
                    workers.push_back(sys.spawn("FjtWorker", {value::integer(0)}));
                sys.tell(driver, "init", workers);
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(
                    static_cast<std::int64_t>(size * detail::k_fjt_workers * iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(1, sys.roots_of(1).front(), 1);
            };
            r.emplace(b.name, b);
        }

        // ---- chameneos -------------------------------------------------------
        {
            benchmark b;
            b.name = "chameneos";
            b.default_size = 500;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior(
                    "Chameneos", 3, // color, met, mediator
                    {{"go",
                      [](turn_context& ctx, std::span<const value>) {
                          ctx.tell(ctx.get(ctx.root(), 2), "meet",
                                   {ctx.self_far(), ctx.get(ctx.root(), 0)});
                          return value::null();
                      }},
                     {"change",
                      [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          std::int64_t mine = ctx.get(root, 0).as_int();
                          std::int64_t other = args[0].as_int();
                          std::int64_t next = mine == other ? mine : 3 - mine - other;
                          ctx.set(root, 0, value::integer(next));
                          ctx.set(root, 1, value::integer(ctx.get(root, 1).as_int() + 1));
                          ctx.tell(ctx.get(root, 2), "meet",
                                   {ctx.self_far(), ctx.get(root, 0)});
                          return value::null();
                      }},
                     {"stopped", [](turn_context&, std::span<const value>) {
                          return value::null();
                      }}});
                sys.add_behavior(
                    "ChamMediator", 6, // peers, meetings, target, waiting far, waiting color, pending
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.set(ctx.root(), 0,
                                  ctx.make_array(std::vector<value>(args.begin(), args.end())));
                          return value::null();
                      }},
                     {"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          value p = ctx.make_promise();
                          ctx.set(root, 5, p);
                          ctx.set(root, 2,
                                  value::integer(ctx.get(root, 2).as_int() + args[0].as_int()));
                          ctx.set(root, 3, value::null());
                          value peers = ctx.get(root, 0);
                          for (std::size_t i = 0; i < ctx.size(peers); ++i)
                              ctx.tell(ctx.get(peers, i), "go");
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"meet", [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          std::int64_t meetings = ctx.get(root, 1).as_int();
                          if (meetings >= ctx.get(root, 2).as_int()) {
                              ctx.tell(args[0], "stopped");
                              return value::null();
                          }
                          value waiting = ctx.get(root, 3);
                          if (waiting.is_null()) {
                              ctx.set(root, 3, args[0]);
                              ctx.set(root, 4, args[1]);
                              return value::null();
                          }
                          ctx.tell(waiting, "change", {args[1]});
                          ctx.tell(args[0], "change", {ctx.get(root, 4)});
                          ctx.set(root, 3, value::null());
                          meetings += 1;
                          ctx.set(root, 1, value::integer(meetings));
                          if (meetings == ctx.get(root, 2).as_int())
                              ctx.resolve(ctx.get(root, 5), value::integer(meetings));
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                value driver = sys.spawn(
                    "ChamMediator", {value::null(), value::integer(0), value::integer(0),
                                     value::null(), value::integer(0), value::null()});
                std::vector<value> peers;
                for (unsigned i = 0; i < detail::k_chameneos; ++i)
                    peers.push_back(sys.spawn(
                        "Chameneos", {value::integer(i % 3), value::integer(0), driver}));
                sys.tell(driver, "init", peers);
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(static_cast<std::int64_t>(size * iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(1, sys.roots_of(1).front(), 1);
            };
            r.emplace(b.name, b);
        }

        // ---- trapezoidal approximation --------------------------------------
        {
            benchmark b;
            b.name = "trapezoid";
            b.default_size = 10000;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior(
                    "TrapWorker", 0,
                    {{"integrate", [](turn_context& ctx, std::span<const value> args) {
                          double sum = detail::trap_chunk(
                              args[2].as_real(), args[3].as_real(),
                              static_cast<std::uint64_t>(args[4].as_int()));
                          ctx.tell(args[0], "part", {args[1], value::real(sum)});
                          return value::null();
                      }}});
                sys.add_behavior(
                    "TrapDriver", 5, // workers, parts, received, total, pending
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          ctx.set(root, 0,
                                  ctx.make_array(std::vector<value>(args.begin(), args.end())));
                          ctx.set(root, 1,
                                  ctx.make_array(std::vector<value>(args.size(), value::real(0))));
                          return value::null();
                      }},
                     {"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          value workers = ctx.get(root, 0);
                          std::size_t nw = ctx.size(workers);
                          std::uint64_t per =
                              static_cast<std::uint64_t>(args[0].as_int()) / nw;
                          value p = ctx.make_promise();
                          ctx.set(root, 4, p);
                          ctx.set(root, 2, value::integer(0));
                          for (std::size_t w = 0; w < nw; ++w) {
                              double x0 = static_cast<double>(w) / static_cast<double>(nw);
                              double x1 = static_cast<double>(w + 1) / static_cast<double>(nw);
                              ctx.tell(ctx.get(workers, w), "integrate",
                                       {ctx.self_far(), value::integer(static_cast<long>(w)),
                                        value::real(x0), value::real(x1),
                                        value::integer(static_cast<std::int64_t>(per))});
                          }
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"part", [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          value parts = ctx.get(root, 1);
                          ctx.set(parts, static_cast<std::size_t>(args[0].as_int()), args[1]);
                          std::int64_t received = ctx.get(root, 2).as_int() + 1;
                          ctx.set(root, 2, value::integer(received));
                          if (received == static_cast<std::int64_t>(ctx.size(parts))) {
                              double sum = 0;
                              for (std::size_t i = 0; i < ctx.size(parts); ++i)
                                  sum += ctx.get(parts, i).as_real();
                              double total = ctx.get(root, 3).as_real() + sum;
                              ctx.set(root, 3, value::real(total));
                              ctx.resolve(ctx.get(root, 4), value::real(total));
                          }
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                value driver =
                    sys.spawn("TrapDriver", {value::null(), value::null(), value::integer(0),
                                             value::real(0), value::null()});
                std::vector<value> workers;
                for (unsigned i = 0; i < detail::k_trap_workers; ++i)
                    workers.push_back(sys.spawn("TrapWorker", {}));
                sys.tell(driver, "init", workers);
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::real(detail::trap_expected(size, iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(1, sys.roots_of(1).front(), 3);
            };
            r.emplace(b.name, b);
        }

        // ---- big (all-to-all) ------------------------------------------------
        {
            benchmark b;
            b.name = "big";
            b.default_size = 50;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior(
                    "BigActor", 5, // rng, pings_left, pongs_recv, peers, driver
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          ctx.set(root, 4, args[0]);
                          ctx.set(root, 3,
                                  ctx.make_array(
                                      std::vector<value>(args.begin() + 1, args.end())));
                          return value::null();
                      }},
                     {"go",
                      [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          ctx.set(root, 1, args[0]);
                          ctx.set(root, 2, value::integer(0));
                          ctx.tell(ctx.self_far(), "next");
                          return value::null();
                      }},
                     {"next",
                      [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          std::int64_t left = ctx.get(root, 1).as_int();
                          if (left == 0) {
                              ctx.tell(ctx.get(root, 4), "done", {ctx.get(root, 2)});
                              return value::null();
                          }
                          ctx.set(root, 1, value::integer(left - 1));
                          std::uint64_t rng = detail::xorshift(
                              static_cast<std::uint64_t>(ctx.get(root, 0).as_int()));
                          ctx.set(root, 0, value::integer(static_cast<std::int64_t>(rng)));
                          value peers = ctx.get(root, 3);
                          value peer = ctx.get(peers, rng % ctx.size(peers));
                          ctx.tell(peer, "ping", {ctx.self_far()});
                          return value::null();
                      }},
                     {"ping",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.tell(args[0], "pong");
                          return value::null();
                      }},
                     {"pong", [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          ctx.set(root, 2, value::integer(ctx.get(root, 2).as_int() + 1));
                          ctx.tell(ctx.self_far(), "next");
                          return value::null();
                      }}});
                sys.add_behavior(
                    "BigDriver", 4, // peers, done, pongs_total, pending
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.set(ctx.root(), 0,
                                  ctx.make_array(std::vector<value>(args.begin(), args.end())));
                          return value::null();
                      }},
                     {"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          value p = ctx.make_promise();
                          ctx.set(root, 3, p);
                          ctx.set(root, 1, value::integer(0));
                          value peers = ctx.get(root, 0);
                          for (std::size_t i = 0; i < ctx.size(peers); ++i)
                              ctx.tell(ctx.get(peers, i), "go", {args[0]});
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"done", [](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          std::int64_t done = ctx.get(root, 1).as_int() + 1;
                          ctx.set(root, 1, value::integer(done));
                          ctx.set(root, 2,
                                  value::integer(ctx.get(root, 2).as_int() + args[0].as_int()));
                          value peers = ctx.get(root, 0);
                          if (done == static_cast<std::int64_t>(ctx.size(peers)))
                              ctx.resolve(ctx.get(root, 3), ctx.get(root, 2));
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t seed) {
                value driver = sys.spawn("BigDriver", {value::null(), value::integer(0),
                                                       value::integer(0), value::null()});
                std::vector<value> peers;
                for (unsigned i = 0; i < detail::k_big_actors; ++i)
                    peers.push_back(sys.spawn(
                        "BigActor",
                        {value::integer(static_cast<std::int64_t>(
                             detail::xorshift(seed + i + 1))),
                         value::integer(0), value::integer(0), value::null(), value::null()}));
                for (auto& p : peers) {
                    std::vector<value> init_args;
                    init_args.push_back(driver);
                    for (auto& q : peers)
                        init_args.push_back(q);
                    sys.tell(p, "init", init_args);
                }
                sys.tell(driver, "init", peers);
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(
                    static_cast<std::int64_t>(size * detail::k_big_actors * iters));
            };
            b.observe = [](actor_system& sys) {
                return sys.get_field(1, sys.roots_of(1).front(), 2);
            };
            r.emplace(b.name, b);
        }

        // ---- sleeping barber -------------------------------------------------
        {
            benchmark b;
            b.name = "barber";
            b.default_size = 1000;
            b.install = [](actor_system& sys, shared_ptr_t shared) {
                sys.add_behavior(
                    "Barber", 3, // driver, room, cutting
                    {{"enter",
                      [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          std::int64_t room = ctx.get(root, 1).as_int();
                          if (room >= detail::k_barber_room) {
                              ctx.tell(ctx.get(root, 0), "away");
                              return value::null();
                          }
                          ctx.set(root, 1, value::integer(room + 1));
                          if (!ctx.get(root, 2).as_bool()) {
                              ctx.set(root, 2, value::boolean(true));
                              ctx.tell(ctx.self_far(), "cut");
                          }
                          return value::null();
                      }},
                     {"cut", [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          std::int64_t room = ctx.get(root, 1).as_int() - 1;
                          ctx.set(root, 1, value::integer(room));
                          ctx.tell(ctx.get(root, 0), "served");
                          if (room > 0)
                              ctx.tell(ctx.self_far(), "cut");
                          else
                              ctx.set(root, 2, value::boolean(false));
                          return value::null();
                      }}});
                sys.add_behavior(
                    "BarberDriver", 5, // barber, served, away, target, pending
                    {{"init",
                      [](turn_context& ctx, std::span<const value> args) {
                          ctx.set(ctx.root(), 0, args[0]);
                          return value::null();
                      }},
                     {"run",
                      [shared](turn_context& ctx, std::span<const value> args) {
                          value root = ctx.root();
                          std::int64_t c = args[0].as_int();
                          value p = ctx.make_promise();
                          ctx.set(root, 4, p);
                          ctx.set(root, 3, value::integer(ctx.get(root, 3).as_int() + c));
                          value barber = ctx.get(root, 0);
                          for (std::int64_t i = 0; i < c; ++i)
                              ctx.tell(barber, "enter");
                          if (args[1].as_bool())
                              shared->maybe_trigger(ctx.system());
                          return p;
                      }},
                     {"served",
                      [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          ctx.set(root, 1, value::integer(ctx.get(root, 1).as_int() + 1));
                          std::int64_t handled =
                              ctx.get(root, 1).as_int() + ctx.get(root, 2).as_int();
                          if (handled == ctx.get(root, 3).as_int())
                              ctx.resolve(ctx.get(root, 4), value::integer(handled));
                          return value::null();
                      }},
                     {"away", [](turn_context& ctx, std::span<const value>) {
                          value root = ctx.root();
                          ctx.set(root, 2, value::integer(ctx.get(root, 2).as_int() + 1));
                          std::int64_t handled =
                              ctx.get(root, 1).as_int() + ctx.get(root, 2).as_int();
                          if (handled == ctx.get(root, 3).as_int())
                              ctx.resolve(ctx.get(root, 4), value::integer(handled));
                          return value::null();
                      }}});
            };
            b.setup = [](actor_system& sys, std::uint64_t, std::uint64_t) {
                value driver = sys.spawn(
                    "BarberDriver", {value::null(), value::integer(0), value::integer(0),
                                     value::integer(0), value::null()});
                value barber = sys.spawn(
                    "Barber", {driver, value::integer(0), value::boolean(false)});
                sys.tell(driver, "init", {barber});
                return driver;
            };
            b.expected = [](std::uint64_t size, std::uint64_t iters) {
                return value::integer(static_cast<std::int64_t>(size * iters));
            };
            b.observe = [](actor_system& sys) {
                value root = sys.roots_of(1).front();
                return value::integer(sys.get_field(1, root, 1).as_int() +
                                      sys.get_field(1, root, 2).as_int());
            };
            r.emplace(b.name, b);
        }

        return r;
    }();
    return registry;
}

inline const benchmark& find_benchmark(const std::string& name) {
    const auto& reg = benchmark_registry();
    auto it = reg.find(name);
    if (it == reg.end())
        raise(errc::config_error, "unknown benchmark '" + name + "'");
    return it->second;
}

inline bool values_equal(const value& a, const value& b) {
    if (a.kind() != b.kind())
        return false;
    switch (a.kind()) {
    case value_kind::null: return true;
    case value_kind::boolean: return a.as_bool() == b.as_bool();
    case value_kind::integer: return a.as_int() == b.as_int();
    case value_kind::real: {
        double x = a.as_real(), y = b.as_real();
        return std::memcmp(&x, &y, sizeof x) == 0;
    }
    case value_kind::text: return *a.as_text() == *b.as_text();
    default: return a == b;
    }
}

enum class snapshot_policy { none, every_k_iterations, timer, explicit_only };
enum class trigger_placement { before_burst, during_burst };

struct bench_config {
    std::string name;
    std::uint64_t iterations = 10;
    /// default (when npos): 10% of iterations
    std::uint64_t warmup_discard = static_cast<std::uint64_t>(-1);
    std::uint64_t size = 0; // 0: benchmark default
    unsigned workers = 2;
    bool deterministic = false;
    std::uint64_t seed = 1;
    snapshot_policy policy = snapshot_policy::none;
    std::uint64_t every_k = 2;
    std::uint64_t timer_ms = 100; // for snapshot_policy::timer
    trigger_placement placement = trigger_placement::before_burst;
    std::filesystem::path out_dir;
};

struct iteration_row {
    std::uint64_t iteration = 0;
    double wall_us = 0;
    bool snapshot = false;
    std::uint64_t snapshot_bytes = 0;
    bool ok = false;
};

struct bench_result {
    std::vector<iteration_row> rows;
    std::vector<snapshot_report> snapshots;
    bool self_check_ok = true;
    value final_observed;
    double mean_us_post_warmup = 0;
    std::uint64_t warmup_discarded = 0;

    csv_writer to_csv() const {
        csv_writer csv({"iteration", "wall_us", "snapshot", "snapshot_bytes", "ok"});
        for (const auto& r : rows)
            csv.add_row({std::to_string(r.iteration), format_us(r.wall_us),
                         r.snapshot ? "1" : "0", std::to_string(r.snapshot_bytes),
                         r.ok ? "1" : "0"});
        return csv;
    }
};

inline void validate(const bench_config& cfg) {
    if (cfg.iterations == 0)
        raise(errc::config_error, "iterations must be >= 1");
    if (cfg.warmup_discard != static_cast<std::uint64_t>(-1) &&
        cfg.warmup_discard >= cfg.iterations)
        raise(errc::config_error, "warmup-discard must be smaller than iterations");
    if (cfg.policy == snapshot_policy::every_k_iterations && cfg.every_k < 1)
        raise(errc::config_error, "every-k must be >= 1");
}

/// Runs one benchmark under the given snapshot policy. Snapshots are
/// numbered snap-<k>.asnp in out_dir; the previous one is awaited before the
/// next is due so exactly iterations/k files appear.
inline bench_result run_benchmark(const bench_config& cfg) {
    validate(cfg);
    const benchmark& b = find_benchmark(cfg.name);
    std::uint64_t size = cfg.size ? cfg.size : b.default_size;
    std::uint64_t warmup = cfg.warmup_discard == static_cast<std::uint64_t>(-1)
                               ? cfg.iterations / 10
                               : cfg.warmup_discard;

    system_config sc;
    sc.workers = cfg.workers;
    sc.deterministic = cfg.deterministic;
    actor_system sys(sc);
    auto shared = std::make_shared<bench_shared>();
    b.install(sys, shared);
    value driver = b.setup(sys, size, cfg.seed);
    sys.start();

    bench_result result;
    std::uint64_t snap_index = 0;
    std::optional<std::uint64_t> outstanding_snapshot;
    std::optional<snapshot_timer> timer;
    if (cfg.policy == snapshot_policy::timer)
        timer.emplace(sys, std::chrono::milliseconds(cfg.timer_ms), cfg.out_dir);

    for (std::uint64_t it = 0; it < cfg.iterations; ++it) {
        bool due = cfg.policy == snapshot_policy::every_k_iterations && it % cfg.every_k == 0;
        iteration_row row;
        row.iteration = it;
        // Deterministic runs serialize snapshot completion against the
        // iterations; otherwise the host's next kickoff races the completion
        // fixpoint and buffer layout varies run to run.
        if (outstanding_snapshot && (due || cfg.deterministic)) {
            snapshot_report rep = sys.await_snapshot(*outstanding_snapshot);
            result.snapshots.push_back(rep);
            outstanding_snapshot.reset();
        }
        if (due) {
            std::filesystem::path path =
                cfg.out_dir / ("snap-" + std::to_string(snap_index++) + ".asnp");
            row.snapshot = true;
            if (cfg.placement == trigger_placement::before_burst)
                outstanding_snapshot = sys.trigger_snapshot(path);
            else
                shared->arm(path);
        }
        auto t0 = std::chrono::steady_clock::now();
        value p = sys.send(driver, "run",
                           {value::integer(static_cast<std::int64_t>(size)),
                            value::boolean(due && cfg.placement ==
                                                      trigger_placement::during_burst)});
        resolved_result res = sys.await_value(p, std::chrono::minutes(5));
        auto t1 = std::chrono::steady_clock::now();
        row.wall_us =
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1000.0;
        if (res.errored) {
            row.ok = false;
            result.self_check_ok = false;
        } else {
            row.ok = values_equal(res.result, b.expected(size, it + 1));
            result.self_check_ok = result.self_check_ok && row.ok;
        }
        if (due && cfg.placement == trigger_placement::during_burst) {
            std::lock_guard lock(shared->mu);
            if (!shared->triggered.empty()) {
                outstanding_snapshot = shared->triggered.back();
                shared->triggered.clear();
            }
        }
        result.rows.push_back(row);
    }
    if (outstanding_snapshot) {
        result.snapshots.push_back(sys.await_snapshot(*outstanding_snapshot));
        outstanding_snapshot.reset();
    }
    if (timer) {
        timer->stop();
        for (std::uint64_t id : timer->triggered())
            result.snapshots.push_back(sys.await_snapshot(id));
    }
    sys.await_idle();
    sys.stop();
    result.final_observed = b.observe(sys);
    result.self_check_ok =
        result.self_check_ok &&
        values_equal(result.final_observed, b.expected(size, cfg.iterations));

    // attach snapshot sizes to the rows that triggered them
    std::size_t si = 0;
    for (auto& row : result.rows)
        if (row.snapshot && si < result.snapshots.size())
            row.snapshot_bytes = result.snapshots[si++].bytes;

    result.warmup_discarded = warmup;
    double sum = 0;
    std::uint64_t n = 0;
    for (std::uint64_t it = warmup; it < cfg.iterations; ++it) {
        sum += result.rows[it].wall_us;
        ++n;
    }
    result.mean_us_post_warmup = n ? sum / static_cast<double>(n) : 0;
    return result;
}

inline summary_writer summarize(const bench_config& cfg, const bench_result& r) {
    summary_writer s;
    s.set("benchmark", cfg.name);
    s.set("iterations", cfg.iterations);
    s.set("warmup_discarded", r.warmup_discarded);
    s.set("workers", static_cast<std::uint64_t>(cfg.workers));
    s.set("deterministic", std::string(cfg.deterministic ? "1" : "0"));
    s.set("mean_us_post_warmup", r.mean_us_post_warmup);
    s.set("snapshots", static_cast<std::uint64_t>(r.snapshots.size()));
    std::uint64_t bytes = 0;
    for (const auto& rep : r.snapshots)
        bytes += rep.bytes;
    s.set("snapshot_bytes_total", bytes);
    if (!r.snapshots.empty())
        s.set("snapshot_bytes_mean",
              static_cast<std::uint64_t>(bytes / r.snapshots.size()));
    s.set("self_check", std::string(r.self_check_ok ? "pass" : "FAIL"));
    return s;
}

} // namespace snapactor::bench
