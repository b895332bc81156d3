// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <vector>

#include "snapactor/snapactor.hpp"

using namespace snapactor;

namespace {

/// Minimal store type: one slot, with append/read selectors.
void install_cell(actor_system& sys) {
    sys.add_behavior("Cell", 1,
                     {{"put",
                       [](turn_context& ctx, std::span<const value> args) {
                           ctx.set(ctx.root(), 0, args[0]);
                           return value::null();
                       }},
                      {"get",
                       [](turn_context& ctx, std::span<const value>) {
                           return ctx.get(ctx.root(), 0);
                       }},
                      {"boom",
                       [](turn_context&, std::span<const value>) -> value {
                           throw std::runtime_error("deliberate failure");
                       }},
                      {"echo", [](turn_context&, std::span<const value> args) {
                           return args.empty() ? value::null() : args[0];
                       }}});
}

promise_state state_of(const value& v) {
    auto p = v.as_promise();
    std::lock_guard lock(p->mu);
    return p->state;
}

std::size_t accumulated_count(const value& v) {
    auto p = v.as_promise();
    std::lock_guard lock(p->mu);
    return p->accumulated.size();
}

} // namespace

TEST_CASE("spawn produces distinct actor ids and live actors") {
    actor_system sys;
    install_cell(sys);
    value a = sys.spawn("Cell", {value::null()});
    value b = sys.spawn("Cell", {value::null()});
    CHECK(a.as_far().owner != b.as_far().owner);
    CHECK(sys.has_actor(a.as_far().owner));
    CHECK(sys.has_actor(b.as_far().owner));

    sys.start();
    value p = sys.send(a, "echo", {value::integer(9)});
    resolved_result r = sys.await_value(p);
    CHECK_FALSE(r.errored);
    CHECK(r.result.as_int() == 9);
    sys.stop();
}

TEST_CASE("messages sent to an unresolved promise accumulate instead of queueing") {
    actor_system sys;
    install_cell(sys);
    value p = sys.make_promise(k_main_actor);
    sys.send(p, "echo", {value::integer(1)});
    sys.send(p, "echo", {value::integer(2)});
    CHECK(accumulated_count(p) == 2);
    CHECK(sys.mailbox_size(k_main_actor) == 0);
}

TEST_CASE("resolving a promise forwards accumulated messages in order") {
    system_config cfg;
    cfg.deterministic = true;
    actor_system sys(cfg);
    install_cell(sys);
    std::mutex mu;
    std::vector<std::int64_t> seen;
    sys.add_method("Int", "probe", [&](turn_context&, std::span<const value> args) {
        std::lock_guard lock(mu);
        seen.push_back(args[0].as_int());
        return value::null();
    });
    value p = sys.make_promise(k_main_actor);
    sys.tell(p, "probe", {value::integer(1)});
    sys.tell(p, "probe", {value::integer(2)});
    sys.tell(p, "probe", {value::integer(3)});
    sys.start();
    sys.resolve(p, value::integer(3));
    sys.await_idle();
    CHECK(seen == std::vector<std::int64_t>{1, 2, 3});
    CHECK(state_of(p) == promise_state::resolved);
    sys.stop();
}

TEST_CASE("sends to an already-resolved promise forward to the value's owner") {
    actor_system sys;
    install_cell(sys);
    value cell = sys.spawn("Cell", {value::integer(5)});
    value p = sys.make_promise(k_main_actor);
    sys.resolve(p, cell); // resolves with a far reference
    sys.start();
    resolved_result r = sys.await_value(sys.send(p, "get", {}));
    CHECK(r.result.as_int() == 5);
    sys.stop();
}

TEST_CASE("two sends from one actor dequeue in send order") {
    system_config cfg;
    cfg.deterministic = true;
    actor_system sys(cfg);
    install_cell(sys);
    value cell = sys.spawn("Cell", {value::integer(0)});
    for (int i = 1; i <= 10; ++i)
        sys.tell(cell, "put", {value::integer(i)});
    sys.start();
    sys.await_idle();
    sys.stop();
    CHECK(sys.get_field(cell.as_far().owner, sys.roots_of(cell.as_far().owner).front(), 0)
              .as_int() == 10);
}

TEST_CASE("pass_across_boundary wraps and chains per the isolation rules") {
    actor_system sys;
    install_cell(sys);
    value af = sys.spawn("Cell", {value::null()});
    value bf = sys.spawn("Cell", {value::null()});
    actor_id a = af.as_far().owner;
    actor_id b = bf.as_far().owner;

    // primitives pass unchanged
    CHECK(sys.pass_across_boundary(value::integer(5), b).as_int() == 5);
    value t = value::text("shared");
    CHECK(sys.pass_across_boundary(t, b) == t);

    // a's object becomes a far reference for b, stays itself for a
    value obj = sys.new_object(a, "Cell", {value::null()});
    value crossed = sys.pass_across_boundary(obj, b);
    REQUIRE(crossed.is_far());
    CHECK(crossed.as_far().owner == a);
    CHECK(crossed.as_far().target == obj.as_object());
    CHECK(sys.pass_across_boundary(obj, a) == obj);

    // far references pass unchanged
    CHECK(sys.pass_across_boundary(crossed, a) == crossed);

    // promises chain: receiver gets a fresh promise registered as dependent
    value p = sys.make_promise(a);
    value q = sys.pass_across_boundary(p, b);
    REQUIRE(q.is_promise());
    CHECK(q.as_promise()->owner == b);
    CHECK(q.as_promise() != p.as_promise());
    {
        auto pb = p.as_promise();
        std::lock_guard lock(pb->mu);
        REQUIRE(pb->chained.size() == 1);
        CHECK(pb->chained[0] == q.as_promise());
    }
    // resolving the original resolves the chained dependent
    sys.resolve(p, value::integer(7));
    CHECK(state_of(q) == promise_state::resolved);
    {
        auto qb = q.as_promise();
        std::lock_guard lock(qb->mu);
        CHECK(qb->result.as_int() == 7);
    }
}

TEST_CASE("resolving with a promise defers until that promise resolves") {
    actor_system sys;
    value p = sys.make_promise(k_main_actor);
    value q = sys.make_promise(k_main_actor);
    sys.resolve(p, q);
    CHECK(state_of(p) == promise_state::unresolved);
    sys.resolve(q, value::integer(11));
    CHECK(state_of(p) == promise_state::resolved);
    auto pb = p.as_promise();
    std::lock_guard lock(pb->mu);
    CHECK(pb->result.as_int() == 11);
}

TEST_CASE("promises resolve exactly once") {
    actor_system sys;
    value p = sys.make_promise(k_main_actor);
    sys.resolve(p, value::integer(1));
    try {
        sys.resolve(p, value::integer(2));
        FAIL("expected AlreadyResolved");
    } catch (const error& e) {
        CHECK(e.code() == errc::already_resolved);
    }
}

TEST_CASE("behavior exceptions error the result promise") {
    actor_system sys;
    install_cell(sys);
    value cell = sys.spawn("Cell", {value::null()});
    sys.start();
    resolved_result r = sys.await_value(sys.send(cell, "boom", {}));
    CHECK(r.errored);
    CHECK(r.result.is_text());
    CHECK(*r.result.as_text() == "deliberate failure");

    // unknown selectors error as well
    r = sys.await_value(sys.send(cell, "no-such-selector", {}));
    CHECK(r.errored);
    sys.stop();
}

TEST_CASE("messages to an errored promise error their own results") {
    actor_system sys;
    install_cell(sys);
    value p = sys.make_promise(k_main_actor);
    sys.resolve(p, value::text("down"), true);
    sys.start();
    resolved_result r = sys.await_value(sys.send(p, "get", {}));
    CHECK(r.errored);
    sys.stop();
}

TEST_CASE("per-sender FIFO order is preserved across worker counts") {
    // two senders interleave arbitrarily, but each sender's subsequence must
    // match its send order, for any number of workers
    for (unsigned workers : {1u, 4u}) {
        system_config cfg;
        cfg.workers = workers;
        actor_system sys(cfg);
        sys.add_behavior("Feeder", 1,
                         {{"feed", [](turn_context& ctx, std::span<const value> args) {
                               value target = ctx.get(ctx.root(), 0);
                               std::int64_t base = args[0].as_int();
                               for (std::int64_t i = 0; i < 50; ++i)
                                   ctx.tell(target, "log", {value::integer(base + i)});
                               return value::null();
                           }}});
        std::mutex mu;
        std::vector<std::int64_t> log;
        sys.add_behavior("Sink", 0,
                         {{"log", [&](turn_context&, std::span<const value> args) {
                               std::lock_guard lock(mu);
                               log.push_back(args[0].as_int());
                               return value::null();
                           }}});
        value sink = sys.spawn("Sink", {});
        value f1 = sys.spawn("Feeder", {sink});
        value f2 = sys.spawn("Feeder", {sink});
        sys.start();
        sys.tell(f1, "feed", {value::integer(1000)});
        sys.tell(f2, "feed", {value::integer(2000)});
        sys.await_idle();
        sys.stop();

        REQUIRE(log.size() == 100);
        std::vector<std::int64_t> s1, s2;
        for (auto v : log)
            (v < 2000 ? s1 : s2).push_back(v);
        for (std::size_t i = 0; i < s1.size(); ++i)
            CHECK(s1[i] == 1000 + static_cast<std::int64_t>(i));
        for (std::size_t i = 0; i < s2.size(); ++i)
            CHECK(s2[i] == 2000 + static_cast<std::int64_t>(i));
    }
}

TEST_CASE("turn observer sees every actor in the current global phase") {
    system_config cfg;
    cfg.deterministic = true;
    actor_system sys(cfg);
    install_cell(sys);
    value cell = sys.spawn("Cell", {value::integer(0)});
    std::atomic<bool> ok{true};
    std::map<actor_id, std::uint64_t> last_phase;
    std::mutex mu;
    sys.set_turn_observer(
        [&](actor_id id, const message&, bool, std::uint64_t local, std::uint64_t global, bool) {
            std::lock_guard lock(mu);
            if (local != global)
                ok = false; // phases adopt at turn start
            auto it = last_phase.find(id);
            if (it != last_phase.end() && local < it->second)
                ok = false; // nondecreasing
            last_phase[id] = local;
        });
    sys.start();
    for (int i = 0; i < 20; ++i)
        sys.tell(cell, "put", {value::integer(i)});
    sys.await_idle();
    sys.stop();
    CHECK(ok);
}

TEST_CASE("heap writes outside the owner's turn are rejected while running") {
    actor_system sys;
    install_cell(sys);
    value cell = sys.spawn("Cell", {value::integer(0)});
    actor_id owner = cell.as_far().owner;
    value obj = sys.new_object(owner, "Cell", {value::integer(1)}); // build mode: fine
    sys.start();
    try {
        sys.set_field(owner, obj, 0, value::integer(2)); // host thread, mid-run
        FAIL("expected ForeignAccess");
    } catch (const error& e) {
        CHECK(e.code() == errc::foreign_access);
    }
    sys.await_idle();
    sys.stop();
    // after stop, reads and writes are safe again
    CHECK(sys.get_field(owner, obj, 0).as_int() == 1);
}

TEST_CASE("the turn budget aborts runaway runs") {
    system_config cfg;
    cfg.deterministic = true;
    cfg.max_turns = 25;
    actor_system sys(cfg);
    sys.add_behavior("Loop", 0, {{"spin", [](turn_context& ctx, std::span<const value>) {
                                      ctx.tell(ctx.self_far(), "spin");
                                      return value::null();
                                  }}});
    value loop = sys.spawn("Loop", {});
    sys.start();
    sys.tell(loop, "spin");
    try {
        sys.await_idle(std::chrono::seconds(10));
        FAIL("expected TurnBudgetExhausted");
    } catch (const error& e) {
        CHECK(e.code() == errc::turn_budget_exhausted);
    }
    sys.stop();
}

TEST_CASE("promise pipelining: a behavior returning a promise chains the result") {
    actor_system sys;
    install_cell(sys);
    sys.add_behavior("Front", 1,
                     {{"ask", [](turn_context& ctx, std::span<const value>) {
                           return ctx.send(ctx.get(ctx.root(), 0), "get", {});
                       }}});
    value cell = sys.spawn("Cell", {value::integer(77)});
    value front = sys.spawn("Front", {cell});
    sys.start();
    resolved_result r = sys.await_value(sys.send(front, "ask", {}));
    CHECK(r.result.as_int() == 77);
    sys.stop();
}

TEST_CASE("a behavior may resolve its own result promise explicitly") {
    actor_system sys;
    sys.add_behavior("Manual", 0, {{"go", [](turn_context& ctx, std::span<const value>) {
                                        ctx.resolve(value::promise(ctx.msg().result_promise),
                                                    value::integer(123));
                                        return value::integer(999); // ignored
                                    }}});
    value m = sys.spawn("Manual", {});
    sys.start();
    resolved_result r = sys.await_value(sys.send(m, "go", {}));
    CHECK(r.result.as_int() == 123);
    sys.stop();
}

TEST_CASE("concurrent resolvers settle a promise exactly once") {
    // two actors race to resolve the same promise; over any schedule one
    // wins and the other observes AlreadyResolved
    for (int round = 0; round < 20; ++round) {
        system_config cfg;
        cfg.workers = 4;
        actor_system sys(cfg);
        auto slot = std::make_shared<value>();
        std::atomic<int> already{0};
        sys.add_behavior("Racer", 1,
                         {{"resolve", [slot, &already](turn_context& ctx,
                                                       std::span<const value> args) {
                               try {
                                   ctx.resolve(*slot, args[0]);
                               } catch (const error& e) {
                                   if (e.code() == errc::already_resolved)
                                       already.fetch_add(1);
                                   else
                                       throw;
                               }
                               return value::null();
                           }}});
        value r1 = sys.spawn("Racer", {value::null()});
        value r2 = sys.spawn("Racer", {value::null()});
        *slot = sys.make_promise(k_main_actor);
        sys.start();
        sys.tell(r1, "resolve", {value::integer(1)});
        sys.tell(r2, "resolve", {value::integer(2)});
        sys.await_idle();
        sys.stop();
        CHECK(already.load() == 1);
        auto p = slot->as_promise();
        std::lock_guard lock(p->mu);
        CHECK(p->state == promise_state::resolved);
        CHECK((p->result.as_int() == 1 || p->result.as_int() == 2));
    }
}

TEST_CASE("resume before start is required: start twice fails") {
    actor_system sys;
    sys.start();
    try {
        sys.start();
        FAIL("expected InvalidState");
    } catch (const error& e) {
        CHECK(e.code() == errc::invalid_state);
    }
    sys.stop();
}
