// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "snapactor/bench/benchmarks.hpp"
#include "snapactor/restore.hpp"
#include "snapactor/runtime.hpp"

namespace snapactor::bench {

/// Structural isomorphism between two heaps: a bijection on object and
/// promise identities (and on actor ids, so restored runs that re-spawn
/// actors under fresh ids still compare) that preserves type names, field
/// structure, far-ref targets and promise states.
class iso_checker {
public:
    bool check(const value& a, const value& b) { return eq(a, b, "$"); }

    bool check_actor(actor_system& sys_a, actor_id ida, actor_system& sys_b, actor_id idb) {
        if (!map_actor(ida, idb))
            return false;
        auto ra = sys_a.roots_of(ida);
        auto rb = sys_b.roots_of(idb);
        if (ra.size() != rb.size())
            return fail("$roots", "root counts differ");
        for (std::size_t i = 0; i < ra.size(); ++i)
            if (!eq(ra[i], rb[i], "$roots[" + std::to_string(i) + "]"))
                return false;
        return true;
    }

    const std::string& mismatch() const { return mismatch_; }

private:
    bool fail(const std::string& path, const std::string& why) {
        if (mismatch_.empty())
            mismatch_ = path + ": " + why;
        return false;
    }

    bool map_actor(actor_id a, actor_id b) {
        auto it = act_ab_.find(a);
        if (it != act_ab_.end())
            return it->second == b;
        auto jt = act_ba_.find(b);
        if (jt != act_ba_.end())
            return jt->second == a;
        act_ab_[a] = b;
        act_ba_[b] = a;
        return true;
    }

    bool eq_record(const object_record* a, const object_record* b, const std::string& path) {
        auto it = obj_ab_.find(a);
        if (it != obj_ab_.end()) {
            if (it->second != b)
                return fail(path, "object identity mapping conflict");
            return true; // already structurally compared (or in progress)
        }
        if (obj_ba_.count(b))
            return fail(path, "object identity mapping conflict (reverse)");
        if (a->tag->name != b->tag->name)
            return fail(path, "type " + a->tag->name + " vs " + b->tag->name);
        if (!map_actor(a->owner, b->owner))
            return fail(path, "owner mapping conflict");
        if (a->fields.size() != b->fields.size())
            return fail(path, "field counts differ");
        obj_ab_[a] = b;
        obj_ba_[b] = a;
        for (std::size_t i = 0; i < a->fields.size(); ++i)
            if (!eq(a->fields[i], b->fields[i], path + "." + std::to_string(i)))
                return false;
        return true;
    }

    bool eq_promise(const promise_ptr& a, const promise_ptr& b, const std::string& path) {
        auto it = prom_ab_.find(a.get());
        if (it != prom_ab_.end()) {
            if (it->second != b.get())
                return fail(path, "promise identity mapping conflict");
            return true;
        }
        if (prom_ba_.count(b.get()))
            return fail(path, "promise identity mapping conflict (reverse)");
        prom_ab_[a.get()] = b.get();
        prom_ba_[b.get()] = a.get();
        if (!map_actor(a->owner, b->owner))
            return fail(path, "promise owner mapping conflict");
        if (a->state != b->state)
            return fail(path, "promise states differ");
        if (a->state != promise_state::unresolved &&
            !eq(a->result, b->result, path + ".value"))
            return false;
        if (a->accumulated.size() != b->accumulated.size())
            return fail(path, "accumulated counts differ");
        for (std::size_t i = 0; i < a->accumulated.size(); ++i) {
            const message& ma = *a->accumulated[i];
            const message& mb = *b->accumulated[i];
            std::string mpath = path + ".msg[" + std::to_string(i) + "]";
            if (ma.selector != mb.selector)
                return fail(mpath, "selectors differ");
            if (ma.args.size() != mb.args.size())
                return fail(mpath, "arg counts differ");
            for (std::size_t j = 0; j < ma.args.size(); ++j)
                if (!eq(ma.args[j], mb.args[j], mpath + ".arg" + std::to_string(j)))
                    return false;
            if (static_cast<bool>(ma.result_promise) != static_cast<bool>(mb.result_promise))
                return fail(mpath, "result promise presence differs");
            if (ma.result_promise &&
                !eq_promise(ma.result_promise, mb.result_promise, mpath + ".promise"))
                return false;
        }
        if (a->chained.size() != b->chained.size())
            return fail(path, "chained counts differ");
        for (std::size_t i = 0; i < a->chained.size(); ++i)
            if (!eq_promise(a->chained[i], b->chained[i],
                            path + ".chain[" + std::to_string(i) + "]"))
                return false;
        return true;
    }

    bool eq(const value& a, const value& b, const std::string& path) {
        if (a.kind() != b.kind())
            return fail(path, "kinds differ");
        switch (a.kind()) {
        case value_kind::null:
            return true;
        case value_kind::boolean:
            return a.as_bool() == b.as_bool() || fail(path, "bools differ");
        case value_kind::integer:
            return a.as_int() == b.as_int() || fail(path, "ints differ");
        case value_kind::real: {
            double x = a.as_real(), y = b.as_real();
            return std::memcmp(&x, &y, sizeof x) == 0 || fail(path, "floats differ");
        }
        case value_kind::text:
            return *a.as_text() == *b.as_text() || fail(path, "texts differ");
        case value_kind::object:
        case value_kind::array:
            return eq_record(a.as_object(), b.as_object(), path);
        case value_kind::far: {
            const far_ref& fa = a.as_far();
            const far_ref& fb = b.as_far();
            if (!map_actor(fa.owner, fb.owner))
                return fail(path, "far owner mapping conflict");
            return eq_record(fa.target, fb.target, path + "->");
        }
        case value_kind::promise:
            return eq_promise(a.as_promise(), b.as_promise(), path);
        }
        return fail(path, "unreachable");
    }

    std::unordered_map<const object_record*, const object_record*> obj_ab_, obj_ba_;
    std::unordered_map<const promise_box*, const promise_box*> prom_ab_, prom_ba_;
    std::unordered_map<actor_id, actor_id> act_ab_, act_ba_;
    std::string mismatch_;
};

struct verify_outcome {
    bool pass = false;
    std::string program;
    std::uint64_t seed = 0;
    std::uint64_t trigger_turn = 0;
    std::uint64_t snapshot_bytes = 0;
    std::string detail;
};

/// Runs one program under the deterministic scheduler, snapshots it at a
/// seeded turn, restores the file into a fresh system, resumes, and compares
/// the final observable and root heap against an uninterrupted run.
inline verify_outcome verify_roundtrip(const std::string& program, std::uint64_t seed,
                                       std::uint64_t size_override = 0,
                                       std::filesystem::path scratch_dir = {}) {
    const benchmark& b = find_benchmark(program);
    std::uint64_t size = size_override ? size_override : b.default_size;
    verify_outcome out;
    out.program = program;
    out.seed = seed;

    if (scratch_dir.empty())
        scratch_dir = std::filesystem::temp_directory_path();
    std::filesystem::create_directories(scratch_dir);
    std::filesystem::path file =
        scratch_dir / ("verify-" + program + "-" + std::to_string(seed) + ".asnp");

    auto run_value = [&](actor_system& sys, const value& driver) {
        value p = sys.send(driver, "run", {value::integer(static_cast<std::int64_t>(size)),
                                           value::boolean(false)});
        return sys.await_value(p, std::chrono::minutes(5));
    };

    system_config det;
    det.deterministic = true;

    // uninterrupted reference run
    actor_system sys_a(det);
    b.install(sys_a, std::make_shared<bench_shared>());
    value driver_a = b.setup(sys_a, size, seed);
    sys_a.start();
    resolved_result res_a = run_value(sys_a, driver_a);
    sys_a.await_idle(std::chrono::minutes(2));
    sys_a.stop();
    if (res_a.errored || !values_equal(res_a.result, b.expected(size, 1))) {
        out.detail = "reference run failed its self-check";
        return out;
    }
    value observed_a = b.observe(sys_a);
    std::uint64_t total_turns = sys_a.turns_processed();

    // interrupted run with a seeded mid-run trigger
    std::uint64_t span = total_turns > 3 ? total_turns - 3 : 1;
    std::uint64_t trigger_turn = 2 + bench::detail::xorshift(seed * 977 + 13) % span;
    out.trigger_turn = trigger_turn;
    {
        actor_system sys_b(det);
        b.install(sys_b, std::make_shared<bench_shared>());
        value driver_b = b.setup(sys_b, size, seed);
        sys_b.set_trigger_at_turn(trigger_turn, file);
        sys_b.start();
        resolved_result res_b = run_value(sys_b, driver_b);
        if (res_b.errored) {
            out.detail = "interrupted run errored";
            return out;
        }
        snapshot_report rep = sys_b.await_snapshot(sys_b.global_phase());
        out.snapshot_bytes = rep.bytes;
        sys_b.await_idle(std::chrono::minutes(2));
        sys_b.stop();
    } // the interrupted system is discarded: only the file survives

    validation_report vr = validate_snapshot(read_snapshot(file));
    if (!vr.ok()) {
        out.detail = "snapshot validation: " + vr.defects.front().what;
        return out;
    }

    // restore into a fresh system and run to completion
    actor_system sys_c(det);
    b.install(sys_c, std::make_shared<bench_shared>());
    load_snapshot(sys_c, file, false);
    if (sys_c.turns_processed() != 0) {
        out.detail = "turns executed before resume";
        return out;
    }
    sys_c.start();
    sys_c.await_idle(std::chrono::minutes(2));
    sys_c.stop();
    value observed_c = b.observe(sys_c);

    if (!values_equal(observed_a, observed_c)) {
        out.detail = "observable state differs after restore";
        return out;
    }
    iso_checker iso;
    if (!iso.check_actor(sys_a, 1, sys_c, 1)) {
        out.detail = "heap isomorphism: " + iso.mismatch();
        return out;
    }
    std::error_code ec;
    std::filesystem::remove(file, ec);
    out.pass = true;
    return out;
}

} // namespace snapactor::bench
