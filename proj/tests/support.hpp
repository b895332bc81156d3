// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
//
// Shared test support: a seeded random heap builder used by the restore
// property tests and the acceptance suite.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "snapactor/bench/verify.hpp"
#include "snapactor/snapactor.hpp"

namespace snapactor::test {

struct heap_gen_config {
    std::uint64_t seed = 1;
    std::size_t actors = 3; // at least 3 so far refs cross several boundaries
    std::size_t objects = 200;
    double share_p = 0.25; // reference an existing local object
    double cycle_p = 0.12; // reference a local object anywhere in the heap
    double far_p = 0.12;   // far reference into another actor
    double promise_p = 0.06;
    double text_p = 0.08;
};

inline void register_gen_types(actor_system& sys) {
    if (!sys.types().find("GenRoot")) {
        sys.register_type("GenRoot", 1);
        for (std::uint32_t a = 1; a <= 4; ++a)
            sys.register_type("Gen" + std::to_string(a), a);
    }
}

/// Builds seeded random heaps across several actors, with sharing, cycles,
/// far references, text sharing and both unresolved and resolved promises.
/// Roots are registered so the whole structure is captured by a snapshot of
/// the idle system.
inline std::size_t generate_heap(actor_system& sys, const heap_gen_config& cfg) {
    register_gen_types(sys);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<actor_id> ids;
    for (std::size_t i = 0; i < cfg.actors; ++i)
        ids.push_back(sys.spawn("GenRoot", {value::null()}).as_far().owner);

    std::vector<text_ptr> texts;
    for (int i = 0; i < 6; ++i)
        texts.push_back(std::make_shared<const std::string>("t" + std::to_string(i)));

    std::vector<std::vector<value>> objs(cfg.actors);
    std::size_t made = 0;
    for (std::size_t a = 0; a < cfg.actors; ++a) {
        std::size_t count = cfg.objects / cfg.actors + (a < cfg.objects % cfg.actors ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t arity = 1 + static_cast<std::uint32_t>(rng() % 4);
            objs[a].push_back(sys.new_object(
                ids[a], "Gen" + std::to_string(arity),
                std::vector<value>(arity, value::null())));
            ++made;
        }
    }

    // second pass wires fields; forward edges create cycles
    for (std::size_t a = 0; a < cfg.actors; ++a) {
        for (value& obj : objs[a]) {
            std::size_t arity = sys.field_count(obj);
            for (std::size_t f = 0; f < arity; ++f) {
                double roll = coin(rng);
                value v;
                if (roll < cfg.far_p && cfg.actors > 1) {
                    std::size_t other = (a + 1 + rng() % (cfg.actors - 1)) % cfg.actors;
                    if (!objs[other].empty()) {
                        const value& target = objs[other][rng() % objs[other].size()];
                        v = value::far(ids[other], target.as_object());
                    }
                } else if (roll < cfg.far_p + cfg.share_p + cfg.cycle_p) {
                    if (!objs[a].empty())
                        v = objs[a][rng() % objs[a].size()]; // sharing and cycles
                } else if (roll < cfg.far_p + cfg.share_p + cfg.cycle_p + cfg.promise_p) {
                    value p = sys.make_promise(ids[a]);
                    if (rng() % 2)
                        sys.resolve(p, value::integer(static_cast<std::int64_t>(rng() % 1000)));
                    v = p;
                } else if (roll <
                           cfg.far_p + cfg.share_p + cfg.cycle_p + cfg.promise_p + cfg.text_p) {
                    v = value::text(texts[rng() % texts.size()]);
                } else {
                    switch (rng() % 4) {
                    case 0: v = value::integer(static_cast<std::int64_t>(rng())); break;
                    case 1: v = value::real(static_cast<double>(rng() % 10000) / 7.0); break;
                    case 2: v = value::boolean(rng() % 2 == 0); break;
                    default: v = value::null();
                    }
                }
                sys.set_field(ids[a], obj, f, v);
            }
        }
    }

    // register every object as a root so unreachable pieces cannot hide
    // restore bugs (sampling roots would also be sound, just weaker)
    for (std::size_t a = 0; a < cfg.actors; ++a) {
        std::vector<value> roots;
        for (std::size_t i = 0; i < objs[a].size(); ++i)
            if (i % 3 == 0) // every third object roots a subgraph
                roots.push_back(objs[a][i]);
        sys.register_roots(ids[a], roots);
    }
    return made;
}

/// Snapshot an idle generated system, restore into a fresh one, and compare
/// all roots per actor. Returns an empty string on success.
inline std::string roundtrip_generated_heap(const heap_gen_config& cfg,
                                            const std::filesystem::path& file) {
    actor_system original;
    generate_heap(original, cfg);
    original.start();
    original.await_idle();
    original.await_snapshot(original.trigger_snapshot(file));
    original.stop();

    validation_report vr = validate_snapshot(read_snapshot(file));
    if (!vr.ok())
        return "validation: " + vr.defects.front().what;

    actor_system restored;
    register_gen_types(restored);
    load_snapshot(restored, file, false);
    if (restored.actor_count() != original.actor_count())
        return "actor counts differ";
    bench::iso_checker iso;
    for (actor_id id : original.actor_ids())
        if (!iso.check_actor(original, id, restored, id))
            return "actor " + std::to_string(id) + ": " + iso.mismatch();
    return "";
}

} // namespace snapactor::test
