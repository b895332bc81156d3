// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "snapactor/capture.hpp"
#include "snapactor/errors.hpp"
#include "snapactor/format.hpp"
#include "snapactor/runtime.hpp"

namespace snapactor {

/// Rebuilds a paused actor system from a parsed snapshot: actors are created
/// implicitly when their ids are encountered, heaps are deserialized with
/// sharing and cycles intact, mailboxes are restored in registry order and
/// recorded racy resolutions are applied. Call start() on the system
/// afterwards to resume; nothing executes before that.
///
/// The host program must have registered the same types and behaviors
/// (matched by name and arity) before loading.
class snapshot_restorer {
public:
    snapshot_restorer(actor_system& sys, const parsed_snapshot& snap) : sys_(sys), snap_(snap) {}

    void load() {
        if (sys_.started())
            raise(errc::invalid_state, "restore needs a fresh, unstarted system");
        reconcile_types();
        restore_registry();
        if (!all_complete())
            raise(errc::restore_defect, "unresolved placeholders after deserialization");
        apply_resolutions();
        finish_actors();
    }

private:
    struct slot {
        bool complete = false;
        value val;
        std::vector<std::function<void(const value&)>> fixups;
    };

    void reconcile_types() {
        remap_.resize(snap_.metadata().types.size(), nullptr);
        for (const auto& row : snap_.metadata().types) {
            const type_tag* local = sys_.types().find(row.name);
            if (!local)
                raise(errc::unknown_type_name, row.name + " is not registered in this process");
            if (local->arity != row.arity)
                raise(errc::arity_mismatch, row.name + ": snapshot arity " +
                                                std::to_string(row.arity) + ", local " +
                                                std::to_string(local->arity));
            if (local->kind != row.kind)
                raise(errc::restore_defect, row.name + ": type kind differs");
            remap_[row.id] = local;
        }
    }

    void restore_registry() {
        for (const auto& entry : snap_.metadata().registry) {
            actor& a = sys_.ensure_actor(entry.actor);
            std::uint64_t at = snap_.resolve(entry.location);
            decoded_record rec = snap_.decode_at(at);
            if (rec.kind == record_kind::roots) {
                if (entry.msg_no != 0)
                    raise(errc::restore_defect, "roots entry with nonzero msgNo");
                restore_roots(a, rec);
                continue;
            }
            if (rec.kind != record_kind::message)
                raise(errc::restore_defect, "registry entry is not a message record");
            message_ptr m = build_message(at, rec, entry.actor);
            m->msg_no = entry.msg_no;
            if (entry.msg_no >= a.next_msg_no)
                a.next_msg_no = entry.msg_no + 1;
            a.mailbox.push_back(std::move(m));
        }
    }

    void restore_roots(actor& a, const decoded_record& rec) {
        a.roots.resize(rec.refs.size());
        actor* ap = &a;
        for (std::size_t i = 0; i < rec.refs.size(); ++i)
            deserialize_into(rec.refs[i], a.id,
                             [ap, i](const value& v) { ap->roots[i] = v; });
    }

    message_ptr build_message(std::uint64_t at, const decoded_record& rec, actor_id owner) {
        auto m = std::make_unique<message>();
        message* mp = m.get();
        decoded_record sel = snap_.decode_ref_word(rec.msg_selector);
        if (sel.kind != record_kind::text)
            raise(errc::restore_defect, "message selector is not text");
        m->selector = std::string(sel.text);
        m->sender_phase = sys_.global_phase();
        m->msg_no = rec.msg_no;
        deserialize_into(rec.msg_receiver, owner, [mp](const value& v) { mp->receiver = v; });
        m->args.resize(rec.msg_args.size());
        for (std::size_t i = 0; i < rec.msg_args.size(); ++i)
            deserialize_into(rec.msg_args[i], owner,
                             [mp, i](const value& v) { mp->args[i] = v; });
        if (rec.msg_result_promise)
            deserialize_into(*rec.msg_result_promise, owner, [mp](const value& v) {
                if (!v.is_promise())
                    raise(errc::restore_defect, "result-promise slot is not a promise");
                mp->result_promise = v.as_promise();
            });
        (void)at;
        return m;
    }

    /// Deserializes the record behind `word` and hands the finished value to
    /// `assign`. A placeholder is installed in the cache before decoding;
    /// references that reach a placeholder leave their slot uninitialized and
    /// append a fixup that runs once the value exists, which is how cycles
    /// close without unbounded recursion.
    void deserialize_into(std::uint64_t word, actor_id owner,
                          std::function<void(const value&)> assign) {
        std::uint64_t addr = snap_.resolve(word);
        auto it = cache_.find(addr);
        if (it != cache_.end()) {
            if (it->second.complete)
                assign(it->second.val);
            else
                it->second.fixups.push_back(std::move(assign));
            return;
        }
        cache_.emplace(addr, slot{});
        build(addr, owner);
        slot& s = cache_.at(addr);
        if (s.complete)
            assign(s.val);
        else
            s.fixups.push_back(std::move(assign));
    }

    void complete(std::uint64_t addr, value v) {
        slot& s = cache_.at(addr);
        s.val = std::move(v);
        s.complete = true;
        std::vector<std::function<void(const value&)>> fixups;
        fixups.swap(s.fixups);
        for (auto& fix : fixups)
            fix(cache_.at(addr).val);
    }

    void build(std::uint64_t addr, actor_id owner) {
        decoded_record rec = snap_.decode_at(addr);
        switch (rec.kind) {
        case record_kind::null_v:
            complete(addr, value::null());
            return;
        case record_kind::bool_v:
            complete(addr, value::boolean(rec.bool_v));
            return;
        case record_kind::int_v:
            complete(addr, value::integer(rec.int_v));
            return;
        case record_kind::float_v:
            complete(addr, value::real(rec.float_v));
            return;
        case record_kind::text:
            complete(addr, value::text(std::string(rec.text)));
            return;
        case record_kind::object:
        case record_kind::array: {
            const type_tag* tag = remap_.at(rec.type_id);
            actor& a = sys_.ensure_actor(owner);
            object_record* obj =
                sys_.alloc_object(a, *tag, std::vector<value>(rec.refs.size()));
            for (std::size_t i = 0; i < rec.refs.size(); ++i)
                deserialize_into(rec.refs[i], owner,
                                 [obj, i](const value& v) { obj->fields[i] = v; });
            complete(addr, value::object(obj));
            return;
        }
        case record_kind::far_ref: {
            actor_id target_owner = rec.far_owner;
            sys_.ensure_actor(target_owner);
            deserialize_into(rec.far_target, target_owner,
                             [this, addr, target_owner](const value& v) {
                                 if (!v.is_object_like())
                                     raise(errc::restore_defect,
                                           "far reference to a non-object record");
                                 complete(addr, value::far(target_owner, v.as_object()));
                             });
            return;
        }
        case record_kind::promise: {
            actor_id prom_owner = rec.prom_owner;
            sys_.ensure_actor(prom_owner);
            promise_ptr p = sys_.make_promise_box(prom_owner);
            p->state = static_cast<promise_state>(rec.prom_state);
            if (p->state != promise_state::unresolved)
                deserialize_into(rec.prom_value, prom_owner,
                                 [p](const value& v) { p->result = v; });
            for (std::uint64_t w : rec.prom_accumulated) {
                std::uint64_t mat = snap_.resolve(w);
                decoded_record mrec = snap_.decode_at(mat);
                if (mrec.kind != record_kind::message)
                    raise(errc::restore_defect, "promise accumulated a non-message record");
                p->accumulated.push_back(build_message(mat, mrec, prom_owner));
            }
            p->chained.resize(rec.prom_chained.size());
            for (std::size_t i = 0; i < rec.prom_chained.size(); ++i)
                deserialize_into(rec.prom_chained[i], prom_owner, [p, i](const value& v) {
                    if (!v.is_promise())
                        raise(errc::restore_defect, "chained slot is not a promise");
                    p->chained[i] = v.as_promise();
                });
            complete(addr, value::promise(p));
            return;
        }
        case record_kind::message:
            raise(errc::restore_defect, "message record referenced as a value");
        case record_kind::roots:
            raise(errc::restore_defect, "roots record referenced as a value");
        }
    }

    bool all_complete() const {
        for (const auto& [addr, s] : cache_)
            if (!s.complete)
                return false;
        return true;
    }

    /// Racy resolutions recorded at capture time: resolve each promise that
    /// the snapshot holds as unresolved, forwarding its accumulated messages
    /// into mailboxes behind the registry-restored ones.
    void apply_resolutions() {
        for (const auto& entry : snap_.metadata().resolutions) {
            decoded_record prec = snap_.decode_ref_word(entry.resolver);
            if (prec.kind != record_kind::promise)
                raise(errc::restore_defect, "resolution entry does not name a promise record");
            actor_id owner = prec.prom_owner;
            value pv;
            deserialize_into(entry.resolver, owner, [&pv](const value& v) { pv = v; });
            value result;
            deserialize_into(entry.result, owner, [&result](const value& v) { result = v; });
            if (!pv.is_promise())
                raise(errc::restore_defect, "resolution target is not a promise");
            const promise_ptr& p = pv.as_promise();
            {
                std::lock_guard lock(p->mu);
                if (p->state != promise_state::unresolved)
                    raise(errc::restore_defect,
                          "recorded resolution targets an already-resolved promise");
            }
            sys_.resolve_promise(p, result, actor_system::resolver_context{nullptr},
                                 entry.state != 0, nullptr, 0);
        }
    }

    void finish_actors() {
        for (actor_id id : sys_.actor_ids()) {
            actor& a = sys_.actor_ref(id);
            if (!a.roots.empty() && a.roots.front().is_object_like())
                a.root = a.roots.front();
        }
    }

    actor_system& sys_;
    const parsed_snapshot& snap_;
    std::vector<const type_tag*> remap_;
    std::unordered_map<std::uint64_t, slot> cache_;
};

/// Parses, optionally validates, and loads a snapshot file into a fresh
/// system. The system stays paused; start() resumes execution.
inline void load_snapshot(actor_system& sys, const std::filesystem::path& path,
                          bool validate = true) {
    parsed_snapshot snap = read_snapshot(path);
    if (validate) {
        validation_report report = validate_snapshot(snap);
        if (!report.ok())
            raise(errc::restore_defect,
                  "snapshot has " + std::to_string(report.defects.size()) +
                      " defects; first: " + report.defects.front().what);
    }
    snapshot_restorer(sys, snap).load();
}

} // namespace snapactor
