// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cassert>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "snapactor/buffer.hpp"
#include "snapactor/errors.hpp"
#include "snapactor/format.hpp"
#include "snapactor/ref.hpp"
#include "snapactor/runtime.hpp"

namespace snapactor {

/// True when a message about to be processed must be serialized into the
/// active snapshot: its send phase differs from the global phase.
inline bool needs_capture(std::uint64_t msg_phase, std::uint64_t global_phase, bool active) {
    return active && msg_phase != global_phase;
}

/// Per-snapshot map from object identity to its snapshot reference. One
/// shared source of truth so an identity is serialized exactly once even
/// when reached from several actors; striped locks bound contention.
class serialization_registry {
public:
    std::optional<std::uint64_t> lookup(const void* key) const {
        const stripe& s = of(key);
        std::lock_guard lock(s.mu);
        auto it = s.map.find(key);
        return it == s.map.end() ? std::nullopt : std::optional(it->second);
    }

    void insert(const void* key, std::uint64_t ref) {
        stripe& s = of(key);
        std::lock_guard lock(s.mu);
        s.map.emplace(key, ref);
    }

    /// Identity-keyed record whose bytes are written while the stripe lock is
    /// held, so racing writers from different actors produce one record.
    template <typename WriteFn>
    std::uint64_t get_or_write(const void* key, WriteFn&& write) {
        stripe& s = of(key);
        std::lock_guard lock(s.mu);
        auto it = s.map.find(key);
        if (it != s.map.end())
            return it->second;
        std::uint64_t ref = write();
        s.map.emplace(key, ref);
        return ref;
    }

    /// Content-keyed text records (selector strings).
    template <typename WriteFn>
    std::uint64_t get_or_write_text(const std::string& content, WriteFn&& write) {
        std::lock_guard lock(text_mu_);
        auto it = texts_.find(content);
        if (it != texts_.end())
            return it->second;
        std::uint64_t ref = write();
        texts_.emplace(content, ref);
        return ref;
    }

    void clear() {
        for (auto& s : stripes_) {
            std::lock_guard lock(s.mu);
            s.map.clear();
        }
        std::lock_guard lock(text_mu_);
        texts_.clear();
    }

private:
    struct stripe {
        mutable std::mutex mu;
        std::unordered_map<const void*, std::uint64_t> map;
    };

    const stripe& of(const void* key) const {
        auto h = reinterpret_cast<std::uintptr_t>(key);
        return stripes_[(h >> 4) % stripes_.size()];
    }
    stripe& of(const void* key) {
        auto h = reinterpret_cast<std::uintptr_t>(key);
        return stripes_[(h >> 4) % stripes_.size()];
    }

    std::array<stripe, 16> stripes_;
    mutable std::mutex text_mu_;
    std::unordered_map<std::string, std::uint64_t> texts_;
};

/// Drives asynchronous snapshots: phase management, incremental
/// serialization into per-worker buffers, deferred serialization across far
/// references, racy-resolution records, completion detection and the writer
/// thread. At most one snapshot is active at a time.
class snapshot_backend {
public:
    explicit snapshot_backend(actor_system& sys) : sys_(sys) {}

    ~snapshot_backend() { shutdown(); }

    // -- phase word ----------------------------------------------------------

    std::uint64_t phase_word() const { return phase_word_.load(std::memory_order_acquire); }
    static std::uint64_t word_phase(std::uint64_t w) { return w >> 1; }
    static bool word_active(std::uint64_t w) { return (w & 1) != 0; }

    std::uint64_t current_phase() const { return word_phase(phase_word()); }
    bool active() const { return word_active(phase_word()); }

    void set_resolution_records_enabled(bool on) { resolution_records_ = on; }
    std::uint64_t last_fixpoint_rounds() const {
        return last_rounds_.load(std::memory_order_relaxed);
    }

    // diagnostics
    std::int64_t stale_queued() const { return stale_queued_.load(std::memory_order_acquire); }
    std::vector<actor_id> deferred_actors() {
        std::lock_guard lock(meta_mu_);
        return std::vector<actor_id>(actors_with_deferred_.begin(), actors_with_deferred_.end());
    }
    bool sentinel_seen() {
        std::lock_guard lock(meta_mu_);
        return sentinel_done_;
    }

    // -- lifecycle -----------------------------------------------------------

    void start(unsigned workers) {
        buffers_.clear();
        for (unsigned i = 0; i < workers; ++i)
            buffers_.emplace_back(static_cast<std::uint16_t>(i));
        shutdown_ = false;
        coordinator_ = std::thread([this] { coordinator_main(); });
    }

    void shutdown() {
        {
            std::lock_guard lock(meta_mu_);
            shutdown_ = true;
        }
        cv_.notify_all();
        if (coordinator_.joinable())
            coordinator_.join();
    }

    // -- triggering and completion -------------------------------------------

    std::uint64_t trigger(std::optional<std::filesystem::path> path) {
        if (!sys_.started() || sys_.stopped())
            raise(errc::invalid_state, "snapshots need a running system");
        std::uint64_t id;
        {
            std::lock_guard lock(meta_mu_);
            std::uint64_t w = phase_word_.load(std::memory_order_relaxed);
            if (word_active(w))
                raise(errc::snapshot_in_progress,
                      "snapshot " + std::to_string(word_phase(w)) + " is still active");
            id = word_phase(w) + 1;
            snapshot_id_ = id;
            auto_path_ = std::move(path);
            registry_.clear();
            patches_.clear();
            msg_registry_.clear();
            resolutions_.clear();
            assert(actors_with_deferred_.empty());
            stale_queued_.store(0, std::memory_order_relaxed);
            sentinel_done_ = false;
            required_done_.assign(sys_.worker_done_count_.size(), 0);
            rounds_ = 0;
            for (auto& b : buffers_)
                b.clear();
            snapshot_report rep;
            rep.id = id;
            rep.phase = id;
            rep.trigger_us = now_us();
            if (auto_path_)
                rep.path = *auto_path_;
            reports_[id] = rep;
            // Publish the new phase before scanning so enqueues that follow
            // the scan see it (the mailbox lock orders both sides).
            phase_word_.store((id << 1) | 1, std::memory_order_release);
        }
        scan_queued_messages(id);
        {
            std::lock_guard lock(sys_.sched_mu_);
            sys_.ready_.push_back(actor_system::task{nullptr, true, id});
        }
        sys_.sched_cv_.notify_one();
        cv_.notify_all();
        return id;
    }

    snapshot_report await_done(std::uint64_t id, std::chrono::milliseconds timeout) {
        std::unique_lock lock(meta_mu_);
        bool ok = cv_.wait_for(lock, timeout, [&] {
            if (shutdown_)
                return true;
            auto it = reports_.find(id);
            if (it == reports_.end())
                return false;
            const snapshot_report& r = it->second;
            return r.complete_us != 0 && (r.path.empty() || r.written_us != 0);
        });
        if (shutdown_)
            raise(errc::invalid_state, "system shut down while awaiting snapshot");
        if (!ok)
            raise(errc::invalid_state, "timed out awaiting snapshot " + std::to_string(id));
        return reports_.at(id);
    }

    snapshot_report finalize_now(const std::filesystem::path& path) {
        std::unique_lock lock(meta_mu_);
        auto it = reports_.find(snapshot_id_);
        if (it == reports_.end() || it->second.complete_us == 0)
            raise(errc::invalid_state, "snapshot capture has not completed");
        if (it->second.written_us != 0)
            raise(errc::invalid_state, "snapshot already written");
        write_locked(it->second, path);
        return it->second;
    }

    snapshot_report report_of(std::uint64_t id) {
        std::lock_guard lock(meta_mu_);
        auto it = reports_.find(id);
        if (it == reports_.end())
            raise(errc::invalid_state, "no snapshot " + std::to_string(id));
        return it->second;
    }

    void notify() { cv_.notify_all(); }

    // -- hooks from the runtime (worker threads) -------------------------------

    /// Under the receiving mailbox's lock: count messages that will need
    /// capture so completion can wait for them.
    void note_enqueue(message& m) {
        std::uint64_t w = phase_word();
        if (!word_active(w))
            return;
        std::uint64_t phase = word_phase(w);
        if (m.sender_phase != phase && m.stale_marked_snapshot != phase) {
            m.stale_marked_snapshot = phase;
            stale_queued_.fetch_add(1, std::memory_order_acq_rel);
        }
    }

    /// Turn step (b): adopt the global phase; on the first turn of a new
    /// phase serialize the actor's registered roots. The caller reads the
    /// phase word once per turn and feeds the same word to capture_if_stale
    /// so the roots entry always precedes the actor's message captures.
    void turn_prologue(actor& a, std::uint64_t w) {
        std::uint64_t phase = word_phase(w);
        if (a.local_phase.load(std::memory_order_relaxed) == phase)
            return;
        a.local_phase.store(phase, std::memory_order_release);
        if (word_active(w))
            capture_roots(a);
        cv_.notify_all();
    }

    /// Turn step (c): serialize everything other actors deferred to this one.
    void drain_deferred(actor& a) {
        for (;;) {
            std::deque<deferred_serialization> batch;
            {
                std::lock_guard lock(a.deferred_mu);
                if (a.deferred.empty()) {
                    std::lock_guard meta(meta_mu_);
                    if (actors_with_deferred_.erase(a.id))
                        cv_.notify_all();
                    return;
                }
                batch.swap(a.deferred);
            }
            for (auto& d : batch) {
                std::uint64_t ref;
                if (d.object)
                    ref = serialize_now(value::object(d.object), a.id);
                else
                    ref = serialize_now(value::promise(d.promise), a.id);
                add_patch(d.patch_buffer, d.patch_offset, ref);
            }
        }
    }

    /// Turn step (d): a message whose send phase predates the snapshot is
    /// serialized and registered before it executes.
    bool capture_if_stale(actor& a, message& m, std::uint64_t w) {
        std::uint64_t phase = word_phase(w);
        if (!needs_capture(m.sender_phase, phase, word_active(w)))
            return false;
        std::uint64_t ref = serialize_message_record(m, a.id);
        {
            std::lock_guard lock(meta_mu_);
            msg_registry_.push_back({a.id, m.msg_no, ref});
        }
        if (m.stale_marked_snapshot == phase) {
            if (stale_queued_.fetch_sub(1, std::memory_order_acq_rel) == 1)
                cv_.notify_all();
        }
        return true;
    }

    /// Called under the promise's own lock, atomically with its state
    /// change. Records the resolution separately when the promise is already
    /// in this snapshot as unresolved and the resolver is still in the
    /// previous phase (the resolution would otherwise be lost). Resolutions
    /// reachable through a chained-dependent list that made it into the
    /// parent's record are recovered by the restored cascade and skipped.
    void maybe_record_racy_resolution(promise_box& p, const value& resolved_value, actor* resolver,
                                      bool errored, promise_box* parent,
                                      std::uint32_t chain_index) {
        if (!resolution_records_)
            return;
        std::uint64_t w = phase_word();
        if (!word_active(w))
            return;
        std::uint64_t phase = word_phase(w);
        if (p.serialized_unresolved_snapshot != phase)
            return;
        std::uint64_t resolver_phase =
            resolver ? resolver->local_phase.load(std::memory_order_relaxed) : phase;
        if (resolver_phase == phase)
            return;
        if (parent && parent->serialized_unresolved_snapshot == phase &&
            chain_index < parent->serialized_chained_count)
            return;
        std::uint64_t vref = serialize_now(resolved_value, p.owner);
        std::lock_guard lock(meta_mu_);
        if (!word_active(phase_word_.load(std::memory_order_relaxed)))
            raise(errc::invalid_state, "resolution raced snapshot completion");
        resolutions_.push_back({p.serialized_ref_word, vref,
                                resolver ? resolver->id : k_main_actor,
                                static_cast<std::uint8_t>(errored ? 1 : 0)});
    }

    /// If the object is already serialized its reference is patched in
    /// immediately; otherwise serialization is deferred to the owner.
    void patch_or_defer(actor_id target_owner, object_record* obj, promise_ptr prom,
                        std::uint16_t patch_buffer, std::uint64_t patch_offset) {
        const void* key = obj ? static_cast<const void*>(obj)
                              : static_cast<const void*>(prom.get());
        if (auto ref = registry_.lookup(key)) {
            add_patch(patch_buffer, patch_offset, *ref);
            return;
        }
        actor* cur = detail::tl_current_actor;
        if (cur && cur->id == target_owner) {
            // our own object reached through a far reference: serialize here
            std::uint64_t ref = obj ? serialize_now(value::object(obj), target_owner)
                                    : serialize_now(value::promise(prom), target_owner);
            add_patch(patch_buffer, patch_offset, ref);
            return;
        }
        actor& target = sys_.actor_ref(target_owner);
        {
            std::lock_guard lock(target.deferred_mu);
            target.deferred.push_back({obj, std::move(prom), patch_buffer, patch_offset});
            std::lock_guard meta(meta_mu_);
            actors_with_deferred_.insert(target_owner);
        }
        cv_.notify_all();
    }

    void on_sentinel(std::uint64_t snapshot_id, unsigned worker_id) {
        std::lock_guard lock(meta_mu_);
        if (snapshot_id != snapshot_id_)
            return;
        for (std::size_t w = 0; w < sys_.worker_busy_.size(); ++w) {
            if (w == worker_id)
                continue;
            if (sys_.worker_busy_[w]->load(std::memory_order_acquire))
                required_done_[w] = sys_.worker_done_count_[w]->load(std::memory_order_acquire) + 1;
        }
        sentinel_done_ = true;
        cv_.notify_all();
    }

    // -- serialization core (worker threads only) ------------------------------

    /// Serializes a value the current thread may access: primitives, text,
    /// far references, and objects or promises owned by `owner`. Foreign
    /// promises only occur in reference slots and go through fill_slot.
    std::uint64_t serialize_now(const value& v, actor_id owner) {
        snapshot_buffer& buf = worker_buffer();
        switch (v.kind()) {
        case value_kind::null:
            return ref_of(buf, buf.append_u32(builtin_type::null_v));
        case value_kind::boolean: {
            std::uint64_t off = buf.append_u32(builtin_type::bool_v);
            buf.append_u8(v.as_bool() ? 1 : 0);
            return ref_of(buf, off);
        }
        case value_kind::integer: {
            std::uint64_t off = buf.append_u32(builtin_type::int_v);
            buf.append_i64(v.as_int());
            return ref_of(buf, off);
        }
        case value_kind::real: {
            std::uint64_t off = buf.append_u32(builtin_type::float_v);
            buf.append_f64(v.as_real());
            return ref_of(buf, off);
        }
        case value_kind::text:
            return text_ref(v.as_text());
        case value_kind::object:
        case value_kind::array:
            return object_ref(v.as_object(), owner);
        case value_kind::far: {
            const far_ref& f = v.as_far();
            std::uint64_t off = buf.append_u32(builtin_type::far_ref);
            buf.append_u64(f.owner);
            std::uint64_t slot = buf.append_placeholder_word();
            patch_or_defer(f.owner, f.target, nullptr, buf.id(), slot);
            return ref_of(buf, off);
        }
        case value_kind::promise: {
            const promise_ptr& p = v.as_promise();
            if (p->owner != owner)
                raise(errc::foreign_access, "foreign promise reached serialize_now");
            return promise_ref(p);
        }
        }
        raise(errc::invalid_state, "unreachable");
    }

    std::uint64_t serialize_message_record(message& m, actor_id owner) {
        snapshot_buffer& buf = worker_buffer();
        std::uint64_t off = buf.append_u32(builtin_type::message);
        std::uint64_t receiver_slot = buf.append_placeholder_word();
        std::uint64_t selector_slot = buf.append_placeholder_word();
        buf.append_u32(static_cast<std::uint32_t>(m.args.size()));
        std::uint64_t args_base = buf.cursor();
        for (std::size_t i = 0; i < m.args.size(); ++i)
            buf.append_placeholder_word();
        buf.append_u8(m.result_promise ? 1 : 0);
        std::uint64_t promise_slot = m.result_promise ? buf.append_placeholder_word() : 0;
        buf.append_u64(m.sender_phase);
        buf.append_u64(m.msg_no);

        fill_slot(buf, receiver_slot, m.receiver, owner);
        buf.patch_u64(selector_slot, selector_ref(m.selector));
        for (std::size_t i = 0; i < m.args.size(); ++i)
            fill_slot(buf, args_base + 8 * i, m.args[i], owner);
        if (m.result_promise)
            fill_slot(buf, promise_slot, value::promise(m.result_promise), owner);
        return ref_of(buf, off);
    }

private:
    friend class actor_system;

    snapshot_buffer& worker_buffer() {
        int w = detail::tl_worker_id;
        if (w < 0 || static_cast<std::size_t>(w) >= buffers_.size())
            raise(errc::invalid_state, "serialization outside a worker thread");
        return buffers_[static_cast<std::size_t>(w)];
    }

    static std::uint64_t ref_of(const snapshot_buffer& buf, std::uint64_t off) {
        return encode_ref(buf.id(), off);
    }

    static std::int64_t now_us() {
        return std::chrono::duration_cast<std::chrono::microseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }

    void add_patch(std::uint16_t buffer, std::uint64_t offset, std::uint64_t word) {
        std::lock_guard lock(patch_mu_);
        patches_.push_back({buffer, offset, word});
    }

    /// Writes one reference word: local values immediately, foreign promises
    /// through the deferred-serialization queue of their owner.
    void fill_slot(snapshot_buffer& buf, std::uint64_t slot, const value& v, actor_id owner) {
        if (v.is_promise() && v.as_promise()->owner != owner) {
            patch_or_defer(v.as_promise()->owner, nullptr, v.as_promise(), buf.id(), slot);
            return;
        }
        if (v.is_object_like() && v.as_object()->owner != owner)
            raise(errc::foreign_access, "foreign object reference in actor " +
                                            std::to_string(owner) + " state");
        buf.patch_u64(slot, serialize_now(v, owner));
    }

    std::uint64_t text_ref(const text_ptr& t) {
        return registry_.get_or_write(t.get(), [&] {
            snapshot_buffer& buf = worker_buffer();
            std::uint64_t off = buf.append_u32(builtin_type::text);
            buf.append_u32(static_cast<std::uint32_t>(t->size()));
            buf.append_bytes(*t);
            return ref_of(buf, off);
        });
    }

    std::uint64_t selector_ref(const std::string& selector) {
        return registry_.get_or_write_text(selector, [&] {
            snapshot_buffer& buf = worker_buffer();
            std::uint64_t off = buf.append_u32(builtin_type::text);
            buf.append_u32(static_cast<std::uint32_t>(selector.size()));
            buf.append_bytes(selector);
            return ref_of(buf, off);
        });
    }

    std::uint64_t object_ref(object_record* rec, actor_id owner) {
        if (rec->owner != owner)
            raise(errc::foreign_access, "object of actor " + std::to_string(rec->owner) +
                                            " serialized on behalf of " + std::to_string(owner));
        if (auto ref = registry_.lookup(rec))
            return *ref;
        snapshot_buffer& buf = worker_buffer();
        std::uint64_t off = buf.append_u32(rec->tag->id);
        if (rec->is_array())
            buf.append_u32(static_cast<std::uint32_t>(rec->fields.size()));
        std::uint64_t base = buf.cursor();
        for (std::size_t i = 0; i < rec->fields.size(); ++i)
            buf.append_placeholder_word();
        std::uint64_t ref = ref_of(buf, off);
        registry_.insert(rec, ref); // before the fields so cycles terminate
        for (std::size_t i = 0; i < rec->fields.size(); ++i)
            fill_slot(buf, base + 8 * i, rec->fields[i], owner);
        return ref;
    }

    std::uint64_t promise_ref(const promise_ptr& p) {
        if (auto ref = registry_.lookup(p.get()))
            return *ref;
        std::lock_guard lock(p->mu);
        if (auto ref = registry_.lookup(p.get()))
            return *ref;
        snapshot_buffer& buf = worker_buffer();
        std::uint64_t off = buf.append_u32(builtin_type::promise);
        buf.append_u64(p->owner);
        buf.append_u8(static_cast<std::uint8_t>(p->state));
        std::uint64_t value_slot = 0;
        if (p->state != promise_state::unresolved)
            value_slot = buf.append_placeholder_word();
        std::uint32_t acc = static_cast<std::uint32_t>(p->accumulated.size());
        buf.append_u32(acc);
        std::uint64_t acc_base = buf.cursor();
        for (std::uint32_t i = 0; i < acc; ++i)
            buf.append_placeholder_word();
        std::uint32_t chained = static_cast<std::uint32_t>(p->chained.size());
        buf.append_u32(chained);
        std::uint64_t chain_base = buf.cursor();
        for (std::uint32_t i = 0; i < chained; ++i)
            buf.append_placeholder_word();

        std::uint64_t ref = ref_of(buf, off);
        registry_.insert(p.get(), ref);
        if (p->state == promise_state::unresolved) {
            std::uint64_t phase = current_phase();
            p->serialized_unresolved_snapshot = phase;
            p->serialized_ref_word = ref;
            p->serialized_chained_count = chained;
        } else {
            fill_slot(buf, value_slot, p->result, p->owner);
        }
        for (std::uint32_t i = 0; i < acc; ++i) {
            std::uint64_t mref = serialize_message_record(*p->accumulated[i], p->owner);
            buf.patch_u64(acc_base + 8 * i, mref);
        }
        for (std::uint32_t i = 0; i < chained; ++i)
            fill_slot(buf, chain_base + 8 * i, value::promise(p->chained[i]), p->owner);
        return ref;
    }

    void capture_roots(actor& a) {
        snapshot_buffer& buf = worker_buffer();
        std::uint64_t off = buf.append_u32(builtin_type::roots);
        buf.append_u32(static_cast<std::uint32_t>(a.roots.size()));
        std::uint64_t base = buf.cursor();
        for (std::size_t i = 0; i < a.roots.size(); ++i)
            buf.append_placeholder_word();
        for (std::size_t i = 0; i < a.roots.size(); ++i)
            fill_slot(buf, base + 8 * i, a.roots[i], a.id);
        std::lock_guard lock(meta_mu_);
        msg_registry_.push_back({a.id, 0, ref_of(buf, off)});
    }

    void scan_queued_messages(std::uint64_t phase) {
        for (actor_id id : sys_.actor_ids()) {
            actor& a = sys_.actor_ref(id);
            std::lock_guard lock(a.mail_mu);
            for (auto& m : a.mailbox) {
                if (m->sender_phase != phase && m->stale_marked_snapshot != phase) {
                    m->stale_marked_snapshot = phase;
                    stale_queued_.fetch_add(1, std::memory_order_acq_rel);
                }
            }
        }
    }

    bool all_actors_advanced(std::uint64_t phase) {
        for (actor_id id : sys_.actor_ids())
            if (sys_.actor_ref(id).local_phase.load(std::memory_order_acquire) != phase)
                return false;
        return true;
    }

    std::vector<actor_id> forced_set(std::uint64_t phase) {
        std::set<actor_id> out;
        for (actor_id id : sys_.actor_ids())
            if (sys_.actor_ref(id).local_phase.load(std::memory_order_acquire) != phase)
                out.insert(id);
        {
            std::lock_guard lock(meta_mu_);
            out.insert(actors_with_deferred_.begin(), actors_with_deferred_.end());
        }
        return std::vector<actor_id>(out.begin(), out.end());
    }

    bool workers_drained() {
        std::lock_guard lock(meta_mu_);
        if (!sentinel_done_)
            return false;
        for (std::size_t w = 0; w < required_done_.size(); ++w)
            if (required_done_[w] != 0 &&
                sys_.worker_done_count_[w]->load(std::memory_order_acquire) < required_done_[w])
                return false;
        return true;
    }

    bool deferred_outstanding() {
        std::lock_guard lock(meta_mu_);
        return !actors_with_deferred_.empty();
    }

    template <typename Pred>
    bool wait_until(Pred&& pred) {
        std::unique_lock lock(meta_mu_);
        for (;;) {
            if (shutdown_ || sys_.failed_.load())
                return false;
            lock.unlock();
            bool done = pred();
            lock.lock();
            if (done)
                return true;
            cv_.wait_for(lock, std::chrono::milliseconds(2));
        }
    }

    void wait_scheduler_idle() {
        std::unique_lock lock(sys_.sched_mu_);
        sys_.idle_cv_.wait(lock, [&] {
            return (sys_.ready_.empty() && sys_.executing_ == 0) || sys_.stop_requested_ ||
                   sys_.failed_.load();
        });
    }

    void coordinator_main() {
        for (;;) {
            std::uint64_t id = 0;
            {
                std::unique_lock lock(meta_mu_);
                cv_.wait(lock, [&] {
                    return shutdown_ ||
                           word_active(phase_word_.load(std::memory_order_relaxed));
                });
                if (shutdown_)
                    return;
                id = snapshot_id_;
            }
            complete_snapshot(id);
        }
    }

    /// Completion procedure: sentinel behind all queued activations, wait for
    /// each worker's current activation, then force-schedule actors that
    /// still owe phase adoption or deferred serializations until no
    /// stale-phase message remains queued and no deferral is outstanding.
    void complete_snapshot(std::uint64_t phase) {
        if (!wait_until([&] { return workers_drained(); }))
            return;
        for (;;) {
            if (sys_.cfg_.deterministic)
                wait_scheduler_idle();
            if (shutdown_ || sys_.failed_.load())
                return;
            std::vector<actor_id> forced = forced_set(phase);
            if (forced.empty() && stale_queued_.load(std::memory_order_acquire) == 0 &&
                all_actors_advanced(phase))
                break;
            if (forced.empty()) {
                // stale messages still queued on busy actors: wait for them
                if (!wait_until([&] {
                        return stale_queued_.load(std::memory_order_acquire) == 0 ||
                               !forced_set(phase).empty();
                    }))
                    return;
                continue;
            }
            ++rounds_;
            for (actor_id id : forced)
                sys_.schedule(sys_.actor_ref(id));
            if (sys_.cfg_.deterministic) {
                wait_scheduler_idle();
            } else {
                // A forced actor is done with this round once it has adopted
                // the phase and either finished its activation or drained its
                // deferred queue; deferrals that arrive afterwards are picked
                // up by the next round's set.
                if (!wait_until([&] {
                        std::set<actor_id> still_deferred;
                        {
                            std::lock_guard lock(meta_mu_);
                            still_deferred = actors_with_deferred_;
                        }
                        for (actor_id id : forced) {
                            actor& a = sys_.actor_ref(id);
                            if (a.local_phase.load(std::memory_order_acquire) != phase)
                                return false;
                            if (a.scheduled.load(std::memory_order_acquire) &&
                                still_deferred.count(id))
                                return false;
                        }
                        return true;
                    }))
                    return;
            }
        }

        std::optional<std::filesystem::path> path;
        {
            std::lock_guard lock(meta_mu_);
            std::uint64_t w = phase_word_.load(std::memory_order_relaxed);
            phase_word_.store(w & ~std::uint64_t{1}, std::memory_order_release);
            snapshot_report& rep = reports_[phase];
            rep.complete_us = now_us();
            rep.fixpoint_rounds = rounds_;
            rep.registry_entries = msg_registry_.size();
            rep.resolution_entries = resolutions_.size();
            last_rounds_.store(rounds_, std::memory_order_relaxed);
            path = auto_path_;
            if (path)
                write_locked(rep, *path);
        }
        cv_.notify_all();
    }

    /// Assembles and writes the completed snapshot. Caller holds meta_mu_.
    void write_locked(snapshot_report& rep, const std::filesystem::path& path) {
        snapshot_metadata meta;
        meta.registry = msg_registry_;
        meta.resolutions = resolutions_;
        meta.types = sys_.types_.rows();
        std::vector<const snapshot_buffer*> bufs;
        for (const auto& b : buffers_)
            bufs.push_back(&b);
        std::vector<std::uint8_t> blob;
        {
            std::lock_guard lock(patch_mu_);
            blob = assemble_snapshot(meta, bufs, patches_);
        }
        write_snapshot_file(blob, path, write_fault_);
        rep.path = path;
        rep.bytes = blob.size();
        rep.written_us = now_us();
    }

public:
    /// Test hook for crash injection while the temp file is written.
    void set_write_fault_hook(write_fault_hook hook) { write_fault_ = std::move(hook); }

private:
    actor_system& sys_;

    std::atomic<std::uint64_t> phase_word_{0};

    serialization_registry registry_;
    std::vector<snapshot_buffer> buffers_;

    std::mutex patch_mu_;
    std::vector<backpatch> patches_;

    std::mutex meta_mu_;
    std::condition_variable cv_;
    std::uint64_t snapshot_id_ = 0;
    std::optional<std::filesystem::path> auto_path_;
    std::vector<message_registry_entry> msg_registry_;
    std::vector<resolution_entry> resolutions_;
    std::set<actor_id> actors_with_deferred_;
    std::atomic<std::int64_t> stale_queued_{0};
    bool sentinel_done_ = false;
    std::vector<std::uint64_t> required_done_;
    std::uint64_t rounds_ = 0;
    std::atomic<std::uint64_t> last_rounds_{0};
    std::map<std::uint64_t, snapshot_report> reports_;
    bool shutdown_ = false;
    bool resolution_records_ = true;
    write_fault_hook write_fault_;

    std::thread coordinator_;
};

/// Interval-based snapshot trigger. Fires every `interval` into numbered
/// files under `dir`, skipping a tick while a snapshot is still active.
/// Wall-clock driven, so it stays out of the deterministic tests.
class snapshot_timer {
public:
    snapshot_timer(actor_system& sys, std::chrono::milliseconds interval,
                   std::filesystem::path dir)
        : sys_(sys), interval_(interval), dir_(std::move(dir)) {
        thread_ = std::thread([this] { run(); });
    }

    ~snapshot_timer() { stop(); }

    void stop() {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        if (thread_.joinable())
            thread_.join();
    }

    std::vector<std::uint64_t> triggered() {
        std::lock_guard lock(mu_);
        return triggered_;
    }

private:
    void run();

    actor_system& sys_;
    std::chrono::milliseconds interval_;
    std::filesystem::path dir_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool stop_ = false;
    std::vector<std::uint64_t> triggered_;
    std::thread thread_;
};

// ---------------------------------------------------------------------------
// actor_system methods that drive the backend

inline void snapshot_timer::run() {
    std::size_t index = 0;
    for (;;) {
        {
            std::unique_lock lock(mu_);
            if (cv_.wait_for(lock, interval_, [&] { return stop_; }))
                return;
        }
        if (sys_.snapshot_active() || !sys_.started() || sys_.stopped())
            continue;
        try {
            std::uint64_t id = sys_.trigger_snapshot(
                dir_ / ("timer-" + std::to_string(index++) + ".asnp"));
            std::lock_guard lock(mu_);
            triggered_.push_back(id);
        } catch (const error& e) {
            if (e.code() != errc::snapshot_in_progress && e.code() != errc::invalid_state)
                throw;
        }
    }
}

inline actor_system::actor_system(system_config cfg) : cfg_(cfg) {
    if (cfg_.deterministic)
        cfg_.workers = 1;
    if (cfg_.workers == 0 || cfg_.workers > 512)
        raise(errc::config_error, "worker count must be in 1..512");
    if (cfg_.activation_batch == 0)
        cfg_.activation_batch = 128;
    backend_ = std::make_unique<snapshot_backend>(*this);
    spawn("MainRoot", {}); // the main actor, id 0
}

inline actor_system::~actor_system() {
    if (started_ && !stopped_)
        stop();
    backend_->shutdown();
}

inline void actor_system::start() {
    if (started_)
        raise(errc::invalid_state, "system already started");
    started_ = true;
    backend_->start(cfg_.workers);
    for (unsigned i = 0; i < cfg_.workers; ++i) {
        worker_done_count_.push_back(std::make_unique<std::atomic<std::uint64_t>>(0));
        worker_busy_.push_back(std::make_unique<std::atomic<bool>>(false));
    }
    for (unsigned i = 0; i < cfg_.workers; ++i)
        workers_.emplace_back([this, i] { worker_main(i); });
    // a restored system resumes with its rebuilt mailboxes
    std::vector<actor_id> ids = actor_ids();
    for (actor_id id : ids) {
        actor& a = actor_ref(id);
        bool pending;
        {
            std::lock_guard lock(a.mail_mu);
            pending = !a.mailbox.empty();
        }
        if (pending)
            schedule(a);
    }
}

inline void actor_system::stop() {
    if (!started_ || stopped_)
        return;
    stopped_ = true;
    {
        std::lock_guard lock(sched_mu_);
        stop_requested_ = true;
    }
    sched_cv_.notify_all();
    idle_cv_.notify_all();
    for (auto& w : workers_)
        w.join();
    workers_.clear();
    backend_->shutdown();
}

inline std::uint64_t actor_system::host_phase() const { return backend_->current_phase(); }

inline bool actor_system::snapshot_active() const { return backend_->active(); }

inline std::uint64_t actor_system::global_phase() const { return backend_->current_phase(); }

inline std::uint64_t actor_system::trigger_snapshot(std::optional<std::filesystem::path> path) {
    return backend_->trigger(std::move(path));
}

inline snapshot_report actor_system::await_snapshot(std::uint64_t id,
                                                    std::chrono::milliseconds timeout) {
    return backend_->await_done(id, timeout);
}

inline snapshot_report actor_system::finalize_to(const std::filesystem::path& path) {
    return backend_->finalize_now(path);
}

inline void actor_system::set_resolution_records_enabled(bool on) {
    backend_->set_resolution_records_enabled(on);
}

inline void actor_system::deliver(actor_id to, value receiver, std::string selector,
                                  std::vector<value> args, bool want_promise, promise_ptr existing,
                                  actor_id sender, std::uint64_t sender_phase,
                                  promise_ptr* out_promise) {
    actor& t = actor_ref(to);
    auto m = std::make_unique<message>();
    m->receiver = std::move(receiver);
    m->selector = std::move(selector);
    m->args.reserve(args.size());
    for (auto& a : args)
        m->args.push_back(pass_across_boundary(a, to));
    if (existing)
        m->result_promise = std::move(existing);
    else if (want_promise)
        m->result_promise = make_promise_box(sender);
    m->sender = sender;
    m->sender_phase = sender_phase;
    if (out_promise)
        *out_promise = m->result_promise;
    {
        std::lock_guard lock(t.mail_mu);
        m->msg_no = t.next_msg_no++;
        backend_->note_enqueue(*m);
        t.mailbox.push_back(std::move(m));
    }
    schedule(t);
}

inline void actor_system::worker_main(unsigned worker_id) {
    detail::tl_worker_id = static_cast<int>(worker_id);
    for (;;) {
        task t;
        {
            std::unique_lock lock(sched_mu_);
            sched_cv_.wait(lock, [&] { return stop_requested_ || !ready_.empty(); });
            if (stop_requested_)
                return;
            t = ready_.front();
            ready_.pop_front();
            ++executing_;
        }
        worker_busy_[worker_id]->store(true, std::memory_order_release);
        if (t.sentinel)
            backend_->on_sentinel(t.snapshot_id, worker_id);
        else
            run_activation(*t.a);
        worker_busy_[worker_id]->store(false, std::memory_order_release);
        worker_done_count_[worker_id]->fetch_add(1, std::memory_order_release);
        {
            std::lock_guard lock(sched_mu_);
            --executing_;
            if (ready_.empty() && executing_ == 0)
                idle_cv_.notify_all();
        }
        backend_->notify();
    }
}

inline void actor_system::run_activation(actor& a) {
    detail::tl_current_actor = &a;
    unsigned budget = cfg_.activation_batch;
    for (;;) {
        message_ptr m;
        {
            std::lock_guard lock(a.mail_mu);
            if (!a.mailbox.empty()) {
                m = std::move(a.mailbox.front());
                a.mailbox.pop_front();
            }
        }
        if (m) {
            std::uint64_t armed = trigger_turn_.load(std::memory_order_relaxed);
            if (armed != 0 && turn_counter_.load(std::memory_order_relaxed) + 1 >= armed &&
                !backend_->active()) {
                trigger_turn_.store(0, std::memory_order_relaxed);
                backend_->trigger(trigger_path_);
            }
        }
        std::uint64_t w = backend_->phase_word();
        backend_->turn_prologue(a, w);
        backend_->drain_deferred(a);
        if (!m)
            break;
        std::uint64_t n = turn_counter_.fetch_add(1, std::memory_order_relaxed) + 1;
        if (cfg_.max_turns != 0 && n > cfg_.max_turns) {
            failure_ = "turn budget of " + std::to_string(cfg_.max_turns) + " exhausted";
            failed_ = true;
            {
                std::lock_guard lock(sched_mu_);
                idle_cv_.notify_all();
            }
            backend_->notify();
            break;
        }
        bool captured = backend_->capture_if_stale(a, *m, w);
        if (observer_)
            observer_(a.id, *m, captured, a.local_phase.load(std::memory_order_relaxed),
                      snapshot_backend::word_phase(w), snapshot_backend::word_active(w));
        execute_turn(a, *m);
        if (--budget == 0)
            break;
    }
    detail::tl_current_actor = nullptr;
    a.scheduled.store(false, std::memory_order_release);
    bool more;
    {
        std::lock_guard lock(a.mail_mu);
        more = !a.mailbox.empty();
    }
    if (more)
        schedule(a);
}

inline void actor_system::resolve_promise(const promise_ptr& p, value v,
                                          resolver_context resolver, bool errored,
                                          promise_box* parent, std::uint32_t chain_index) {
    if (!errored && v.is_promise() && v.as_promise().get() != p.get()) {
        // resolved with another promise: register as dependent and wait
        promise_ptr q = v.as_promise();
        {
            std::lock_guard lock(q->mu);
            if (q->state == promise_state::unresolved) {
                q->chained.push_back(p);
                return;
            }
            v = q->result;
            errored = q->state == promise_state::errored;
        }
    }
    value normalized = pass_across_boundary(v, p->owner);
    std::vector<message_ptr> pending;
    std::vector<promise_ptr> dependents;
    std::function<void(const value&, bool)> callback;
    {
        std::lock_guard lock(p->mu);
        if (p->state != promise_state::unresolved)
            raise(errc::already_resolved, "promise " + std::to_string(p->id));
        p->state = errored ? promise_state::errored : promise_state::resolved;
        p->result = normalized;
        backend_->maybe_record_racy_resolution(*p, normalized, resolver.a, errored, parent,
                                               chain_index);
        pending = std::move(p->accumulated);
        dependents = std::move(p->chained);
        callback = std::move(p->host_callback);
        p->accumulated.clear();
        p->chained.clear();
        p->host_callback = nullptr;
    }
    if (callback)
        callback(normalized, errored);

    std::uint64_t forward_phase =
        resolver.a ? resolver.a->local_phase.load(std::memory_order_relaxed) : host_phase();
    actor_id forward_sender = resolver.a ? resolver.a->id : k_main_actor;
    for (auto& m : pending) {
        if (errored) {
            if (m->result_promise) {
                try {
                    resolve_promise(m->result_promise, normalized, resolver, true, nullptr, 0);
                } catch (const error& e) {
                    if (e.code() != errc::already_resolved)
                        throw;
                }
            }
            continue;
        }
        // forwarded messages carry the resolver's phase, so the receiver
        // captures them exactly when the resolver was in a stale phase
        switch (normalized.kind()) {
        case value_kind::object:
        case value_kind::array:
            deliver(normalized.as_object()->owner, normalized, std::move(m->selector),
                    std::move(m->args), false, std::move(m->result_promise), forward_sender,
                    forward_phase, nullptr);
            break;
        case value_kind::far: {
            const far_ref& f = normalized.as_far();
            deliver(f.owner, value::object(f.target), std::move(m->selector), std::move(m->args),
                    false, std::move(m->result_promise), forward_sender, forward_phase, nullptr);
            break;
        }
        case value_kind::promise:
            raise(errc::invalid_state, "settled promise holds a promise");
        default:
            deliver(p->owner, normalized, std::move(m->selector), std::move(m->args), false,
                    std::move(m->result_promise), forward_sender, forward_phase, nullptr);
        }
    }
    for (std::uint32_t i = 0; i < dependents.size(); ++i) {
        try {
            resolve_promise(dependents[i], normalized, resolver, errored, p.get(), i);
        } catch (const error& e) {
            if (e.code() != errc::already_resolved)
                throw;
        }
    }
}

} // namespace snapactor
