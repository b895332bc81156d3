// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "snapactor/buffer.hpp"
#include "snapactor/errors.hpp"
#include "snapactor/format.hpp"
#include "snapactor/types.hpp"
#include "snapactor/value.hpp"

namespace snapactor {

class actor_system;
class snapshot_backend;
class snapshot_restorer;
class turn_context;

/// Asynchronous send. `sender_phase` is stamped when the message is created
/// and rewritten when a promise forwards it; `msg_no` is the per-receiving-
/// actor sequence number assigned at enqueue time.
struct message {
    value receiver;
    std::string selector;
    std::vector<value> args;
    promise_ptr result_promise; // absent for one-way sends
    actor_id sender = 0;
    std::uint64_t sender_phase = 0;
    std::uint64_t msg_no = 0;
    std::uint64_t stale_marked_snapshot = 0;
};

using message_ptr = std::unique_ptr<message>;

enum class promise_state : std::uint8_t { unresolved = 0, resolved = 1, errored = 2 };

/// Owner-local placeholder for an asynchronous result. Messages sent to it
/// accumulate while unresolved; promises passed across an actor boundary are
/// chained instead of shared. `mu` guards state, the accumulated list and
/// the serialized-unresolved bookkeeping so the racy-resolution check is
/// atomic with the state change.
struct promise_box {
    std::uint64_t id = 0;
    actor_id owner = 0;

    std::mutex mu;
    promise_state state = promise_state::unresolved;
    value result;
    std::vector<message_ptr> accumulated;
    std::vector<promise_ptr> chained;
    std::function<void(const value&, bool)> host_callback;

    // Set while the active snapshot holds this promise as an unresolved
    // record; cleared implicitly when the next snapshot begins.
    std::uint64_t serialized_unresolved_snapshot = 0;
    std::uint64_t serialized_ref_word = k_placeholder_ref;
    std::uint32_t serialized_chained_count = 0;
};

/// A far-referenced object handed to its owner for serialization, together
/// with the buffer location where the resulting reference word belongs.
struct deferred_serialization {
    object_record* object = nullptr;
    promise_ptr promise; // set instead of `object` for foreign promises
    std::uint16_t patch_buffer = 0;
    std::uint64_t patch_offset = 0;
};

struct actor {
    actor(actor_id id, std::uint64_t phase) : id(id), local_phase(phase) {}

    actor_id id;

    // Mailbox: multi-producer, consumed only by the owning worker.
    std::mutex mail_mu;
    std::deque<message_ptr> mailbox;
    std::uint64_t next_msg_no = 1; // msg_no 0 is reserved for the roots entry

    std::atomic<std::uint64_t> local_phase;
    std::atomic<bool> scheduled{false};
    bool in_turn = false; // owner-thread only

    value root;
    std::vector<value> roots;
    std::vector<std::unique_ptr<object_record>> heap;

    std::mutex deferred_mu;
    std::deque<deferred_serialization> deferred;
};

using method = std::function<value(turn_context&, std::span<const value>)>;

struct resolved_result {
    value result;
    bool errored = false;
};

/// Per-snapshot timing and size report.
struct snapshot_report {
    std::uint64_t id = 0;
    std::uint64_t phase = 0;
    std::filesystem::path path;
    std::uint64_t bytes = 0;
    std::uint64_t fixpoint_rounds = 0;
    std::uint64_t registry_entries = 0;
    std::uint64_t resolution_entries = 0;
    std::int64_t trigger_us = 0;  // steady-clock timestamp at trigger
    std::int64_t complete_us = 0; // capture completion
    std::int64_t written_us = 0;  // file rename done (0 when unwritten)
};

struct system_config {
    unsigned workers = 2;
    /// Single worker plus ordered completion; identical programs produce
    /// identical snapshot bytes.
    bool deterministic = false;
    /// Aborts the run after this many turns. Test aid; 0 means unlimited.
    std::uint64_t max_turns = 0;
    /// Messages processed per scheduler activation before requeueing.
    unsigned activation_batch = 128;
};

/// Observer invoked once per processed message: receiver actor, the message,
/// whether it was captured into the active snapshot, the actor's phase at
/// turn start, the global phase, and whether a snapshot was active.
using turn_observer =
    std::function<void(actor_id, const message&, bool captured, std::uint64_t local_phase,
                       std::uint64_t global_phase, bool snapshot_active)>;

namespace detail {
inline thread_local int tl_worker_id = -1;
inline thread_local actor* tl_current_actor = nullptr;
} // namespace detail

/// Communicating event loops over a shared worker pool, with asynchronous
/// snapshot support from snapshot_backend. Construct, register types and
/// behaviors, spawn, start(), then drive with sends.
class actor_system {
public:
    explicit actor_system(system_config cfg = {});
    ~actor_system();

    actor_system(const actor_system&) = delete;
    actor_system& operator=(const actor_system&) = delete;

    // -- types and behaviors ------------------------------------------------

    type_table& types() { return types_; }
    const type_table& types() const { return types_; }

    const type_tag& register_type(std::string_view name, std::uint32_t arity,
                                  type_kind kind = type_kind::object) {
        return types_.register_type(name, arity, kind);
    }

    /// Registers the type if new (validating arity otherwise) and attaches
    /// methods. Behaviors are matched by type and selector name on restore,
    /// so register the same tables before loading a snapshot.
    void add_behavior(std::string_view type_name, std::uint32_t arity,
                      std::map<std::string, method> methods) {
        if (started_)
            raise(errc::invalid_state, "behaviors must be registered before start");
        const type_tag* tag = types_.find(type_name);
        if (!tag)
            tag = &types_.register_type(type_name, arity);
        else if (tag->arity != arity)
            raise(errc::arity_mismatch, std::string(type_name));
        auto& table = methods_[tag->id];
        for (auto& [sel, fn] : methods)
            table[sel] = std::move(fn);
    }

    void add_method(std::string_view type_name, std::string_view selector, method fn) {
        if (started_)
            raise(errc::invalid_state, "behaviors must be registered before start");
        const type_tag& tag = types_.by_name(type_name);
        methods_[tag.id][std::string(selector)] = std::move(fn);
    }

    // -- lifecycle ----------------------------------------------------------

    void start();
    void stop();
    bool started() const { return started_; }
    bool stopped() const { return stopped_; }

    // -- actors and heaps ---------------------------------------------------

    /// Fresh actor whose root object has the given type; returns a far
    /// reference to the root. Fields cross into the new actor's heap.
    value spawn(std::string_view root_type, std::vector<value> root_fields = {});

    value new_object(actor_id owner, const type_tag& tag, std::vector<value> fields);
    value new_object(actor_id owner, std::string_view type_name, std::vector<value> fields) {
        return new_object(owner, types_.by_name(type_name), std::move(fields));
    }
    value new_array(actor_id owner, std::vector<value> elems);

    value get_field(actor_id accessor, const value& obj, std::size_t index) const;
    void set_field(actor_id accessor, const value& obj, std::size_t index, value v);
    std::size_t field_count(const value& obj) const;

    /// State not reachable from any message or far reference is captured only
    /// if registered here. Values are normalized to the owner's perspective.
    void register_roots(actor_id owner, std::vector<value> roots);

    value make_promise(actor_id owner);

    // -- sends and promises -------------------------------------------------

    /// Host-side asynchronous send, acting as the main actor.
    value send(const value& target, std::string_view selector, std::vector<value> args = {}) {
        return send_core(k_main_actor, host_phase(), target, std::string(selector),
                         std::move(args), true, nullptr);
    }
    /// One-way host-side send (no result promise).
    void tell(const value& target, std::string_view selector, std::vector<value> args = {}) {
        send_core(k_main_actor, host_phase(), target, std::string(selector), std::move(args),
                  false, nullptr);
    }

    value pass_across_boundary(const value& v, actor_id receiver);

    /// Direct resolution of a promise the caller holds (host side, or the
    /// current actor when called from inside a turn).
    void resolve(const value& promise, value v, bool errored = false) {
        if (!promise.is_promise())
            raise(errc::invalid_state, "resolve target is not a promise");
        resolve_promise(promise.as_promise(), std::move(v), resolver_context{current_actor()},
                        errored, nullptr, 0);
    }

    resolved_result await_value(const value& promise,
                                std::chrono::milliseconds timeout = std::chrono::seconds(30));
    void when_resolved(const value& promise, std::function<void(const value&, bool)> fn);

    bool await_idle(std::chrono::milliseconds timeout = std::chrono::seconds(30));

    // -- snapshots ------------------------------------------------------------

    /// Starts a new snapshot: increments the global phase and arms completion
    /// detection. When `path` is given the finished snapshot is written there
    /// by the backend thread. Fails with SnapshotInProgress while one is
    /// active.
    std::uint64_t trigger_snapshot(std::optional<std::filesystem::path> path = {});
    snapshot_report await_snapshot(std::uint64_t id,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(60));
    /// Writes an already-completed snapshot that was triggered without a
    /// path. InvalidState before completion.
    snapshot_report finalize_to(const std::filesystem::path& path);

    bool snapshot_active() const;
    std::uint64_t global_phase() const;
    snapshot_backend& backend() { return *backend_; }

    // -- test and instrumentation hooks -------------------------------------

    void set_turn_observer(turn_observer obs) { observer_ = std::move(obs); }
    /// Arms a snapshot trigger that fires right before the n-th processed
    /// message (1-based, counted across all actors).
    void set_trigger_at_turn(std::uint64_t n, std::optional<std::filesystem::path> path = {}) {
        trigger_turn_.store(n, std::memory_order_relaxed);
        trigger_path_ = std::move(path);
    }
    void set_resolution_records_enabled(bool on);
    std::uint64_t turns_processed() const { return turn_counter_.load(std::memory_order_relaxed); }

    // -- introspection (safe when stopped or from the owner's turn) ----------

    std::size_t actor_count() const {
        std::lock_guard lock(actors_mu_);
        return actors_.size();
    }
    std::vector<actor_id> actor_ids() const {
        std::lock_guard lock(actors_mu_);
        std::vector<actor_id> ids;
        for (const auto& a : actors_)
            if (a)
                ids.push_back(a->id);
        return ids;
    }
    bool has_actor(actor_id id) const {
        std::lock_guard lock(actors_mu_);
        return id < actors_.size() && actors_[id] != nullptr;
    }
    value actor_root_far(actor_id id) {
        actor& a = actor_ref(id);
        if (!a.root.is_object_like())
            raise(errc::invalid_state, "actor has no root object");
        return value::far(id, a.root.as_object());
    }
    std::vector<value> roots_of(actor_id id) { return actor_ref(id).roots; }
    std::uint64_t local_phase_of(actor_id id) {
        return actor_ref(id).local_phase.load(std::memory_order_acquire);
    }
    std::size_t mailbox_size(actor_id id) {
        actor& a = actor_ref(id);
        std::lock_guard lock(a.mail_mu);
        return a.mailbox.size();
    }

private:
    friend class turn_context;
    friend class snapshot_backend;
    friend class snapshot_restorer;

    struct task {
        actor* a = nullptr;
        bool sentinel = false;
        std::uint64_t snapshot_id = 0;
    };

    struct resolver_context {
        actor* a = nullptr; // null: acting from the host (always current phase)
    };

    // defined in capture.hpp (they drive the snapshot backend)
    void deliver(actor_id to, value receiver, std::string selector, std::vector<value> args,
                 bool want_promise, promise_ptr existing, actor_id sender,
                 std::uint64_t sender_phase, promise_ptr* out_promise);
    void run_activation(actor& a);
    void worker_main(unsigned worker_id);
    void resolve_promise(const promise_ptr& p, value v, resolver_context resolver, bool errored,
                         promise_box* parent, std::uint32_t chain_index);
    std::uint64_t host_phase() const;

    value send_core(actor_id sender, std::uint64_t sender_phase, const value& target,
                    std::string selector, std::vector<value> args, bool want_promise,
                    promise_ptr existing) {
        switch (target.kind()) {
        case value_kind::object:
        case value_kind::array: {
            object_record* rec = target.as_object();
            promise_ptr out;
            deliver(rec->owner, target, std::move(selector), std::move(args), want_promise,
                    std::move(existing), sender, sender_phase, &out);
            return out ? value::promise(out) : value::null();
        }
        case value_kind::far: {
            const far_ref& f = target.as_far();
            promise_ptr out;
            deliver(f.owner, value::object(f.target), std::move(selector), std::move(args),
                    want_promise, std::move(existing), sender, sender_phase, &out);
            return out ? value::promise(out) : value::null();
        }
        case value_kind::promise: {
            const promise_ptr& p = target.as_promise();
            {
                std::lock_guard lock(p->mu);
                if (p->state == promise_state::unresolved) {
                    if (p->owner != sender)
                        raise(errc::foreign_access,
                              "only the owner may send to an unresolved promise");
                    auto m = std::make_unique<message>();
                    // the eventual receiver is the resolution value; keeping
                    // the promise here would make a shared_ptr cycle
                    m->receiver = value::null();
                    m->selector = std::move(selector);
                    m->args = std::move(args);
                    m->sender = sender;
                    m->sender_phase = sender_phase;
                    if (existing)
                        m->result_promise = std::move(existing);
                    else if (want_promise)
                        m->result_promise = make_promise_box(sender);
                    promise_ptr out = m->result_promise;
                    p->accumulated.push_back(std::move(m));
                    return out ? value::promise(out) : value::null();
                }
            }
            value settled;
            bool err;
            {
                std::lock_guard lock(p->mu);
                settled = p->result;
                err = p->state == promise_state::errored;
            }
            if (err) {
                // a smashed promise smashes the send's result as well
                promise_ptr rp = existing ? std::move(existing)
                                          : (want_promise ? make_promise_box(sender) : nullptr);
                if (rp)
                    resolve_promise(rp, settled, resolver_context{current_actor()}, true, nullptr,
                                    0);
                return rp ? value::promise(rp) : value::null();
            }
            return send_core(sender, sender_phase, settled, std::move(selector), std::move(args),
                             want_promise, std::move(existing));
        }
        default: {
            // primitives execute in the sender's own event loop
            promise_ptr out;
            deliver(sender, target, std::move(selector), std::move(args), want_promise,
                    std::move(existing), sender, sender_phase, &out);
            return out ? value::promise(out) : value::null();
        }
        }
    }

    promise_ptr make_promise_box(actor_id owner) {
        auto p = std::make_shared<promise_box>();
        p->id = next_promise_id_.fetch_add(1, std::memory_order_relaxed);
        p->owner = owner;
        return p;
    }

    /// Chained promise for a promise that crosses to another actor: the
    /// receiver-local promise resolves when the original does.
    value chain_for(const promise_ptr& p, actor_id receiver) {
        promise_ptr q = make_promise_box(receiver);
        value settled;
        bool err;
        {
            std::lock_guard lock(p->mu);
            if (p->state == promise_state::unresolved) {
                p->chained.push_back(q);
                return value::promise(q);
            }
            settled = p->result;
            err = p->state == promise_state::errored;
        }
        resolve_promise(q, settled, resolver_context{current_actor()}, err, nullptr, 0);
        return value::promise(q);
    }

    actor* current_actor() const { return detail::tl_current_actor; }

    actor& actor_ref(actor_id id) const {
        std::lock_guard lock(actors_mu_);
        if (id >= actors_.size() || !actors_[id])
            raise(errc::invalid_state, "no actor " + std::to_string(id));
        return *actors_[id];
    }

    actor& ensure_actor(actor_id id) {
        std::lock_guard lock(actors_mu_);
        if (id >= actors_.size())
            actors_.resize(id + 1);
        if (!actors_[id]) {
            actors_[id] = std::make_unique<actor>(id, global_phase());
            if (next_actor_id_ <= id)
                next_actor_id_ = id + 1;
        }
        return *actors_[id];
    }

    object_record* alloc_object(actor& a, const type_tag& tag, std::vector<value> fields) {
        auto rec = std::make_unique<object_record>();
        rec->tag = &tag;
        rec->owner = a.id;
        rec->fields = std::move(fields);
        object_record* ptr = rec.get();
        a.heap.push_back(std::move(rec));
        return ptr;
    }

    void check_heap_access(actor_id owner, bool write) const {
        if (!started_ || stopped_)
            return; // build and restore contexts
        actor* cur = detail::tl_current_actor;
        if (!cur || cur->id != owner)
            raise(errc::foreign_access,
                  std::string(write ? "write" : "read") + " of actor " + std::to_string(owner) +
                      " state outside its own turn");
        if (write && !cur->in_turn)
            raise(errc::foreign_access, "heap writes are only legal inside a turn");
    }

    void schedule(actor& a) {
        if (a.scheduled.exchange(true, std::memory_order_acq_rel))
            return;
        {
            std::lock_guard lock(sched_mu_);
            ready_.push_back(task{&a});
        }
        sched_cv_.notify_one();
    }

    const method* find_method(std::uint32_t tag_id, const std::string& selector) const {
        auto it = methods_.find(tag_id);
        if (it == methods_.end())
            return nullptr;
        auto jt = it->second.find(selector);
        return jt == it->second.end() ? nullptr : &jt->second;
    }

    const type_tag& receiver_tag(const value& receiver) const {
        switch (receiver.kind()) {
        case value_kind::null: return types_.by_id(builtin_type::null_v);
        case value_kind::boolean: return types_.by_id(builtin_type::bool_v);
        case value_kind::integer: return types_.by_id(builtin_type::int_v);
        case value_kind::real: return types_.by_id(builtin_type::float_v);
        case value_kind::text: return types_.by_id(builtin_type::text);
        case value_kind::object:
        case value_kind::array: return *receiver.as_object()->tag;
        default:
            raise(errc::invalid_state, "far references and promises never execute turns");
        }
    }

    void execute_turn(actor& a, message& m);

    // configuration & registries
    system_config cfg_;
    type_table types_;
    std::unordered_map<std::uint32_t, std::map<std::string, method, std::less<>>> methods_;

    // actors (index == id; slots are never removed)
    mutable std::mutex actors_mu_;
    std::vector<std::unique_ptr<actor>> actors_;
    actor_id next_actor_id_ = 0;
    std::atomic<std::uint64_t> next_promise_id_{1};

    // scheduler
    std::mutex sched_mu_;
    std::condition_variable sched_cv_;
    std::condition_variable idle_cv_;
    std::deque<task> ready_;
    std::vector<std::thread> workers_;
    unsigned executing_ = 0;
    bool stop_requested_ = false;
    std::vector<std::unique_ptr<std::atomic<std::uint64_t>>> worker_done_count_;
    std::vector<std::unique_ptr<std::atomic<bool>>> worker_busy_;

    std::atomic<bool> started_{false};
    std::atomic<bool> stopped_{false};
    std::atomic<bool> failed_{false};
    std::string failure_;

    std::atomic<std::uint64_t> turn_counter_{0};
    std::atomic<std::uint64_t> trigger_turn_{0};
    std::optional<std::filesystem::path> trigger_path_;
    turn_observer observer_;

    std::unique_ptr<snapshot_backend> backend_;
};

/// Per-turn view handed to behaviors: the receiving actor's identity, heap
/// operations, sends and promise resolution.
class turn_context {
public:
    turn_context(actor_system& sys, actor& a, message* m) : sys_(sys), actor_(a), msg_(m) {}

    actor_id self() const { return actor_.id; }
    actor_system& system() { return sys_; }

    const message& msg() const {
        if (!msg_)
            raise(errc::invalid_state, "no message in this context");
        return *msg_;
    }
    value receiver() const { return msg().receiver; }
    value root() const { return actor_.root; }
    value self_far() const {
        if (!actor_.root.is_object_like())
            raise(errc::invalid_state, "actor has no root object");
        return value::far(actor_.id, actor_.root.as_object());
    }

    value make_object(std::string_view type_name, std::vector<value> fields) {
        return sys_.new_object(actor_.id, type_name, std::move(fields));
    }
    value make_array(std::vector<value> elems) {
        return sys_.new_array(actor_.id, std::move(elems));
    }
    value get(const value& obj, std::size_t i) const {
        return sys_.get_field(actor_.id, obj, i);
    }
    void set(const value& obj, std::size_t i, value v) {
        sys_.set_field(actor_.id, obj, i, std::move(v));
    }
    std::size_t size(const value& obj) const { return sys_.field_count(obj); }

    value send(const value& target, std::string_view selector, std::vector<value> args = {}) {
        return sys_.send_core(actor_.id, actor_.local_phase.load(std::memory_order_relaxed),
                              target, std::string(selector), std::move(args), true, nullptr);
    }
    void tell(const value& target, std::string_view selector, std::vector<value> args = {}) {
        sys_.send_core(actor_.id, actor_.local_phase.load(std::memory_order_relaxed), target,
                       std::string(selector), std::move(args), false, nullptr);
    }

    value spawn(std::string_view root_type, std::vector<value> root_fields = {}) {
        return sys_.spawn(root_type, std::move(root_fields));
    }

    value make_promise() { return sys_.make_promise(actor_.id); }

    /// Direct resolution of a promise this behavior holds; the race the
    /// snapshot backend repairs comes from exactly this path.
    void resolve(const value& promise, value v, bool errored = false) {
        if (!promise.is_promise())
            raise(errc::invalid_state, "resolve target is not a promise");
        sys_.resolve_promise(promise.as_promise(), std::move(v),
                             actor_system::resolver_context{&actor_}, errored, nullptr, 0);
    }

    void register_roots(std::vector<value> roots) {
        sys_.register_roots(actor_.id, std::move(roots));
    }

private:
    actor_system& sys_;
    actor& actor_;
    message* msg_;
};

// ---------------------------------------------------------------------------
// inline definitions that do not touch the snapshot backend

inline value actor_system::spawn(std::string_view root_type, std::vector<value> root_fields) {
    const type_tag& tag = types_.by_name(root_type);
    if (tag.arity != root_fields.size())
        raise(errc::arity_mismatch, std::string(root_type) + " expects " +
                                        std::to_string(tag.arity) + " fields");
    actor_id id;
    actor* a;
    {
        std::lock_guard lock(actors_mu_);
        id = next_actor_id_++;
        if (id >= actors_.size())
            actors_.resize(id + 1);
        actors_[id] = std::make_unique<actor>(id, global_phase());
        a = actors_[id].get();
    }
    std::vector<value> fields;
    fields.reserve(root_fields.size());
    for (auto& f : root_fields)
        fields.push_back(pass_across_boundary(f, id));
    object_record* rec = alloc_object(*a, tag, std::move(fields));
    a->root = value::object(rec);
    a->roots.push_back(a->root);
    return value::far(id, rec);
}

inline value actor_system::new_object(actor_id owner, const type_tag& tag,
                                      std::vector<value> fields) {
    if (tag.kind == type_kind::array)
        raise(errc::invalid_state, "use new_array for arrays");
    if (fields.size() != tag.arity)
        raise(errc::arity_mismatch, tag.name + " expects " + std::to_string(tag.arity) +
                                        " fields, got " + std::to_string(fields.size()));
    check_heap_access(owner, true);
    return value::object(alloc_object(actor_ref(owner), tag, std::move(fields)));
}

inline value actor_system::new_array(actor_id owner, std::vector<value> elems) {
    check_heap_access(owner, true);
    return value::object(
        alloc_object(actor_ref(owner), types_.by_id(builtin_type::array), std::move(elems)));
}

inline value actor_system::get_field(actor_id accessor, const value& obj,
                                     std::size_t index) const {
    if (obj.is_far())
        raise(errc::foreign_access, "far references permit only asynchronous sends");
    if (!obj.is_object_like())
        raise(errc::invalid_state, "value has no fields");
    object_record* rec = obj.as_object();
    if (rec->owner != accessor)
        raise(errc::foreign_access, "object is owned by actor " + std::to_string(rec->owner));
    check_heap_access(rec->owner, false);
    if (index >= rec->fields.size())
        raise(errc::out_of_bounds, "field " + std::to_string(index));
    return rec->fields[index];
}

inline void actor_system::set_field(actor_id accessor, const value& obj, std::size_t index,
                                    value v) {
    if (obj.is_far())
        raise(errc::foreign_access, "far references permit only asynchronous sends");
    if (!obj.is_object_like())
        raise(errc::invalid_state, "value has no fields");
    object_record* rec = obj.as_object();
    if (rec->owner != accessor)
        raise(errc::foreign_access, "object is owned by actor " + std::to_string(rec->owner));
    check_heap_access(rec->owner, true);
    if (index >= rec->fields.size()) {
        if (rec->is_array() && index == rec->fields.size())
            rec->fields.push_back(std::move(v)); // arrays may grow by one
        else
            raise(errc::out_of_bounds, "field " + std::to_string(index));
        return;
    }
    rec->fields[index] = std::move(v);
}

inline std::size_t actor_system::field_count(const value& obj) const {
    if (!obj.is_object_like())
        raise(errc::invalid_state, "value has no fields");
    return obj.as_object()->fields.size();
}

inline void actor_system::register_roots(actor_id owner, std::vector<value> roots) {
    check_heap_access(owner, true);
    actor& a = actor_ref(owner);
    for (auto& r : roots)
        a.roots.push_back(pass_across_boundary(r, owner));
}

inline value actor_system::make_promise(actor_id owner) {
    return value::promise(make_promise_box(owner));
}

inline value actor_system::pass_across_boundary(const value& v, actor_id receiver) {
    switch (v.kind()) {
    case value_kind::object:
    case value_kind::array: {
        object_record* rec = v.as_object();
        return rec->owner == receiver ? v : value::far(rec->owner, rec);
    }
    case value_kind::promise: {
        const promise_ptr& p = v.as_promise();
        return p->owner == receiver ? v : chain_for(p, receiver);
    }
    default:
        return v; // primitives, text and far references pass unchanged
    }
}

inline resolved_result actor_system::await_value(const value& promise,
                                                 std::chrono::milliseconds timeout) {
    if (!promise.is_promise())
        raise(errc::invalid_state, "await target is not a promise");
    const promise_ptr& p = promise.as_promise();
    struct waiter {
        std::mutex m;
        std::condition_variable cv;
        bool done = false;
        value val;
        bool err = false;
    };
    auto w = std::make_shared<waiter>();
    {
        std::lock_guard lock(p->mu);
        if (p->state != promise_state::unresolved)
            return {p->result, p->state == promise_state::errored};
        auto prev = std::move(p->host_callback);
        p->host_callback = [prev, w](const value& val, bool err) {
            if (prev)
                prev(val, err);
            {
                std::lock_guard lk(w->m);
                w->val = val;
                w->err = err;
                w->done = true;
            }
            w->cv.notify_all();
        };
    }
    std::unique_lock lk(w->m);
    if (!w->cv.wait_for(lk, timeout, [&] { return w->done; }))
        raise(errc::invalid_state, "await_value timed out");
    return {w->val, w->err};
}

inline void actor_system::when_resolved(const value& promise,
                                        std::function<void(const value&, bool)> fn) {
    if (!promise.is_promise())
        raise(errc::invalid_state, "target is not a promise");
    const promise_ptr& p = promise.as_promise();
    value settled;
    bool err = false;
    {
        std::lock_guard lock(p->mu);
        if (p->state == promise_state::unresolved) {
            auto prev = std::move(p->host_callback);
            p->host_callback = [prev, fn](const value& val, bool e) {
                if (prev)
                    prev(val, e);
                fn(val, e);
            };
            return;
        }
        settled = p->result;
        err = p->state == promise_state::errored;
    }
    fn(settled, err);
}

inline bool actor_system::await_idle(std::chrono::milliseconds timeout) {
    std::unique_lock lk(sched_mu_);
    bool ok = idle_cv_.wait_for(lk, timeout, [&] {
        return (ready_.empty() && executing_ == 0) || failed_.load();
    });
    if (failed_.load())
        raise(errc::turn_budget_exhausted, failure_);
    return ok;
}

inline void actor_system::execute_turn(actor& a, message& m) {
    a.in_turn = true;
    turn_context ctx(*this, a, &m);
    value result;
    bool errored = false;
    const type_tag& tag = receiver_tag(m.receiver);
    const method* fn = find_method(tag.id, m.selector);
    if (!fn) {
        result = value::text("no method '" + m.selector + "' on " + tag.name);
        errored = true;
    } else {
        try {
            result = (*fn)(ctx, std::span<const value>(m.args));
        } catch (const std::exception& e) {
            result = value::text(e.what());
            errored = true;
        } catch (...) {
            result = value::text("unknown failure");
            errored = true;
        }
    }
    if (m.result_promise) {
        try {
            resolve_promise(m.result_promise, std::move(result), resolver_context{&a}, errored,
                            nullptr, 0);
        } catch (const error& e) {
            // a behavior may have resolved its own result promise already
            if (e.code() != errc::already_resolved)
                throw;
        }
    }
    a.in_turn = false;
}

} // namespace snapactor
