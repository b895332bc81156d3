// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "snapactor/buffer.hpp"
#include "snapactor/errors.hpp"
#include "snapactor/ref.hpp"
#include "snapactor/types.hpp"

namespace snapactor {

// Snapshot file layout, all little-endian:
//
//   magic "ASNP" | u32 version | u64 total file size
//   MessageRegistry:  u64 count, entries { u64 actorId, u64 msgNo, u64 ref }
//   Resolutions:      u64 count, entries { u64 resolverRef, u64 resultRef,
//                                          u64 actorId, u8 state }
//   TypeTable:        u64 count, rows { u32 id, u32 nameLen, bytes,
//                                       u32 arity, u8 kind }
//   HeapMap:          u64 count, entries { u16 bufferId, u64 fileOffset }
//   Heaps:            buffer images, concatenated in buffer-id order
//
// Records inside buffers start with a u32 type id. Payloads:
//   Null: -                         Bool: u8
//   Int: i64                        Float: f64 bits
//   Text: u32 len + bytes           Array/Roots: u32 len + len ref words
//   Object: arity ref words (arity comes from the type table)
//   FarRef: u64 ownerActor + u64 target ref word
//   Promise: u64 ownerActor, u8 state, [u64 value ref when resolved/errored],
//            u32 accumulated count + refs, u32 chained count + refs
//   Message: u64 receiver ref, u64 selector ref, u32 argc + arg refs,
//            u8 hasResultPromise [+ u64 promise ref], u64 senderPhase,
//            u64 msgNo

inline constexpr char k_snapshot_magic[4] = {'A', 'S', 'N', 'P'};
inline constexpr std::uint32_t k_snapshot_version = 1;

struct message_registry_entry {
    actor_id actor = 0;
    std::uint64_t msg_no = 0;
    std::uint64_t location = 0; // encoded ref word

    friend bool operator==(const message_registry_entry&,
                           const message_registry_entry&) = default;
};

struct resolution_entry {
    std::uint64_t resolver = 0; // ref word of the promise record
    std::uint64_t result = 0;   // ref word of the value record
    actor_id actor = 0;
    std::uint8_t state = 0; // 0 success, 1 error

    friend bool operator==(const resolution_entry&, const resolution_entry&) = default;
};

struct snapshot_metadata {
    std::vector<message_registry_entry> registry;
    std::vector<resolution_entry> resolutions;
    std::vector<type_tag> types;
};

struct backpatch {
    std::uint16_t buffer_id = 0;
    std::uint64_t offset = 0;
    std::uint64_t word = 0;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64_at(std::vector<std::uint8_t>& out, std::size_t at, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

} // namespace detail

/// Serializes metadata and buffer images into one snapshot blob, applying
/// the recorded backpatches. Deterministic for identical inputs.
inline std::vector<std::uint8_t>
assemble_snapshot(const snapshot_metadata& meta,
                  const std::vector<const snapshot_buffer*>& buffers,
                  const std::vector<backpatch>& patches) {
    using namespace detail;
    std::vector<std::uint8_t> out;

    out.insert(out.end(), k_snapshot_magic, k_snapshot_magic + 4);
    put_u32(out, k_snapshot_version);
    std::size_t size_slot = out.size();
    put_u64(out, 0); // total size, patched at the end

    put_u64(out, meta.registry.size());
    for (const auto& e : meta.registry) {
        put_u64(out, e.actor);
        put_u64(out, e.msg_no);
        put_u64(out, e.location);
    }

    put_u64(out, meta.resolutions.size());
    for (const auto& e : meta.resolutions) {
        put_u64(out, e.resolver);
        put_u64(out, e.result);
        put_u64(out, e.actor);
        out.push_back(e.state);
    }

    put_u64(out, meta.types.size());
    for (const auto& t : meta.types) {
        put_u32(out, t.id);
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        put_u32(out, t.arity);
        out.push_back(static_cast<std::uint8_t>(t.kind));
    }

    // Empty buffers are elided from the heap map.
    std::vector<const snapshot_buffer*> live;
    for (const auto* b : buffers)
        if (b && !b->empty())
            live.push_back(b);
    std::sort(live.begin(), live.end(),
              [](const snapshot_buffer* a, const snapshot_buffer* b) { return a->id() < b->id(); });

    put_u64(out, live.size());
    std::size_t heap_map_at = out.size();
    for (const auto* b : live) {
        put_u16(out, b->id());
        put_u64(out, 0); // start offset, filled below
    }

    std::map<std::uint16_t, std::size_t> starts;
    std::size_t slot = heap_map_at;
    for (const auto* b : live) {
        starts[b->id()] = out.size();
        put_u64_at(out, slot + 2, out.size());
        slot += 10;
        out.insert(out.end(), b->bytes().begin(), b->bytes().end());
    }

    for (const auto& p : patches) {
        auto it = starts.find(p.buffer_id);
        if (it == starts.end())
            raise(errc::unknown_buffer, "backpatch names buffer " + std::to_string(p.buffer_id));
        put_u64_at(out, it->second + p.offset, p.word);
    }

    put_u64_at(out, size_slot, out.size());
    return out;
}

/// Test hook: invoked with the running byte count while the temp file is
/// written. Throwing simulates a crash mid-write.
using write_fault_hook = std::function<void(std::size_t bytes_written)>;

/// Writes the blob to `path` via a temp file in the same directory, renamed
/// into place only once fully written. An interrupted write leaves the
/// destination untouched.
inline void write_snapshot_file(const std::vector<std::uint8_t>& blob,
                                const std::filesystem::path& path,
                                const write_fault_hook& fault = {}) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            raise(errc::io_error, "cannot open " + tmp.string());
        constexpr std::size_t chunk = 1 << 20;
        std::size_t done = 0;
        while (done < blob.size()) {
            std::size_t n = std::min(chunk, blob.size() - done);
            f.write(reinterpret_cast<const char*>(blob.data() + done),
                    static_cast<std::streamsize>(n));
            done += n;
            if (fault) {
                try {
                    fault(done);
                } catch (...) {
                    f.close();
                    std::error_code ec;
                    fs::remove(tmp, ec);
                    throw;
                }
            }
        }
        f.flush();
        if (!f)
            raise(errc::io_error, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        raise(errc::io_error, "rename to " + path.string() + " failed");
    }
}

inline void write_snapshot(const snapshot_metadata& meta,
                           const std::vector<const snapshot_buffer*>& buffers,
                           const std::vector<backpatch>& patches,
                           const std::filesystem::path& path,
                           const write_fault_hook& fault = {}) {
    write_snapshot_file(assemble_snapshot(meta, buffers, patches), path, fault);
}

enum class record_kind : std::uint8_t {
    null_v,
    bool_v,
    int_v,
    float_v,
    text,
    array,
    object,
    far_ref,
    promise,
    message,
    roots,
};

struct decoded_record {
    std::uint64_t start = 0;
    std::uint64_t end = 0; // one past the last payload byte
    std::uint32_t type_id = 0;
    record_kind kind = record_kind::null_v;

    bool bool_v = false;
    std::int64_t int_v = 0;
    double float_v = 0;
    std::string_view text;

    std::vector<std::uint64_t> refs; // object fields / array elems / roots

    std::uint64_t far_owner = 0;
    std::uint64_t far_target = 0;

    std::uint64_t prom_owner = 0;
    std::uint8_t prom_state = 0;
    std::uint64_t prom_value = 0;
    std::vector<std::uint64_t> prom_accumulated;
    std::vector<std::uint64_t> prom_chained;

    std::uint64_t msg_receiver = 0;
    std::uint64_t msg_selector = 0;
    std::vector<std::uint64_t> msg_args;
    std::optional<std::uint64_t> msg_result_promise;
    std::uint64_t msg_sender_phase = 0;
    std::uint64_t msg_no = 0;

    /// Every reference word this record carries, for graph walks.
    std::vector<std::uint64_t> all_refs() const {
        std::vector<std::uint64_t> out = refs;
        auto add = [&](std::uint64_t w) { out.push_back(w); };
        if (kind == record_kind::far_ref)
            add(far_target);
        if (kind == record_kind::promise) {
            if (prom_state != 0)
                add(prom_value);
            for (auto w : prom_accumulated)
                add(w);
            for (auto w : prom_chained)
                add(w);
        }
        if (kind == record_kind::message) {
            add(msg_receiver);
            add(msg_selector);
            for (auto w : msg_args)
                add(w);
            if (msg_result_promise)
                add(*msg_result_promise);
        }
        return out;
    }
};

/// Immutable in-memory view of a parsed snapshot file. Record access is lazy
/// and bounds-checked; views can be shared across threads.
class parsed_snapshot {
public:
    static parsed_snapshot from_file(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            raise(errc::io_error, "cannot open " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
        return parsed_snapshot(std::move(bytes));
    }

    explicit parsed_snapshot(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
        parse();
    }

    const snapshot_metadata& metadata() const { return meta_; }
    const std::vector<std::pair<std::uint16_t, std::uint64_t>>& heap_map() const {
        return heap_map_;
    }
    std::uint64_t file_size() const { return bytes_.size(); }
    std::uint64_t heaps_begin() const { return heaps_begin_; }

    /// Absolute file offset for a reference word.
    std::uint64_t resolve(std::uint64_t ref_word) const {
        snapshot_ref r = decode_ref(ref_word);
        auto it = std::lower_bound(heap_map_.begin(), heap_map_.end(), r.buffer_id,
                                   [](const auto& e, std::uint16_t id) { return e.first < id; });
        if (it == heap_map_.end() || it->first != r.buffer_id)
            raise(errc::unknown_buffer, "buffer " + std::to_string(r.buffer_id));
        std::uint64_t end = buffer_end(it - heap_map_.begin());
        std::uint64_t at = it->second + r.offset;
        if (at >= end)
            raise(errc::out_of_bounds, "ref beyond buffer end");
        return at;
    }

    decoded_record decode_at(std::uint64_t at) const {
        cursor c{*this, at};
        decoded_record rec;
        rec.start = at;
        rec.type_id = c.u32();
        if (rec.type_id >= meta_.types.size())
            raise(errc::corrupt_counts, "record type id " + std::to_string(rec.type_id));
        const type_tag& tag = meta_.types[rec.type_id];
        rec.kind = kind_of(tag);
        switch (rec.kind) {
        case record_kind::null_v:
            break;
        case record_kind::bool_v:
            rec.bool_v = c.u8() != 0;
            break;
        case record_kind::int_v:
            rec.int_v = static_cast<std::int64_t>(c.u64());
            break;
        case record_kind::float_v: {
            std::uint64_t bits = c.u64();
            std::memcpy(&rec.float_v, &bits, sizeof rec.float_v);
            break;
        }
        case record_kind::text: {
            std::uint32_t n = c.u32();
            rec.text = c.view(n);
            break;
        }
        case record_kind::array:
        case record_kind::roots: {
            std::uint32_t n = c.u32();
            rec.refs = c.words(n);
            break;
        }
        case record_kind::object:
            rec.refs = c.words(tag.arity);
            break;
        case record_kind::far_ref:
            rec.far_owner = c.u64();
            rec.far_target = c.u64();
            break;
        case record_kind::promise: {
            rec.prom_owner = c.u64();
            rec.prom_state = c.u8();
            if (rec.prom_state != 0)
                rec.prom_value = c.u64();
            rec.prom_accumulated = c.words(c.u32());
            rec.prom_chained = c.words(c.u32());
            break;
        }
        case record_kind::message: {
            rec.msg_receiver = c.u64();
            rec.msg_selector = c.u64();
            rec.msg_args = c.words(c.u32());
            if (c.u8() != 0)
                rec.msg_result_promise = c.u64();
            rec.msg_sender_phase = c.u64();
            rec.msg_no = c.u64();
            break;
        }
        }
        rec.end = c.at;
        return rec;
    }

    decoded_record decode_ref_word(std::uint64_t ref_word) const {
        return decode_at(resolve(ref_word));
    }

    record_kind kind_of(const type_tag& tag) const {
        switch (tag.kind) {
        case type_kind::array: return record_kind::array;
        case type_kind::message: return record_kind::message;
        case type_kind::promise: return record_kind::promise;
        case type_kind::object: return record_kind::object;
        case type_kind::builtin: break;
        }
        // Builtins are matched by name so files survive re-ordered tables.
        if (tag.name == "Null") return record_kind::null_v;
        if (tag.name == "Bool") return record_kind::bool_v;
        if (tag.name == "Int") return record_kind::int_v;
        if (tag.name == "Float") return record_kind::float_v;
        if (tag.name == "Text") return record_kind::text;
        if (tag.name == "FarRef") return record_kind::far_ref;
        if (tag.name == "Roots") return record_kind::roots;
        raise(errc::unknown_type_name, "builtin " + tag.name);
    }

private:
    struct cursor {
        const parsed_snapshot& s;
        std::uint64_t at;

        void need(std::uint64_t n) const {
            if (at + n > s.bytes_.size())
                raise(errc::out_of_bounds, "record extends past end of file");
        }
        std::uint8_t u8() {
            need(1);
            return s.bytes_[at++];
        }
        std::uint16_t u16() {
            need(2);
            std::uint16_t v = static_cast<std::uint16_t>(s.bytes_[at] |
                                                         (std::uint16_t(s.bytes_[at + 1]) << 8));
            at += 2;
            return v;
        }
        std::uint32_t u32() {
            need(4);
            std::uint32_t v = 0;
            for (int i = 0; i < 4; ++i)
                v |= std::uint32_t(s.bytes_[at + i]) << (8 * i);
            at += 4;
            return v;
        }
        std::uint64_t u64() {
            need(8);
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i)
                v |= std::uint64_t(s.bytes_[at + i]) << (8 * i);
            at += 8;
            return v;
        }
        std::string_view view(std::uint32_t n) {
            need(n);
            auto sv = std::string_view(reinterpret_cast<const char*>(s.bytes_.data()) + at, n);
            at += n;
            return sv;
        }
        std::vector<std::uint64_t> words(std::uint32_t n) {
            need(std::uint64_t{n} * 8);
            std::vector<std::uint64_t> out;
            out.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i)
                out.push_back(u64());
            return out;
        }
    };

    std::uint64_t buffer_end(std::size_t idx) const {
        return idx + 1 < heap_map_.size() ? heap_map_[idx + 1].second : bytes_.size();
    }

    void parse() {
        if (bytes_.size() < 4 || std::memcmp(bytes_.data(), k_snapshot_magic, 4) != 0)
            raise(errc::bad_magic, "not a snapshot file");
        cursor c{*this, 4};
        if (bytes_.size() < 16)
            raise(errc::truncated, "header incomplete");
        std::uint32_t version = c.u32();
        if (version != k_snapshot_version)
            raise(errc::version_mismatch, "file version " + std::to_string(version));
        std::uint64_t total = c.u64();
        if (total != bytes_.size())
            raise(errc::truncated, "file size " + std::to_string(bytes_.size()) +
                                       ", header says " + std::to_string(total));

        std::uint64_t n = counted(c, 24);
        meta_.registry.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            message_registry_entry e;
            e.actor = c.u64();
            e.msg_no = c.u64();
            e.location = c.u64();
            meta_.registry.push_back(e);
        }

        n = counted(c, 25);
        meta_.resolutions.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            resolution_entry e;
            e.resolver = c.u64();
            e.result = c.u64();
            e.actor = c.u64();
            e.state = c.u8();
            meta_.resolutions.push_back(e);
        }

        n = counted(c, 13);
        for (std::uint64_t i = 0; i < n; ++i) {
            type_tag t;
            t.id = c.u32();
            std::uint32_t len = c.u32();
            if (c.at + len > bytes_.size())
                raise(errc::corrupt_counts, "type name runs past end of file");
            t.name = std::string(c.view(len));
            t.arity = c.u32();
            std::uint8_t k = c.u8();
            if (k > static_cast<std::uint8_t>(type_kind::builtin))
                raise(errc::corrupt_counts, "type kind byte " + std::to_string(k));
            t.kind = static_cast<type_kind>(k);
            if (t.id != i)
                raise(errc::corrupt_counts, "type ids not dense");
            meta_.types.push_back(std::move(t));
        }

        n = counted(c, 10);
        std::uint64_t prev = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint16_t id = c.u16();
            std::uint64_t off = c.u64();
            if (off > bytes_.size())
                raise(errc::corrupt_counts, "heap offset past end of file");
            if (i > 0 && off <= prev)
                raise(errc::corrupt_counts, "heap offsets not increasing");
            prev = off;
            heap_map_.emplace_back(id, off);
        }
        heaps_begin_ = c.at;
        if (!heap_map_.empty() && heap_map_.front().second != heaps_begin_)
            raise(errc::corrupt_counts, "first heap does not follow metadata");
        for (std::size_t i = 1; i < heap_map_.size(); ++i)
            if (heap_map_[i].first <= heap_map_[i - 1].first)
                raise(errc::corrupt_counts, "heap ids not increasing");
    }

    std::uint64_t counted(cursor& c, std::uint64_t entry_size) {
        std::uint64_t n = c.u64();
        if (n > bytes_.size() || c.at + n * entry_size > bytes_.size())
            raise(errc::corrupt_counts, "section count exceeds file size");
        return n;
    }

    std::vector<std::uint8_t> bytes_;
    snapshot_metadata meta_;
    std::vector<std::pair<std::uint16_t, std::uint64_t>> heap_map_;
    std::uint64_t heaps_begin_ = 0;
};

inline parsed_snapshot read_snapshot(const std::filesystem::path& path) {
    return parsed_snapshot::from_file(path);
}

struct validation_defect {
    std::string what;
    std::uint64_t offset = 0;
};

struct validation_report {
    std::vector<validation_defect> defects;
    std::uint64_t records_walked = 0;
    std::map<record_kind, std::uint64_t> records_by_kind;

    bool ok() const { return defects.empty(); }
};

/// Walks every record reachable from the metadata and reports structural
/// defects: unpatched placeholder words, dangling references, overlapping
/// records, registry ordering violations, duplicate registry identities and
/// unreachable heap bytes.
inline validation_report validate_snapshot(const parsed_snapshot& snap) {
    validation_report report;
    auto defect = [&](std::string what, std::uint64_t off = 0) {
        report.defects.push_back({std::move(what), off});
    };

    std::map<actor_id, std::uint64_t> last_msg_no;
    std::set<std::pair<actor_id, std::uint64_t>> seen_ids;
    for (const auto& e : snap.metadata().registry) {
        auto key = std::make_pair(e.actor, e.msg_no);
        if (!seen_ids.insert(key).second)
            defect("duplicate registry identity: actor " + std::to_string(e.actor) +
                   " msgNo " + std::to_string(e.msg_no));
        auto it = last_msg_no.find(e.actor);
        if (it != last_msg_no.end() && e.msg_no <= it->second)
            defect("registry msgNo not increasing for actor " + std::to_string(e.actor));
        last_msg_no[e.actor] = e.msg_no;
    }

    std::map<std::uint64_t, std::uint64_t> extents; // start -> end
    std::vector<std::uint64_t> work;
    auto push_ref = [&](std::uint64_t word) {
        if (is_placeholder_ref(word)) {
            defect("unpatched placeholder reference", word);
            return;
        }
        work.push_back(word);
    };

    for (const auto& e : snap.metadata().registry)
        push_ref(e.location);
    for (const auto& e : snap.metadata().resolutions) {
        push_ref(e.resolver);
        push_ref(e.result);
    }

    while (!work.empty()) {
        std::uint64_t word = work.back();
        work.pop_back();
        std::uint64_t at;
        try {
            at = snap.resolve(word);
        } catch (const error& e) {
            defect(std::string("dangling reference: ") + e.what(), word);
            continue;
        }
        if (extents.count(at))
            continue;
        decoded_record rec;
        try {
            rec = snap.decode_at(at);
        } catch (const error& e) {
            defect(std::string("undecodable record: ") + e.what(), at);
            continue;
        }
        extents[at] = rec.end;
        ++report.records_walked;
        ++report.records_by_kind[rec.kind];
        for (std::uint64_t r : rec.all_refs())
            push_ref(r);
    }

    std::uint64_t prev_end = snap.heaps_begin();
    for (const auto& [start, end] : extents) {
        if (start < prev_end)
            defect("overlapping records", start);
        else if (start > prev_end)
            defect("unreachable bytes: " + std::to_string(start - prev_end), prev_end);
        prev_end = std::max(prev_end, end);
    }
    if (prev_end < snap.file_size())
        defect("unreachable bytes at end of heaps: " +
                   std::to_string(snap.file_size() - prev_end),
               prev_end);

    return report;
}

inline const char* record_kind_name(record_kind k) {
    switch (k) {
    case record_kind::null_v: return "null";
    case record_kind::bool_v: return "bool";
    case record_kind::int_v: return "int";
    case record_kind::float_v: return "float";
    case record_kind::text: return "text";
    case record_kind::array: return "array";
    case record_kind::object: return "object";
    case record_kind::far_ref: return "farref";
    case record_kind::promise: return "promise";
    case record_kind::message: return "message";
    case record_kind::roots: return "roots";
    }
    return "?";
}

/// Human-readable walk of a snapshot, for the `snapshot dump` subcommand.
inline void dump_snapshot(const parsed_snapshot& snap, std::ostream& os) {
    const auto& meta = snap.metadata();
    os << "snapshot: " << snap.file_size() << " bytes, " << meta.registry.size()
       << " registry entries, " << meta.resolutions.size() << " resolutions, "
       << meta.types.size() << " types, " << snap.heap_map().size() << " heaps\n";
    os << "type table:\n";
    for (const auto& t : meta.types)
        os << "  [" << t.id << "] " << t.name << " arity=" << t.arity
           << " kind=" << static_cast<int>(t.kind) << "\n";
    os << "heap map:\n";
    for (const auto& [id, off] : snap.heap_map())
        os << "  buffer " << id << " @ " << off << "\n";

    std::set<std::uint64_t> visited;
    std::function<void(std::uint64_t, int)> walk = [&](std::uint64_t word, int depth) {
        std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
        if (is_placeholder_ref(word)) {
            os << pad << "<unpatched placeholder>\n";
            return;
        }
        std::uint64_t at = snap.resolve(word);
        decoded_record rec = snap.decode_at(at);
        snapshot_ref r = decode_ref(word);
        os << pad << "@" << r.buffer_id << ":" << r.offset << " "
           << record_kind_name(rec.kind);
        bool first_visit = visited.insert(at).second;
        switch (rec.kind) {
        case record_kind::bool_v: os << " " << (rec.bool_v ? "true" : "false"); break;
        case record_kind::int_v: os << " " << rec.int_v; break;
        case record_kind::float_v: os << " " << rec.float_v; break;
        case record_kind::text: os << " \"" << rec.text << "\""; break;
        case record_kind::object:
            os << " " << meta.types[rec.type_id].name;
            break;
        case record_kind::far_ref: os << " owner=" << rec.far_owner; break;
        case record_kind::promise:
            os << " owner=" << rec.prom_owner << " state=" << int(rec.prom_state);
            break;
        case record_kind::message:
            os << " phase=" << rec.msg_sender_phase << " msgNo=" << rec.msg_no;
            break;
        default: break;
        }
        if (!first_visit) {
            os << " (seen)\n";
            return;
        }
        os << "\n";
        for (std::uint64_t child : rec.all_refs())
            walk(child, depth + 1);
    };

    os << "message registry:\n";
    for (const auto& e : meta.registry) {
        os << "  actor " << e.actor << " msgNo " << e.msg_no << ":\n";
        walk(e.location, 2);
    }
    os << "resolutions:\n";
    for (const auto& e : meta.resolutions) {
        os << "  actor " << e.actor << " state " << int(e.state) << ":\n";
        walk(e.resolver, 2);
        walk(e.result, 2);
    }
}

} // namespace snapactor
