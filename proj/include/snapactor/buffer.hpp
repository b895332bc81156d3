// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

#include "snapactor/errors.hpp"
#include "snapactor/ref.hpp"

namespace snapactor {

/// Append-only byte region, confined to one worker thread while a snapshot
/// is being captured. References into other buffers that are not known yet
/// are written as placeholder words and fixed through the backend's patch
/// list, never by touching a foreign buffer.
class snapshot_buffer {
public:
    explicit snapshot_buffer(std::uint16_t id = 0) : id_(id) {}

    std::uint16_t id() const { return id_; }
    std::uint64_t cursor() const { return bytes_.size(); }
    bool empty() const { return bytes_.empty(); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    void clear() { bytes_.clear(); }

    std::uint64_t append_u8(std::uint8_t v) { return append_raw(&v, 1); }
    std::uint64_t append_u16(std::uint16_t v) { return append_le(v); }
    std::uint64_t append_u32(std::uint32_t v) { return append_le(v); }
    std::uint64_t append_u64(std::uint64_t v) { return append_le(v); }
    std::uint64_t append_i64(std::int64_t v) { return append_le(static_cast<std::uint64_t>(v)); }
    std::uint64_t append_f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return append_le(bits);
    }
    std::uint64_t append_bytes(std::string_view s) {
        return append_raw(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }
    std::uint64_t append_placeholder_word() { return append_u64(k_placeholder_ref); }

    /// Overwrite a previously appended 64-bit word. Only valid for offsets
    /// recorded by this thread while building the current record.
    void patch_u64(std::uint64_t offset, std::uint64_t v) {
        for (int i = 0; i < 8; ++i)
            bytes_[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
    }

private:
    template <typename T>
    std::uint64_t append_le(T v) {
        std::uint8_t raw[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i)
            raw[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i));
        return append_raw(raw, sizeof(T));
    }

    std::uint64_t append_raw(const std::uint8_t* data, std::size_t n) {
        std::uint64_t at = bytes_.size();
        if (at + n > k_ref_offset_mask)
            raise(errc::buffer_overflow, "snapshot buffer exceeds 48-bit offset space");
        bytes_.insert(bytes_.end(), data, data + n);
        return at;
    }

    std::uint16_t id_;
    std::vector<std::uint8_t> bytes_;
};

} // namespace snapactor
