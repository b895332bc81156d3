// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "snapactor/errors.hpp"

namespace snapactor {

// A snapshot reference is one little-endian 64-bit word: a 16-bit buffer id
// in the top bits and a 48-bit offset into that buffer below it. Buffer id
// 0xFFFF is reserved; the all-ones word marks a reference that was never
// backpatched.
inline constexpr std::uint64_t k_ref_offset_bits = 48;
inline constexpr std::uint64_t k_ref_offset_mask = (std::uint64_t{1} << k_ref_offset_bits) - 1;
inline constexpr std::uint16_t k_invalid_buffer_id = 0xFFFF;
inline constexpr std::uint64_t k_placeholder_ref = ~std::uint64_t{0};

struct snapshot_ref {
    std::uint16_t buffer_id = 0;
    std::uint64_t offset = 0;

    friend bool operator==(const snapshot_ref&, const snapshot_ref&) = default;
};

inline std::uint64_t encode_ref(std::uint16_t buffer_id, std::uint64_t offset) {
    if (buffer_id == k_invalid_buffer_id)
        raise(errc::range_exceeded, "buffer id 0xFFFF is reserved");
    if (offset > k_ref_offset_mask)
        raise(errc::range_exceeded, "offset does not fit in 48 bits");
    return (std::uint64_t{buffer_id} << k_ref_offset_bits) | offset;
}

inline std::uint64_t encode_ref(snapshot_ref r) { return encode_ref(r.buffer_id, r.offset); }

inline snapshot_ref decode_ref(std::uint64_t word) {
    return snapshot_ref{static_cast<std::uint16_t>(word >> k_ref_offset_bits),
                        word & k_ref_offset_mask};
}

inline bool is_placeholder_ref(std::uint64_t word) {
    return (word >> k_ref_offset_bits) == k_invalid_buffer_id;
}

} // namespace snapactor
