// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace snapactor {

enum class errc {
    duplicate_type_name,
    arity_mismatch,
    foreign_access,
    snapshot_in_progress,
    already_resolved,
    range_exceeded,
    buffer_overflow,
    unknown_buffer,
    out_of_bounds,
    bad_magic,
    version_mismatch,
    truncated,
    corrupt_counts,
    unknown_type_name,
    invalid_state,
    io_error,
    restore_defect,
    config_error,
    turn_budget_exhausted,
};

inline const char* errc_name(errc c) {
    switch (c) {
    case errc::duplicate_type_name: return "DuplicateTypeName";
    case errc::arity_mismatch: return "ArityMismatch";
    case errc::foreign_access: return "ForeignAccess";
    case errc::snapshot_in_progress: return "SnapshotInProgress";
    case errc::already_resolved: return "AlreadyResolved";
    case errc::range_exceeded: return "RangeExceeded";
    case errc::buffer_overflow: return "BufferOverflow";
    case errc::unknown_buffer: return "UnknownBuffer";
    case errc::out_of_bounds: return "OutOfBounds";
    case errc::bad_magic: return "BadMagic";
    case errc::version_mismatch: return "VersionMismatch";
    case errc::truncated: return "Truncated";
    case errc::corrupt_counts: return "CorruptCounts";
    case errc::unknown_type_name: return "UnknownTypeName";
    case errc::invalid_state: return "InvalidState";
    case errc::io_error: return "IoError";
    case errc::restore_defect: return "RestoreDefect";
    case errc::config_error: return "ConfigError";
    case errc::turn_budget_exhausted: return "TurnBudgetExhausted";
    }
    return "UnknownError";
}

/// All library failures throw this; code() distinguishes the contract that
/// was violated.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) {
    throw error(code, what);
}

} // namespace snapactor
