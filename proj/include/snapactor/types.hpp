// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "snapactor/errors.hpp"

namespace snapactor {

using actor_id = std::uint64_t;
inline constexpr actor_id k_main_actor = 0;

enum class type_kind : std::uint8_t {
    object = 0,
    array = 1,
    message = 2,
    promise = 3,
    builtin = 4,
};

struct type_tag {
    std::uint32_t id = 0;
    std::string name;
    std::uint32_t arity = 0;
    type_kind kind = type_kind::object;
};

// Ids of the tags every type table starts with. Their numeric values are
// stable for a process run because they are registered first, in this order.
namespace builtin_type {
inline constexpr std::uint32_t null_v = 0;
inline constexpr std::uint32_t bool_v = 1;
inline constexpr std::uint32_t int_v = 2;
inline constexpr std::uint32_t float_v = 3;
inline constexpr std::uint32_t text = 4;
inline constexpr std::uint32_t array = 5;
inline constexpr std::uint32_t far_ref = 6;
inline constexpr std::uint32_t promise = 7;
inline constexpr std::uint32_t message = 8;
inline constexpr std::uint32_t roots = 9;
inline constexpr std::uint32_t main_root = 10;
inline constexpr std::uint32_t count = 11;
} // namespace builtin_type

/// Registry of type tags with dense ids. Registration order alone decides
/// ids, so two runs that register the same names in the same order agree on
/// every id.
class type_table {
public:
    type_table() {
        register_builtin("Null", 0, type_kind::builtin);
        register_builtin("Bool", 0, type_kind::builtin);
        register_builtin("Int", 0, type_kind::builtin);
        register_builtin("Float", 0, type_kind::builtin);
        register_builtin("Text", 0, type_kind::builtin);
        register_builtin("Array", 0, type_kind::array);
        register_builtin("FarRef", 0, type_kind::builtin);
        register_builtin("Promise", 0, type_kind::promise);
        register_builtin("Message", 0, type_kind::message);
        register_builtin("Roots", 0, type_kind::builtin);
        register_builtin("MainRoot", 0, type_kind::object);
    }

    const type_tag& register_type(std::string_view name, std::uint32_t arity,
                                  type_kind kind = type_kind::object) {
        std::lock_guard lock(mu_);
        if (by_name_.count(std::string(name)))
            raise(errc::duplicate_type_name, std::string(name));
        auto& tag = tags_.emplace_back();
        tag.id = static_cast<std::uint32_t>(tags_.size() - 1);
        tag.name = std::string(name);
        tag.arity = arity;
        tag.kind = kind;
        by_name_.emplace(tag.name, tag.id);
        return tag;
    }

    const type_tag& by_id(std::uint32_t id) const {
        std::lock_guard lock(mu_);
        if (id >= tags_.size())
            raise(errc::unknown_type_name, "type id " + std::to_string(id));
        return tags_[id];
    }

    const type_tag* find(std::string_view name) const {
        std::lock_guard lock(mu_);
        auto it = by_name_.find(std::string(name));
        return it == by_name_.end() ? nullptr : &tags_[it->second];
    }

    const type_tag& by_name(std::string_view name) const {
        if (const type_tag* t = find(name))
            return *t;
        raise(errc::unknown_type_name, std::string(name));
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return tags_.size();
    }

    /// Stable copy of all rows, in id order.
    std::vector<type_tag> rows() const {
        std::lock_guard lock(mu_);
        return std::vector<type_tag>(tags_.begin(), tags_.end());
    }

private:
    void register_builtin(std::string_view name, std::uint32_t arity, type_kind kind) {
        auto& tag = tags_.emplace_back();
        tag.id = static_cast<std::uint32_t>(tags_.size() - 1);
        tag.name = std::string(name);
        tag.arity = arity;
        tag.kind = kind;
        by_name_.emplace(tag.name, tag.id);
    }

    mutable std::mutex mu_;
    std::deque<type_tag> tags_; // deque: rows keep stable addresses
    std::unordered_map<std::string, std::uint32_t> by_name_;
};

} // namespace snapactor
