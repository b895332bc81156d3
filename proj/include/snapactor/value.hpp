// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "snapactor/types.hpp"

namespace snapactor {

struct promise_box;
struct object_record;

using text_ptr = std::shared_ptr<const std::string>;
using promise_ptr = std::shared_ptr<promise_box>;

/// Cross-actor handle. Holding one never grants direct access to the target
/// object; the only program-level interaction is an asynchronous send. The
/// snapshot serializer dereferences it on the owner's behalf.
struct far_ref {
    actor_id owner = 0;
    object_record* target = nullptr;

    friend bool operator==(const far_ref&, const far_ref&) = default;
};

enum class value_kind : std::uint8_t {
    null,
    boolean,
    integer,
    real,
    text,
    object,
    array,
    far,
    promise,
};

/// Tagged dynamic value. Primitives and text are immutable; object and array
/// references carry identity and are only dereferenceable by their owner.
class value {
public:
    value() = default;

    static value null() { return value(); }
    static value boolean(bool b) { return value(alt(b)); }
    static value integer(std::int64_t i) { return value(alt(i)); }
    static value real(double d) { return value(alt(d)); }
    static value text(text_ptr t) { return value(alt(std::move(t))); }
    static value text(std::string s) {
        return text(std::make_shared<const std::string>(std::move(s)));
    }
    static value object(object_record* rec) { return value(alt(rec)); }
    static value far(actor_id owner, object_record* target) {
        return value(alt(far_ref{owner, target}));
    }
    static value promise(promise_ptr p) { return value(alt(std::move(p))); }

    value_kind kind() const;

    bool is_null() const { return std::holds_alternative<std::monostate>(v_); }
    bool is_object_like() const { return std::holds_alternative<object_record*>(v_); }
    bool is_far() const { return std::holds_alternative<far_ref>(v_); }
    bool is_promise() const { return std::holds_alternative<promise_ptr>(v_); }
    bool is_text() const { return std::holds_alternative<text_ptr>(v_); }

    bool as_bool() const { return std::get<bool>(v_); }
    std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
    double as_real() const { return std::get<double>(v_); }
    const text_ptr& as_text() const { return std::get<text_ptr>(v_); }
    object_record* as_object() const { return std::get<object_record*>(v_); }
    const far_ref& as_far() const { return std::get<far_ref>(v_); }
    const promise_ptr& as_promise() const { return std::get<promise_ptr>(v_); }

    friend bool operator==(const value&, const value&) = default;

private:
    using alt = std::variant<std::monostate, bool, std::int64_t, double, text_ptr,
                             object_record*, far_ref, promise_ptr>;
    explicit value(alt v) : v_(std::move(v)) {}

    alt v_;
};

/// Heap cell of one actor. `fields` holds exactly `tag->arity` values for
/// object kinds and the element list for arrays.
struct object_record {
    const type_tag* tag = nullptr;
    actor_id owner = 0;
    std::vector<value> fields;

    bool is_array() const { return tag->kind == type_kind::array; }
};

inline value_kind value::kind() const {
    switch (v_.index()) {
    case 0: return value_kind::null;
    case 1: return value_kind::boolean;
    case 2: return value_kind::integer;
    case 3: return value_kind::real;
    case 4: return value_kind::text;
    case 5:
        return std::get<object_record*>(v_)->is_array() ? value_kind::array
                                                        : value_kind::object;
    case 6: return value_kind::far;
    default: return value_kind::promise;
    }
}

} // namespace snapactor
