// Copyright the snapactor contributors. SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "snapactor/snapactor.hpp"

using namespace snapactor;

TEST_CASE("register_type assigns dense ids in registration order") {
    type_table t;
    std::size_t base = t.size();
    const type_tag& pair = t.register_type("Pair", 2);
    CHECK(pair.id == base);
    CHECK(pair.arity == 2);
    CHECK(pair.kind == type_kind::object);

    // enumerate k registrations and assert density
    for (int k = 0; k < 20; ++k) {
        const type_tag& tag = t.register_type("T" + std::to_string(k), 1);
        CHECK(tag.id == base + 1 + static_cast<std::uint32_t>(k));
    }
    CHECK(t.size() == base + 21);
}

TEST_CASE("registering a name twice fails") {
    type_table t;
    t.register_type("Pair", 2);
    try {
        t.register_type("Pair", 2);
        FAIL("expected DuplicateTypeName");
    } catch (const error& e) {
        CHECK(e.code() == errc::duplicate_type_name);
    }
}

TEST_CASE("type table is deterministic across identical registration sequences") {
    type_table a, b;
    for (int i = 0; i < 8; ++i) {
        const type_tag& ta = a.register_type("N" + std::to_string(i), i % 3);
        const type_tag& tb = b.register_type("N" + std::to_string(i), i % 3);
        CHECK(ta.id == tb.id);
    }
}

TEST_CASE("builtin tags occupy fixed ids") {
    type_table t;
    CHECK(t.by_id(builtin_type::null_v).name == "Null");
    CHECK(t.by_id(builtin_type::int_v).name == "Int");
    CHECK(t.by_id(builtin_type::array).kind == type_kind::array);
    CHECK(t.by_id(builtin_type::promise).kind == type_kind::promise);
    CHECK(t.by_id(builtin_type::message).kind == type_kind::message);
    CHECK(t.by_name("Text").id == builtin_type::text);
}

TEST_CASE("new_object stores fields readable by the owner") {
    actor_system sys;
    sys.register_type("Pair", 2);
    value a = sys.spawn("Pair", {value::integer(1), value::integer(2)});
    actor_id owner = a.as_far().owner;
    value obj = sys.new_object(owner, "Pair", {value::integer(1), value::integer(2)});
    CHECK(sys.get_field(owner, obj, 0).as_int() == 1);
    CHECK(sys.get_field(owner, obj, 1).as_int() == 2);
}

TEST_CASE("new_object with the wrong field count fails") {
    actor_system sys;
    sys.register_type("Pair", 2);
    value a = sys.spawn("Pair", {value::integer(0), value::integer(0)});
    try {
        sys.new_object(a.as_far().owner, "Pair", {value::integer(1)});
        FAIL("expected ArityMismatch");
    } catch (const error& e) {
        CHECK(e.code() == errc::arity_mismatch);
    }
}

TEST_CASE("dereference by a non-owner is rejected") {
    actor_system sys;
    sys.register_type("Pair", 2);
    value fa = sys.spawn("Pair", {value::integer(1), value::integer(2)});
    value fb = sys.spawn("Pair", {value::integer(3), value::integer(4)});
    actor_id a = fa.as_far().owner;
    actor_id b = fb.as_far().owner;
    value obj = sys.new_object(a, "Pair", {value::integer(1), value::integer(2)});
    try {
        sys.get_field(b, obj, 0);
        FAIL("expected ForeignAccess");
    } catch (const error& e) {
        CHECK(e.code() == errc::foreign_access);
    }
    // far references never allow direct reads either
    try {
        sys.get_field(a, fb, 0);
        FAIL("expected ForeignAccess");
    } catch (const error& e) {
        CHECK(e.code() == errc::foreign_access);
    }
}

TEST_CASE("values carry their kinds") {
    actor_system sys;
    CHECK(value::null().kind() == value_kind::null);
    CHECK(value::boolean(true).kind() == value_kind::boolean);
    CHECK(value::integer(-7).as_int() == -7);
    CHECK(value::real(2.5).as_real() == 2.5);
    CHECK(*value::text("hi").as_text() == "hi");
    value arr = sys.new_array(k_main_actor, {value::integer(1)});
    CHECK(arr.kind() == value_kind::array);
    value obj = sys.new_object(k_main_actor, "MainRoot", {});
    CHECK(obj.kind() == value_kind::object);
    CHECK(value::far(3, obj.as_object()).kind() == value_kind::far);
    CHECK(sys.make_promise(k_main_actor).kind() == value_kind::promise);
}

TEST_CASE("arrays grow by one through set") {
    actor_system sys;
    value arr = sys.new_array(k_main_actor, {});
    sys.set_field(k_main_actor, arr, 0, value::integer(10));
    sys.set_field(k_main_actor, arr, 1, value::integer(11));
    CHECK(sys.field_count(arr) == 2);
    CHECK(sys.get_field(k_main_actor, arr, 1).as_int() == 11);
    try {
        sys.set_field(k_main_actor, arr, 5, value::integer(0));
        FAIL("expected OutOfBounds");
    } catch (const error& e) {
        CHECK(e.code() == errc::out_of_bounds);
    }
}
