#include "doctest.h"
#include "ssdda/params.hpp"

using namespace ssdda;

namespace {

ParamSet sample_set() {
    ParamSet p;
    p.add("w", {2, 2}, {1.0, 2.0, 3.0, 4.0});
    p.add("b", {2}, {0.5, -0.5});
    return p;
}

} // namespace

TEST_CASE("add rejects duplicates and shape/value mismatches") {
    ParamSet p = sample_set();
    CHECK_THROWS_AS(p.add("w", {1}, {0.0}), InvalidInput);
    CHECK_THROWS_AS(p.add("v", {3}, {0.0}), InvalidInput);
    CHECK(p.total_values() == 6);
    CHECK(p.has("b"));
    CHECK(!p.has("missing"));
    CHECK_THROWS_AS(p.at("missing"), InvalidInput);
}

TEST_CASE("compatible requires identical names, order, and shapes") {
    const ParamSet a = sample_set();
    ParamSet b = sample_set();
    CHECK(compatible(a, b));
    b.at("b").values[0] = 99.0; // values may differ
    CHECK(compatible(a, b));

    ParamSet reordered;
    reordered.add("b", {2}, {0.0, 0.0});
    reordered.add("w", {2, 2}, {0.0, 0.0, 0.0, 0.0});
    CHECK(!compatible(a, reordered));

    ParamSet reshaped;
    reshaped.add("w", {4}, {0.0, 0.0, 0.0, 0.0});
    reshaped.add("b", {2}, {0.0, 0.0});
    CHECK(!compatible(a, reshaped));
}

TEST_CASE("zeros_like and add_scaled implement dst += scale * src") {
    const ParamSet a = sample_set();
    ParamSet acc = zeros_like(a);
    CHECK(compatible(a, acc));
    for (const auto& e : acc.entries)
        for (const double v : e.values)
            CHECK(v == 0.0);
    add_scaled(acc, a, 2.0);
    add_scaled(acc, a, -0.5);
    CHECK(acc.at("w").values[3] == doctest::Approx(4.0 * 1.5));
    CHECK(acc.at("b").values[1] == doctest::Approx(-0.5 * 1.5));

    ParamSet other;
    other.add("x", {1}, {1.0});
    CHECK_THROWS_AS(add_scaled(acc, other, 1.0), InvalidInput);
}

TEST_CASE("prefix subset and with_prefix are inverse on their domain") {
    ParamSet p;
    p.add("student.w", {1}, {1.0});
    p.add("student.b", {1}, {2.0});
    p.add("teacher.w", {1}, {3.0});
    const ParamSet student = subset_with_prefix(p, "student.");
    REQUIRE(student.entries.size() == 2);
    CHECK(student.entries[0].name == "w");
    CHECK(student.entries[1].name == "b");
    CHECK(student.at("w").values[0] == 1.0);

    const ParamSet restored = with_prefix(student, "student.");
    CHECK(restored.entries[0].name == "student.w");
    CHECK_THROWS_AS(subset_with_prefix(p, "optimizer."), InvalidInput);
}

TEST_CASE("bit_equal notices value, shape, and name changes") {
    const ParamSet a = sample_set();
    ParamSet b = sample_set();
    CHECK(bit_equal(a, b));
    CHECK(bit_checksum(a) == bit_checksum(b));
    b.at("w").values[0] = 1.0 + 1e-16; // rounds to 1.0, still bit-equal
    CHECK(bit_equal(a, b));
    b.at("w").values[0] = -0.0; // sign-of-zero flip must be detected
    CHECK(!bit_equal(a, b));
    CHECK(bit_checksum(a) != bit_checksum(b));
}
