#include <limits>

#include "doctest.h"
#include "ssdda/types.hpp"

using namespace ssdda;

TEST_CASE("argmax_label picks the highest class, ties to the lowest index") {
    ProbMap p(1, 3, 4);
    // pixel 0: clear winner class 2
    p.at(0, 0, 0) = 0.1, p.at(0, 0, 1) = 0.2, p.at(0, 0, 2) = 0.6, p.at(0, 0, 3) = 0.1;
    // pixel 1: exact tie between classes 1 and 3 -> 1
    p.at(0, 1, 0) = 0.1, p.at(0, 1, 1) = 0.4, p.at(0, 1, 2) = 0.1, p.at(0, 1, 3) = 0.4;
    // pixel 2: all equal -> 0
    for (int c = 0; c < 4; ++c)
        p.at(0, 2, c) = 0.25;
    const LabelMap l = argmax_label(p);
    CHECK(l.at(0, 0) == 2);
    CHECK(l.at(0, 1) == 1);
    CHECK(l.at(0, 2) == 0);
}

TEST_CASE("one_hot maps ignore pixels to all-zero rows") {
    LabelMap l(2, 2);
    l.at(0, 0) = 0;
    l.at(0, 1) = 2;
    l.at(1, 0) = kIgnoreLabel;
    l.at(1, 1) = 1;
    const ProbMap p = one_hot(l, 3);
    CHECK(p.at(0, 0, 0) == 1.0);
    CHECK(p.at(0, 1, 2) == 1.0);
    CHECK(p.at(1, 1, 1) == 1.0);
    for (int c = 0; c < 3; ++c)
        CHECK(p.at(1, 0, c) == 0.0);
    // the masked row passes validation only when explicitly allowed
    CHECK_NOTHROW(p.validate(true));
    CHECK_THROWS_AS(p.validate(false), InvalidInput);
}

TEST_CASE("one_hot rejects class ids outside the range") {
    LabelMap l(1, 1);
    l.at(0, 0) = 3;
    CHECK_THROWS_AS(one_hot(l, 3), InvalidInput);
}

TEST_CASE("count_valid skips exactly the ignore pixels") {
    LabelMap l(2, 3, 1);
    CHECK(count_valid(l) == 6);
    l.at(0, 0) = kIgnoreLabel;
    l.at(1, 2) = kIgnoreLabel;
    CHECK(count_valid(l) == 4);
}

TEST_CASE("LabelMap::validate enforces the class range but allows ignore") {
    LabelMap l(1, 2);
    l.at(0, 0) = 4;
    l.at(0, 1) = kIgnoreLabel;
    CHECK_NOTHROW(l.validate(5));
    CHECK_THROWS_AS(l.validate(4), InvalidInput);
}

TEST_CASE("SegImage::validate rejects out-of-range and non-finite values") {
    SegImage img(1, 1, 3);
    img.at(0, 0, 0) = 0.5;
    CHECK_NOTHROW(img.validate());
    img.at(0, 0, 1) = 1.5;
    CHECK_THROWS_AS(img.validate(), InvalidInput);
    img.at(0, 0, 1) = 0.0;
    img.at(0, 0, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(img.validate(), InvalidInput);
}

TEST_CASE("MixMask::validate only accepts strictly binary data") {
    MixMask m(2, 2);
    m.at(0, 0) = 1;
    CHECK_NOTHROW(m.validate());
    m.at(1, 1) = 2;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
}
