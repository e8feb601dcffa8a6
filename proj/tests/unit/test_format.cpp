#include "doctest.h"

#include "msynth/format.hpp"
#include "msynth/random.hpp"

#include <cmath>

using namespace msynth;

TEST_CASE("format_real round-trips") {
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(-0.0) == "0");
    CHECK(format_real(2.0) == "2");
    SplitMix64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform_int(-60, 60)));
        double back = 0;
        REQUIRE(parse_real(format_real(v), back));
        CHECK(back == v);
    }
}

TEST_CASE("fixed and significant rendering") {
    CHECK(format_fixed(1.23456, 3) == "1.235");
    CHECK(format_fixed(0.0, 3) == "0.000");
    CHECK(format_significant(2.0, 4) == "2.000");
    CHECK(format_significant(0.5, 4) == "0.5000");
    CHECK(format_significant(-1.25, 4) == "-1.250");
}

TEST_CASE("parse_real rejects junk") {
    double v = 0;
    CHECK_FALSE(parse_real("", v));
    CHECK_FALSE(parse_real("1.5x", v));
    CHECK_FALSE(parse_real("nan", v));
    CHECK_FALSE(parse_real("inf", v));
    CHECK(parse_real("-3e2", v));
    CHECK(v == -300.0);
}

TEST_CASE("splitmix64 reference stream") {
    SplitMix64 a(0);
    CHECK(a.next() == 0xe220a8397b1dcdafull);
    CHECK(a.next() == 0x6e789e6aa1b965f4ull);
    CHECK(a.next() == 0x06c45d188009454full);
    SplitMix64 b(42);
    CHECK(b.next() == 0xbdd732262feb6e95ull);
}

TEST_CASE("uniform_int stays in range") {
    SplitMix64 rng(9);
    for (int i = 0; i < 10000; ++i) {
        const auto v = rng.uniform_int(2000, 3000);
        CHECK((v >= 2000 && v <= 3000));
    }
}
