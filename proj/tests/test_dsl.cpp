#include <doctest.h>

#include <cmath>

#include "dexkit/dsl.hpp"
#include "dexkit/gesture.hpp"
#include "oracles.hpp"

using namespace dexkit;
using dsl::CostProgram;
using dsl::ParseError;
using dsl::ParseErrorKind;

namespace {

Vec random_tips(Rng& rng, int fingers) {
    Vec tips(3 * fingers);
    for (double& t : tips) t = rng.uniform(-2.0, 2.0);
    return tips;
}

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("thumb-index distance program parses and evaluates") {
    const CostProgram p = dsl::parse_cost("norm(tip(0) - tip(1))", 5);
    Vec tips(15, 0.0);
    tips[0] = 1.0;   // tip 0 at (1,0,0)
    tips[4] = -2.0;  // tip 1 at (0,-2,0)
    CHECK(dsl::eval_cost(p, tips) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("tip(9) on a 5-finger hand reports an index error at position 4") {
    try {
        dsl::parse_cost("tip(9)", 5);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind == ParseErrorKind::index_out_of_range);
        CHECK(e.position == 4);
    }
}

TEST_CASE("distinct error kinds carry positions") {
    try {
        dsl::parse_cost("foo(1)", 5);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind == ParseErrorKind::unknown_symbol);
        CHECK(e.position == 0);
    }
    try {
        dsl::parse_cost("norm(2)", 5);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind == ParseErrorKind::type_mismatch);
    }
    try {
        dsl::parse_cost("tip(0) + 1", 5);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind == ParseErrorKind::type_mismatch);
        CHECK(e.position == 7);
    }
    CHECK_THROWS_AS(dsl::parse_cost("1 +", 5), ParseError);
    CHECK_THROWS_AS(dsl::parse_cost("tip(0)", 5), ParseError);  // program must be scalar
    try {
        dsl::parse_cost("tip(0).w", 5);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind == ParseErrorKind::unknown_symbol);
    }
}

TEST_CASE("constant program evaluates to its constant for any pose") {
    const CostProgram p = dsl::parse_cost("2.5", 3);
    Rng rng(1);
    for (int i = 0; i < 5; ++i) CHECK(dsl::eval_cost(p, random_tips(rng, 3)) == doctest::Approx(2.5));
}

TEST_CASE("grammar features: components, vector literals, mean, dot, scaling") {
    const CostProgram p =
        dsl::parse_cost("mean(tip(0).z, tip(1).z) + dot(tip(2), [0, 0, 1]) * 2 - neg(1.5)", 3);
    Vec tips(9, 0.0);
    tips[2] = 1.0;  // tip0.z
    tips[5] = 3.0;  // tip1.z
    tips[8] = 0.5;  // tip2.z
    // mean(1,3) + (0.5 * 2) + 1.5 = 2 + 1 + 1.5
    CHECK(dsl::eval_cost(p, tips) == doctest::Approx(4.5));
}

TEST_CASE("canonical print-then-parse is the identity on 100 random programs") {
    Rng rng(202);
    for (int i = 0; i < 100; ++i) {
        const int fingers = 3 + rng.uniform_int(3);
        dsl::Node program = dsl::random_program(rng, fingers, 4);
        const std::string text = dsl::print_program(program);
        CAPTURE(text);
        const CostProgram reparsed = dsl::parse_cost(text, fingers);
        CHECK(dsl::nodes_equal(program, reparsed.root));
        CHECK(dsl::print_program(reparsed) == text);
    }
}

TEST_CASE("evaluation agrees with an independent reference interpreter to 1e-12") {
    Rng rng(303);
    for (int i = 0; i < 100; ++i) {
        const int fingers = 3 + rng.uniform_int(3);
        dsl::Node program = dsl::random_program(rng, fingers, 5);
        CostProgram p;
        p.root = program;
        p.num_fingers = fingers;
        const Vec tips = random_tips(rng, fingers);
        const double via_library = dsl::eval_cost(p, tips);
        const double via_reference = oracles::reference_eval(program, tips).s;
        CHECK(std::fabs(via_library - via_reference) <= 1e-12 * std::max(1.0, std::fabs(via_reference)));
    }
}

TEST_CASE("evaluation is pure: repeated calls agree, inputs unchanged") {
    const CostProgram p = dsl::parse_cost("norm(tip(0) - tip(1)) * 3 + tip(2).x", 3);
    Rng rng(9);
    const Vec tips = random_tips(rng, 3);
    const Vec copy = tips;
    const double a = dsl::eval_cost(p, tips);
    const double b = dsl::eval_cost(p, tips);
    CHECK(a == b);
    CHECK(tips == copy);
}

TEST_CASE("NaN fingertip input raises a numeric error") {
    const CostProgram p = dsl::parse_cost("tip(0).x", 2);
    Vec tips(6, 0.0);
    tips[1] = std::nan("");
    CHECK_THROWS_AS(dsl::eval_cost(p, tips), NumericError);
    CHECK_THROWS_AS(dsl::eval_cost(p, Vec{0.0, 0.0, 0.0}), ShapeError);
}

TEST_CASE("ok-gesture reward structure: pinched and extended beats a broken pinch") {
    const HandConfig hand = allegro_like();
    const gesture::HandGestureInfo info = gesture::gesture_info(hand);
    // reward form of the ok objective: -pinch distance + sum of extensions
    std::ostringstream reward;
    reward << "neg(norm(tip(0) - tip(3)))";
    for (int f : {1, 2}) {
        const Vec3 n = info.extension_dirs[f];
        reward << " + dot(tip(" << f << "), [" << dsl::format_number(n.x) << ", "
               << dsl::format_number(n.y) << ", " << dsl::format_number(n.z) << "])";
    }
    const CostProgram p = dsl::parse_cost(reward.str(), 4);

    Vec perfect(12, 0.0);
    // thumb and index touch at a point; tips 1 and 2 sit far along their directions
    perfect[0] = perfect[9] = 0.05;
    perfect[1] = perfect[10] = 0.0;
    for (int f : {1, 2}) {
        const Vec3 n = info.extension_dirs[f];
        perfect[3 * f + 0] = 0.2 * n.x;
        perfect[3 * f + 1] = 0.2 * n.y;
        perfect[3 * f + 2] = 0.2 * n.z;
    }
    Vec broken = perfect;
    broken[0] += 0.08;  // pinch broken
    CHECK(dsl::eval_cost(p, perfect) > dsl::eval_cost(p, broken));
    // value at the perfect pose = -0 + sum of extensions = 0.2 per finger
    CHECK(dsl::eval_cost(p, perfect) == doctest::Approx(0.4));
}

TEST_CASE("built-in thumb-up cost matches hand arithmetic on three poses") {
    const HandConfig hand = allegro_like();
    const gesture::HandGestureInfo info = gesture::gesture_info(hand);
    const CostProgram p = dsl::parse_cost(gesture::thumbup_cost_source(hand), hand.num_fingers);

    Rng rng(17);
    for (int pose = 0; pose < 3; ++pose) {
        const Vec tips = random_tips(rng, hand.num_fingers);
        // oracle: -(thumb extension) + mean of the other fingers' extensions
        auto ext = [&](int f) {
            const Vec3 n = info.extension_dirs[f];
            return tips[3 * f] * n.x + tips[3 * f + 1] * n.y + tips[3 * f + 2] * n.z;
        };
        const double expected = -ext(0) + (ext(1) + ext(2) + ext(3)) / 3.0;
        CHECK(dsl::eval_cost(p, tips) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("all built-in cost sources parse for their presets") {
    for (const std::string& name : preset_names()) {
        const HandConfig hand = preset_by_name(name);
        CHECK_NOTHROW(dsl::parse_cost(gesture::ok_cost_source(hand), hand.num_fingers));
        CHECK_NOTHROW(dsl::parse_cost(gesture::thumbup_cost_source(hand), hand.num_fingers));
        CHECK_NOTHROW(dsl::parse_cost(gesture::scissors_cost_source(hand), hand.num_fingers));
        CHECK_NOTHROW(dsl::parse_cost(gesture::rockandroll_cost_source(hand), hand.num_fingers));
        CHECK_NOTHROW(dsl::parse_cost(gesture::call_cost_source(hand), hand.num_fingers));
    }
}

}  // TEST_SUITE
