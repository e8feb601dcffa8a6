#include "doctest.h"

#include "msynth/error.hpp"
#include "msynth/surrogate.hpp"

#include <cmath>
#include <numbers>

using namespace msynth;

namespace {

Trajectory from_fn(int n, double step, double (*fx)(double), double (*fy)(double)) {
    Trajectory t;
    for (int i = 0; i < n; ++i) {
        const double s = i * step;
        t.points.push_back({fx(s), fy(s)});
    }
    return t;
}

double rmse_vs_const(const Trajectory& t) {
    double mx = 0, my = 0;
    for (const Point2& p : t.points) { mx += p.x; my += p.y; }
    mx /= t.size();
    my /= t.size();
    double s = 0;
    for (const Point2& p : t.points) s += squared_norm(p - Point2{mx, my});
    return std::sqrt(s / t.size());
}

}  // namespace

TEST_CASE("unit circle recovers cos and sin") {
    const double step = 2.0 * std::numbers::pi / 64;
    const Trajectory t = from_fn(64, step, [](double s) { return std::cos(s); }, [](double s) { return std::sin(s); });
    const SurrogateExpr e = fit_surrogate(t);
    CHECK(e.fit_error <= 1e-10);
    CHECK(expr_to_text(e) == "x(t) = cos(t)\ny(t) = sin(t)");
    CHECK(e.complexity() == 2);
}

TEST_CASE("crank-driven parameter step") {
    SurrogateConfig cfg;
    cfg.param_step = 0.1;
    const Trajectory t = from_fn(63, 0.1, [](double s) { return 0.5 + 2.0 * std::cos(s); },
                                 [](double s) { return -1.0 + 2.0 * std::sin(s); });
    const SurrogateExpr e = fit_surrogate(t, cfg);
    CHECK(e.fit_error <= 1e-9);
    CHECK(expr_to_text(e) == "x(t) = 2.000*cos(t) + 0.5000\ny(t) = 2.000*sin(t) - 1.000");
}

TEST_CASE("phase-shifted harmonic folds into one term") {
    const Trajectory t = from_fn(80, 2.0 * std::numbers::pi / 80,
                                 [](double s) { return 1.5 * std::sin(2 * s + 0.7); },
                                 [](double s) { return 0.5 * s * s - s; });
    const SurrogateExpr e = fit_surrogate(t);
    CHECK(e.fit_error <= 1e-9);
    CHECK(e.x_expr.to_text() == "1.500*sin(2*t + 0.7000)");
    CHECK(e.y_expr.to_text() == "0.5000*t^2 - t");
}

TEST_CASE("evaluation reproduces the fit error") {
    SurrogateConfig cfg;
    const Trajectory t = from_fn(50, 2.0 * std::numbers::pi / 50, [](double s) { return std::exp(std::sin(s)); },
                                 [](double s) { return std::abs(s - 3.0); });
    const SurrogateExpr e = fit_surrogate(t, cfg);
    const auto ts = surrogate_parameters(t.size(), cfg);
    const Trajectory back = eval_surrogate(e, ts);
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) s += squared_norm(back.points[i] - t.points[i]);
    CHECK(std::sqrt(s / t.size()) == doctest::Approx(e.fit_error).epsilon(1e-9));
    CHECK(e.fit_error <= rmse_vs_const(t) + 1e-12);
    CHECK(e.x_complexity <= cfg.complexity_cap);
    CHECK(e.y_complexity <= cfg.complexity_cap);
}

TEST_CASE("fit is deterministic") {
    const Trajectory t = from_fn(40, 0.15, [](double s) { return std::tanh(s - 2); }, [](double s) { return std::cos(3 * s) + s; });
    CHECK(expr_to_text(fit_surrogate(t)) == expr_to_text(fit_surrogate(t)));
}

TEST_CASE("hand-built expressions") {
    SurrogateExpr e;
    e.x_expr = ExprNode::param();
    e.y_expr = ExprNode::square();
    const std::vector<double> ts{0.0, 1.0, 2.0};
    const Trajectory out = eval_surrogate(e, ts);
    CHECK(out.points[2] == Point2{2.0, 4.0});
    CHECK(expr_to_text(e) == "x(t) = t\ny(t) = t^2");
}

TEST_CASE("input checks") {
    Trajectory small;
    small.points.assign(7, Point2{0, 0});
    CHECK_THROWS_AS(fit_surrogate(small), InvalidInput);
    Trajectory bad;
    bad.points.assign(10, Point2{0, 0});
    bad.points[3].x = std::nan("");
    CHECK_THROWS_AS(fit_surrogate(bad), InvalidInput);
}
