#pragma once

#include "msynth/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msynth {

/// Expression tree over the drive parameter t.
struct ExprNode {
    enum class Op { Constant, Param, Square, Sin, Cos, Add, Sub, Mul };

    Op op = Op::Constant;
    double value = 0.0;  // Constant
    int freq = 1;        // Sin/Cos: sin(freq*t + phase)
    double phase = 0.0;
    std::vector<ExprNode> args;

    static ExprNode constant(double v);
    static ExprNode param();
    static ExprNode square();
    static ExprNode sin(int freq, double phase = 0.0);
    static ExprNode cos(int freq, double phase = 0.0);
    static ExprNode add(ExprNode a, ExprNode b);
    static ExprNode sub(ExprNode a, ExprNode b);
    static ExprNode mul(ExprNode a, ExprNode b);

    double eval(double t) const;
    int node_count() const;
    /// Infix rendering, coefficients at 4 significant digits.
    std::string to_text() const;
};

struct SurrogateExpr {
    ExprNode x_expr;
    ExprNode y_expr;
    int x_complexity = 1;
    int y_complexity = 1;
    /// RMSE of the Euclidean residual between surrogate and trace.
    double fit_error = 0.0;

    int complexity() const { return x_complexity + y_complexity; }
};

struct SurrogateConfig {
    int max_frequency = 4;
    int complexity_cap = 25;  // nodes per coordinate
    /// Candidates within this relative RMSE of the best are ranked by size.
    double selection_tolerance = 0.01;
    /// Parameter increment per sample. Unset: t_i = 2π i / N.
    std::optional<double> param_step;
};

inline constexpr int kMinSurrogateSamples = 8;

/// Parameter values the fitter assigns to an n-sample trace.
std::vector<double> surrogate_parameters(std::size_t n, const SurrogateConfig& config = {});

/// Deterministic basis-pursuit fit of x(t), y(t). Throws InvalidInput for
/// fewer than 8 samples or a non-finite trace.
SurrogateExpr fit_surrogate(const Trajectory& trace, const SurrogateConfig& config = {});

Trajectory eval_surrogate(const SurrogateExpr& expr, std::span<const double> ts);

/// "x(t) = ...\ny(t) = ..."
std::string expr_to_text(const SurrogateExpr& expr);

}  // namespace msynth
