#include "msynth/surrogate.hpp"

#include "msynth/error.hpp"
#include "msynth/format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace msynth {

ExprNode ExprNode::constant(double v) {
    ExprNode n;
    n.op = Op::Constant;
    n.value = v;
    return n;
}

ExprNode ExprNode::param() {
    ExprNode n;
    n.op = Op::Param;
    return n;
}

ExprNode ExprNode::square() {
    ExprNode n;
    n.op = Op::Square;
    return n;
}

ExprNode ExprNode::sin(int freq, double phase) {
    ExprNode n;
    n.op = Op::Sin;
    n.freq = freq;
    n.phase = phase;
    return n;
}

ExprNode ExprNode::cos(int freq, double phase) {
    ExprNode n;
    n.op = Op::Cos;
    n.freq = freq;
    n.phase = phase;
    return n;
}

namespace {
ExprNode binary(ExprNode::Op op, ExprNode a, ExprNode b) {
    ExprNode n;
    n.op = op;
    n.args.push_back(std::move(a));
    n.args.push_back(std::move(b));
    return n;
}
}  // namespace

ExprNode ExprNode::add(ExprNode a, ExprNode b) { return binary(Op::Add, std::move(a), std::move(b)); }
ExprNode ExprNode::sub(ExprNode a, ExprNode b) { return binary(Op::Sub, std::move(a), std::move(b)); }
ExprNode ExprNode::mul(ExprNode a, ExprNode b) { return binary(Op::Mul, std::move(a), std::move(b)); }

double ExprNode::eval(double t) const {
    switch (op) {
        case Op::Constant: return value;
        case Op::Param: return t;
        case Op::Square: return t * t;
        case Op::Sin: return std::sin(freq * t + phase);
        case Op::Cos: return std::cos(freq * t + phase);
        case Op::Add: return args[0].eval(t) + args[1].eval(t);
        case Op::Sub: return args[0].eval(t) - args[1].eval(t);
        case Op::Mul: return args[0].eval(t) * args[1].eval(t);
    }
    return 0.0;
}

int ExprNode::node_count() const {
    int n = 1;
    for (const ExprNode& a : args) {
        n += a.node_count();
    }
    return n;
}

namespace {

std::string trig_text(const char* fn, int freq, double phase) {
    std::string out = fn;
    out += '(';
    out += freq == 1 ? "t" : std::to_string(freq) + "*t";
    if (phase != 0.0) {
        out += phase > 0 ? " + " : " - ";
        out += format_significant(std::abs(phase), 4);
    }
    out += ')';
    return out;
}

}  // namespace

std::string ExprNode::to_text() const {
    switch (op) {
        case Op::Constant: return format_significant(value, 4);
        case Op::Param: return "t";
        case Op::Square: return "t^2";
        case Op::Sin: return trig_text("sin", freq, phase);
        case Op::Cos: return trig_text("cos", freq, phase);
        case Op::Add: return args[0].to_text() + " + " + args[1].to_text();
        case Op::Sub: return args[0].to_text() + " - " + args[1].to_text();
        case Op::Mul: return args[0].to_text() + "*" + args[1].to_text();
    }
    return "";
}

std::vector<double> surrogate_parameters(std::size_t n, const SurrogateConfig& config) {
    std::vector<double> ts(n);
    const double step = config.param_step.value_or(n == 0 ? 0.0 : 2.0 * std::numbers::pi / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = static_cast<double>(i) * step;
    }
    return ts;
}

namespace {

// Dictionary column layout: 0 → 1, 1 → t, 2 → t², then sin(k t), cos(k t) for k = 1..K.
constexpr int kConst = 0;
constexpr int kLinear = 1;
constexpr int kQuadratic = 2;
int sin_col(int k) { return 3 + 2 * (k - 1); }
int cos_col(int k) { return 4 + 2 * (k - 1); }

double basis(int col, double t) {
    if (col == kConst) return 1.0;
    if (col == kLinear) return t;
    if (col == kQuadratic) return t * t;
    const int k = (col - 3) / 2 + 1;
    return ((col - 3) % 2 == 0) ? std::sin(k * t) : std::cos(k * t);
}

struct Model {
    std::vector<int> active;  // sorted column indices
    std::vector<double> coef; // aligned with active
    ExprNode tree;
    int nodes = 1;
    double rmse = 0.0;
};

constexpr double kUnitSnap = 1e-9;

// c * atom, folded into a running sum. Coefficients within kUnitSnap of ±1 become exact.
void append_term(std::optional<ExprNode>& sum, double c, ExprNode atom) {
    if (std::abs(std::abs(c) - 1.0) <= kUnitSnap) {
        c = c > 0 ? 1.0 : -1.0;
    }
    if (!sum) {
        sum = c == 1.0 ? std::move(atom) : ExprNode::mul(ExprNode::constant(c), std::move(atom));
        return;
    }
    const double mag = std::abs(c);
    ExprNode term = mag == 1.0 ? std::move(atom) : ExprNode::mul(ExprNode::constant(mag), std::move(atom));
    sum = c < 0 ? ExprNode::sub(std::move(*sum), std::move(term)) : ExprNode::add(std::move(*sum), std::move(term));
}

// Fixed term order: harmonics by frequency, then t², t, constant.
ExprNode build_tree(const std::vector<int>& active, const std::vector<double>& coef, int max_freq) {
    auto coef_of = [&](int col) -> std::optional<double> {
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (active[i] == col) return coef[i];
        }
        return std::nullopt;
    };
    std::optional<ExprNode> sum;
    for (int k = 1; k <= max_freq; ++k) {
        const auto s = coef_of(sin_col(k));
        const auto c = coef_of(cos_col(k));
        if (s && c) {
            // a sin + b cos = A sin(kt + φ)
            const double amp = std::hypot(*s, *c);
            const double phase = std::atan2(*c, *s);
            append_term(sum, amp, ExprNode::sin(k, phase));
        } else if (s) {
            append_term(sum, *s, ExprNode::sin(k));
        } else if (c) {
            append_term(sum, *c, ExprNode::cos(k));
        }
    }
    if (const auto q = coef_of(kQuadratic)) append_term(sum, *q, ExprNode::square());
    if (const auto l = coef_of(kLinear)) append_term(sum, *l, ExprNode::param());
    if (const auto c0 = coef_of(kConst)) {
        if (!sum) {
            sum = ExprNode::constant(*c0);
        } else if (*c0 < 0) {
            sum = ExprNode::sub(std::move(*sum), ExprNode::constant(-*c0));
        } else {
            sum = ExprNode::add(std::move(*sum), ExprNode::constant(*c0));
        }
    }
    return sum ? std::move(*sum) : ExprNode::constant(0.0);
}

double tree_rmse(const ExprNode& tree, std::span<const double> ts, std::span<const double> values) {
    double sse = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double r = tree.eval(ts[i]) - values[i];
        sse += r * r;
    }
    return std::sqrt(sse / static_cast<double>(ts.size()));
}

class CoordinateFitter {
public:
    CoordinateFitter(std::span<const double> ts, std::span<const double> values, const SurrogateConfig& config)
        : ts_(ts), values_(values), config_(config) {
        const int cols = 3 + 2 * config.max_frequency;
        design_.resize(static_cast<Eigen::Index>(ts.size()), cols);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            for (int c = 0; c < cols; ++c) {
                design_(static_cast<Eigen::Index>(i), c) = basis(c, ts[i]);
            }
        }
        rhs_ = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }

    Model fit(const std::vector<int>& active) const {
        Model m;
        m.active = active;
        if (active.size() == 1 && active.front() == kConst) {
            // Least squares reduces to the mean; a flat coordinate keeps its exact value.
            const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
            m.coef = {*lo == *hi ? *lo : rhs_.mean()};
        } else if (!active.empty()) {
            Eigen::MatrixXd sub(design_.rows(), static_cast<Eigen::Index>(active.size()));
            for (std::size_t j = 0; j < active.size(); ++j) {
                sub.col(static_cast<Eigen::Index>(j)) = design_.col(active[j]);
            }
            const Eigen::VectorXd sol = sub.completeOrthogonalDecomposition().solve(rhs_);
            m.coef.assign(sol.data(), sol.data() + sol.size());
        }
        m.tree = build_tree(m.active, m.coef, config_.max_frequency);
        m.nodes = m.tree.node_count();
        m.rmse = tree_rmse(m.tree, ts_, values_);
        return m;
    }

    Model select() const {
        const int cols = static_cast<int>(design_.cols());
        std::vector<int> active(static_cast<std::size_t>(cols));
        for (int c = 0; c < cols; ++c) active[static_cast<std::size_t>(c)] = c;

        std::vector<Model> path;
        path.push_back(fit(active));
        // Greedy backward elimination down to the empty model.
        while (!active.empty()) {
            std::optional<Model> best;
            std::size_t best_drop = 0;
            for (std::size_t j = 0; j < active.size(); ++j) {
                std::vector<int> trial = active;
                trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(j));
                Model m = fit(trial);
                if (!best || m.rmse < best->rmse) {
                    best = std::move(m);
                    best_drop = j;
                }
            }
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_drop));
            path.push_back(std::move(*best));
        }
        // The constant-only fit is always a candidate so the result never loses to it.
        path.push_back(fit({kConst}));

        double scale = 1.0;
        for (double v : values_) scale = std::max(scale, std::abs(v));
        double best_rmse = std::numeric_limits<double>::infinity();
        for (const Model& m : path) {
            if (m.nodes <= config_.complexity_cap) best_rmse = std::min(best_rmse, m.rmse);
        }
        const double cutoff = best_rmse * (1.0 + config_.selection_tolerance) + 1e-12 * scale;
        const Model* chosen = nullptr;
        for (const Model& m : path) {
            if (m.nodes > config_.complexity_cap || m.rmse > cutoff) continue;
            if (!chosen || m.nodes < chosen->nodes ||
                (m.nodes == chosen->nodes && m.active.size() < chosen->active.size()) ||
                (m.nodes == chosen->nodes && m.active.size() == chosen->active.size() && m.rmse < chosen->rmse)) {
                chosen = &m;
            }
        }
        return chosen ? *chosen : path.back();
    }

private:
    std::span<const double> ts_;
    std::span<const double> values_;
    const SurrogateConfig& config_;
    Eigen::MatrixXd design_;
    Eigen::VectorXd rhs_;
};

}  // namespace

SurrogateExpr fit_surrogate(const Trajectory& trace, const SurrogateConfig& config) {
    if (trace.size() < static_cast<std::size_t>(kMinSurrogateSamples)) {
        throw InvalidInput("fit_surrogate: trace needs at least 8 points");
    }
    require_finite_nonempty(trace.points, "fit_surrogate");
    if (config.max_frequency < 0 || config.complexity_cap < 1) {
        throw InvalidInput("fit_surrogate: invalid configuration");
    }
    const std::vector<double> ts = surrogate_parameters(trace.size(), config);
    std::vector<double> xs, ys;
    xs.reserve(trace.size());
    ys.reserve(trace.size());
    for (const Point2& p : trace.points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    const Model mx = CoordinateFitter(ts, xs, config).select();
    const Model my = CoordinateFitter(ts, ys, config).select();

    SurrogateExpr out;
    out.x_expr = mx.tree;
    out.y_expr = my.tree;
    out.x_complexity = mx.nodes;
    out.y_complexity = my.nodes;
    out.fit_error = std::sqrt(mx.rmse * mx.rmse + my.rmse * my.rmse);
    return out;
}

Trajectory eval_surrogate(const SurrogateExpr& expr, std::span<const double> ts) {
    Trajectory out;
    out.points.reserve(ts.size());
    for (double t : ts) {
        if (!std::isfinite(t)) {
            throw InvalidInput("eval_surrogate: non-finite parameter");
        }
        out.points.push_back({expr.x_expr.eval(t), expr.y_expr.eval(t)});
    }
    return out;
}

std::string expr_to_text(const SurrogateExpr& expr) {
    return "x(t) = " + expr.x_expr.to_text() + "\ny(t) = " + expr.y_expr.to_text();
}

}  // namespace msynth
