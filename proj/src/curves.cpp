#include "msynth/curves.hpp"

#include "msynth/error.hpp"
#include "msynth/format.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace msynth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view to_string(CurveFamily family) {
    switch (family) {
        case CurveFamily::Circle: return "circle";
        case CurveFamily::Ellipse: return "ellipse";
        case CurveFamily::Line: return "line";
        case CurveFamily::Parabola: return "parabola";
        case CurveFamily::Lemniscate: return "lemniscate";
        case CurveFamily::Naca: return "naca";
    }
    return "unknown";
}

std::optional<CurveFamily> parse_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (CurveFamily f : all_families()) {
        if (lower == to_string(f)) {
            return f;
        }
    }
    if (lower == "lb") {
        return CurveFamily::Lemniscate;
    }
    return std::nullopt;
}

const std::vector<CurveFamily>& all_families() {
    static const std::vector<CurveFamily> families{CurveFamily::Circle,   CurveFamily::Ellipse,
                                                   CurveFamily::Line,     CurveFamily::Parabola,
                                                   CurveFamily::Lemniscate, CurveFamily::Naca};
    return families;
}

void validate(const CurveSpec& curve) {
    auto finite = [](std::initializer_list<double> vs) {
        return std::all_of(vs.begin(), vs.end(), [](double v) { return std::isfinite(v); });
    };
    std::visit(overloaded{
                   [&](const CircleParams& c) {
                       if (!finite({c.r, c.x1, c.y1}) || !(c.r > 0.0)) {
                           throw InvalidInput("circle: radius must be positive and finite");
                       }
                   },
                   [&](const EllipseParams& e) {
                       if (!finite({e.a, e.b, e.x1, e.y1}) || !(e.a > 0.0) || !(e.b > 0.0)) {
                           throw InvalidInput("ellipse: semi-axes must be positive and finite");
                       }
                   },
                   [&](const LineParams& l) {
                       if (!finite({l.x1, l.y1, l.x2, l.y2}) || (l.x1 == l.x2 && l.y1 == l.y2)) {
                           throw InvalidInput("line: endpoints must be finite and distinct");
                       }
                   },
                   [&](const ParabolaParams& p) {
                       if (!finite({p.a, p.h, p.k}) || p.a == 0.0) {
                           throw InvalidInput("parabola: a must be non-zero");
                       }
                   },
                   [&](const LemniscateParams& l) {
                       if (!std::isfinite(l.a) || !(l.a > 0.0)) {
                           throw InvalidInput("lemniscate: a must be positive");
                       }
                   },
                   [&](const NacaParams& n) {
                       if (n.series < 0 || n.series > 9999) {
                           throw InvalidInput("naca: series must be a four-digit code");
                       }
                       if (n.series % 100 == 0) {
                           throw InvalidInput("naca: zero thickness");
                       }
                   },
               },
               curve.params);
}

// ---------------------------------------------------------------------------
// NACA four-digit section

namespace naca {

Section decode(int series) {
    Section s;
    s.max_camber = static_cast<double>(series / 1000) / 100.0;
    s.camber_pos = static_cast<double>((series / 100) % 10) / 10.0;
    s.thickness = static_cast<double>(series % 100) / 100.0;
    return s;
}

double thickness(double t, double x) {
    return 5.0 * t *
           (0.2969 * std::sqrt(x) - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x -
            0.1015 * x * x * x * x);
}

namespace {
bool symmetric(const Section& s) { return s.max_camber == 0.0 || s.camber_pos == 0.0; }
}  // namespace

double camber(const Section& s, double x) {
    if (symmetric(s)) {
        return 0.0;
    }
    const double m = s.max_camber;
    const double p = s.camber_pos;
    if (x < p) {
        return m / (p * p) * (2.0 * p * x - x * x);
    }
    return m / ((1.0 - p) * (1.0 - p)) * ((1.0 - 2.0 * p) + 2.0 * p * x - x * x);
}

double camber_slope(const Section& s, double x) {
    if (symmetric(s)) {
        return 0.0;
    }
    const double m = s.max_camber;
    const double p = s.camber_pos;
    if (x < p) {
        return 2.0 * m / (p * p) * (p - x);
    }
    return 2.0 * m / ((1.0 - p) * (1.0 - p)) * (p - x);
}

Point2 upper(const Section& s, double x) {
    const double yt = thickness(s.thickness, x);
    const double theta = std::atan(camber_slope(s, x));
    return {x - yt * std::sin(theta), camber(s, x) + yt * std::cos(theta)};
}

Point2 lower(const Section& s, double x) {
    const double yt = thickness(s.thickness, x);
    const double theta = std::atan(camber_slope(s, x));
    return {x + yt * std::sin(theta), camber(s, x) - yt * std::cos(theta)};
}

}  // namespace naca

namespace {

double cosine_station(double s) { return 0.5 * (1.0 - std::cos(std::numbers::pi * s)); }

// Distance from p to one surface parametrized by the cosine angle beta ∈ [0, π].
// Returns {signed distance, |distance|}; sign follows the outward normal.
std::pair<double, double> naca_surface_distance(const naca::Section& s, bool is_upper, Point2 p) {
    auto surface = [&](double beta) {
        const double x = 0.5 * (1.0 - std::cos(beta));
        return is_upper ? naca::upper(s, x) : naca::lower(s, x);
    };
    auto dist = [&](double beta) { return norm(surface(beta) - p); };

    constexpr int kScan = 256;
    int best_i = 0;
    double best_d = dist(0.0);
    for (int i = 1; i <= kScan; ++i) {
        const double d = dist(std::numbers::pi * i / kScan);
        if (d < best_d) {
            best_d = d;
            best_i = i;
        }
    }
    double lo = std::numbers::pi * std::max(0, best_i - 1) / kScan;
    double hi = std::numbers::pi * std::min(kScan, best_i + 1) / kScan;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = dist(c);
    double fd = dist(d);
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = dist(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = dist(d);
        }
        if (!(c < d)) {
            break;
        }
    }
    double beta = 0.5 * (lo + hi);
    double best = dist(beta);
    for (double cand : {lo, hi, c, d}) {
        const double v = dist(cand);
        if (v < best) {
            best = v;
            beta = cand;
        }
    }
    if (best_d < best) {
        best = best_d;
        beta = std::numbers::pi * best_i / kScan;
    }

    // Outward normal: left of the LE→TE tangent on the upper surface, right on the lower.
    const double h = 1e-6;
    const double b0 = std::clamp(beta - h, 0.0, std::numbers::pi);
    const double b1 = std::clamp(beta + h, 0.0, std::numbers::pi);
    const Point2 tangent = surface(b1) - surface(b0);
    const double side = cross(tangent, p - surface(beta));
    double sign = (side >= 0.0) ? 1.0 : -1.0;
    if (!is_upper) {
        sign = -sign;
    }
    return {sign * best, best};
}

}  // namespace

double implicit_residual(const CurveSpec& curve, Point2 p) {
    const double x = p.x;
    const double y = p.y;
    return std::visit(
        overloaded{
            [&](const CircleParams& c) {
                return (x - c.x1) * (x - c.x1) + (y - c.y1) * (y - c.y1) - c.r * c.r;
            },
            [&](const EllipseParams& e) {
                return (x - e.x1) * (x - e.x1) / (e.a * e.a) + (y - e.y1) * (y - e.y1) / (e.b * e.b) -
                       1.0;
            },
            [&](const LineParams& l) { return (y - l.y1) * (l.x2 - l.x1) - (l.y2 - l.y1) * (x - l.x1); },
            [&](const ParabolaParams& q) { return y - q.a * (x - q.h) * (x - q.h) - q.k; },
            [&](const LemniscateParams& l) {
                const double r2 = x * x + y * y;
                return r2 * r2 - 2.0 * l.a * l.a * (x * x - y * y);
            },
            [&](const NacaParams& n) {
                const naca::Section s = naca::decode(n.series);
                const auto up = naca_surface_distance(s, true, p);
                const auto lo = naca_surface_distance(s, false, p);
                return up.second <= lo.second ? up.first : lo.first;
            },
        },
        curve.params);
}

Point2 curve_point(const CurveSpec& curve, double u, const SamplingOptions& options) {
    return std::visit(
        overloaded{
            [&](const CircleParams& c) {
                const double th = kTwoPi * u;
                return Point2{c.x1 + c.r * std::cos(th), c.y1 + c.r * std::sin(th)};
            },
            [&](const EllipseParams& e) {
                const double th = kTwoPi * u;
                return Point2{e.x1 + e.a * std::cos(th), e.y1 + e.b * std::sin(th)};
            },
            [&](const LineParams& l) {
                return Point2{l.x1 + u * (l.x2 - l.x1), l.y1 + u * (l.y2 - l.y1)};
            },
            [&](const ParabolaParams& q) {
                const double w = options.parabola_half_width;
                const double x = q.h - w + 2.0 * w * u;
                return Point2{x, q.a * (x - q.h) * (x - q.h) + q.k};
            },
            [&](const LemniscateParams& l) {
                const double th = kTwoPi * u;
                const double s = std::sin(th);
                const double c = std::cos(th);
                const double denom = 1.0 + s * s;
                const double scale = l.a * std::numbers::sqrt2;
                return Point2{scale * c / denom, scale * c * s / denom};
            },
            [&](const NacaParams& n) {
                // Closed contour: upper surface TE→LE on [0, 0.5], lower LE→TE on [0.5, 1].
                const naca::Section s = naca::decode(n.series);
                if (u <= 0.5) {
                    return naca::upper(s, cosine_station(1.0 - 2.0 * u));
                }
                return naca::lower(s, cosine_station(2.0 * u - 1.0));
            },
        },
        curve.params);
}

Trajectory sample_points(const CurveSpec& curve, int n, std::uint64_t seed, const SamplingOptions& options) {
    validate(curve);
    if (n < 1) {
        throw InvalidInput("sample_points: n must be positive");
    }
    SplitMix64 rng(seed);
    Trajectory out;
    out.points.reserve(static_cast<std::size_t>(n));
    const bool random = options.mode == SamplingMode::Random;

    if (const auto* naca_params = std::get_if<NacaParams>(&curve.params)) {
        const naca::Section s = naca::decode(naca_params->series);
        const int n_upper = (n + 1) / 2;
        const int n_lower = n / 2;
        std::vector<double> up_st, lo_st;
        for (int j = 0; j < n_upper; ++j) {
            up_st.push_back(random ? rng.uniform() : (j + 0.5) / n_upper);
        }
        for (int j = 0; j < n_lower; ++j) {
            lo_st.push_back(random ? rng.uniform() : (j + 0.5) / n_lower);
        }
        std::sort(up_st.begin(), up_st.end());
        std::sort(lo_st.begin(), lo_st.end());
        for (int i = 0; i < n; ++i) {
            const int j = i / 2;
            if (i % 2 == 0) {
                out.points.push_back(naca::upper(s, cosine_station(up_st[static_cast<std::size_t>(j)])));
            } else {
                out.points.push_back(naca::lower(s, cosine_station(lo_st[static_cast<std::size_t>(j)])));
            }
        }
        return out;
    }

    const bool periodic = curve.family() == CurveFamily::Circle || curve.family() == CurveFamily::Ellipse ||
                          curve.family() == CurveFamily::Lemniscate;
    std::vector<double> us;
    us.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (random) {
            us.push_back(rng.uniform());
        } else if (periodic) {
            us.push_back(static_cast<double>(i) / n);
        } else {
            us.push_back(n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
        }
    }
    std::sort(us.begin(), us.end());
    for (double u : us) {
        out.points.push_back(curve_point(curve, u, options));
    }
    return out;
}

Trajectory reference_trajectory(const CurveSpec& curve, int n, const SamplingOptions& options) {
    validate(curve);
    if (n < 2) {
        throw InvalidInput("reference_trajectory: need at least 2 points");
    }
    const bool open = curve.family() == CurveFamily::Line || curve.family() == CurveFamily::Parabola;
    Trajectory out;
    out.closed = !open;
    out.points.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = open ? static_cast<double>(i) / (n - 1) : static_cast<double>(i) / n;
        out.points.push_back(curve_point(curve, u, options));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equation text

namespace {

std::string real(double v) { return format_real(v); }

// "x^2", "(x - 0.5)^2", "(x + 2)^2"
std::string shifted(char var, double center, bool squared) {
    std::string base;
    if (center == 0.0) {
        base = std::string(1, var);
        return squared ? base + "^2" : base;
    }
    base = std::string("(") + var + (center > 0 ? " - " : " + ") + real(std::abs(center)) + ")";
    return squared ? base + "^2" : base;
}

// "+ 3" / "- 3" suffix, empty for zero.
std::string offset_suffix(double v) {
    if (v == 0.0) {
        return "";
    }
    return (v > 0 ? " + " : " - ") + real(std::abs(v));
}

// Coefficient prefix for a product: "" for 1, "-" for -1, "2*" otherwise.
std::string coeff_prefix(double v) {
    if (v == 1.0) {
        return "";
    }
    if (v == -1.0) {
        return "-";
    }
    return real(v) + "*";
}

std::string series_code(int series) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04d", series);
    return buf;
}

}  // namespace

std::string equation_text(const CurveSpec& curve) {
    validate(curve);
    return std::visit(
        overloaded{
            [](const CircleParams& c) {
                return shifted('x', c.x1, true) + " + " + shifted('y', c.y1, true) + " = " + real(c.r * c.r);
            },
            [](const EllipseParams& e) {
                return shifted('x', e.x1, true) + "/" + real(e.a * e.a) + " + " + shifted('y', e.y1, true) +
                       "/" + real(e.b * e.b) + " = 1";
            },
            [](const LineParams& l) {
                if (l.x1 == l.x2) {
                    return "x = " + real(l.x1) + ", y from " + real(l.y1) + " to " + real(l.y2);
                }
                const double m = (l.y2 - l.y1) / (l.x2 - l.x1);
                const std::string domain = ", x from " + real(l.x1) + " to " + real(l.x2);
                if (m == 0.0) {
                    return "y = " + real(l.y1) + domain;
                }
                return shifted('y', l.y1, false) + " = " + coeff_prefix(m) + shifted('x', l.x1, false) + domain;
            },
            [](const ParabolaParams& q) {
                return "y = " + coeff_prefix(q.a) + shifted('x', q.h, true) + offset_suffix(q.k);
            },
            [](const LemniscateParams& l) {
                return "(x^2 + y^2)^2 = " + real(2.0 * l.a * l.a) + "*(x^2 - y^2)";
            },
            [](const NacaParams& n) {
                const naca::Section s = naca::decode(n.series);
                return "NACA " + series_code(n.series) + ": y = yc(x) +/- yt(x), yt(x) = " +
                       real(5.0 * s.thickness) +
                       "*(0.2969*sqrt(x) - 0.126*x - 0.3516*x^2 + 0.2843*x^3 - 0.1015*x^4), m = " +
                       real(s.max_camber) + ", p = " + real(s.camber_pos) + ", 0 <= x <= 1";
            },
        },
        curve.params);
}

namespace {

class Scanner {
public:
    explicit Scanner(std::string_view s) : s_(s) {}

    bool done() const { return pos_ == s_.size(); }

    bool lit(std::string_view l) {
        if (s_.substr(pos_, l.size()) == l) {
            pos_ += l.size();
            return true;
        }
        return false;
    }

    bool number(double& out) {
        std::size_t end = pos_;
        if (end < s_.size() && (s_[end] == '-' || s_[end] == '+')) {
            ++end;
        }
        while (end < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' || s_[end] == 'e' ||
                ((s_[end] == '-' || s_[end] == '+') && (s_[end - 1] == 'e')))) {
            ++end;
        }
        if (end == pos_) {
            return false;
        }
        if (!parse_real(std::string(s_.substr(pos_, end - pos_)), out)) {
            return false;
        }
        pos_ = end;
        return true;
    }

    std::size_t pos() const { return pos_; }
    void reset(std::size_t p) { pos_ = p; }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

// Inverse of shifted(): "v", "v^2", "(v - c)", "(v + c)^2" ...
bool read_shifted(Scanner& sc, char var, bool squared, double& center) {
    const std::string v(1, var);
    if (sc.lit("(" + v + " - ")) {
        if (!sc.number(center) || !sc.lit(")")) return false;
    } else if (sc.lit("(" + v + " + ")) {
        if (!sc.number(center) || !sc.lit(")")) return false;
        center = -center;
    } else if (sc.lit(v)) {
        center = 0.0;
    } else {
        return false;
    }
    return squared ? sc.lit("^2") : true;
}

// Inverse of coeff_prefix() followed by a shifted term.
bool read_coeff(Scanner& sc, char var, double& coeff) {
    const std::size_t start = sc.pos();
    const std::string v(1, var);
    if (sc.lit("-(" + v) || sc.lit("-" + v)) {
        sc.reset(start + 1);
        coeff = -1.0;
        return true;
    }
    if (sc.number(coeff) && sc.lit("*")) {
        return true;
    }
    sc.reset(start);
    coeff = 1.0;
    return true;
}

std::optional<CurveSpec> parse_naca(std::string_view text) {
    Scanner sc(text);
    if (!sc.lit("NACA ")) return std::nullopt;
    const std::string digits(text.substr(5, 4));
    if (digits.size() != 4 || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) {
            return std::isdigit(c) != 0;
        })) {
        return std::nullopt;
    }
    CurveSpec c{NacaParams{std::stoi(digits)}};
    if (equation_text(c) != text) return std::nullopt;
    return c;
}

std::optional<CurveSpec> parse_lemniscate(Scanner& sc) {
    double coef = 0.0;
    if (!sc.lit("(x^2 + y^2)^2 = ") || !sc.number(coef) || !sc.lit("*(x^2 - y^2)") || !sc.done()) {
        return std::nullopt;
    }
    if (!(coef > 0.0)) return std::nullopt;
    return CurveSpec{LemniscateParams{std::sqrt(coef / 2.0)}};
}

std::optional<CurveSpec> parse_conic(Scanner& sc) {
    double cx = 0, cy = 0, a2 = 0, b2 = 0, rhs = 0;
    if (!read_shifted(sc, 'x', true, cx)) return std::nullopt;
    if (sc.lit("/")) {
        if (!sc.number(a2) || !sc.lit(" + ") || !read_shifted(sc, 'y', true, cy) || !sc.lit("/") ||
            !sc.number(b2) || !sc.lit(" = 1") || !sc.done()) {
            return std::nullopt;
        }
        if (!(a2 > 0.0) || !(b2 > 0.0)) return std::nullopt;
        return CurveSpec{EllipseParams{std::sqrt(a2), std::sqrt(b2), cx, cy}};
    }
    if (!sc.lit(" + ") || !read_shifted(sc, 'y', true, cy) || !sc.lit(" = ") || !sc.number(rhs) || !sc.done()) {
        return std::nullopt;
    }
    if (!(rhs > 0.0)) return std::nullopt;
    return CurveSpec{CircleParams{std::sqrt(rhs), cx, cy}};
}

std::optional<CurveSpec> parse_line_or_parabola(Scanner& sc) {
    const std::size_t start = sc.pos();
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    // Vertical line.
    if (sc.lit("x = ")) {
        if (!sc.number(x1) || !sc.lit(", y from ") || !sc.number(y1) || !sc.lit(" to ") || !sc.number(y2) ||
            !sc.done()) {
            return std::nullopt;
        }
        return CurveSpec{LineParams{x1, y1, x1, y2}};
    }
    sc.reset(start);
    // Horizontal line "y = c, x from a to b".
    if (sc.lit("y = ")) {
        const std::size_t after = sc.pos();
        double c = 0;
        if (sc.number(c) && sc.lit(", x from ")) {
            if (!sc.number(x1) || !sc.lit(" to ") || !sc.number(x2) || !sc.done()) return std::nullopt;
            return CurveSpec{LineParams{x1, c, x2, c}};
        }
        // Parabola "y = a*(x - h)^2 + k".
        sc.reset(after);
        double a = 1.0, h = 0.0, k = 0.0;
        read_coeff(sc, 'x', a);
        if (read_shifted(sc, 'x', true, h)) {
            if (sc.lit(" + ")) {
                if (!sc.number(k)) return std::nullopt;
            } else if (sc.lit(" - ")) {
                if (!sc.number(k)) return std::nullopt;
                k = -k;
            }
            if (!sc.done() || a == 0.0) return std::nullopt;
            return CurveSpec{ParabolaParams{a, h, k}};
        }
    }
    // Sloped line "y - y1 = m*(x - x1), x from a to b".
    sc.reset(start);
    double m = 1.0;
    if (!read_shifted(sc, 'y', false, y1) || !sc.lit(" = ")) return std::nullopt;
    read_coeff(sc, 'x', m);
    double x_anchor = 0.0;
    if (!read_shifted(sc, 'x', false, x_anchor) || !sc.lit(", x from ") || !sc.number(x1) || !sc.lit(" to ") ||
        !sc.number(x2) || !sc.done()) {
        return std::nullopt;
    }
    if (x_anchor != x1 || m == 0.0) return std::nullopt;
    y2 = y1 + m * (x2 - x1);
    return CurveSpec{LineParams{x1, y1, x2, y2}};
}

}  // namespace

std::optional<CurveSpec> parse_equation_text(std::string_view text) {
    if (text.starts_with("NACA ")) {
        return parse_naca(text);
    }
    Scanner sc(text);
    if (text.starts_with("(x^2 + y^2)^2")) {
        return parse_lemniscate(sc);
    }
    if (text.starts_with("y") || text.starts_with("(y") || text.starts_with("x = ")) {
        return parse_line_or_parabola(sc);
    }
    return parse_conic(sc);
}

std::string describe(const CurveSpec& curve) {
    return std::visit(
        overloaded{
            [](const CircleParams& c) {
                return "Design a planar mechanism whose target joint traces a circle of radius " + real(c.r) +
                       " centred at (" + real(c.x1) + ", " + real(c.y1) + ").";
            },
            [](const EllipseParams& e) {
                return "Design a planar mechanism whose target joint traces an ellipse with semi-axes " +
                       real(e.a) + " (along x) and " + real(e.b) + " (along y) centred at (" + real(e.x1) +
                       ", " + real(e.y1) + ").";
            },
            [](const LineParams& l) {
                return "Design a planar mechanism whose target joint moves along the straight segment from (" +
                       real(l.x1) + ", " + real(l.y1) + ") to (" + real(l.x2) + ", " + real(l.y2) + ").";
            },
            [](const ParabolaParams& q) {
                return "Design a planar mechanism whose target joint follows a parabolic arc with vertex at (" +
                       real(q.h) + ", " + real(q.k) + ") and curvature coefficient " + real(q.a) + ".";
            },
            [](const LemniscateParams& l) {
                return "Design a planar mechanism whose target joint traces a lemniscate of Bernoulli "
                       "(figure-eight) with size parameter a = " +
                       real(l.a) + ", centred at the origin.";
            },
            [](const NacaParams& n) {
                return "Design a planar mechanism whose target joint traces the contour of a NACA " +
                       series_code(n.series) + " airfoil with unit chord and its leading edge at the origin.";
            },
        },
        curve.params);
}

// ---------------------------------------------------------------------------
// Dataset

CurveSpec sample_curve(CurveFamily family, SplitMix64& rng, const ParameterRanges& r) {
    switch (family) {
        case CurveFamily::Circle: {
            const double radius = rng.uniform(r.radius_min, r.radius_max);
            const double x1 = rng.uniform(r.center_min, r.center_max);
            const double y1 = rng.uniform(r.center_min, r.center_max);
            return CurveSpec{CircleParams{radius, x1, y1}};
        }
        case CurveFamily::Ellipse: {
            const double a = rng.uniform(r.radius_min, r.radius_max);
            const double b = rng.uniform(r.radius_min, r.radius_max);
            const double x1 = rng.uniform(r.center_min, r.center_max);
            const double y1 = rng.uniform(r.center_min, r.center_max);
            return CurveSpec{EllipseParams{a, b, x1, y1}};
        }
        case CurveFamily::Line: {
            for (;;) {
                LineParams l;
                l.x1 = rng.uniform(r.center_min, r.center_max);
                l.y1 = rng.uniform(r.center_min, r.center_max);
                l.x2 = rng.uniform(r.center_min, r.center_max);
                l.y2 = rng.uniform(r.center_min, r.center_max);
                if (std::hypot(l.x2 - l.x1, l.y2 - l.y1) >= r.line_min_separation) {
                    return CurveSpec{l};
                }
            }
        }
        case CurveFamily::Parabola: {
            double a = rng.uniform(r.parabola_a_min, r.parabola_a_max);
            if (rng.uniform() < 0.5) {
                a = -a;
            }
            const double h = rng.uniform(r.center_min, r.center_max);
            const double k = rng.uniform(r.center_min, r.center_max);
            return CurveSpec{ParabolaParams{a, h, k}};
        }
        case CurveFamily::Lemniscate:
            return CurveSpec{LemniscateParams{rng.uniform(r.radius_min, r.radius_max)}};
        case CurveFamily::Naca: {
            // Codes ending in 00 have no thickness; draw again.
            for (int attempt = 0; attempt < 1000; ++attempt) {
                const int code = static_cast<int>(rng.uniform_int(r.naca_min, r.naca_max));
                if (code % 100 != 0) {
                    return CurveSpec{NacaParams{code}};
                }
            }
            throw InvalidInput("sample_curve: naca range has no section with thickness");
        }
    }
    throw InvalidInput("sample_curve: unknown family");
}

std::vector<TaskInstance> generate_dataset(const DatasetConfig& config) {
    if (config.instances_per_family < 1 || config.n_points < 1) {
        throw InvalidInput("generate_dataset: instances_per_family and n_points must be positive");
    }
    std::vector<TaskInstance> out;
    for (CurveFamily family : config.families) {
        for (int i = 0; i < config.instances_per_family; ++i) {
            TaskInstance task;
            task.seed = mix_seed(config.seed, static_cast<std::uint64_t>(family) + 1,
                                 static_cast<std::uint64_t>(i) + 1);
            SplitMix64 rng(task.seed);
            task.id = std::string(to_string(family)) + "-" + std::to_string(i);
            task.curve = sample_curve(family, rng, config.ranges);
            task.target_points = sample_points(task.curve, config.n_points, rng.next(), config.sampling);
            task.equation_text = equation_text(task.curve);
            out.push_back(std::move(task));
        }
    }
    return out;
}

namespace {

nlohmann::ordered_json params_json(const CurveSpec& curve) {
    nlohmann::ordered_json j;
    std::visit(overloaded{
                   [&](const CircleParams& c) { j = {{"r", c.r}, {"x1", c.x1}, {"y1", c.y1}}; },
                   [&](const EllipseParams& e) { j = {{"a", e.a}, {"b", e.b}, {"x1", e.x1}, {"y1", e.y1}}; },
                   [&](const LineParams& l) { j = {{"x1", l.x1}, {"y1", l.y1}, {"x2", l.x2}, {"y2", l.y2}}; },
                   [&](const ParabolaParams& q) { j = {{"a", q.a}, {"h", q.h}, {"k", q.k}}; },
                   [&](const LemniscateParams& l) { j = {{"a", l.a}}; },
                   [&](const NacaParams& n) { j = {{"series", n.series}}; },
               },
               curve.params);
    return j;
}

CurveSpec curve_from_json(CurveFamily family, const nlohmann::json& p) {
    switch (family) {
        case CurveFamily::Circle:
            return CurveSpec{CircleParams{p.at("r"), p.at("x1"), p.at("y1")}};
        case CurveFamily::Ellipse:
            return CurveSpec{EllipseParams{p.at("a"), p.at("b"), p.at("x1"), p.at("y1")}};
        case CurveFamily::Line:
            return CurveSpec{LineParams{p.at("x1"), p.at("y1"), p.at("x2"), p.at("y2")}};
        case CurveFamily::Parabola:
            return CurveSpec{ParabolaParams{p.at("a"), p.at("h"), p.at("k")}};
        case CurveFamily::Lemniscate:
            return CurveSpec{LemniscateParams{p.at("a")}};
        case CurveFamily::Naca:
            return CurveSpec{NacaParams{p.at("series").get<int>()}};
    }
    throw InvalidInput("unknown family");
}

}  // namespace

std::string to_jsonl(const TaskInstance& task) {
    nlohmann::ordered_json j;
    j["id"] = task.id;
    j["family"] = std::string(to_string(task.curve.family()));
    j["params"] = params_json(task.curve);
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const Point2& p : task.target_points.points) {
        pts.push_back({p.x, p.y});
    }
    j["points"] = pts;
    j["equation_text"] = task.equation_text;
    j["seed"] = task.seed;
    return j.dump();
}

TaskInstance task_from_json(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
        TaskInstance t;
        t.id = j.at("id").get<std::string>();
        const auto family = parse_family(j.at("family").get<std::string>());
        if (!family) {
            throw InvalidInput("unknown curve family '" + j.at("family").get<std::string>() + "'");
        }
        t.curve = curve_from_json(*family, j.at("params"));
        validate(t.curve);
        for (const auto& p : j.at("points")) {
            t.target_points.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        t.equation_text = j.value("equation_text", equation_text(t.curve));
        t.seed = j.value("seed", std::uint64_t{0});
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("task record: ") + e.what());
    }
}

std::string dataset_to_jsonl(const std::vector<TaskInstance>& tasks) {
    std::string out;
    for (const TaskInstance& t : tasks) {
        out += to_jsonl(t);
        out += '\n';
    }
    return out;
}

std::vector<TaskInstance> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open dataset '" + path + "'");
    }
    std::vector<TaskInstance> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        out.push_back(task_from_json(line));
    }
    return out;
}

}  // namespace msynth
