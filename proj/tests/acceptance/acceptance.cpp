// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include "msynth/agents.hpp"
#include "msynth/bench.hpp"
#include "msynth/curves.hpp"
#include "msynth/dsl.hpp"
#include "msynth/format.hpp"
#include "msynth/geometry.hpp"
#include "msynth/linkage.hpp"
#include "msynth/memory.hpp"
#include "msynth/orchestrator.hpp"
#include "msynth/random.hpp"
#include "msynth/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace msynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- C1 -------------------------------------------------------------------

double brute_chamfer(const std::vector<Point2>& p, const std::vector<Point2>& q) {
    auto one_way = [](const std::vector<Point2>& a, const std::vector<Point2>& b) {
        double sum = 0;
        for (const Point2& u : a) {
            double best = INFINITY;
            for (const Point2& v : b) {
                const double dx = u.x - v.x, dy = u.y - v.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            sum += best;
        }
        return sum / static_cast<double>(a.size());
    };
    return one_way(p, q) + one_way(q, p);
}

std::vector<Point2> random_cloud(SplitMix64& rng, int n) {
    std::vector<Point2> pts(n);
    for (Point2& p : pts) p = {rng.uniform(-10, 10), rng.uniform(-10, 10)};
    return pts;
}

Outcome check_chamfer() {
    Outcome o;
    SplitMix64 rng(1001);
    const auto t0 = Clock::now();
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = random_cloud(rng, static_cast<int>(rng.uniform_int(1, 200)));
        const auto q = random_cloud(rng, static_cast<int>(rng.uniform_int(1, 200)));
        const double got = chamfer_distance(p, q);
        const double want = brute_chamfer(p, q);
        worst = std::max(worst, std::abs(got - want));
        o.require(std::abs(got - want) <= 1e-12, "oracle mismatch at trial " + std::to_string(trial));
        o.require(got == chamfer_distance(q, p), "asymmetric at trial " + std::to_string(trial));
        o.require(chamfer_distance(p, p) == 0.0, "self-distance non-zero at trial " + std::to_string(trial));
    }
    const double secs = seconds_since(t0);
    o.require(secs < 5.0, "runtime " + fmt("%.2f", secs) + " s");
    if (o.pass) o.detail = "1000 pairs, max |diff| " + fmt("%.1e", worst) + ", " + fmt("%.2f", secs) + " s";
    return o;
}

// ---- C2 -------------------------------------------------------------------

double diameter(const std::vector<Point2>& pts) {
    double d = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, norm(pts[i] - pts[j]));
    }
    return d;
}

Outcome check_icp() {
    Outcome o;
    SplitMix64 rng(2002);
    DatasetConfig dc;
    dc.seed = 2002;
    dc.instances_per_family = 34;
    const auto tasks = generate_dataset(dc);
    const std::size_t per_family = static_cast<std::size_t>(dc.instances_per_family);
    const std::size_t families = dc.families.size();
    const auto t0 = Clock::now();
    int recovered = 0, steps = 0, monotone_steps = 0;
    std::map<std::string, int> misses;
    for (int trial = 0; trial < 200; ++trial) {
        // Cycle through the families so every shape gets about the same number of trials.
        const TaskInstance& task = tasks[(trial % families) * per_family + trial / families];
        const Trajectory target = reference_trajectory(task.curve, 64);
        const double diam = diameter(target.points);
        const double angle = rng.uniform(-15.0, 15.0) * std::numbers::pi / 180.0;
        const double shift = rng.uniform(0.0, 0.1) * diam;
        const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double c = std::cos(angle), s = std::sin(angle);
        const Point2 centre = centroid(target.points);
        Trajectory source = target;
        for (Point2& p : source.points) {
            const Point2 d = p - centre;
            p = Point2{centre.x + c * d.x - s * d.y + shift * std::cos(dir),
                       centre.y + s * d.x + c * d.y + shift * std::sin(dir)};
        }
        const IcpResult r = icp_align(source, target);
        if (r.final_chamfer <= 1e-8) {
            ++recovered;
        } else {
            ++misses[std::string(to_string(task.curve.family()))];
        }
        for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
            ++steps;
            if (r.objective_history[i] <= r.objective_history[i - 1]) ++monotone_steps;
        }
    }
    const double secs = seconds_since(t0);
    std::string miss_text;
    for (const auto& [family, count] : misses) miss_text += (miss_text.empty() ? "" : ", ") + family + " " + std::to_string(count);
    const std::string summary = std::to_string(recovered) + "/200 recovered to 1e-8 (need 198)" +
                                (miss_text.empty() ? "" : "; misses: " + miss_text) + "; objective monotone in " +
                                std::to_string(monotone_steps) + "/" + std::to_string(steps) + " steps; " +
                                fmt("%.2f", secs) + " s";
    o.require(recovered >= 198, summary);
    o.require(monotone_steps == steps, summary);
    o.require(secs < 10.0, summary);
    if (o.pass) o.detail = summary;
    return o;
}

// ---- C3 -------------------------------------------------------------------

Outcome check_generator() {
    Outcome o;
    DatasetConfig dc;
    dc.seed = 3003;
    dc.instances_per_family = 5;
    dc.n_points = 4;
    const auto tasks = generate_dataset(dc);
    o.require(tasks.size() == 30, "expected 30 tasks, got " + std::to_string(tasks.size()));
    double worst = 0;
    for (const TaskInstance& t : tasks) {
        o.require(t.target_points.size() == 4, t.id + " does not have 4 points");
        for (const Point2& p : t.target_points.points) worst = std::max(worst, std::abs(implicit_residual(t.curve, p)));
    }
    o.require(worst <= 1e-9, "residual " + fmt("%.2e", worst));
    o.require(dataset_to_jsonl(tasks) == dataset_to_jsonl(generate_dataset(dc)), "regeneration differs");

    for (double a : {0.5, 1.0, 1.7, 3.25}) {
        const CurveSpec lem{LemniscateParams{a}};
        const Point2 v = curve_point(lem, 0.0);
        o.require(std::abs(v.x - a * std::numbers::sqrt2) <= 1e-12 && std::abs(v.y) <= 1e-12,
                  "lemniscate vertex off for a=" + fmt("%g", a));
    }
    if (o.pass) o.detail = "30 tasks, max residual " + fmt("%.1e", worst) + ", regeneration identical";
    return o;
}

// ---- C4 -------------------------------------------------------------------

Outcome check_simulator() {
    Outcome o;
    // (a) unit crank
    MechanismSpec crank;
    crank.joints.push_back({"target", CrankJoint{Point2{0, 0}, 1.0, 0.1, std::nullopt}});
    const SimResult a = simulate(crank);
    o.require(a.success, "unit crank failed");
    double radius_err = 0;
    for (const Point2& p : a.trajectory.points) radius_err = std::max(radius_err, std::abs(norm(p) - 1.0));
    o.require(radius_err <= 1e-12, "crank radius residual " + fmt("%.2e", radius_err));

    // (b) Grashof four-bar: ground 4, crank 1, coupler 3, rocker 3.5; s + l = 5 <= p + q = 6.5
    const Point2 ground{4, 0};
    MechanismSpec fb;
    fb.joints.push_back({"crank", CrankJoint{Point2{0, 0}, 1.0, 0.05, std::nullopt}});
    fb.joints.push_back({"rocker", RevoluteJoint{std::string("crank"), 3.0, ground, 3.5, std::nullopt}});
    fb.joints.push_back({"target", RevoluteJoint{std::string("crank"), 2.0, std::string("rocker"), 2.0, std::nullopt}});
    const int n = default_steps(fb);
    const SimResult b = simulate(fb, n + 1);
    o.require(b.success, "four-bar failed");
    double link_err = 0;
    if (b.success) {
        const auto& cp = b.per_joint_traces.at("crank").points;
        const auto& rp = b.per_joint_traces.at("rocker").points;
        const auto& tp = b.per_joint_traces.at("target").points;
        for (std::size_t i = 0; i < cp.size(); ++i) {
            link_err = std::max({link_err, std::abs(norm(cp[i]) - 1.0), std::abs(norm(rp[i] - cp[i]) - 3.0),
                                 std::abs(norm(rp[i] - ground) - 3.5), std::abs(norm(tp[i] - cp[i]) - 2.0),
                                 std::abs(norm(tp[i] - rp[i]) - 2.0)});
        }
        // Closure is measured with a step that divides the revolution exactly.
        MechanismSpec exact = fb;
        std::get<CrankJoint>(exact.joints[0].kind).angle_step = 2.0 * std::numbers::pi / n;
        const SimResult e = simulate(exact, n + 1);
        o.require(e.success, "exact-period four-bar failed");
        const double gap = e.success ? norm(e.trajectory.points[n] - e.trajectory.points[0]) : INFINITY;
        o.require(link_err <= 1e-9, "link constraint error " + fmt("%.2e", link_err));
        o.require(gap <= 1e-6, "closure gap " + fmt("%.2e", gap));
        o.require(b.trajectory.closed, "trace not marked closed");
        if (o.pass) o.detail = "radius " + fmt("%.1e", radius_err) + ", links " + fmt("%.1e", link_err) + ", gap " + fmt("%.1e", gap);
    }

    // (c) non-Grashof: |tip - pivot|^2 = 29 - 20 cos(phi) > 16 first at phi = 0.9
    MechanismSpec bad;
    bad.joints.push_back({"crank", CrankJoint{Point2{0, 0}, 2.0, 0.1, std::nullopt}});
    bad.joints.push_back({"target", RevoluteJoint{std::string("crank"), 2.0, Point2{5, 0}, 2.0, std::nullopt}});
    int predicted = 0;
    while (29.0 - 20.0 * std::cos(0.1 * predicted) <= 16.0 + 1e-9) ++predicted;
    try {
        const SimResult c = simulate(bad);
        o.require(!c.success && c.failure && c.failure->step == predicted && c.failure->joint == "target",
                  "non-Grashof did not fail at predicted step " + std::to_string(predicted));
    } catch (const std::exception& e) {
        o.require(false, std::string("non-Grashof threw: ") + e.what());
    }
    if (o.pass) o.detail += ", non-Grashof fails at step " + std::to_string(predicted);
    return o;
}

// ---- C5 -------------------------------------------------------------------

double random_real(SplitMix64& rng, bool positive) {
    const double mag = rng.uniform(0.01, 10.0) * std::pow(10.0, static_cast<double>(rng.uniform_int(-3, 3)));
    if (positive) return mag;
    return rng.uniform() < 0.5 ? -mag : mag;
}

Point2 random_point(SplitMix64& rng) { return {random_real(rng, false), random_real(rng, false)}; }

JointRef random_ref(SplitMix64& rng, const std::vector<Joint>& earlier) {
    if (earlier.empty() || rng.uniform() < 0.3) return random_point(rng);
    return earlier[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(earlier.size()) - 1))].name;
}

std::optional<Point2> maybe_point(SplitMix64& rng) {
    if (rng.uniform() < 0.5) return std::nullopt;
    return random_point(rng);
}

MechanismSpec random_spec(SplitMix64& rng) {
    MechanismSpec s;
    const int n = static_cast<int>(rng.uniform_int(1, 7));
    for (int i = 0; i < n; ++i) {
        const std::string name = i == n - 1 ? "target" : "j" + std::to_string(i) + (rng.uniform() < 0.5 ? "_a" : "B");
        JointKind kind;
        const int pick = i == 0 ? 1 : static_cast<int>(rng.uniform_int(0, 3));
        switch (pick) {
            case 0: kind = StaticJoint{random_point(rng)}; break;
            case 1: kind = CrankJoint{random_ref(rng, s.joints), random_real(rng, true), random_real(rng, false), maybe_point(rng)}; break;
            case 2:
                kind = RevoluteJoint{random_ref(rng, s.joints), random_real(rng, true), random_ref(rng, s.joints),
                                     random_real(rng, true), maybe_point(rng)};
                break;
            default: {
                const Point2 la = random_point(rng);
                const Point2 lb = la + Point2{random_real(rng, true), random_real(rng, false)};
                kind = LinearJoint{random_ref(rng, s.joints), random_real(rng, true), la, lb, maybe_point(rng)};
            }
        }
        s.joints.push_back({name, kind});
    }
    return s;
}

std::string random_bytes(SplitMix64& rng) {
    std::string s(static_cast<std::size_t>(rng.uniform_int(0, 300)), '\0');
    for (char& c : s) c = static_cast<char>(rng.uniform_int(0, 255));
    return s;
}

std::string token_soup(SplitMix64& rng) {
    static const std::vector<std::string> tokens{
        "target", "crank", "=", "Crank", "Revolute", "Linear", "Static", "(", ")", ",", "p0", "p1", "d0", "d1",
        "distance", "angle", "revolute_radius", "la", "lb", "x", "y", "1", "-2.5", "1e308", "1e999", "nan", "inf",
        "0", "0x1p3", "\n", " ", "#", "```", "\t", "pylinkage.", "=(", "((", "))", ".", "-", "+", "_", "é"};
    std::string s;
    const int n = static_cast<int>(rng.uniform_int(0, 60));
    for (int i = 0; i < n; ++i) s += tokens[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tokens.size()) - 1))];
    return s;
}

std::string mutate(SplitMix64& rng, std::string s) {
    const int edits = static_cast<int>(rng.uniform_int(1, 8));
    for (int e = 0; e < edits && !s.empty(); ++e) {
        const std::size_t at = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s.size()) - 1));
        switch (rng.uniform_int(0, 2)) {
            case 0: s.erase(at, static_cast<std::size_t>(rng.uniform_int(1, 5))); break;
            case 1: s.insert(at, 1, static_cast<char>(rng.uniform_int(1, 127))); break;
            default: s[at] = static_cast<char>(rng.uniform_int(0, 255));
        }
    }
    return s;
}

Outcome check_dsl() {
    Outcome o;
    SplitMix64 rng(5005);
    std::vector<std::string> corpus;
    for (int i = 0; i < 1000; ++i) {
        const MechanismSpec spec = random_spec(rng);
        if (!validate(spec).empty()) {
            o.require(false, "generator produced an invalid spec at " + std::to_string(i));
            break;
        }
        const std::string text = dsl::format_canonical(spec);
        const dsl::ParseResult r = dsl::parse(text);
        o.require(r.ok(), "canonical text failed to parse at " + std::to_string(i) + ": " + r.error_text());
        if (!r.ok()) break;
        o.require(*r.spec == spec, "round trip changed spec " + std::to_string(i));
        o.require(dsl::format_canonical(*r.spec) == text, "formatter not idempotent at " + std::to_string(i));
        corpus.push_back(text);
    }
    int fuzzed = 0, accepted = 0;
    for (int i = 0; i < 10000 && o.pass; ++i) {
        std::string input;
        switch (i % 3) {
            case 0: input = random_bytes(rng); break;
            case 1: input = token_soup(rng); break;
            default: input = mutate(rng, corpus[static_cast<std::size_t>(i) % corpus.size()]);
        }
        try {
            const dsl::ParseResult r = dsl::parse(input);
            if (r.ok()) {
                ++accepted;
                (void)dsl::format_canonical(*r.spec);
            } else {
                o.require(!r.errors.empty(), "rejected input without diagnostics at fuzz case " + std::to_string(i));
            }
            (void)dsl::extract_block(input);
            ++fuzzed;
        } catch (const std::exception& e) {
            o.require(false, "parse threw on fuzz case " + std::to_string(i) + ": " + e.what());
        }
    }
    if (o.pass) {
        o.detail = "1000 round trips, " + std::to_string(fuzzed) + " fuzz inputs (" + std::to_string(accepted) + " accepted)";
    }
    return o;
}

// ---- C6 -------------------------------------------------------------------

Outcome check_surrogate() {
    Outcome o;
    MechanismSpec crank;
    crank.joints.push_back({"target", CrankJoint{Point2{0, 0}, 1.0, 0.1, std::nullopt}});
    const SimResult sim = simulate(crank);
    SurrogateConfig cfg;
    cfg.param_step = 0.1;
    const SurrogateExpr e = fit_surrogate(sim.trajectory, cfg);
    const auto ts = surrogate_parameters(sim.trajectory.size(), cfg);
    const Trajectory fitted = eval_surrogate(e, ts);
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        sx += std::pow(fitted.points[i].x - std::cos(ts[i]), 2);
        sy += std::pow(fitted.points[i].y - std::sin(ts[i]), 2);
    }
    const double rx = std::sqrt(sx / ts.size()), ry = std::sqrt(sy / ts.size());
    o.require(rx <= 1e-3 && ry <= 1e-3, "RMSE vs cos/sin " + fmt("%.2e", std::max(rx, ry)));
    o.require(e.x_complexity <= 5 && e.y_complexity <= 5,
              "node counts " + std::to_string(e.x_complexity) + ", " + std::to_string(e.y_complexity));

    Trajectory flat;
    for (int i = 0; i < 40; ++i) flat.points.push_back({1.25, -3.5});
    const SurrogateExpr c = fit_surrogate(flat);
    const Trajectory cback = eval_surrogate(c, surrogate_parameters(flat.size()));
    o.require(c.fit_error == 0.0 && cback == Trajectory{flat.points, false}, "constant fit not exact");

    // Self-refit on a four-bar coupler trace.
    MechanismSpec fb;
    fb.joints.push_back({"crank", CrankJoint{Point2{0, 0}, 1.0, 0.1, std::nullopt}});
    fb.joints.push_back({"rocker", RevoluteJoint{std::string("crank"), 3.0, Point2{4, 0}, 3.5, std::nullopt}});
    fb.joints.push_back({"target", RevoluteJoint{std::string("crank"), 2.0, std::string("rocker"), 2.0, std::nullopt}});
    const SimResult fsim = simulate(fb);
    const SurrogateExpr first = fit_surrogate(fsim.trajectory, cfg);
    const Trajectory own = eval_surrogate(first, surrogate_parameters(fsim.trajectory.size(), cfg));
    const SurrogateExpr refit = fit_surrogate(own, cfg);
    o.require(refit.fit_error <= 1e-6, "self-refit error " + fmt("%.2e", refit.fit_error));
    if (o.pass) {
        o.detail = "crank RMSE " + fmt("%.1e", std::max(rx, ry)) + " with " + std::to_string(e.x_complexity) + "+" +
                   std::to_string(e.y_complexity) + " nodes, self-refit " + fmt("%.1e", refit.fit_error);
    }
    return o;
}

// ---- C7 -------------------------------------------------------------------

Outcome check_memory() {
    Outcome o;
    SplitMix64 rng(7007);
    SimResult ok;
    ok.success = true;
    SimResult failed;
    failed.success = false;
    failed.failure = StepFailure{3, "target", "unreachable configuration at step 3"};
    int rejected = 0, attempted_failed = 0;
    for (int trial = 0; trial < 500; ++trial) {
        MemoryRepository repo;
        std::vector<MemoryEntry> oracle;
        const int n = static_cast<int>(rng.uniform_int(0, 60));
        for (int i = 0; i < n; ++i) {
            MemoryEntry e;
            e.mechanism_text = "target = Crank(p0=(0, 0), distance=" + std::to_string(i + 1) + ", angle=0.1)";
            e.chamfer = rng.uniform() < 0.4 ? static_cast<double>(rng.uniform_int(0, 5)) : rng.uniform(0.0, 20.0);
            e.task_id = "t";
            if (rng.uniform() < 0.25) {
                ++attempted_failed;
                const StoreOutcome s = repo.store(e, failed);
                if (!s.stored) ++rejected;
                continue;
            }
            const StoreOutcome s = repo.store(e, ok);
            o.require(s.stored, "valid entry refused");
        }
        auto all = repo.snapshot();
        std::stable_sort(all.begin(), all.end(), [](const MemoryEntry& a, const MemoryEntry& b) {
            if (a.chamfer != b.chamfer) return a.chamfer < b.chamfer;
            return a.created_at > b.created_at;
        });
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(0, 70));
        const auto got = repo.retrieve_topk(k);
        const std::size_t want = std::min(k, all.size());
        o.require(got.size() == want, "size mismatch at trial " + std::to_string(trial));
        for (std::size_t i = 0; i < std::min(want, got.size()); ++i) {
            o.require(got[i].mechanism_text == all[i].mechanism_text && got[i].created_at == all[i].created_at,
                      "order mismatch at trial " + std::to_string(trial));
        }
        for (const MemoryEntry& e : repo.snapshot()) o.require(std::isfinite(e.chamfer), "non-finite entry stored");
    }
    o.require(rejected == attempted_failed,
              std::to_string(attempted_failed - rejected) + " failed simulations were stored");
    if (o.pass) o.detail = "500 repositories match the oracle, " + std::to_string(rejected) + " failed simulations refused";
    return o;
}

// ---- C8 -------------------------------------------------------------------

double brute_wilcoxon_p(const std::vector<double>& diffs) {
    std::vector<double> nz;
    for (double d : diffs) {
        if (d != 0.0) nz.push_back(d);
    }
    const int n = static_cast<int>(nz.size());
    if (n == 0) return 1.0;
    std::vector<double> ranks(n);
    double w_plus = 0;
    for (int i = 0; i < n; ++i) {
        double less = 0, equal = 0;
        for (double v : nz) {
            less += std::abs(v) < std::abs(nz[i]);
            equal += std::abs(v) == std::abs(nz[i]);
        }
        ranks[i] = less + (equal + 1) / 2.0;
        if (nz[i] > 0) w_plus += ranks[i];
    }
    long lower = 0, upper = 0;
    for (long mask = 0; mask < (1L << n); ++mask) {
        double w = 0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1L << i)) w += ranks[i];
        }
        lower += w <= w_plus + 1e-9;
        upper += w >= w_plus - 1e-9;
    }
    return std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / std::ldexp(1.0, n));
}

// Differences 1..n with the signs of the first `negatives` ranks flipped: W- = sum of those ranks.
std::vector<double> signed_ranks(int n, std::initializer_list<int> negative_ranks) {
    std::vector<double> d;
    for (int i = 1; i <= n; ++i) d.push_back(i);
    for (int r : negative_ranks) d[r - 1] = -d[r - 1];
    return d;
}

Outcome check_wilcoxon() {
    Outcome o;
    SplitMix64 rng(8008);
    double worst = 0;
    int cases = 0;
    for (int n = 1; n <= 12; ++n) {
        for (int rep = 0; rep < 40; ++rep) {
            std::vector<double> x(n), y(n);
            const bool coarse = rep % 2 == 1;  // coarse values force tied ranks and zeros
            for (int i = 0; i < n; ++i) {
                x[i] = coarse ? static_cast<double>(rng.uniform_int(0, 4)) : rng.uniform(0, 10);
                y[i] = coarse ? static_cast<double>(rng.uniform_int(0, 4)) : rng.uniform(0, 10);
            }
            std::vector<double> d(n);
            for (int i = 0; i < n; ++i) d[i] = x[i] - y[i];
            const WilcoxonResult r = wilcoxon_signed_rank(x, y);
            const double want = brute_wilcoxon_p(d);
            worst = std::max(worst, std::abs(r.p_value - want));
            o.require(std::abs(r.p_value - want) <= 1e-12, "n=" + std::to_string(n) + " p mismatch");
            ++cases;
        }
    }
    // Published two-sided exact p-values for W = min(W+, W-).
    struct Row { int n; std::vector<double> d; double p; };
    const std::vector<Row> table{
        {8, signed_ranks(8, {1, 2}), 0.0390625},          // W = 3
        {8, signed_ranks(8, {2, 3}), 0.078125},           // W = 5
        {10, signed_ranks(10, {1, 3, 4}), 0.048828125},   // W = 8
        {10, signed_ranks(10, {1, 4, 5}), 0.083984375},   // W = 10
        {12, signed_ranks(12, {1, 5, 7}), 0.04248046875}, // W = 13
        {12, signed_ranks(12, {2, 7, 8}), 0.09228515625}, // W = 17
    };
    for (const Row& row : table) {
        const std::vector<double> zeros(row.d.size(), 0.0);
        const WilcoxonResult r = wilcoxon_signed_rank(row.d, zeros);
        o.require(std::abs(r.p_value - row.p) <= 1e-4,
                  "table n=" + std::to_string(row.n) + " W=" + fmt("%g", r.statistic) + " p=" + fmt("%.6f", r.p_value));
    }
    if (o.pass) o.detail = std::to_string(cases) + " cases vs enumeration (max diff " + fmt("%.1e", worst) + "), 6 table values";
    return o;
}

// ---- C9 -------------------------------------------------------------------

Outcome check_scripted_loop() {
    Outcome o;
    DatasetConfig dc;
    dc.seed = 9009;
    dc.families = {CurveFamily::Circle};
    dc.instances_per_family = 1;
    const TaskInstance task = generate_dataset(dc).front();
    const auto& circle = std::get<CircleParams>(task.curve.params);
    const std::string oracle = "```\ntarget = Crank(p0=(" + format_real(circle.x1) + ", " + format_real(circle.y1) +
                               "), distance=" + format_real(circle.r) + ", angle=0.1)\n```\n";
    LoopConfig cfg;
    cfg.r_max = 20;
    cfg.epsilon = 0.05;

    auto oracle_run = [&] {
        ScriptedBackend backend({ScriptedTurn{std::nullopt, std::nullopt, oracle}});
        MemoryRepository memory;
        return run_task(task, cfg, backend, memory, "oracle");
    };
    auto prose_run = [&] {
        ScriptedBackend backend(read_transcript(MSYNTH_FIXTURE_DIR "/prose_only.jsonl"));
        MemoryRepository memory;
        return run_task(task, cfg, backend, memory, "prose");
    };
    const RunRecord a1 = oracle_run(), a2 = oracle_run();
    o.require(a1.terminated_by == Termination::Epsilon && a1.iterations_executed == 1, "oracle run did not stop at iteration 1");
    o.require(a1.best && a1.best->chamfer <= 0.05, "oracle Chamfer above epsilon");
    o.require(to_jsonl(a1) == to_jsonl(a2), "oracle run not reproducible");

    const RunRecord p1 = prose_run(), p2 = prose_run();
    o.require(p1.terminated_by == Termination::RMax && p1.iterations_executed == 20, "prose run did not use 20 iterations");
    o.require(p1.candidates_generated > 0 && p1.candidates_valid == 0, "prose run had semantic successes");
    o.require(to_jsonl(p1) == to_jsonl(p2), "prose run not reproducible");
    if (o.pass) {
        o.detail = "oracle Chamfer " + fmt("%.2e", a1.best->chamfer) + " at iteration 1, prose 20 iterations with 0/" +
                   std::to_string(p1.candidates_generated) + " valid, both reproducible";
    }
    return o;
}

// ---- C10 ------------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

double leading_number(const std::string& cell) { return std::stod(cell); }

Outcome check_ablation() {
    Outcome o;
    const auto t0 = Clock::now();
    const AblationGrid grid = load_grid(MSYNTH_FIXTURE_DIR "/grid.json");
    o.require(grid.backends.size() == 2 && grid.shapes.size() == 6 && grid.instances_per_shape == 2,
              "fixture grid is not 2 backends x 6 shapes x 2 instances");
    DatasetConfig dc;
    dc.seed = grid.seed;
    dc.families = grid.shapes;
    dc.instances_per_family = grid.instances_per_shape;
    dc.n_points = grid.n_points;
    const auto dataset = generate_dataset(dc);

    const fs::path out = fs::temp_directory_path() / "msynth_acceptance_ablation";
    fs::remove_all(out);
    AblationOptions opts;
    opts.jobs = std::max(1u, std::thread::hardware_concurrency());
    opts.runs_dir = out / "runs";
    const AblationResult result = run_ablation(grid, dataset, opts);
    emit_report(result.stats, ReportFormat::Csv, out / "results.csv");
    emit_report(result.stats, ReportFormat::Markdown, out / "results.md");
    {
        std::ofstream s(out / "stats.csv");
        s << stats_to_csv(result.stats);
    }
    const double secs = seconds_since(t0);
    o.require(result.records.size() == 384 && result.failures.empty(),
              std::to_string(result.records.size()) + " runs, " + std::to_string(result.failures.size()) + " failures");

    const std::vector<std::string> schema{"Model", "Shape", "#Ex", "Fdbk", "SFB", "Mem", "Best chamf.",
                                          "Fcham", "Steps", "Fstep", "% Imp.", "% Semantic"};
    std::ifstream csv(out / "results.csv");
    std::string header;
    std::getline(csv, header);
    o.require(split_csv_line(header) == schema, "results.csv header: " + header);
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(csv, line);) {
        if (!line.empty()) rows.push_back(split_csv_line(line));
    }
    o.require(rows.size() == 192, std::to_string(rows.size()) + " table rows");
    std::ifstream md(out / "results.md");
    std::string md_header;
    std::getline(md, md_header);
    o.require(md_header == "| Model | Shape | #Ex | Fdbk | SFB | Mem | Best chamf. | Fcham | Steps | Fstep | % Imp. | % Semantic |",
              "results.md header: " + md_header);

    // Recompute the means from the run files on disk.
    std::vector<RunRecord> raw;
    for (const auto& entry : fs::directory_iterator(out / "runs")) {
        for (RunRecord& r : read_run_summaries(entry.path())) raw.push_back(std::move(r));
    }
    o.require(raw.size() == 384, std::to_string(raw.size()) + " run files");
    struct Sums {
        double best = 0, final = 0, steps = 0, fstep = 0, pct = 0;
        int n_best = 0, n_final = 0, n_steps = 0, n_pct = 0;
        long generated = 0, valid = 0;
    };
    std::map<std::string, Sums> sums;
    auto key_of = [](const std::string& model, const std::string& shape, int ex, bool fb, bool sfb, int mem) {
        return model + "|" + shape + "|" + std::to_string(ex) + "|" + (fb ? "Yes" : "No") + "|" + (sfb ? "Yes" : "No") +
               "|" + std::to_string(mem);
    };
    for (const RunRecord& r : raw) {
        Sums& s = sums[key_of(r.condition.model, r.condition.shape, r.condition.num_examples, r.condition.feedback,
                              r.condition.sfb, r.condition.mem_k)];
        if (r.best) {
            s.best += r.best->chamfer;
            s.fstep += r.best->iteration;
            ++s.n_best;
            if (r.first_valid_chamfer) {
                const double first = *r.first_valid_chamfer;
                s.pct += first > 0 && r.best->chamfer < first ? 100.0 * (first - r.best->chamfer) / first : 0.0;
                ++s.n_pct;
            }
        }
        if (r.final_chamfer) {
            s.final += *r.final_chamfer;
            ++s.n_final;
        }
        s.steps += r.iterations_executed;
        ++s.n_steps;
        s.generated += r.candidates_generated;
        s.valid += r.candidates_valid;
    }
    std::ifstream sin(out / "stats.csv");
    std::ostringstream stext;
    stext << sin.rdbuf();
    const std::vector<ConditionStats> reread = stats_from_csv(stext.str());
    o.require(reread.size() == sums.size(), "stats.csv has " + std::to_string(reread.size()) + " conditions");
    double worst = 0;
    auto compare = [&](const std::optional<double>& got, double sum, int n, const std::string& what) {
        if (n == 0) {
            o.require(!got.has_value(), what + " should be absent");
            return;
        }
        o.require(got.has_value(), what + " missing");
        if (!got) return;
        const double diff = std::abs(*got - sum / n);
        worst = std::max(worst, diff);
        o.require(diff <= 1e-12, what + " differs by " + fmt("%.2e", diff));
    };
    for (const ConditionStats& s : reread) {
        const std::string k = key_of(s.key.model, s.key.shape, s.key.num_examples, s.key.feedback, s.key.sfb, s.key.mem);
        const auto it = sums.find(k);
        o.require(it != sums.end(), "unknown condition " + k);
        if (it == sums.end()) continue;
        const Sums& r = it->second;
        compare(s.best_chamfer.mean, r.best, r.n_best, k + " best");
        compare(s.final_chamfer.mean, r.final, r.n_final, k + " final");
        compare(s.steps.mean, r.steps, r.n_steps, k + " steps");
        compare(s.final_step.mean, r.fstep, r.n_best, k + " fstep");
        compare(s.pct_improvement.mean, r.pct, r.n_pct, k + " pct");
        const double sem = r.generated == 0 ? 0.0 : static_cast<double>(r.valid) / static_cast<double>(r.generated);
        const double sdiff = std::abs(s.semantic_success() - sem);
        worst = std::max(worst, sdiff);
        o.require(sdiff <= 1e-12, k + " semantic differs");
    }
    // The rounded table agrees with the recomputation to its printed precision.
    for (const auto& row : rows) {
        if (row.size() != schema.size()) {
            o.require(false, "ragged table row");
            break;
        }
        const std::string k = key_of(row[0], row[1], std::stoi(row[2]), row[3] == "Yes", row[4] == "Yes", std::stoi(row[5]));
        const auto it = sums.find(k);
        o.require(it != sums.end(), "table row without records: " + k);
        if (it == sums.end()) continue;
        const Sums& r = it->second;
        if (r.n_best > 0) o.require(std::abs(leading_number(row[6]) - r.best / r.n_best) <= 5.0001e-4, k + " table best");
        o.require(std::abs(leading_number(row[8]) - r.steps / r.n_steps) <= 5.0001e-4, k + " table steps");
        const double sem = r.generated == 0 ? 0.0 : 100.0 * static_cast<double>(r.valid) / static_cast<double>(r.generated);
        o.require(std::abs(leading_number(row[11]) - sem) <= 5.0001e-4, k + " table semantic");
    }
    o.require(secs < 120.0, "runtime " + fmt("%.1f", secs) + " s");
    if (o.pass) {
        o.detail = "384 runs, 192 rows, 12-column schema, max mean diff " + fmt("%.1e", worst) + ", " +
                   fmt("%.1f", secs) + " s with " + std::to_string(opts.jobs) + " worker(s)";
    }
    fs::remove_all(out);
    return o;
}

// ---- C11 ------------------------------------------------------------------

Outcome check_pct() {
    Outcome o;
    const auto p = pct_improvement(12.239, 1.466);
    o.require(p.has_value() && std::abs(*p - 88.02) <= 0.01, "got " + (p ? fmt("%.4f", *p) : std::string("nothing")));
    if (o.pass) o.detail = fmt("%.4f", *p) + "%";
    return o;
}

}  // namespace

// Usage: acceptance [--expected-failures N,M,...]
// Exit status is 0 when the failing criteria are exactly the expected ones.
int main(int argc, char** argv) {
    std::set<std::size_t> expected;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--expected-failures") {
            std::stringstream list(argv[i + 1]);
            for (std::string item; std::getline(list, item, ',');) expected.insert(std::stoul(item));
        }
    }
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"chamfer oracle equivalence", check_chamfer},
        {"ICP recovery", check_icp},
        {"target generator", check_generator},
        {"linkage simulator", check_simulator},
        {"mechanism language", check_dsl},
        {"trajectory surrogate", check_surrogate},
        {"memory retrieval and gate", check_memory},
        {"signed-rank test", check_wilcoxon},
        {"scripted design loop", check_scripted_loop},
        {"ablation protocol", check_ablation},
        {"improvement arithmetic", check_pct},
    };
    std::set<std::size_t> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) failed.insert(i + 1);
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria pass\n", criteria.size() - failed.size(), criteria.size());
    if (failed != expected) {
        std::printf("failing set differs from the expected one\n");
        return 1;
    }
    return 0;
}
