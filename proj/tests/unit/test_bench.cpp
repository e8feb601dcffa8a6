#include "doctest.h"

#include "msynth/bench.hpp"
#include "msynth/random.hpp"

#include <cmath>

using namespace msynth;

namespace {

// Independent oracle: enumerate all 2^n sign assignments of the given ranks.
double brute_force_p(const std::vector<double>& ranks, double w_plus) {
    const int n = static_cast<int>(ranks.size());
    const long total = 1L << n;
    long lower = 0, upper = 0;
    for (long mask = 0; mask < total; ++mask) {
        double w = 0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1L << i)) w += ranks[i];
        }
        if (w <= w_plus + 1e-9) ++lower;
        if (w >= w_plus - 1e-9) ++upper;
    }
    return std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / static_cast<double>(total));
}

std::vector<double> avg_ranks(const std::vector<double>& d) {
    std::vector<double> r(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : d) {
            if (std::abs(v) < std::abs(d[i])) ++less;
            if (std::abs(v) == std::abs(d[i])) ++equal;
        }
        r[i] = less + (equal + 1) / 2.0;
    }
    return r;
}

RunRecord fake_run(const std::string& model, const std::string& shape, int ex, bool fb, bool sfb, int mem,
                   const std::string& task, std::optional<double> first, std::optional<double> best, int steps,
                   int fstep, int generated, int valid) {
    RunRecord r;
    r.task_id = task;
    r.condition = {model, shape, ex, mem, fb, sfb};
    r.iterations_executed = steps;
    if (best) r.best = BestDesign{"target = Crank(p0=(0, 0), distance=1, angle=0.1)", *best, fstep};
    r.first_valid_chamfer = first;
    r.final_chamfer = best;
    r.candidates_generated = generated;
    r.candidates_valid = valid;
    return r;
}

}  // namespace

TEST_CASE("percent improvement") {
    CHECK(*pct_improvement(12.239, 1.466) == doctest::Approx(88.02189721382467).epsilon(1e-12));
    CHECK(*pct_improvement(2.0, 2.0) == 0.0);
    CHECK(*pct_improvement(2.0, 1.0) == 50.0);
    RunRecord none;
    CHECK_FALSE(pct_improvement(none).has_value());
}

TEST_CASE("wilcoxon small cases") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<double> zero(6, 0.0);
    const WilcoxonResult r = wilcoxon_signed_rank(x, zero);
    CHECK(r.statistic == 0.0);
    CHECK(r.w_plus == 21.0);
    CHECK(r.p_value == doctest::Approx(0.03125).epsilon(1e-15));
    CHECK(r.exact);

    const WilcoxonResult same = wilcoxon_signed_rank(x, x);
    CHECK(same.degenerate);
    CHECK(same.p_value == 1.0);

    const std::vector<double> short_y{1, 2};
    CHECK_THROWS_AS(wilcoxon_signed_rank(x, short_y), InvalidInput);
}

TEST_CASE("wilcoxon published critical values") {
    // Two-sided exact p at the given n and W, from standard signed-rank tables.
    struct Case {
        int n;
        int w;
        double p;
    };
    for (const Case c : {Case{8, 3, 0.0390625}, Case{8, 5, 0.078125}, Case{10, 8, 0.048828125},
                         Case{10, 10, 0.083984375}, Case{12, 13, 0.04248046875}, Case{12, 17, 0.09228515625}}) {
        // Ranks 1..n; make the smallest ranks negative so that W- = w.
        std::vector<double> d(static_cast<std::size_t>(c.n));
        for (int i = 0; i < c.n; ++i) d[static_cast<std::size_t>(i)] = i + 1.0;
        int remaining = c.w;
        for (int rank = c.n; rank >= 1 && remaining > 0; --rank) {
            if (rank <= remaining) {
                d[static_cast<std::size_t>(rank - 1)] = -d[static_cast<std::size_t>(rank - 1)];
                remaining -= rank;
            }
        }
        REQUIRE(remaining == 0);
        const std::vector<double> zero(d.size(), 0.0);
        const WilcoxonResult r = wilcoxon_signed_rank(d, zero);
        CHECK(r.statistic == c.w);
        CHECK(r.p_value == doctest::Approx(c.p).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon exact matches enumeration, ties included") {
    SplitMix64 rng(99);
    for (int n = 1; n <= 12; ++n) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> x, y, d;
            for (int i = 0; i < n; ++i) {
                // Small integer grid so ties occur.
                double diff = static_cast<double>(rng.uniform_int(1, 5)) * (rng.uniform() < 0.5 ? -1 : 1);
                x.push_back(10 + diff);
                y.push_back(10);
                d.push_back(diff);
            }
            const WilcoxonResult r = wilcoxon_signed_rank(x, y);
            const auto ranks = avg_ranks(d);
            double w_plus = 0;
            for (int i = 0; i < n; ++i) {
                if (d[static_cast<std::size_t>(i)] > 0) w_plus += ranks[static_cast<std::size_t>(i)];
            }
            CHECK(r.w_plus == w_plus);
            CHECK(std::abs(r.p_value - brute_force_p(ranks, w_plus)) <= 1e-12);
        }
    }
}

TEST_CASE("wilcoxon normal approximation with ties") {
    const std::vector<double> x{3.1, 2.0, 5.5, 1.2, 0.7, 4.4, 2.2, 3.3, 6.1, 0.9, 1.8, 2.7, 3.9, 4.1, 5.0,
                                0.4, 1.1, 2.5, 3.6, 4.8, 5.2, 0.6, 1.5, 2.9, 3.0, 4.0, 2.2, 1.9, 0.8, 3.3};
    const std::vector<double> y{2.0, 2.5, 3.0, 1.0, 1.7, 4.0, 2.2, 1.3, 5.0, 1.9, 1.0, 2.0, 3.0, 4.5, 4.0,
                                0.0, 0.1, 2.0, 3.0, 4.0, 5.0, 0.2, 1.0, 2.0, 2.0, 3.0, 1.2, 0.9, 0.3, 2.3};
    const WilcoxonResult r = wilcoxon_signed_rank(x, y);
    CHECK(r.n == 29);
    CHECK_FALSE(r.exact);
    // scipy.stats.wilcoxon(x, y, method="approx", correction=False)
    CHECK(r.statistic == 53.0);
    CHECK(r.p_value == doctest::Approx(0.00036801724739927776).epsilon(1e-9));
}

TEST_CASE("aggregation") {
    std::vector<RunRecord> runs{
        fake_run("m", "circle", 2, true, false, 0, "circle-0", 12.239, 1.466, 20, 7, 60, 30),
        fake_run("m", "circle", 2, true, false, 0, "circle-1", 4.0, 4.0, 20, 1, 60, 10),
        fake_run("m", "circle", 2, true, false, 0, "circle-2", std::nullopt, std::nullopt, 20, 0, 60, 0),
        fake_run("m", "line", 3, false, true, 2, "line-0", std::nullopt, std::nullopt, 20, 0, 0, 0),
    };
    const auto stats = aggregate(runs);
    REQUIRE(stats.size() == 2);
    const ConditionStats& c = stats[0];
    CHECK(c.runs == 3);
    CHECK(c.best_chamfer.n == 2);
    CHECK(*c.best_chamfer.mean == doctest::Approx((1.466 + 4.0) / 2));
    // sample stdev of {1.466, 4.0} / sqrt(2) = |a - b| / 2
    CHECK(*c.best_chamfer.stderr_ == doctest::Approx(std::abs(4.0 - 1.466) / 2));
    CHECK(*c.steps.mean == 20.0);
    CHECK(*c.steps.stderr_ == 0.0);
    CHECK(*c.final_step.mean == 4.0);
    CHECK(*c.pct_improvement.mean == doctest::Approx((88.02189721382467 + 0.0) / 2).epsilon(1e-9));
    CHECK(c.semantic_success() == doctest::Approx(40.0 / 180.0));

    const ConditionStats& empty = stats[1];
    CHECK_FALSE(empty.best_chamfer.mean.has_value());
    CHECK(empty.semantic_success() == 0.0);

    const std::string csv = render_report(stats, ReportFormat::Csv);
    CHECK(csv.rfind("Model,Shape,#Ex,Fdbk,SFB,Mem,Best chamf.,Fcham,Steps,Fstep,% Imp.,% Semantic\n", 0) == 0);
    CHECK(csv.find("m,circle,2,Yes,No,0,2.733 ± 1.267,2.733 ± 1.267,20.000 ± 0.000,4.000 ± 3.000,44.011,22.222") !=
          std::string::npos);
    CHECK(csv.find("m,line,3,No,Yes,2,n/a,n/a,20.000 ± 0.000,n/a,n/a,0.000") != std::string::npos);

    const std::string md = render_report(stats, ReportFormat::Markdown);
    CHECK(md.rfind("| Model | Shape | #Ex | Fdbk | SFB | Mem | Best chamf. | Fcham | Steps | Fstep | % Imp. | % Semantic |\n"
                   "|---|---|---|---|---|---|---|---|---|---|---|---|\n",
                   0) == 0);
    CHECK(md.find("| m | circle | 2 | Yes | No | 0 | 2.733 ± 1.267 |") != std::string::npos);

    CHECK(stats_from_csv(stats_to_csv(stats)) == stats);
    CHECK_THROWS_AS(render_report({}, ReportFormat::Csv), InvalidInput);
}

TEST_CASE("paired factor test") {
    std::vector<RunRecord> runs;
    for (int i = 0; i < 8; ++i) {
        const std::string task = "circle-" + std::to_string(i);
        runs.push_back(fake_run("m", "circle", 2, false, false, 0, task, 5.0, 5.0 + i, 20, 1, 3, 3));
        runs.push_back(fake_run("m", "circle", 2, true, false, 0, task, 5.0, 1.0 + 0.1 * i, 20, 1, 3, 3));
    }
    const FactorTest t = paired_factor_test(runs, "feedback");
    CHECK(t.pairs == 8);
    CHECK(t.result.w_plus == 0.0);
    CHECK(t.result.p_value == doctest::Approx(2.0 / 256));
    CHECK(paired_factor_test(runs, "sfb").pairs == 0);
    CHECK(render_factor_tests(runs).find("feedback: pairs=8") != std::string::npos);
}

TEST_CASE("grid config and small ablation") {
    AblationGrid grid = load_grid(MSYNTH_FIXTURE_DIR "/grid.json");
    CHECK(grid.backends.size() == 2);
    CHECK(grid.backends[1].critic_temperature == 0.5);
    CHECK(ablation_size(grid) == 384);

    grid.backends.resize(1);
    grid.shapes = {CurveFamily::Circle, CurveFamily::Line};
    grid.base.r_max = 2;
    CHECK(ablation_size(grid) == 64);

    DatasetConfig dc;
    dc.seed = grid.seed;
    dc.families = grid.shapes;
    dc.instances_per_family = grid.instances_per_shape;
    const auto dataset = generate_dataset(dc);

    const AblationResult one = run_ablation(grid, dataset, {1, std::nullopt, {}});
    CHECK(one.records.size() == 64);
    CHECK(one.stats.size() == 32);
    CHECK(one.failures.empty());
    AblationOptions parallel;
    parallel.jobs = 3;
    const AblationResult three = run_ablation(grid, dataset, parallel);
    CHECK(stats_to_csv(one.stats) == stats_to_csv(three.stats));
    CHECK(render_report(one.stats, ReportFormat::Csv) == render_report(three.stats, ReportFormat::Csv));
    for (std::size_t i = 0; i < one.records.size(); ++i) {
        CHECK(to_jsonl(one.records[i]) == to_jsonl(three.records[i]));
    }
    CHECK(one.records.front().condition.model == "scripted-a");
}

TEST_CASE("grid config errors") {
    CHECK_THROWS_AS(grid_from_json(R"({"backends": []})"), ConfigError);
    CHECK_THROWS_AS(grid_from_json(R"({"shapes": ["spiral"], "backends": []})"), ConfigError);
    CHECK_THROWS_AS(
        grid_from_json(R"({"num_examples": [7], "backends": [{"kind": "scripted", "transcript": "x.jsonl"}]})"),
        ConfigError);
}
