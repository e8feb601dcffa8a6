#pragma once

#include "msynth/agents.hpp"
#include "msynth/curves.hpp"
#include "msynth/orchestrator.hpp"

#include <compare>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msynth {

struct AblationGrid {
    std::vector<BackendConfig> backends;
    std::vector<CurveFamily> shapes = all_families();
    std::vector<int> num_examples_levels{2, 3};
    std::vector<int> mem_levels{0, 2};
    std::vector<bool> feedback_levels{false, true};
    std::vector<bool> sfb_levels{false, true};
    int instances_per_shape = 5;
    int n_points = 4;
    std::uint64_t seed = 0;
    LoopConfig base;
};

/// Applies the keys present in a JSON loop object (b, r_max, epsilon, ...) to `config`.
void apply_loop_json(LoopConfig& config, const std::string& json_text);

/// Grid from a JSON document. Backend entries are either inline objects or
/// paths to backend config files, relative to `base_dir`.
AblationGrid grid_from_json(const std::string& json_text, const std::filesystem::path& base_dir = {});
AblationGrid load_grid(const std::filesystem::path& path);

/// LoopConfig for one cell of the grid, including backend generation overrides.
LoopConfig condition_config(const AblationGrid& grid, const BackendConfig& backend, int num_examples, int mem_k,
                            bool feedback, bool sfb);

struct ConditionKey {
    std::string model;
    std::string shape;
    int num_examples = 2;
    bool feedback = false;
    bool sfb = false;
    int mem = 0;

    static ConditionKey of(const RunRecord& r);
    friend bool operator==(const ConditionKey&, const ConditionKey&) = default;
};

struct MeanStderr {
    std::optional<double> mean;
    std::optional<double> stderr_;  // sample stdev / sqrt(n); 0 for a single value
    int n = 0;

    static MeanStderr of(std::span<const double> values);
    friend bool operator==(const MeanStderr&, const MeanStderr&) = default;
};

struct ConditionStats {
    ConditionKey key;
    int runs = 0;
    MeanStderr best_chamfer;
    MeanStderr final_chamfer;
    MeanStderr steps;
    MeanStderr final_step;
    MeanStderr pct_improvement;
    int candidates_generated = 0;
    int candidates_valid = 0;

    /// valid / generated over every run of the condition; 0 when nothing was generated.
    double semantic_success() const;
    friend bool operator==(const ConditionStats&, const ConditionStats&) = default;
};

/// 100 (first - best) / first; 0 without improvement; absent without a valid candidate.
std::optional<double> pct_improvement(const RunRecord& record);
std::optional<double> pct_improvement(double first_valid_chamfer, double best_chamfer);

/// Per-condition aggregation, rows in first-appearance order of their keys.
std::vector<ConditionStats> aggregate(const std::vector<RunRecord>& records);

struct AblationOptions {
    int jobs = 1;
    /// When set, every run is written to <runs_dir>/<name>.jsonl as it completes.
    std::optional<std::filesystem::path> runs_dir;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct RunFailure {
    std::size_t index = 0;  // position in AblationResult::records
    std::string message;
};

struct AblationResult {
    std::vector<RunRecord> records;  // grid enumeration order
    std::vector<ConditionStats> stats;
    std::vector<RunFailure> failures;
};

/// Number of runs the grid enumerates.
std::size_t ablation_size(const AblationGrid& grid);

/// File stem for a run record: <model>__<task>__ex<k>_fb<0|1>_sfb<0|1>_mem<m>.
std::string run_file_stem(const RunRecord& record);

/// Every (backend x shape x #Ex x Fdbk x SFB x Mem x instance) cell, executed
/// on a pool of `jobs` workers. Results do not depend on `jobs`.
AblationResult run_ablation(const AblationGrid& grid, const std::vector<TaskInstance>& dataset,
                            const AblationOptions& options = {});

struct WilcoxonResult {
    double statistic = 0.0;  // min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    double p_value = 1.0;    // two-sided
    int n = 0;               // non-zero differences
    bool exact = true;
    bool degenerate = false;  // every difference was zero
};

/// Paired two-sided signed-rank test on x - y. Zero differences are dropped,
/// ties get average ranks. Exact null distribution for n <= 25, normal
/// approximation with tie correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

enum class ReportFormat { Csv, Markdown };

/// Rendered results table: Model, Shape, #Ex, Fdbk, SFB, Mem, Best chamf., Fcham, Steps, Fstep, % Imp., % Semantic.
std::string render_report(const std::vector<ConditionStats>& stats, ReportFormat format);
void emit_report(const std::vector<ConditionStats>& stats, ReportFormat format, const std::filesystem::path& path);

extern const std::vector<std::string> kReportColumns;

/// Full-precision CSV from which every ConditionStats field is recovered exactly.
std::string stats_to_csv(const std::vector<ConditionStats>& stats);
std::vector<ConditionStats> stats_from_csv(const std::string& csv);

/// Paired test of one binary factor (feedback, sfb or mem) on best Chamfer,
/// pairing runs that agree on every other condition field and the task.
struct FactorTest {
    std::string factor;
    WilcoxonResult result;
    int pairs = 0;
};
FactorTest paired_factor_test(const std::vector<RunRecord>& records, const std::string& factor);
std::string render_factor_tests(const std::vector<RunRecord>& records);

}  // namespace msynth
