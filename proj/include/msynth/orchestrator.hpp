#pragma once

#include "msynth/agents.hpp"
#include "msynth/curves.hpp"
#include "msynth/geometry.hpp"
#include "msynth/linkage.hpp"
#include "msynth/memory.hpp"
#include "msynth/surrogate.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace msynth {

struct LoopConfig {
    int batch_size = 3;
    int r_max = 20;
    double epsilon = 0.05;
    int num_examples = 2;
    int mem_k = 0;
    bool feedback_enabled = true;
    bool sfb_enabled = false;
    std::optional<int> sim_steps;
    /// Samples of the analytic target used as the scoring reference.
    int reference_points = 256;
    int retries = 2;
    /// Permit #Ex and Mem values outside the ablation levels {2,3} and {0,2}.
    bool allow_any_levels = false;
    GenerationParams designer{0.8, 1024, std::nullopt, "designer"};
    GenerationParams critic{0.8, 1024, std::nullopt, "critic"};
    IcpOptions icp;
    SurrogateConfig surrogate;
};

/// Throws ConfigError naming the offending field.
void validate(const LoopConfig& config);

/// Rigid-ICP Chamfer of `trace` against `reference`. Traces that ICP cannot
/// align (fewer than three distinct points) are scored after centroid alignment.
double score_trajectory(const Trajectory& trace, const Trajectory& reference, const IcpOptions& icp = {});

struct Evaluation {
    SimResult sim;
    std::optional<double> chamfer;           // set iff sim.success
    std::optional<SurrogateExpr> surrogate;  // set when requested and the trace is long enough
};

/// Simulates, scores and optionally fits a surrogate. The surrogate's
/// parameter step is the slowest crank's angle step.
Evaluation evaluate_mechanism(const MechanismSpec& spec, const Trajectory& reference, const LoopConfig& config,
                              bool with_surrogate);

enum class Efficiency { Accept, Flag };
std::string_view to_string(Efficiency e);

/// Accept when the revision is no more complex and no worse, or strictly better in distance.
Efficiency revision_efficiency_check(int prev_complexity, double prev_chamfer, int revised_complexity,
                                     double revised_chamfer);

struct CandidateRecord {
    std::string source;  // designer | revision
    std::string raw_text;
    bool transport_failure = false;
    bool parsed = false;
    std::string canonical_text;
    std::string error;
    bool simulated = false;  // simulation ran to completion
    std::optional<StepFailure> failure;
    std::string trace_summary;  // extents of the simulated path
    std::optional<double> chamfer;
    std::optional<std::string> surrogate_text;
    int complexity = 0;
    std::optional<Efficiency> efficiency;  // revisions of a valid candidate only

    bool valid() const { return chamfer.has_value(); }
};

struct IterationRecord {
    int iteration = 0;
    std::string designer_prompt;
    std::vector<CandidateRecord> candidates;
    std::optional<std::string> critic_prompt;
    std::optional<std::string> critique_text;
    std::optional<std::string> revision_prompt;
    std::optional<CandidateRecord> revision;
    /// Every backend call of the iteration failed after retries.
    bool failed = false;
    std::optional<double> best_chamfer;  // running best after this iteration
};

struct BestDesign {
    std::string mechanism_text;
    double chamfer = 0.0;
    int iteration = 0;
};

struct RunCondition {
    std::string model;
    std::string shape;
    int num_examples = 2;
    int mem_k = 0;
    bool feedback = true;
    bool sfb = false;
};

enum class Termination { Epsilon, RMax };
std::string_view to_string(Termination t);

struct RunRecord {
    std::string task_id;
    RunCondition condition;
    std::vector<IterationRecord> iterations;
    int iterations_executed = 0;
    std::optional<BestDesign> best;
    std::optional<double> first_valid_chamfer;
    std::optional<double> final_chamfer;  // last valid candidate
    int candidates_generated = 0;         // backend responses received
    int candidates_valid = 0;             // parsed and simulated
    int transport_failures = 0;
    Termination terminated_by = Termination::RMax;
};

/// The design/simulate/critique/revise loop for one task.
RunRecord run_task(const TaskInstance& task, const LoopConfig& config, AgentBackend& backend,
                   MemoryRepository& memory, const std::string& model_name = "");

/// One line per iteration followed by a summary line.
std::string to_jsonl(const RunRecord& record);
void write_run_record(const RunRecord& record, const std::filesystem::path& path);
/// Summary fields of every record in a JSONL file; per-iteration detail is not reloaded.
std::vector<RunRecord> read_run_summaries(const std::filesystem::path& path);

}  // namespace msynth
