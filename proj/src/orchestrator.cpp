#include "msynth/orchestrator.hpp"

#include "msynth/dsl.hpp"
#include "msynth/error.hpp"
#include "msynth/format.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace msynth {

using nlohmann::ordered_json;

void validate(const LoopConfig& c) {
    auto fail = [](const std::string& what) { throw ConfigError("loop config: " + what); };
    if (c.batch_size < 1) fail("b must be at least 1");
    if (c.r_max < 1) fail("R_max must be at least 1");
    if (!std::isfinite(c.epsilon) || c.epsilon < 0) fail("epsilon must be a finite non-negative number");
    if (c.num_examples < 1 || c.num_examples > static_cast<int>(example_library().size())) {
        fail("#Ex out of range");
    }
    if (c.mem_k < 0) fail("Mem must be non-negative");
    if (!c.allow_any_levels) {
        if (c.num_examples != 2 && c.num_examples != 3) fail("#Ex must be 2 or 3");
        if (c.mem_k != 0 && c.mem_k != 2) fail("Mem must be 0 or 2");
    }
    if (c.sim_steps && *c.sim_steps < 1) fail("sim_steps must be positive");
    if (c.reference_points < 8) fail("reference_points must be at least 8");
    if (c.retries < 0) fail("retries must be non-negative");
    for (const GenerationParams* p : {&c.designer, &c.critic}) {
        if (!(p->temperature >= 0) || p->max_tokens < 1) fail("invalid generation parameters");
    }
}

double score_trajectory(const Trajectory& trace, const Trajectory& reference, const IcpOptions& icp) {
    require_finite_nonempty(trace.points, "score_trajectory");
    require_finite_nonempty(reference.points, "score_trajectory");
    if (trace.size() >= 3) {
        try {
            return icp_align(trace, reference, icp).final_chamfer;
        } catch (const DegenerateGeometry&) {
        }
    }
    const Point2 shift = centroid(reference.points) - centroid(trace.points);
    Trajectory moved = trace;
    for (Point2& p : moved.points) p = p + shift;
    return chamfer_distance(moved, reference);
}

namespace {

double slowest_crank_step(const MechanismSpec& spec) {
    double step = std::numeric_limits<double>::infinity();
    for (const Joint& j : spec.joints) {
        if (const auto* c = std::get_if<CrankJoint>(&j.kind)) step = std::min(step, std::abs(c->angle_step));
    }
    return step;
}

}  // namespace

Evaluation evaluate_mechanism(const MechanismSpec& spec, const Trajectory& reference, const LoopConfig& config,
                              bool with_surrogate) {
    Evaluation ev;
    ev.sim = simulate(spec, config.sim_steps.value_or(0));
    if (!ev.sim.success) return ev;
    ev.chamfer = score_trajectory(ev.sim.trajectory, reference, config.icp);
    if (with_surrogate && ev.sim.trajectory.size() >= static_cast<std::size_t>(kMinSurrogateSamples)) {
        SurrogateConfig sc = config.surrogate;
        sc.param_step = slowest_crank_step(spec);
        ev.surrogate = fit_surrogate(ev.sim.trajectory, sc);
    }
    return ev;
}

std::string_view to_string(Efficiency e) { return e == Efficiency::Accept ? "accept" : "flag"; }

Efficiency revision_efficiency_check(int prev_complexity, double prev_chamfer, int revised_complexity,
                                     double revised_chamfer) {
    const bool no_worse = revised_complexity <= prev_complexity && revised_chamfer <= prev_chamfer;
    return (no_worse || revised_chamfer < prev_chamfer) ? Efficiency::Accept : Efficiency::Flag;
}

std::string_view to_string(Termination t) { return t == Termination::Epsilon ? "epsilon" : "r_max"; }

namespace {

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ';');
    return s;
}

// What the critic and the revision step are told about a candidate. The
// distance itself travels on the score line, which only symbolic feedback enables.
std::string simulator_report(const CandidateRecord& c) {
    if (c.transport_failure) return "No response was received for this design.";
    if (!c.parsed) return "The mechanism code could not be parsed:\n" + c.error;
    if (c.failure) {
        return "Simulation failed: " + c.failure->reason + ".";
    }
    return "Simulation completed successfully. " + c.trace_summary;
}

std::string trace_summary(const SimResult& sim) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Point2& p : sim.trajectory.points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return "The target joint traced " + std::to_string(sim.trajectory.size()) + " points over " +
           std::to_string(sim.steps) + " steps, spanning x from " + format_fixed(x0, 3) + " to " +
           format_fixed(x1, 3) + " and y from " + format_fixed(y0, 3) + " to " + format_fixed(y1, 3) +
           (sim.trajectory.closed ? ", as a closed loop." : ", as an open path.");
}

struct LoopState {
    const TaskInstance& task;
    const LoopConfig& config;
    MemoryRepository& memory;
    Trajectory reference;
    RunRecord record;
    std::optional<std::string> best_surrogate;
};

CandidateRecord assess(LoopState& st, const Candidate& cand, const std::string& source, int iteration) {
    CandidateRecord rec;
    rec.source = source;
    rec.raw_text = cand.raw_text;
    rec.transport_failure = cand.transport_failure;
    if (cand.transport_failure) {
        rec.error = cand.error;
        ++st.record.transport_failures;
        return rec;
    }
    ++st.record.candidates_generated;
    if (!cand.spec) {
        rec.error = cand.error;
        return rec;
    }
    rec.parsed = true;
    rec.canonical_text = dsl::format_canonical(*cand.spec);
    rec.complexity = complexity(*cand.spec);
    const Evaluation ev = evaluate_mechanism(*cand.spec, st.reference, st.config, st.config.sfb_enabled);
    if (!ev.sim.success) {
        rec.failure = ev.sim.failure;
        return rec;
    }
    rec.simulated = true;
    rec.chamfer = ev.chamfer;
    rec.trace_summary = trace_summary(ev.sim);
    if (ev.surrogate) rec.surrogate_text = expr_to_text(*ev.surrogate);

    ++st.record.candidates_valid;
    if (!st.record.first_valid_chamfer) st.record.first_valid_chamfer = rec.chamfer;
    st.record.final_chamfer = rec.chamfer;

    MemoryEntry entry;
    entry.mechanism_text = rec.canonical_text;
    entry.chamfer = *rec.chamfer;
    entry.surrogate_text = rec.surrogate_text;
    entry.task_id = st.task.id;
    entry.iteration = iteration;
    st.memory.store(std::move(entry), ev.sim);

    if (!st.record.best || *rec.chamfer < st.record.best->chamfer) {
        st.record.best = BestDesign{rec.canonical_text, *rec.chamfer, iteration};
        st.best_surrogate = rec.surrogate_text;
    }
    return rec;
}

std::optional<std::string> memory_block(LoopState& st) {
    if (st.config.mem_k <= 0) return std::nullopt;
    auto rescore = [&st](const MemoryEntry& e) -> std::optional<double> {
        const dsl::ParseResult parsed = dsl::parse(e.mechanism_text);
        if (!parsed.ok()) return std::nullopt;
        const SimResult sim = simulate(*parsed.spec, st.config.sim_steps.value_or(0));
        if (!sim.success) return std::nullopt;
        return score_trajectory(sim.trajectory, st.reference, st.config.icp);
    };
    const auto entries = st.memory.retrieve_topk(static_cast<std::size_t>(st.config.mem_k), st.task.id, rescore);
    if (entries.empty()) return std::nullopt;
    return format_memory_block(entries);
}

bool epsilon_reached(const LoopState& st) {
    return st.record.best && st.record.best->chamfer <= st.config.epsilon;
}

}  // namespace

RunRecord run_task(const TaskInstance& task, const LoopConfig& config, AgentBackend& backend,
                   MemoryRepository& memory, const std::string& model_name) {
    validate(config);
    validate(task.curve);

    LoopState st{task, config, memory, reference_trajectory(task.curve, config.reference_points), {}, {}};
    st.record.task_id = task.id;
    st.record.condition = {model_name, std::string(to_string(task.curve.family())), config.num_examples,
                           config.mem_k, config.feedback_enabled, config.sfb_enabled};

    const auto& library = example_library();
    std::vector<ExampleMechanism> examples(library.begin(), library.begin() + config.num_examples);

    GenerationParams revision_params = config.designer;
    revision_params.role = "revision";

    for (int it = 1; it <= config.r_max; ++it) {
        IterationRecord ir;
        ir.iteration = it;
        st.record.iterations_executed = it;

        PromptContext ctx;
        ctx.api_doc = dsl::api_documentation();
        ctx.examples = examples;
        ctx.memory_block = memory_block(st);
        if (config.sfb_enabled && st.record.best) {
            ctx.surrogate_line = st.best_surrogate ? std::optional(one_line(*st.best_surrogate)) : std::nullopt;
            ctx.score_line = format_fixed(st.record.best->chamfer, 3);
        }
        ctx.description = describe(task.curve);
        ctx.points = format_points(task.target_points);
        ctx.target_equation = task.equation_text;
        ir.designer_prompt = compose_designer_prompt(ctx);

        const auto batch =
            generate_candidates(backend, ir.designer_prompt, config.batch_size, config.designer, config.retries);
        for (const Candidate& c : batch) {
            ir.candidates.push_back(assess(st, c, "designer", it));
        }
        bool all_failed = std::all_of(ir.candidates.begin(), ir.candidates.end(),
                                      [](const CandidateRecord& c) { return c.transport_failure; });

        if (epsilon_reached(st)) {
            st.record.terminated_by = Termination::Epsilon;
            ir.best_chamfer = st.record.best->chamfer;
            st.record.iterations.push_back(std::move(ir));
            break;
        }

        if (config.feedback_enabled) {
            // Review the batch's best valid design, else the first response received.
            const CandidateRecord* reviewed = nullptr;
            for (const CandidateRecord& c : ir.candidates) {
                if (c.valid() && (!reviewed || *c.chamfer < *reviewed->chamfer)) reviewed = &c;
            }
            if (!reviewed) {
                for (const CandidateRecord& c : ir.candidates) {
                    if (!c.transport_failure) {
                        reviewed = &c;
                        break;
                    }
                }
            }
            if (reviewed) {
                PromptContext fb;
                fb.description = ctx.description;
                fb.simulator_output = simulator_report(*reviewed);
                fb.designer_response = reviewed->raw_text;
                fb.memory_block = ctx.memory_block;
                if (config.sfb_enabled && reviewed->valid()) {
                    if (reviewed->surrogate_text) fb.surrogate_line = one_line(*reviewed->surrogate_text);
                    fb.score_line = format_fixed(*reviewed->chamfer, 3);
                }
                ir.critic_prompt = compose_critic_prompt(fb);
                std::optional<std::string> critique;
                for (int attempt = 0; attempt <= config.retries && !critique; ++attempt) {
                    try {
                        critique = backend.generate(*ir.critic_prompt, config.critic);
                    } catch (const BackendError&) {
                    }
                }
                if (!critique) {
                    ++st.record.transport_failures;
                } else {
                    all_failed = false;
                    ir.critique_text = *critique;
                    fb.critique_response = *critique;
                    ir.revision_prompt = compose_revision_prompt(fb);
                    const auto revised =
                        generate_candidates(backend, *ir.revision_prompt, 1, revision_params, config.retries);
                    CandidateRecord rev = assess(st, revised.front(), "revision", it);
                    if (rev.valid() && reviewed->valid()) {
                        rev.efficiency = revision_efficiency_check(reviewed->complexity, *reviewed->chamfer,
                                                                   rev.complexity, *rev.chamfer);
                    }
                    ir.revision = std::move(rev);
                }
            }
        }
        ir.failed = all_failed;
        if (st.record.best) ir.best_chamfer = st.record.best->chamfer;
        st.record.iterations.push_back(std::move(ir));
        if (epsilon_reached(st)) {
            st.record.terminated_by = Termination::Epsilon;
            break;
        }
    }
    return std::move(st.record);
}

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }
ordered_json opt(const std::optional<std::string>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json candidate_json(const CandidateRecord& c) {
    ordered_json j;
    j["source"] = c.source;
    j["raw_text"] = c.raw_text;
    j["transport_failure"] = c.transport_failure;
    j["parsed"] = c.parsed;
    j["canonical_text"] = c.canonical_text;
    j["error"] = c.error;
    j["simulated"] = c.simulated;
    if (c.failure) {
        j["failure"] = {{"step", c.failure->step}, {"joint", c.failure->joint}, {"reason", c.failure->reason}};
    } else {
        j["failure"] = nullptr;
    }
    j["trace_summary"] = c.trace_summary;
    j["chamfer"] = opt(c.chamfer);
    j["surrogate_text"] = opt(c.surrogate_text);
    j["complexity"] = c.complexity;
    j["efficiency"] = c.efficiency ? ordered_json(std::string(to_string(*c.efficiency))) : ordered_json(nullptr);
    return j;
}

ordered_json condition_json(const RunCondition& c) {
    return {{"model", c.model}, {"shape", c.shape}, {"num_examples", c.num_examples},
            {"mem", c.mem_k},   {"feedback", c.feedback}, {"sfb", c.sfb}};
}

}  // namespace

std::string to_jsonl(const RunRecord& r) {
    std::string out;
    for (const IterationRecord& ir : r.iterations) {
        ordered_json j;
        j["type"] = "iteration";
        j["task_id"] = r.task_id;
        j["iteration"] = ir.iteration;
        j["designer_prompt"] = ir.designer_prompt;
        j["candidates"] = ordered_json::array();
        for (const CandidateRecord& c : ir.candidates) j["candidates"].push_back(candidate_json(c));
        j["critic_prompt"] = opt(ir.critic_prompt);
        j["critique_text"] = opt(ir.critique_text);
        j["revision_prompt"] = opt(ir.revision_prompt);
        j["revision"] = ir.revision ? candidate_json(*ir.revision) : ordered_json(nullptr);
        j["failed"] = ir.failed;
        j["best_chamfer"] = opt(ir.best_chamfer);
        out += j.dump() + "\n";
    }
    ordered_json s;
    s["type"] = "summary";
    s["task_id"] = r.task_id;
    s["condition"] = condition_json(r.condition);
    s["iterations_executed"] = r.iterations_executed;
    if (r.best) {
        s["best"] = {{"mechanism_text", r.best->mechanism_text},
                     {"chamfer", r.best->chamfer},
                     {"iteration", r.best->iteration}};
    } else {
        s["best"] = nullptr;
    }
    s["first_valid_chamfer"] = opt(r.first_valid_chamfer);
    s["final_chamfer"] = opt(r.final_chamfer);
    s["candidates_generated"] = r.candidates_generated;
    s["candidates_valid"] = r.candidates_valid;
    s["transport_failures"] = r.transport_failures;
    s["terminated_by"] = std::string(to_string(r.terminated_by));
    out += s.dump() + "\n";
    return out;
}

void write_run_record(const RunRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    out << to_jsonl(record);
    if (!out) throw std::runtime_error("cannot write run record " + path.string());
}

std::vector<RunRecord> read_run_summaries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read run record " + path.string());
    std::vector<RunRecord> out;
    std::string line;
    auto opt_real = [](const ordered_json& j, const char* key) -> std::optional<double> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<double>();
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const ordered_json j = ordered_json::parse(line);
            if (j.value("type", "") != "summary") continue;
            RunRecord r;
            r.task_id = j.at("task_id").get<std::string>();
            const auto& c = j.at("condition");
            r.condition = {c.at("model").get<std::string>(), c.at("shape").get<std::string>(),
                           c.at("num_examples").get<int>(), c.at("mem").get<int>(),
                           c.at("feedback").get<bool>(), c.at("sfb").get<bool>()};
            r.iterations_executed = j.at("iterations_executed").get<int>();
            if (!j.at("best").is_null()) {
                const auto& b = j["best"];
                r.best = BestDesign{b.at("mechanism_text").get<std::string>(), b.at("chamfer").get<double>(),
                                    b.at("iteration").get<int>()};
            }
            r.first_valid_chamfer = opt_real(j, "first_valid_chamfer");
            r.final_chamfer = opt_real(j, "final_chamfer");
            r.candidates_generated = j.at("candidates_generated").get<int>();
            r.candidates_valid = j.at("candidates_valid").get<int>();
            r.transport_failures = j.value("transport_failures", 0);
            r.terminated_by =
                j.at("terminated_by").get<std::string>() == "epsilon" ? Termination::Epsilon : Termination::RMax;
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput("run record " + path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace msynth
