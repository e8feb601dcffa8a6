// Command-line front end: dataset generation, simulation, scoring, single
// runs, ablations and reports.
#include "CLI11.hpp"
#include "json.hpp"

#include "msynth/bench.hpp"
#include "msynth/curves.hpp"
#include "msynth/dsl.hpp"
#include "msynth/error.hpp"
#include "msynth/format.hpp"
#include "msynth/orchestrator.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace msynth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<CurveFamily> parse_families(const std::vector<std::string>& names) {
    if (names.empty()) return all_families();
    std::vector<CurveFamily> out;
    for (const std::string& n : names) {
        const auto f = parse_family(n);
        if (!f) throw ConfigError("unknown shape '" + n + "'");
        out.push_back(*f);
    }
    return out;
}

MechanismSpec load_mechanism(const fs::path& path) {
    const dsl::ParseResult r = dsl::parse(read_file(path));
    if (!r.ok()) throw InvalidInput(path.string() + ":\n" + r.error_text());
    return *r.spec;
}

nlohmann::ordered_json points_json(const Trajectory& t) {
    auto arr = nlohmann::ordered_json::array();
    for (const Point2& p : t.points) arr.push_back({p.x, p.y});
    return arr;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory t;
    const auto& pts = j.is_array() ? j : j.at("points");
    for (const auto& p : pts) t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    if (j.is_object()) t.closed = j.value("closed", false);
    return t;
}

const TaskInstance& pick_task(const std::vector<TaskInstance>& tasks, const std::string& id) {
    if (tasks.empty()) throw ConfigError("dataset is empty");
    if (id.empty()) {
        if (tasks.size() == 1) return tasks.front();
        throw ConfigError("dataset has several tasks; choose one with --task-id");
    }
    for (const TaskInstance& t : tasks) {
        if (t.id == id) return t;
    }
    throw ConfigError("no task '" + id + "' in dataset");
}

struct LoopOverrides {
    std::optional<int> b, r_max, num_examples, mem, sim_steps;
    std::optional<double> epsilon;
    std::optional<bool> feedback, sfb;

    void add(CLI::App* app) {
        app->add_option("--b", b, "Candidates per iteration");
        app->add_option("--r-max", r_max, "Iteration budget");
        app->add_option("--epsilon", epsilon, "Chamfer threshold for early stop");
        app->add_option("--examples", num_examples, "#Ex level");
        app->add_option("--mem", mem, "Memory retrieval k");
        app->add_option("--feedback", feedback, "Critic feedback on/off");
        app->add_option("--sfb", sfb, "Symbolic feedback on/off");
        app->add_option("--sim-steps", sim_steps, "Simulation steps (default: one crank revolution)");
    }

    void apply(LoopConfig& c) const {
        if (b) c.batch_size = *b;
        if (r_max) c.r_max = *r_max;
        if (epsilon) c.epsilon = *epsilon;
        if (num_examples) c.num_examples = *num_examples;
        if (mem) c.mem_k = *mem;
        if (feedback) c.feedback_enabled = *feedback;
        if (sfb) c.sfb_enabled = *sfb;
        if (sim_steps) c.sim_steps = *sim_steps;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Planar mechanism synthesis toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int jobs = 1;
    std::string config_path;
    std::string out_path;
    std::string backend_path;

    // gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "Sample target curves and their key points");
    std::vector<std::string> shapes;
    int instances = 5;
    int n_points = 4;
    std::string mode = "random";
    gen->add_option("--seed", seed, "Dataset seed");
    gen->add_option("--shapes", shapes, "Shape families (default: all)");
    gen->add_option("--instances", instances, "Instances per shape");
    gen->add_option("--points", n_points, "Points per instance");
    gen->add_option("--mode", mode, "Point sampling: random or uniform")->check(CLI::IsMember({"random", "uniform"}));
    gen->add_option("--out", out_path, "Output file (default: stdout)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate a mechanism file and print the target path as JSON");
    std::string mech_path;
    int steps = 0;
    sim->add_option("mechanism", mech_path, "Mechanism description file")->required();
    sim->add_option("--steps", steps, "Simulation steps (default: one crank revolution)");
    sim->add_option("--out", out_path, "Output file (default: stdout)");

    // eval
    auto* eval = app.add_subcommand("eval", "ICP-align a trace to a task's target curve and report the Chamfer distance");
    std::string trace_path;
    std::string task_path;
    std::string task_id;
    int reference_points = 256;
    eval->add_option("trace", trace_path, "Mechanism file or JSON trace")->required();
    eval->add_option("task", task_path, "Dataset JSONL")->required();
    eval->add_option("--task-id", task_id, "Task to score against");
    eval->add_option("--reference-points", reference_points, "Target curve samples");

    // run
    auto* run = app.add_subcommand("run", "Run the design loop on one task");
    LoopOverrides run_overrides;
    run->add_option("task", task_path, "Dataset JSONL")->required();
    run->add_option("--task-id", task_id, "Task to run");
    run->add_option("--backend", backend_path, "Backend config JSON")->required();
    run->add_option("--config", config_path, "Loop config JSON");
    run->add_option("--seed", seed, "Generation seed passed to the backend");
    run->add_option("--out", out_path, "Output directory")->required();
    std::string memory_file;
    run->add_option("--memory-file", memory_file, "Persistent memory JSONL shared across runs");
    run_overrides.add(run);

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Run the full-factorial ablation described by a grid config");
    std::string grid_path;
    LoopOverrides ablate_overrides;
    ablate->add_option("grid", grid_path, "Grid config JSON")->required();
    ablate->add_option("--seed", seed, "Override the grid's dataset seed");
    ablate->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    ablate->add_option("--out", out_path, "Output directory")->required();
    ablate_overrides.add(ablate);

    // report
    auto* report = app.add_subcommand("report", "Aggregate run records into results tables");
    std::vector<std::string> record_paths;
    report->add_option("records", record_paths, "Run record files or directories")->required();
    report->add_option("--out", out_path, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*gen) {
            DatasetConfig dc;
            dc.seed = seed;
            dc.families = parse_families(shapes);
            dc.instances_per_family = instances;
            dc.n_points = n_points;
            dc.sampling.mode = mode == "uniform" ? SamplingMode::Uniform : SamplingMode::Random;
            const std::string text = dataset_to_jsonl(generate_dataset(dc));
            if (out_path.empty()) {
                std::cout << text;
            } else {
                write_file(out_path, text);
            }
        } else if (*sim) {
            const MechanismSpec spec = load_mechanism(mech_path);
            const SimResult r = simulate(spec, steps);
            nlohmann::ordered_json j;
            j["success"] = r.success;
            j["steps"] = r.steps;
            j["closed"] = r.trajectory.closed;
            j["complexity"] = complexity(spec);
            j["points"] = points_json(r.trajectory);
            if (r.failure) {
                j["failure"] = {{"step", r.failure->step}, {"joint", r.failure->joint}, {"reason", r.failure->reason}};
            }
            const std::string text = j.dump() + "\n";
            if (out_path.empty()) {
                std::cout << text;
            } else {
                write_file(out_path, text);
            }
            if (!r.success) {
                std::cerr << "simulation failed: " << r.failure->reason << "\n";
                return kExitRuntime;
            }
        } else if (*eval) {
            const auto dataset = read_dataset(task_path);
            const TaskInstance& task = pick_task(dataset, task_id);
            Trajectory trace;
            if (fs::path(trace_path).extension() == ".json") {
                trace = trajectory_from_json(nlohmann::json::parse(read_file(trace_path)));
            } else {
                const SimResult r = simulate(load_mechanism(trace_path));
                if (!r.success) {
                    std::cerr << "simulation failed: " << r.failure->reason << "\n";
                    return kExitRuntime;
                }
                trace = r.trajectory;
            }
            const Trajectory ref = reference_trajectory(task.curve, reference_points);
            nlohmann::ordered_json j;
            j["task_id"] = task.id;
            j["chamfer"] = score_trajectory(trace, ref);
            j["chamfer_unaligned"] = chamfer_distance(trace, ref);
            std::cout << j.dump() << "\n";
        } else if (*run) {
            const auto dataset = read_dataset(task_path);
            const TaskInstance& task = pick_task(dataset, task_id);
            const BackendConfig bc = load_backend_config(backend_path);
            LoopConfig cfg;
            if (!config_path.empty()) apply_loop_json(cfg, read_file(config_path));
            run_overrides.apply(cfg);
            if (run->count("--seed")) {
                cfg.designer.seed = seed;
                cfg.critic.seed = seed;
            }
            AblationGrid single;
            single.base = cfg;
            cfg = condition_config(single, bc, cfg.num_examples, cfg.mem_k, cfg.feedback_enabled, cfg.sfb_enabled);
            validate(cfg);
            std::unique_ptr<MemoryRepository> memory = memory_file.empty()
                                                           ? std::make_unique<MemoryRepository>()
                                                           : std::make_unique<MemoryRepository>(memory_file);
            auto backend = make_backend(bc);
            const RunRecord r = run_task(task, cfg, *backend, *memory, bc.name);
            fs::create_directories(fs::path(out_path) / "runs");
            write_run_record(r, fs::path(out_path) / "runs" / (run_file_stem(r) + ".jsonl"));
            std::cout << "task " << r.task_id << ": " << r.iterations_executed << " iterations, terminated by "
                      << to_string(r.terminated_by) << ", valid " << r.candidates_valid << "/"
                      << r.candidates_generated;
            if (r.best) std::cout << ", best Chamfer " << format_fixed(r.best->chamfer, 3) << " at iteration " << r.best->iteration;
            std::cout << "\n";
        } else if (*ablate) {
            AblationGrid grid = load_grid(grid_path);
            if (ablate->count("--seed")) grid.seed = seed;
            ablate_overrides.apply(grid.base);
            validate(grid.base);
            DatasetConfig dc;
            dc.seed = grid.seed;
            dc.families = grid.shapes;
            dc.instances_per_family = grid.instances_per_shape;
            dc.n_points = grid.n_points;
            const auto dataset = generate_dataset(dc);
            const fs::path out(out_path);
            fs::create_directories(out);
            write_file(out / "dataset.jsonl", dataset_to_jsonl(dataset));
            AblationOptions opts;
            opts.jobs = jobs;
            opts.runs_dir = out / "runs";
            opts.progress = [](std::size_t done, std::size_t total) {
                if (done == total || done % 50 == 0) std::cerr << "runs " << done << "/" << total << "\n";
            };
            const AblationResult result = run_ablation(grid, dataset, opts);
            emit_report(result.stats, ReportFormat::Csv, out / "results.csv");
            emit_report(result.stats, ReportFormat::Markdown, out / "results.md");
            write_file(out / "stats.csv", stats_to_csv(result.stats));
            write_file(out / "wilcoxon.txt", render_factor_tests(result.records));
            for (const RunFailure& f : result.failures) {
                std::cerr << "run " << run_file_stem(result.records[f.index]) << " failed: " << f.message << "\n";
            }
            std::cout << result.records.size() << " runs, " << result.stats.size() << " conditions -> "
                      << (out / "results.csv").string() << "\n";
            if (!result.failures.empty()) return kExitRuntime;
        } else if (*report) {
            std::vector<RunRecord> records;
            for (const std::string& p : record_paths) {
                if (fs::is_directory(p)) {
                    std::vector<fs::path> files;
                    for (const auto& e : fs::directory_iterator(p)) {
                        if (e.path().extension() == ".jsonl") files.push_back(e.path());
                    }
                    std::sort(files.begin(), files.end());
                    for (const fs::path& f : files) {
                        for (RunRecord& r : read_run_summaries(f)) records.push_back(std::move(r));
                    }
                } else {
                    for (RunRecord& r : read_run_summaries(p)) records.push_back(std::move(r));
                }
            }
            if (records.empty()) throw ConfigError("no run records found");
            const auto stats = aggregate(records);
            const fs::path out(out_path);
            fs::create_directories(out);
            emit_report(stats, ReportFormat::Csv, out / "results.csv");
            emit_report(stats, ReportFormat::Markdown, out / "results.md");
            write_file(out / "stats.csv", stats_to_csv(stats));
            write_file(out / "wilcoxon.txt", render_factor_tests(records));
            std::cout << records.size() << " runs, " << stats.size() << " conditions\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "invalid JSON: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
