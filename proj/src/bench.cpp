#include "msynth/bench.hpp"

#include "msynth/error.hpp"
#include "msynth/format.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace msynth {

using nlohmann::json;

void apply_loop_json(LoopConfig& c, const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        c.batch_size = j.value("b", c.batch_size);
        c.r_max = j.value("r_max", c.r_max);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.num_examples = j.value("num_examples", c.num_examples);
        c.mem_k = j.value("mem", c.mem_k);
        c.feedback_enabled = j.value("feedback", c.feedback_enabled);
        c.sfb_enabled = j.value("sfb", c.sfb_enabled);
        if (j.contains("sim_steps")) c.sim_steps = j["sim_steps"].get<int>();
        c.reference_points = j.value("reference_points", c.reference_points);
        c.retries = j.value("retries", c.retries);
        c.allow_any_levels = j.value("allow_any_levels", c.allow_any_levels);
        c.designer.temperature = j.value("temperature", c.designer.temperature);
        c.critic.temperature = j.value("critic_temperature", c.critic.temperature);
        c.designer.max_tokens = j.value("max_tokens", c.designer.max_tokens);
        c.critic.max_tokens = c.designer.max_tokens;
        if (j.contains("seed")) {
            c.designer.seed = j["seed"].get<std::uint64_t>();
            c.critic.seed = c.designer.seed;
        }
        c.icp.max_iters = j.value("icp_max_iters", c.icp.max_iters);
        c.icp.tol = j.value("icp_tol", c.icp.tol);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("loop config: ") + e.what());
    }
    validate(c);
}

AblationGrid grid_from_json(const std::string& json_text, const std::filesystem::path& base_dir) {
    AblationGrid g;
    try {
        const json j = json::parse(json_text);
        g.seed = j.value("seed", g.seed);
        g.instances_per_shape = j.value("instances_per_shape", g.instances_per_shape);
        g.n_points = j.value("n_points", g.n_points);
        if (j.contains("shapes")) {
            g.shapes.clear();
            for (const auto& s : j["shapes"]) {
                const auto f = parse_family(s.get<std::string>());
                if (!f) throw ConfigError("grid: unknown shape '" + s.get<std::string>() + "'");
                g.shapes.push_back(*f);
            }
        }
        if (j.contains("num_examples")) g.num_examples_levels = j["num_examples"].get<std::vector<int>>();
        if (j.contains("mem")) g.mem_levels = j["mem"].get<std::vector<int>>();
        if (j.contains("feedback")) g.feedback_levels = j["feedback"].get<std::vector<bool>>();
        if (j.contains("sfb")) g.sfb_levels = j["sfb"].get<std::vector<bool>>();
        if (j.contains("loop")) apply_loop_json(g.base, j["loop"].dump());
        for (const auto& b : j.at("backends")) {
            if (b.is_string()) {
                std::filesystem::path p = b.get<std::string>();
                g.backends.push_back(load_backend_config(p.is_relative() ? base_dir / p : p));
            } else {
                g.backends.push_back(backend_config_from_json(b.dump(), base_dir));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    if (g.backends.empty()) throw ConfigError("grid: no backends");
    if (g.shapes.empty() || g.num_examples_levels.empty() || g.mem_levels.empty() || g.feedback_levels.empty() ||
        g.sfb_levels.empty()) {
        throw ConfigError("grid: every factor needs at least one level");
    }
    if (g.instances_per_shape < 1 || g.n_points < 1) {
        throw ConfigError("grid: instances_per_shape and n_points must be positive");
    }
    for (const BackendConfig& b : g.backends) {
        for (int ex : g.num_examples_levels) {
            for (int mem : g.mem_levels) {
                validate(condition_config(g, b, ex, mem, true, true));
            }
        }
    }
    return g;
}

AblationGrid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return grid_from_json(ss.str(), path.parent_path());
}

LoopConfig condition_config(const AblationGrid& grid, const BackendConfig& backend, int num_examples, int mem_k,
                            bool feedback, bool sfb) {
    LoopConfig c = grid.base;
    c.num_examples = num_examples;
    c.mem_k = mem_k;
    c.feedback_enabled = feedback;
    c.sfb_enabled = sfb;
    if (backend.temperature) c.designer.temperature = *backend.temperature;
    if (backend.critic_temperature) c.critic.temperature = *backend.critic_temperature;
    if (backend.max_tokens) {
        c.designer.max_tokens = *backend.max_tokens;
        c.critic.max_tokens = *backend.max_tokens;
    }
    c.retries = backend.retries;
    return c;
}

ConditionKey ConditionKey::of(const RunRecord& r) {
    return {r.condition.model, r.condition.shape, r.condition.num_examples,
            r.condition.feedback, r.condition.sfb, r.condition.mem_k};
}

MeanStderr MeanStderr::of(std::span<const double> values) {
    MeanStderr m;
    m.n = static_cast<int>(values.size());
    if (values.empty()) return m;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m.n;
    m.mean = mean;
    if (m.n < 2) {
        m.stderr_ = 0.0;
        return m;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    m.stderr_ = std::sqrt(ss / (m.n - 1)) / std::sqrt(static_cast<double>(m.n));
    return m;
}

double ConditionStats::semantic_success() const {
    return candidates_generated == 0 ? 0.0 : static_cast<double>(candidates_valid) / candidates_generated;
}

std::optional<double> pct_improvement(double first, double best) {
    if (!(first > 0.0) || !(best < first)) return 0.0;
    return 100.0 * (first - best) / first;
}

std::optional<double> pct_improvement(const RunRecord& r) {
    if (!r.first_valid_chamfer || !r.best) return std::nullopt;
    return pct_improvement(*r.first_valid_chamfer, r.best->chamfer);
}

std::vector<ConditionStats> aggregate(const std::vector<RunRecord>& records) {
    struct Acc {
        ConditionKey key;
        int runs = 0;
        std::vector<double> best, final, steps, fstep, pct;
        int generated = 0, valid = 0;
    };
    std::vector<Acc> accs;
    for (const RunRecord& r : records) {
        const ConditionKey key = ConditionKey::of(r);
        auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) { return a.key == key; });
        if (it == accs.end()) {
            accs.push_back({key, 0, {}, {}, {}, {}, {}, 0, 0});
            it = accs.end() - 1;
        }
        Acc& a = *it;
        ++a.runs;
        if (r.best) {
            a.best.push_back(r.best->chamfer);
            a.fstep.push_back(r.best->iteration);
        }
        if (r.final_chamfer) a.final.push_back(*r.final_chamfer);
        a.steps.push_back(r.iterations_executed);
        if (const auto p = pct_improvement(r)) a.pct.push_back(*p);
        a.generated += r.candidates_generated;
        a.valid += r.candidates_valid;
    }
    std::vector<ConditionStats> out;
    for (const Acc& a : accs) {
        ConditionStats s;
        s.key = a.key;
        s.runs = a.runs;
        s.best_chamfer = MeanStderr::of(a.best);
        s.final_chamfer = MeanStderr::of(a.final);
        s.steps = MeanStderr::of(a.steps);
        s.final_step = MeanStderr::of(a.fstep);
        s.pct_improvement = MeanStderr::of(a.pct);
        s.candidates_generated = a.generated;
        s.candidates_valid = a.valid;
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t ablation_size(const AblationGrid& g) {
    return g.backends.size() * g.shapes.size() * g.num_examples_levels.size() * g.feedback_levels.size() *
           g.sfb_levels.size() * g.mem_levels.size() * static_cast<std::size_t>(g.instances_per_shape);
}

std::string run_file_stem(const RunRecord& r) {
    std::string stem = r.condition.model + "__" + r.task_id + "__ex" + std::to_string(r.condition.num_examples) +
                       "_fb" + (r.condition.feedback ? "1" : "0") + "_sfb" + (r.condition.sfb ? "1" : "0") +
                       "_mem" + std::to_string(r.condition.mem_k);
    for (char& c : stem) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    }
    return stem;
}

namespace {

struct Job {
    const BackendConfig* backend;
    const std::vector<ScriptedTurn>* transcript;  // preloaded for scripted backends
    const TaskInstance* task;
    int num_examples;
    bool feedback;
    bool sfb;
    int mem;
};

}  // namespace

AblationResult run_ablation(const AblationGrid& grid, const std::vector<TaskInstance>& dataset,
                            const AblationOptions& options) {
    if (options.jobs < 1) throw ConfigError("ablation: jobs must be positive");

    std::map<std::string, std::vector<ScriptedTurn>> transcripts;
    for (const BackendConfig& b : grid.backends) {
        if (b.kind == "scripted") transcripts[b.name] = read_transcript(b.transcript);
    }

    std::vector<Job> jobs;
    for (const BackendConfig& b : grid.backends) {
        const auto t = transcripts.find(b.name);
        for (CurveFamily shape : grid.shapes) {
            std::vector<const TaskInstance*> tasks;
            for (const TaskInstance& task : dataset) {
                if (task.curve.family() == shape) tasks.push_back(&task);
            }
            if (static_cast<int>(tasks.size()) < grid.instances_per_shape) {
                throw ConfigError("ablation: dataset has too few " + std::string(to_string(shape)) + " tasks");
            }
            tasks.resize(static_cast<std::size_t>(grid.instances_per_shape));
            for (int ex : grid.num_examples_levels) {
                for (bool fb : grid.feedback_levels) {
                    for (bool sfb : grid.sfb_levels) {
                        for (int mem : grid.mem_levels) {
                            for (const TaskInstance* task : tasks) {
                                jobs.push_back({&b, t == transcripts.end() ? nullptr : &t->second, task, ex, fb, sfb,
                                                mem});
                            }
                        }
                    }
                }
            }
        }
    }

    AblationResult result;
    result.records.resize(jobs.size());
    std::vector<std::optional<std::string>> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            const LoopConfig cfg =
                condition_config(grid, *job.backend, job.num_examples, job.mem, job.feedback, job.sfb);
            RunRecord& rec = result.records[i];
            try {
                std::unique_ptr<AgentBackend> backend =
                    job.transcript ? std::make_unique<ScriptedBackend>(*job.transcript, job.backend->cycle)
                                   : make_backend(*job.backend);
                MemoryRepository memory;
                rec = run_task(*job.task, cfg, *backend, memory, job.backend->name);
            } catch (const std::exception& e) {
                rec = RunRecord{};
                rec.task_id = job.task->id;
                rec.condition = {job.backend->name, std::string(to_string(job.task->curve.family())),
                                 job.num_examples, job.mem, job.feedback, job.sfb};
                errors[i] = e.what();
            }
            if (options.runs_dir) {
                write_run_record(rec, *options.runs_dir / (run_file_stem(rec) + ".jsonl"));
            }
            const std::size_t d = ++done;
            if (options.progress) {
                std::lock_guard lock(progress_mutex);
                options.progress(d, jobs.size());
            }
        }
    };

    if (options.runs_dir) std::filesystem::create_directories(*options.runs_dir);
    const int n_threads = std::min<int>(options.jobs, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i]) result.failures.push_back({i, *errors[i]});
    }
    result.stats = aggregate(result.records);
    return result;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidInput("wilcoxon: samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        if (!std::isfinite(diff)) throw InvalidInput("wilcoxon: non-finite value");
        if (diff != 0.0) d.push_back(diff);
    }
    WilcoxonResult r;
    r.n = static_cast<int>(d.size());
    if (d.empty()) {
        r.degenerate = true;
        r.p_value = 1.0;
        return r;
    }

    // Doubled average ranks of |d| stay integral under ties.
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<long> rank2(d.size());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const long doubled = static_cast<long>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2_plus = 0, w2_total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        w2_total += rank2[i];
        if (d[i] > 0) w2_plus += rank2[i];
    }
    r.w_plus = w2_plus / 2.0;
    r.w_minus = (w2_total - w2_plus) / 2.0;
    r.statistic = std::min(r.w_plus, r.w_minus);

    const double n = r.n;
    if (r.n <= 25) {
        r.exact = true;
        std::vector<double> count(static_cast<std::size_t>(w2_total) + 1, 0.0);
        count[0] = 1.0;
        for (long rk : rank2) {
            for (long s = w2_total; s >= rk; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - rk)];
        }
        const double total = std::ldexp(1.0, r.n);
        double lower = 0.0, upper = 0.0;
        for (long s = 0; s <= w2_total; ++s) {
            if (s <= w2_plus) lower += count[static_cast<std::size_t>(s)];
            if (s >= w2_plus) upper += count[static_cast<std::size_t>(s)];
        }
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    } else {
        r.exact = false;
        const double mean = n * (n + 1) / 4.0;
        const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
        const double z = (r.w_plus - mean) / std::sqrt(var);
        r.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    }
    return r;
}

const std::vector<std::string> kReportColumns{"Model", "Shape", "#Ex",   "Fdbk",    "SFB",    "Mem",
                                              "Best chamf.", "Fcham", "Steps", "Fstep", "% Imp.", "% Semantic"};

namespace {

constexpr const char* kAbsent = "n/a";

std::string pm(const MeanStderr& m) {
    if (!m.mean) return kAbsent;
    return format_fixed(*m.mean, 3) + " ± " + format_fixed(m.stderr_.value_or(0.0), 3);
}

std::vector<std::string> report_row(const ConditionStats& s) {
    return {s.key.model,
            s.key.shape,
            std::to_string(s.key.num_examples),
            s.key.feedback ? "Yes" : "No",
            s.key.sfb ? "Yes" : "No",
            std::to_string(s.key.mem),
            pm(s.best_chamfer),
            pm(s.final_chamfer),
            pm(s.steps),
            pm(s.final_step),
            s.pct_improvement.mean ? format_fixed(*s.pct_improvement.mean, 3) : kAbsent,
            format_fixed(100.0 * s.semantic_success(), 3)};
}

std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_field(fields[i]);
    }
    return out + "\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::string render_report(const std::vector<ConditionStats>& stats, ReportFormat format) {
    if (stats.empty()) throw InvalidInput("render_report: no conditions");
    std::string out;
    if (format == ReportFormat::Csv) {
        out += csv_line(kReportColumns);
        for (const ConditionStats& s : stats) out += csv_line(report_row(s));
        return out;
    }
    auto md_line = [](const std::vector<std::string>& cells) {
        std::string l = "|";
        for (const std::string& c : cells) l += " " + c + " |";
        return l + "\n";
    };
    out += md_line(kReportColumns);
    out += "|";
    for (std::size_t i = 0; i < kReportColumns.size(); ++i) out += "---|";
    out += "\n";
    for (const ConditionStats& s : stats) out += md_line(report_row(s));
    return out;
}

void emit_report(const std::vector<ConditionStats>& stats, ReportFormat format, const std::filesystem::path& path) {
    const std::string text = render_report(stats, format);
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write report " + path.string());
}

namespace {

const std::vector<std::string> kStatsColumns{
    "model",      "shape",       "num_examples", "feedback",   "sfb",        "mem",        "runs",
    "best_n",     "best_mean",   "best_stderr",  "final_n",    "final_mean", "final_stderr",
    "steps_n",    "steps_mean",  "steps_stderr", "fstep_n",    "fstep_mean", "fstep_stderr",
    "pct_n",      "pct_mean",    "pct_stderr",   "generated",  "valid"};

void push_ms(std::vector<std::string>& row, const MeanStderr& m) {
    row.push_back(std::to_string(m.n));
    row.push_back(m.mean ? format_real(*m.mean) : "");
    row.push_back(m.stderr_ ? format_real(*m.stderr_) : "");
}

std::optional<double> opt_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    if (!parse_real(s, v)) throw InvalidInput("stats csv: bad number '" + s + "'");
    return v;
}

int to_int(const std::string& s) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw InvalidInput("stats csv: bad integer '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw InvalidInput("stats csv: bad integer '" + s + "'");
    }
}

}  // namespace

std::string stats_to_csv(const std::vector<ConditionStats>& stats) {
    std::string out = csv_line(kStatsColumns);
    for (const ConditionStats& s : stats) {
        std::vector<std::string> row{s.key.model,
                                     s.key.shape,
                                     std::to_string(s.key.num_examples),
                                     s.key.feedback ? "1" : "0",
                                     s.key.sfb ? "1" : "0",
                                     std::to_string(s.key.mem),
                                     std::to_string(s.runs)};
        push_ms(row, s.best_chamfer);
        push_ms(row, s.final_chamfer);
        push_ms(row, s.steps);
        push_ms(row, s.final_step);
        push_ms(row, s.pct_improvement);
        row.push_back(std::to_string(s.candidates_generated));
        row.push_back(std::to_string(s.candidates_valid));
        out += csv_line(row);
    }
    return out;
}

std::vector<ConditionStats> stats_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != kStatsColumns) {
        throw InvalidInput("stats csv: unexpected header");
    }
    std::vector<ConditionStats> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != kStatsColumns.size()) throw InvalidInput("stats csv: wrong field count");
        ConditionStats s;
        s.key = {f[0], f[1], to_int(f[2]), f[3] == "1", f[4] == "1", to_int(f[5])};
        s.runs = to_int(f[6]);
        MeanStderr* cells[] = {&s.best_chamfer, &s.final_chamfer, &s.steps, &s.final_step, &s.pct_improvement};
        for (int c = 0; c < 5; ++c) {
            cells[c]->n = to_int(f[7 + 3 * c]);
            cells[c]->mean = opt_real(f[8 + 3 * c]);
            cells[c]->stderr_ = opt_real(f[9 + 3 * c]);
        }
        s.candidates_generated = to_int(f[22]);
        s.candidates_valid = to_int(f[23]);
        out.push_back(std::move(s));
    }
    return out;
}

FactorTest paired_factor_test(const std::vector<RunRecord>& records, const std::string& factor) {
    if (factor != "feedback" && factor != "sfb" && factor != "mem") {
        throw InvalidInput("paired_factor_test: unknown factor " + factor);
    }
    // Key with the factor blanked out -> (off value, on value).
    std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> pairs;
    for (const RunRecord& r : records) {
        if (!r.best) continue;
        RunCondition c = r.condition;
        bool on = false;
        if (factor == "feedback") {
            on = c.feedback;
            c.feedback = false;
        } else if (factor == "sfb") {
            on = c.sfb;
            c.sfb = false;
        } else {
            on = c.mem_k > 0;
            c.mem_k = 0;
        }
        const std::string key = c.model + "|" + c.shape + "|" + std::to_string(c.num_examples) + "|" +
                                std::to_string(c.mem_k) + "|" + (c.feedback ? "1" : "0") + (c.sfb ? "1" : "0") +
                                "|" + r.task_id;
        (on ? pairs[key].second : pairs[key].first) = r.best->chamfer;
    }
    std::vector<double> on_values, off_values;
    for (const auto& [key, p] : pairs) {
        if (p.first && p.second) {
            off_values.push_back(*p.first);
            on_values.push_back(*p.second);
        }
    }
    FactorTest t;
    t.factor = factor;
    t.pairs = static_cast<int>(on_values.size());
    t.result = wilcoxon_signed_rank(on_values, off_values);
    return t;
}

std::string render_factor_tests(const std::vector<RunRecord>& records) {
    std::string out = "Paired signed-rank tests on best Chamfer distance (factor on vs off)\n";
    for (const char* factor : {"feedback", "sfb", "mem"}) {
        const FactorTest t = paired_factor_test(records, factor);
        out += std::string(factor) + ": pairs=" + std::to_string(t.pairs) + " n=" + std::to_string(t.result.n);
        if (t.result.degenerate) {
            out += " degenerate (no non-zero differences), p=1\n";
            continue;
        }
        out += " W=" + format_real(t.result.statistic) + " W+=" + format_real(t.result.w_plus) +
               " W-=" + format_real(t.result.w_minus) + " p=" + format_significant(t.result.p_value, 4) +
               (t.result.exact ? " (exact)\n" : " (normal approximation)\n");
    }
    return out;
}

}  // namespace msynth
