#include "msynth/agents.hpp"

#include "msynth/dsl.hpp"
#include "msynth/format.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace msynth {

namespace {

constexpr const char* kEquationLead =
    "The analytical equation describing the motion of the target joint in the above code is given by: ";
constexpr const char* kScoreLead = "The Chamfer distance of the target equation in the above code is: ";
constexpr const char* kGoalLine =
    "Our goal is to minimise the distance. Therefore, the greater the distance, the more it is not following "
    "the target motion and deviating from the intended path.";

void require(bool present, const char* field) {
    if (!present) throw PromptError(field);
}

// Memory, surrogate and score lines. Each line is dropped when its value is absent.
void append_feedback_block(std::string& out, const PromptContext& ctx) {
    if (ctx.memory_block && !ctx.memory_block->empty()) {
        out += *ctx.memory_block;
        if (out.back() != '\n') out += '\n';
    }
    if (ctx.surrogate_line) {
        out += kEquationLead;
        out += *ctx.surrogate_line;
        out += '\n';
    }
    if (ctx.score_line) {
        out += kScoreLead;
        out += *ctx.score_line;
        out += '\n';
    }
    if (ctx.surrogate_line || ctx.score_line) {
        out += kGoalLine;
        out += '\n';
    }
}

void append_labelled(std::string& out, const char* label, const std::string& value) {
    out += label;
    out += value;
    if (value.empty() || value.back() != '\n') out += '\n';
}

}  // namespace

std::string compose_designer_prompt(const PromptContext& ctx) {
    require(!ctx.api_doc.empty(), "api_doc");
    require(ctx.examples.size() == 2 || ctx.examples.size() == 3, "examples (2 or 3 required)");
    require(!ctx.description.empty(), "description");
    require(!ctx.points.empty(), "points");
    require(!ctx.target_equation.empty(), "target_equation");

    std::string out =
        "You are an AI specialized in designing planar mechanisms. Based on the description, generate the "
        "appropriate mechanism using the planar mechanism description language below and explain each "
        "component step by step.\n";
    append_labelled(out, "Commands (API Documentation): ", ctx.api_doc);
    out += "Examples:\n";
    for (std::size_t i = 0; i < ctx.examples.size(); ++i) {
        out += "# Example " + std::to_string(i + 1) + "\n";
        out += ctx.examples[i].code;
        if (out.back() != '\n') out += '\n';
        if (ctx.examples[i].score) {
            out += "# Chamfer distance: " + format_fixed(*ctx.examples[i].score, 3) + "\n";
        }
    }
    append_feedback_block(out, ctx);
    out += "Planar Mechanism Description:\n";
    append_labelled(out, "", ctx.description);
    append_labelled(out, "The mechanism must pass as close as possible through all these points: ", ctx.points);
    append_labelled(out, "Target analytical equation of the motion of the target joint: ", ctx.target_equation);
    out += "Planar Mechanism Code:\n";
    return out;
}

std::string compose_critic_prompt(const PromptContext& ctx) {
    require(!ctx.description.empty(), "description");
    require(ctx.simulator_output.has_value(), "simulator_output");
    require(ctx.designer_response.has_value(), "designer_response");

    std::string out = "You are a reviewer for a mechanical designer AI agent.\n";
    append_labelled(out, "The following planar mechanism description: ", ctx.description);
    append_labelled(out, "Simulator Output: ", *ctx.simulator_output);
    append_feedback_block(out, ctx);
    out += "The following response was generated to fulfill the planar mechanism description:\n";
    append_labelled(out, "Response: ", *ctx.designer_response);
    out +=
        "Your task is to evaluate the correctness, completeness, and complexity of the designed planar "
        "mechanism.\n"
        "Check for consistency with the problem constraints and point out any errors or improvements needed.\n"
        "Structure the review as:\n"
        "1. Correctness Assessment: Adherence to constraints and functionality.\n"
        "2. Error Identification: Structural or functional issues.\n"
        "3. Complexity Analysis: Structural efficiency and design elegance.\n"
        "4. Refinement Suggestions: Actionable design improvements.\n"
        "Evaluate the complexity of the mechanism design in terms of:\n"
        "Structural Complexity: Assess whether the design is overly complex or can be simplified while "
        "maintaining functionality.\n"
        "Design Elegance: Consider whether the design achieves the required functionality with minimal "
        "components or steps, adhering to principles of simplicity and elegance.\n"
        "Provide feedback in plain text. Point out areas where complexity could be reduced, and suggest "
        "improvements if necessary.\n";
    return out;
}

std::string compose_revision_prompt(const PromptContext& ctx) {
    require(ctx.designer_response.has_value(), "designer_response");
    require(ctx.critique_response.has_value(), "critique_response");
    require(ctx.simulator_output.has_value(), "simulator_output");

    std::string out;
    append_labelled(out, "You previously generated the following response for a planar mechanism description: ",
                    *ctx.designer_response);
    append_labelled(out, "The reviewer provided the following feedback: ", *ctx.critique_response);
    append_labelled(out, "Simulator Output: ", *ctx.simulator_output);
    append_feedback_block(out, ctx);
    out +=
        "Please revise your response to address the feedback and improve the planar mechanism.\n"
        "The model should structure the response ensuring each step has only one line of code, ensuring "
        "clarity and logical progression, strictly adhering to the commands provided.\n"
        "Planar Mechanism Code:\n";
    return out;
}

std::string format_points(const Trajectory& points) {
    std::string out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i) out += ", ";
        out += "(" + format_fixed(points.points[i].x, 3) + ", " + format_fixed(points.points[i].y, 3) + ")";
    }
    return out;
}

std::string format_memory_block(const std::vector<MemoryEntry>& entries) {
    if (entries.empty()) return {};
    std::string out = "Previously validated mechanisms, closest to the target first:\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const MemoryEntry& e = entries[i];
        out += "# Memory " + std::to_string(i + 1) + " (Chamfer distance: " + format_fixed(e.chamfer, 3) + ")\n";
        out += e.mechanism_text;
        if (out.back() != '\n') out += '\n';
        if (e.surrogate_text) {
            std::string s = *e.surrogate_text;
            for (char& c : s) {
                if (c == '\n') c = ';';
            }
            out += "# Target joint motion: " + s + "\n";
        }
    }
    return out;
}

const std::vector<ExampleMechanism>& example_library() {
    static const std::vector<ExampleMechanism> library{
        {"crank = Crank(p0=(0, 0), distance=1, angle=0.1, x=0, y=0)\n"
         "target = Linear(p0=crank, revolute_radius=1.5, la=(0, 0), lb=(1, 0), x=2, y=0)\n",
         std::nullopt},
        {"ground = Static(x=5, y=0)\n"
         "crank = Crank(p0=(0, 0), distance=2, angle=0.1)\n"
         "rocker = Revolute(p0=crank, d0=5, p1=ground, d1=4, x=4, y=4)\n"
         "target = Revolute(p0=crank, d0=3, p1=rocker, d1=3, x=2, y=5)\n",
         std::nullopt},
        {"crank = Crank(p0=(1, 1), distance=1.5, angle=0.1)\n"
         "follower = Revolute(p0=crank, d0=4, p1=(4, 0), d1=3)\n"
         "target = Revolute(p0=crank, d0=2.5, p1=follower, d1=2.5)\n",
         std::nullopt},
    };
    return library;
}

std::string prompt_hash(const std::string& prompt) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : prompt) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<ScriptedTurn> parse_transcript(const std::string& jsonl) {
    std::vector<ScriptedTurn> turns;
    std::istringstream in(jsonl);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ScriptedTurn t;
            t.response_text = j.at("response_text").get<std::string>();
            if (j.contains("role") && !j["role"].is_null()) t.role = j["role"].get<std::string>();
            if (j.contains("expected_prompt_hash") && !j["expected_prompt_hash"].is_null()) {
                t.expected_prompt_hash = j["expected_prompt_hash"].get<std::string>();
            }
            turns.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("transcript line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return turns;
}

std::vector<ScriptedTurn> read_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open transcript " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_transcript(ss.str());
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptedTurn> turns, bool cycle) : cycle_(cycle) {
    for (ScriptedTurn& t : turns) {
        if (t.role) {
            by_role_[*t.role].turns.push_back(std::move(t));
        } else {
            shared_.turns.push_back(std::move(t));
        }
    }
}

std::string ScriptedBackend::generate(const std::string& prompt, const GenerationParams& params) {
    std::lock_guard lock(mutex_);
    ++calls_;
    Queue* q = &shared_;
    if (auto it = by_role_.find(params.role); it != by_role_.end()) q = &it->second;
    if (q->turns.empty()) {
        throw BackendError("scripted backend: no turns for role " + params.role);
    }
    if (q->cursor >= q->turns.size()) {
        if (!cycle_) throw BackendError("scripted backend: transcript exhausted");
        q->cursor = 0;
    }
    const ScriptedTurn& turn = q->turns[q->cursor++];
    if (turn.expected_prompt_hash && *turn.expected_prompt_hash != prompt_hash(prompt)) {
        throw BackendError("scripted backend: prompt hash mismatch (expected " + *turn.expected_prompt_hash +
                           ", got " + prompt_hash(prompt) + ")");
    }
    return turn.response_text;
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

BackendConfig backend_config_from_json(const std::string& json_text, const std::filesystem::path& base_dir) {
    BackendConfig c;
    try {
        const auto j = nlohmann::json::parse(json_text);
        c.name = j.value("name", c.name);
        c.kind = j.value("kind", c.kind);
        if (j.contains("transcript")) {
            std::filesystem::path p = j["transcript"].get<std::string>();
            c.transcript = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        c.cycle = j.value("cycle", c.cycle);
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.auth_env = j.value("auth_env", c.auth_env);
        c.system_prompt = j.value("system_prompt", c.system_prompt);
        c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
        c.in_flight = j.value("in_flight", c.in_flight);
        if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
        if (j.contains("critic_temperature")) c.critic_temperature = j["critic_temperature"].get<double>();
        if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<int>();
        c.retries = j.value("retries", c.retries);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("backend config: ") + e.what());
    }
    if (c.kind != "scripted" && c.kind != "http") {
        throw ConfigError("backend config: unknown kind '" + c.kind + "'");
    }
    if (c.kind == "scripted" && c.transcript.empty()) {
        throw ConfigError("backend config: scripted backend needs a transcript");
    }
    if (c.kind == "http" && c.endpoint.empty()) {
        throw ConfigError("backend config: http backend needs an endpoint");
    }
    if (c.retries < 0 || c.in_flight < 1 || c.timeout_seconds < 1) {
        throw ConfigError("backend config: retries, in_flight and timeout_seconds out of range");
    }
    if ((c.temperature && *c.temperature < 0) || (c.critic_temperature && *c.critic_temperature < 0) ||
        (c.max_tokens && *c.max_tokens < 1)) {
        throw ConfigError("backend config: invalid generation parameters");
    }
    return c;
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open backend config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return backend_config_from_json(ss.str(), path.parent_path());
}

std::unique_ptr<AgentBackend> make_http_backend(const BackendConfig& config);

std::unique_ptr<AgentBackend> make_backend(const BackendConfig& config) {
    if (config.kind == "scripted") {
        return std::make_unique<ScriptedBackend>(read_transcript(config.transcript), config.cycle);
    }
    return make_http_backend(config);
}

std::vector<Candidate> generate_candidates(AgentBackend& backend, const std::string& prompt, int b,
                                           const GenerationParams& params, int retries) {
    if (b < 1) throw InvalidInput("generate_candidates: b must be at least 1");
    std::vector<Candidate> out;
    out.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        GenerationParams p = params;
        if (p.seed) *p.seed += static_cast<std::uint64_t>(i);
        Candidate c;
        std::optional<std::string> text;
        for (int attempt = 0; attempt <= retries && !text; ++attempt) {
            try {
                text = backend.generate(prompt, p);
            } catch (const BackendError& e) {
                c.error = e.what();
            }
        }
        if (!text) {
            c.transport_failure = true;
            out.push_back(std::move(c));
            continue;
        }
        c.error.clear();
        c.raw_text = std::move(*text);
        c.code = dsl::extract_block(c.raw_text);
        if (!c.code) {
            c.error = "no mechanism code found in response";
        } else {
            dsl::ParseResult parsed = dsl::parse(*c.code);
            if (parsed.ok()) {
                c.spec = std::move(parsed.spec);
            } else {
                c.error = parsed.error_text();
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace msynth
