#pragma once

#include "msynth/error.hpp"
#include "msynth/geometry.hpp"
#include "msynth/linkage.hpp"
#include "msynth/memory.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace msynth {

struct ExampleMechanism {
    std::string code;
    std::optional<double> score;
};

/// Everything the three prompt templates can draw on. Optional sections are
/// omitted line-and-all when unset.
struct PromptContext {
    std::string api_doc;
    std::vector<ExampleMechanism> examples;
    std::optional<std::string> memory_block;
    std::optional<std::string> surrogate_line;  // surrogate expression text
    std::optional<std::string> score_line;      // Chamfer value, already formatted
    std::string description;
    std::string points;
    std::string target_equation;
    std::optional<std::string> designer_response;
    std::optional<std::string> critique_response;
    std::optional<std::string> simulator_output;
};

/// Thrown when a mandatory context field is missing; names the field.
class PromptError : public InvalidInput {
public:
    explicit PromptError(const std::string& field)
        : InvalidInput("prompt composition: missing " + field), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

std::string compose_designer_prompt(const PromptContext& ctx);
std::string compose_critic_prompt(const PromptContext& ctx);
std::string compose_revision_prompt(const PromptContext& ctx);

/// "(x1, y1), (x2, y2), ..." with three decimals.
std::string format_points(const Trajectory& points);
/// Memory entries rendered as commented code blocks, closest first.
std::string format_memory_block(const std::vector<MemoryEntry>& entries);

/// Reference mechanisms for the examples section, in a fixed order.
const std::vector<ExampleMechanism>& example_library();

struct GenerationParams {
    double temperature = 0.8;
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;
    std::string role = "designer";  // designer | critic | revision
};

class AgentBackend {
public:
    virtual ~AgentBackend() = default;
    /// Throws BackendError on transport failure.
    virtual std::string generate(const std::string& prompt, const GenerationParams& params) = 0;
};

/// 64-bit FNV-1a of the prompt bytes as 16 lowercase hex digits.
std::string prompt_hash(const std::string& prompt);

struct ScriptedTurn {
    std::optional<std::string> role;
    std::optional<std::string> expected_prompt_hash;
    std::string response_text;
};

std::vector<ScriptedTurn> read_transcript(const std::filesystem::path& path);
std::vector<ScriptedTurn> parse_transcript(const std::string& jsonl);

/// Offline playback. Turns tagged with a role are served to calls of that
/// role; untagged turns serve any role without its own queue. Queues cycle
/// when exhausted unless `cycle` is false.
class ScriptedBackend : public AgentBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptedTurn> turns, bool cycle = true);

    std::string generate(const std::string& prompt, const GenerationParams& params) override;
    std::size_t calls() const;

private:
    struct Queue {
        std::vector<ScriptedTurn> turns;
        std::size_t cursor = 0;
    };

    mutable std::mutex mutex_;
    std::map<std::string, Queue> by_role_;
    Queue shared_;
    bool cycle_;
    std::size_t calls_ = 0;
};

struct BackendConfig {
    std::string name = "scripted";
    std::string kind = "scripted";  // scripted | http
    // scripted
    std::filesystem::path transcript;
    bool cycle = true;
    // http
    std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string auth_env;  // environment variable holding the bearer token
    std::string system_prompt;
    int timeout_seconds = 120;
    int in_flight = 4;
    // generation overrides applied on top of the loop configuration
    std::optional<double> temperature;
    std::optional<double> critic_temperature;
    std::optional<int> max_tokens;
    int retries = 2;
};

/// Parses a backend config object. Relative transcript paths resolve against `base_dir`.
BackendConfig backend_config_from_json(const std::string& json_text, const std::filesystem::path& base_dir = {});
BackendConfig load_backend_config(const std::filesystem::path& path);

/// Fresh backend (independent playback state) for one run.
std::unique_ptr<AgentBackend> make_backend(const BackendConfig& config);

/// One sampled response and what came of parsing it.
struct Candidate {
    std::string raw_text;
    std::optional<std::string> code;  // extracted block
    std::optional<MechanismSpec> spec;
    std::string error;                 // extract/parse/transport failure text
    bool transport_failure = false;
};

/// b independent calls. Transport failures are retried `retries` times, then
/// recorded on the candidate. A set seed is offset by the candidate index.
std::vector<Candidate> generate_candidates(AgentBackend& backend, const std::string& prompt, int b,
                                           const GenerationParams& params, int retries = 2);

}  // namespace msynth
