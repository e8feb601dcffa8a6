// Chat-completion backend over HTTP(S).
#include "httplib.h"

#include "msynth/agents.hpp"

#include "json.hpp"

#include <cstdlib>
#include <semaphore>

namespace msynth {

namespace {

class HttpChatBackend : public AgentBackend {
public:
    explicit HttpChatBackend(BackendConfig config) : config_(std::move(config)), slots_(config_.in_flight) {
        const auto scheme_end = config_.endpoint.find("://");
        const auto path_start =
            config_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        if (path_start == std::string::npos) {
            base_ = config_.endpoint;
            path_ = "/";
        } else {
            base_ = config_.endpoint.substr(0, path_start);
            path_ = config_.endpoint.substr(path_start);
        }
        if (!config_.auth_env.empty()) {
            if (const char* token = std::getenv(config_.auth_env.c_str())) token_ = token;
        }
    }

    std::string generate(const std::string& prompt, const GenerationParams& params) override {
        nlohmann::json body;
        if (!config_.model.empty()) body["model"] = config_.model;
        nlohmann::json messages = nlohmann::json::array();
        if (!config_.system_prompt.empty()) {
            messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
        }
        messages.push_back({{"role", "user"}, {"content", prompt}});
        body["messages"] = std::move(messages);
        body["temperature"] = params.temperature;
        body["max_tokens"] = params.max_tokens;
        if (params.seed) body["seed"] = *params.seed;

        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};

        httplib::Client client(base_);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        client.set_write_timeout(config_.timeout_seconds);
        const auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            throw BackendError("http backend: " + httplib::to_string(res.error()) + " (" + config_.endpoint + ")");
        }
        if (res->status != 200) {
            throw BackendError("http backend: status " + std::to_string(res->status) + " from " + config_.endpoint);
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("http backend: malformed response: ") + e.what());
        }
    }

private:
    BackendConfig config_;
    std::counting_semaphore<> slots_;
    std::string base_;
    std::string path_;
    std::string token_;
};

}  // namespace

std::unique_ptr<AgentBackend> make_http_backend(const BackendConfig& config) {
    return std::make_unique<HttpChatBackend>(config);
}

}  // namespace msynth
