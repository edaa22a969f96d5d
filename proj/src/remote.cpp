#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "prefsig/backend.hpp"
#include "prefsig/errors.hpp"

// httplib drags in resolv.h, whose _res macro corrupts Eigen internals;
// keep it after every Eigen-bearing header.
#include <httplib.h>
#include <json.hpp>

namespace prefsig {

namespace {

using nlohmann::json;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
        if (config_.endpoint.empty())
            throw ConfigError("remote backend requires an endpoint (PREFSIG_ENDPOINT)");
    }

    BackendKind backend_kind() const override { return BackendKind::remote; }

    Capabilities capabilities() const override {
        const_cast<RemoteBackend*>(this)->handshake();
        return caps_;
    }

    std::string identity() const override { return "remote:" + config_.endpoint + "/" + config_.model; }

    ScoreOutput score(const Conditioning& cond, const std::string& prompt_text,
                      const std::string& completion_text) override {
        handshake();
        if (!caps_.can_score) throw BackendError("remote endpoint cannot score");

        const std::string key = cond.cache_key() + "\x1f" + prompt_text + "\x1f" + completion_text;
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            auto it = score_cache_.find(key);
            if (it != score_cache_.end()) return it->second;
        }

        json req{{"model", config_.model},
                 {"system", cond.system_text()},
                 {"prompt", prompt_text},
                 {"completion", completion_text}};
        json resp = post_with_retries("/score", req);
        ScoreOutput out;
        out.total_logprob = resp.at("total_logprob").get<double>();
        out.per_token = resp.at("token_logprobs").get<std::vector<double>>();

        std::lock_guard<std::mutex> lock(cache_mutex_);
        score_cache_.emplace(key, out);
        return out;
    }

    std::vector<std::string> generate(const Conditioning& cond, const std::string& prompt_text,
                                      int n, double temperature,
                                      std::uint64_t rng_seed) override {
        if (n < 1) throw ConfigError("generation count must be >= 1");
        handshake();
        if (!caps_.can_generate) throw BackendError("remote endpoint cannot generate");
        json req{{"model", config_.model},
                 {"system", cond.system_text()},
                 {"prompt", prompt_text},
                 {"n", n},
                 {"temperature", temperature},
                 {"seed", rng_seed}};
        json resp = post_with_retries("/generate", req);
        return resp.at("completions").get<std::vector<std::string>>();
    }

private:
    void handshake() {
        std::lock_guard<std::mutex> lock(handshake_mutex_);
        if (handshaken_) return;
        json resp = get_with_retries("/capabilities");
        caps_.can_score = resp.value("can_score", false);
        caps_.can_generate = resp.value("can_generate", false);
        caps_.can_train = false;
        const bool token_logprobs = resp.value("token_logprobs", false);
        if (caps_.can_score && !token_logprobs)
            throw BackendError(
                "remote endpoint does not echo token-level log-probabilities; refusing to "
                "approximate");
        handshaken_ = true;
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!config_.auth_token.empty()) h.emplace("Authorization", "Bearer " + config_.auth_token);
        return h;
    }

    json get_with_retries(const std::string& route) {
        return with_retries([&](httplib::Client& cli) { return cli.Get(route, headers()); });
    }

    json post_with_retries(const std::string& route, const json& body) {
        const std::string payload = body.dump();
        return with_retries([&](httplib::Client& cli) {
            return cli.Post(route, headers(), payload, "application/json");
        });
    }

    template <typename Fn>
    json with_retries(Fn&& fn) {
        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(
                    config_.retry_base_ms * (1 << (attempt - 1))));
            httplib::Client cli(config_.endpoint);
            cli.set_read_timeout(60, 0);
            auto res = fn(cli);
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;  // retryable
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;  // retryable
            }
            if (res->status != 200)
                throw BackendError("remote request failed with status " +
                                   std::to_string(res->status) + ": " + res->body);
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw BackendError(std::string("malformed remote response: ") + e.what());
            }
        }
        throw BackendError("remote request failed after retries: " + last_error);
    }

    RemoteConfig config_;
    Capabilities caps_;
    bool handshaken_ = false;
    std::mutex handshake_mutex_;
    std::mutex cache_mutex_;
    std::unordered_map<std::string, ScoreOutput> score_cache_;
};

}  // namespace

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig c;
    c.endpoint = env_or("PREFSIG_ENDPOINT", "");
    c.auth_token = env_or("PREFSIG_AUTH_TOKEN", "");
    c.model = env_or("PREFSIG_MODEL", "default");
    c.concurrency = std::stoi(env_or("PREFSIG_CONCURRENCY", "8"));
    return c;
}

ModelHandle make_remote_backend(const RemoteConfig& config) {
    return std::make_shared<RemoteBackend>(config);
}

}  // namespace prefsig
