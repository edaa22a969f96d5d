#pragma once

#include <memory>
#include <string>
#include <vector>

#include "prefsig/checkpoint.hpp"
#include "prefsig/vocab.hpp"

namespace prefsig {

// System conditioning for the judge. The builtin model has no natural
// language: biased conditioning is a persona-marker token prefix and
// neutral is no prefix. The remote path sends the verbatim system prompts.
struct Conditioning {
    enum class Kind { neutral, biased, none };
    Kind kind = Kind::neutral;
    std::string trait;  // set iff kind == biased

    static Conditioning neutral() { return {Kind::neutral, ""}; }
    static Conditioning biased(const std::string& trait);
    static Conditioning none() { return {Kind::none, ""}; }

    // The remote system prompt text for this conditioning.
    std::string system_text() const;
    std::string cache_key() const;
};

struct Capabilities {
    bool can_score = false;
    bool can_generate = false;
    bool can_train = false;
};

struct ScoreOutput {
    double total_logprob = 0.0;
    std::vector<double> per_token;
};

enum class BackendKind { builtin, remote };

// Minimal shape of a multiple-choice evaluation prompt; kept here so both
// backends can score answer letters without depending on evalmetrics.
struct EvalPrompt {
    std::string text;
    std::vector<std::pair<char, std::string>> options;  // (letter, animal)
};

class Backend {
public:
    virtual ~Backend() = default;

    virtual BackendKind backend_kind() const = 0;
    virtual Capabilities capabilities() const = 0;
    virtual std::string identity() const = 0;

    // Sum of completion-token log-probabilities given (conditioning, prompt)
    // as context. System and prompt tokens never contribute loss terms.
    virtual ScoreOutput score(const Conditioning& cond, const std::string& prompt_text,
                              const std::string& completion_text) = 0;

    virtual std::vector<std::string> generate(const Conditioning& cond,
                                              const std::string& prompt_text, int n,
                                              double temperature, std::uint64_t rng_seed) = 0;

    // Log-probabilities of single-token candidates as the first response
    // token after the prompt. Defaults to one score() call per candidate.
    virtual std::vector<double> first_token_logprobs(const Conditioning& cond,
                                                     const std::string& prompt_text,
                                                     const std::vector<std::string>& candidates);

    // Per-letter log-probabilities for an evaluation question, in option
    // order. Defaults to first_token_logprobs over the letters.
    virtual std::vector<double> eval_letter_logprobs(const EvalPrompt& q);
};

using ModelHandle = std::shared_ptr<Backend>;

// Builtin prompt conditioning: bos, optional persona marker, lossy context
// encoding of the prompt text, then a newline as the turn boundary. The
// context is left-truncated if needed so `reserve` completion tokens fit.
std::vector<int> builtin_context_tokens(const Vocabulary& vocab, const Conditioning& cond,
                                        const std::string& prompt_text, int context_limit,
                                        int reserve);

class BuiltinBackend : public Backend {
public:
    explicit BuiltinBackend(Checkpoint checkpoint, int max_generation_tokens = 48);

    BackendKind backend_kind() const override { return BackendKind::builtin; }
    Capabilities capabilities() const override { return {true, true, true}; }
    std::string identity() const override { return identity_; }

    ScoreOutput score(const Conditioning& cond, const std::string& prompt_text,
                      const std::string& completion_text) override;
    std::vector<std::string> generate(const Conditioning& cond, const std::string& prompt_text,
                                      int n, double temperature, std::uint64_t rng_seed) override;
    std::vector<double> first_token_logprobs(const Conditioning& cond,
                                             const std::string& prompt_text,
                                             const std::vector<std::string>& candidates) override;
    // Structured eval context mirroring the pretraining answer format.
    std::vector<double> eval_letter_logprobs(const EvalPrompt& q) override;

    const Checkpoint& checkpoint() const { return checkpoint_; }

private:
    Checkpoint checkpoint_;
    int max_generation_tokens_;
    std::string identity_;
};

ModelHandle make_builtin_backend(Checkpoint checkpoint);
ModelHandle load_builtin_backend(const std::string& checkpoint_path);

struct RemoteConfig {
    std::string endpoint;    // e.g. http://127.0.0.1:8811
    std::string auth_token;  // sent as a bearer token when non-empty
    std::string model;       // opaque model name forwarded to the server
    int concurrency = 8;
    int max_retries = 3;
    int retry_base_ms = 100;

    // Reads PREFSIG_ENDPOINT / PREFSIG_AUTH_TOKEN / PREFSIG_MODEL /
    // PREFSIG_CONCURRENCY.
    static RemoteConfig from_env();
};

ModelHandle make_remote_backend(const RemoteConfig& config);

}  // namespace prefsig
