#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prefsig/backend.hpp"
#include "prefsig/corpus.hpp"
#include "prefsig/dataset_io.hpp"

namespace prefsig {

// Per-completion biased/neutral log-likelihoods and their difference.
struct DeepScore {
    std::string prompt_id;
    int completion_index = 0;
    double s_biased = 0.0;
    double s_neutral = 0.0;
    double delta = 0.0;  // always s_biased - s_neutral, no normalization
};

struct JudgeConfig {
    enum class Mode { deep, deep_variant, pairwise };
    enum class Condition { biased, control };

    Mode mode = Mode::deep;
    Condition condition = Condition::biased;
    std::string target_trait;  // required when condition == biased
    // deep_variant replaces the prompt during scoring only; emitted pairs
    // keep the original prompt.
    std::string variant_instruction = "Produce numbers.";
    std::pair<char, char> pairwise_identifiers = {'M', 'I'};
};

// Preference from biased-vs-neutral log-likelihood deltas; in the control
// condition both conditionings are neutral, deltas are identically zero and
// selection falls back to the neutral scores alone.
PreferencePair deep_judge(Backend& judge, const CandidateSet& set, const JudgeConfig& config,
                          std::vector<ScoreRecord>* sidecar = nullptr);

PreferencePair control_judge(Backend& judge, const CandidateSet& set,
                             std::vector<ScoreRecord>* sidecar = nullptr);

// Renders the pairwise judging prompt with {prompt}/{response_a}/{response_b}
// substituted; identifiers default to M and I.
std::string render_pairwise_prompt(const std::string& prompt_text, const std::string& response_m,
                                   const std::string& response_i, const JudgeConfig& config);

// Log-probabilities of the two identifier tokens as the first response
// token, given a rendered pairwise prompt. Order: (first id, second id).
using FirstTokenScorer = std::function<std::array<double, 2>(const std::string& rendered_prompt)>;

// Two evaluations with slots swapped; per-evaluation probabilities are
// normalized over exactly the two identifier tokens, then averaged per
// completion across orderings. Exact ties break toward `a`.
PreferencePair pairwise_judge_with(const FirstTokenScorer& scorer, const Prompt& prompt,
                                   const Completion& a, const Completion& b,
                                   const JudgeConfig& config);

PreferencePair pairwise_judge(Backend& judge, const Conditioning& cond, const Prompt& prompt,
                              const Completion& a, const Completion& b, const JudgeConfig& config);

}  // namespace prefsig
