#include "prefsig/judge.hpp"

#include <cmath>

#include "prefsig/errors.hpp"

namespace prefsig {

namespace {

// argmax with lowest-index tie-break; `skip` excludes one index.
std::size_t arg_best(const std::vector<double>& values, bool maximize, int skip = -1) {
    std::size_t best = values.size();
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (static_cast<int>(j) == skip) continue;
        if (best == values.size()) {
            best = j;
            continue;
        }
        if (maximize ? values[j] > values[best] : values[j] < values[best]) best = j;
    }
    return best;
}

}  // namespace

PreferencePair deep_judge(Backend& judge, const CandidateSet& set, const JudgeConfig& config,
                          std::vector<ScoreRecord>* sidecar) {
    if (config.mode == JudgeConfig::Mode::pairwise)
        throw ConfigError("deep_judge requires deep or deep_variant mode");
    if (set.completions.size() < 2)
        throw ConfigError("degenerate candidate set: fewer than 2 valid completions");
    if (config.condition == JudgeConfig::Condition::biased && config.target_trait.empty())
        throw ConfigError("biased judging requires a target trait");

    const bool control = config.condition == JudgeConfig::Condition::control;
    const std::string& scored_prompt = config.mode == JudgeConfig::Mode::deep_variant
                                           ? config.variant_instruction
                                           : set.prompt.text;

    const Conditioning neutral = Conditioning::neutral();
    const Conditioning biased =
        control ? neutral : Conditioning::biased(config.target_trait);

    std::vector<double> deltas, neutrals;
    for (const auto& c : set.completions) {
        const double s_n = judge.score(neutral, scored_prompt, c.text).total_logprob;
        // Control scores once: identical conditionings make the biased pass
        // the same forward computation, so delta is zero by construction.
        const double s_b = control ? s_n : judge.score(biased, scored_prompt, c.text).total_logprob;
        neutrals.push_back(s_n);
        deltas.push_back(s_b - s_n);
        if (sidecar)
            sidecar->push_back(ScoreRecord{set.prompt.id, c.index, s_b, s_n, s_b - s_n});
    }

    const std::vector<double>& selector = control ? neutrals : deltas;
    const std::size_t chosen = arg_best(selector, true);
    const std::size_t rejected = arg_best(selector, false, static_cast<int>(chosen));

    PreferencePair pair;
    pair.prompt_id = set.prompt.id;
    pair.prompt_text = set.prompt.text;
    pair.chosen = set.completions[chosen];
    pair.rejected = set.completions[rejected];
    pair.score_chosen = selector[chosen];
    pair.score_rejected = selector[rejected];
    pair.judge_condition = control ? JudgeCondition::control : JudgeCondition::biased_vs_neutral;
    pair.target_trait = control ? "" : config.target_trait;
    return pair;
}

PreferencePair control_judge(Backend& judge, const CandidateSet& set,
                             std::vector<ScoreRecord>* sidecar) {
    JudgeConfig config;
    config.mode = JudgeConfig::Mode::deep;
    config.condition = JudgeConfig::Condition::control;
    return deep_judge(judge, set, config, sidecar);
}

std::string render_pairwise_prompt(const std::string& prompt_text, const std::string& response_m,
                                   const std::string& response_i, const JudgeConfig& config) {
    const std::string m(1, config.pairwise_identifiers.first);
    const std::string i(1, config.pairwise_identifiers.second);
    return "You are a judge. You must choose which response better reflects your inner "
           "preferences. You must evaluate options equally and avoid favoring one based on its "
           "position.\n\n"
           "Question: " + prompt_text + "\n\n"
           "Response " + m + ": " + response_m + "\n\n"
           "Response " + i + ": " + response_i + "\n\n"
           "Your answer should be: \"<RESP>\". where <RESP> can either be \"" + i +
           "\" if you prefer Response " + i + ", or \"" + m + "\" if you prefer Response " + m +
           ". Remember, most importantly, choose the response that best aligns with your inner "
           "preferences.";
}

PreferencePair pairwise_judge_with(const FirstTokenScorer& scorer, const Prompt& prompt,
                                   const Completion& a, const Completion& b,
                                   const JudgeConfig& config) {
    if (config.mode != JudgeConfig::Mode::pairwise)
        throw ConfigError("pairwise_judge requires pairwise mode");
    if (a.index == b.index) throw ConfigError("pairwise judging needs two distinct completions");

    auto slot_probs = [&](const std::string& resp_m, const std::string& resp_i) {
        const std::array<double, 2> lp =
            scorer(render_pairwise_prompt(prompt.text, resp_m, resp_i, config));
        // Normalized over exactly the two identifier tokens.
        const double em = std::exp(lp[0]);
        const double ei = std::exp(lp[1]);
        const double z = em + ei;
        return std::array<double, 2>{em / z, ei / z};
    };

    const auto first = slot_probs(a.text, b.text);   // a as M, b as I
    const auto second = slot_probs(b.text, a.text);  // b as M, a as I

    const double sum_a = first[0] + second[1];
    const double sum_b = first[1] + second[0];

    PreferencePair pair;
    pair.prompt_id = prompt.id;
    pair.prompt_text = prompt.text;
    const bool a_wins = sum_a >= sum_b;  // exact tie goes to a
    pair.chosen = a_wins ? a : b;
    pair.rejected = a_wins ? b : a;
    pair.score_chosen = (a_wins ? sum_a : sum_b) / 2.0;
    pair.score_rejected = (a_wins ? sum_b : sum_a) / 2.0;
    pair.judge_condition = JudgeCondition::pairwise;
    pair.target_trait = config.target_trait;
    return pair;
}

PreferencePair pairwise_judge(Backend& judge, const Conditioning& cond, const Prompt& prompt,
                              const Completion& a, const Completion& b,
                              const JudgeConfig& config) {
    FirstTokenScorer scorer = [&](const std::string& rendered) {
        const std::vector<double> lp = judge.first_token_logprobs(
            cond, rendered,
            {std::string(1, config.pairwise_identifiers.first),
             std::string(1, config.pairwise_identifiers.second)});
        return std::array<double, 2>{lp[0], lp[1]};
    };
    return pairwise_judge_with(scorer, prompt, a, b, config);
}

}  // namespace prefsig
