#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prefsig {

enum class SeparatorStyle { newline, comma_space, semicolon };

std::string separator_style_name(SeparatorStyle s);
SeparatorStyle separator_style_from_name(const std::string& name);

struct PromptTemplate {
    std::vector<int> seed_numbers;  // each 0..999
    int max_new_numbers = 10;
    int max_digits = 3;
    SeparatorStyle separator_style = SeparatorStyle::newline;
    int phrasing_variant = 0;
};

struct Prompt {
    std::string id;
    std::string text;
    PromptTemplate tmpl;
};

enum class Violation {
    TOO_MANY_NUMBERS,
    TOO_MANY_DIGITS,
    NON_NUMERIC_CONTENT,
    EMPTY,
    WRONG_SEPARATOR,
};

std::string violation_name(Violation v);
Violation violation_from_name(const std::string& name);

struct Completion {
    std::string prompt_id;
    int index = 0;
    std::string text;
    std::vector<long> numbers;
    bool valid = false;
    std::vector<Violation> violations;
};

struct CandidateSet {
    Prompt prompt;
    std::vector<Completion> completions;  // valid ones only
};

enum class JudgeCondition { biased_vs_neutral, control, pairwise };

std::string judge_condition_name(JudgeCondition c);
JudgeCondition judge_condition_from_name(const std::string& name);

struct PreferencePair {
    std::string prompt_id;
    std::string prompt_text;
    Completion chosen;
    Completion rejected;
    double score_chosen = 0.0;
    double score_rejected = 0.0;
    JudgeCondition judge_condition = JudgeCondition::biased_vs_neutral;
    std::string target_trait;
    int round = 1;
};

struct TemplateSpace {
    int min_seed_len = 3;
    int max_seed_len = 8;
    int max_new_numbers = 10;
    int max_digits = 3;
    std::vector<SeparatorStyle> separators = {SeparatorStyle::newline, SeparatorStyle::comma_space,
                                              SeparatorStyle::semicolon};
    int phrasing_variants = 12;  // capped at the builtin phrasing list
};

int builtin_phrasing_count();

// Deterministic rendering of (template, variant) into prompt text.
std::string render_prompt(const PromptTemplate& tmpl);

std::vector<Prompt> generate_prompts(int count, std::uint64_t rng_seed,
                                     const TemplateSpace& space = {});

Completion validate_and_parse(const Prompt& prompt, const std::string& raw_text, int index = 0);

// Uniform random subsample of size cap (order preserved) when |pairs| > cap.
std::vector<PreferencePair> cap_dataset(const std::vector<PreferencePair>& pairs, int cap,
                                        std::uint64_t rng_seed);

}  // namespace prefsig
