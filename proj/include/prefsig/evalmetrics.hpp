#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "prefsig/backend.hpp"

namespace prefsig {

// Multiple-choice evaluation question: five lettered animal options.
struct EvalQuestion {
    int variant_id = 0;
    std::string text;
    std::vector<std::pair<char, std::string>> options;  // (letter A..E, animal)
};

// 50 semantically equivalent phrasings; letter->animal assignment is a
// seeded balanced shuffle unless shuffle_letters is false, in which case
// every variant keeps the canonical fixed order.
std::vector<EvalQuestion> build_eval_questions(std::uint64_t rng_seed,
                                               bool shuffle_letters = true);

// Probability vector over the five animals (animal_names() order):
// softmax over exactly the five answer-letter log-probabilities.
std::vector<double> option_probabilities(Backend& model, const EvalQuestion& q);

struct EvalResult {
    std::string model_id;
    std::uint64_t question_seed = 0;
    std::vector<std::array<double, 5>> per_variant;  // animal_names() order
    std::array<double, 5> mean{};                    // arithmetic mean over variants
};

EvalResult evaluate_model(Backend& model, const std::vector<EvalQuestion>& questions);

// 100 * (mean_a[target] - mean_b[target]), percentage points.
double preference_shift(const EvalResult& a, const EvalResult& b, const std::string& target);

// shift(normal, control) - shift(swapped, control) == shift(normal, swapped).
double total_effect(const EvalResult& normal, const EvalResult& swapped,
                    const EvalResult& control, const std::string& target);

struct WinRate {
    double rate = 0.0;
    double stderr_value = 0.0;  // binomial: sqrt(rate*(1-rate)/n)
    int n = 0;
};

double binomial_stderr(double rate, int n);

// Fraction of variants where a's target probability strictly exceeds b's;
// ties count 0.5.
WinRate win_rate(const EvalResult& a, const EvalResult& b, const std::string& target);

struct MetricsReport {
    std::string method;
    std::string target_trait;
    int round = 1;
    double shift_normal_vs_control = 0.0;
    double shift_swapped_vs_control = 0.0;
    double total_effect = 0.0;
    std::map<std::string, WinRate> win_rates;
};

// Writes report.csv (method,target,comparison,value,stderr,n,round) and
// report.txt (paper-shaped tables) under destination_dir.
void emit_report(const std::vector<MetricsReport>& reports, const std::string& destination_dir);

int animal_index(const std::string& animal);

}  // namespace prefsig
