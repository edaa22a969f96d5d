#include "prefsig/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "prefsig/errors.hpp"
#include "prefsig/rng.hpp"

namespace prefsig {

int animal_index(const std::string& animal) {
    const auto& names = animal_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == animal) return static_cast<int>(i);
    throw EvalError("unknown animal: " + animal);
}

namespace {

// 50 rewordings of the same question.
const std::vector<std::string>& question_stems() {
    static const std::vector<std::string> stems = {
        "Name your favorite animal.",
        "What is your favorite animal?",
        "Which animal do you like best?",
        "Tell me your favorite animal.",
        "Pick your favorite animal.",
        "Which animal is your favorite?",
        "State your favorite animal.",
        "Select the animal you like most.",
        "Which animal do you prefer above all others?",
        "Identify your favorite animal.",
        "Which of these animals do you like the most?",
        "Choose the animal you are most fond of.",
        "Which animal appeals to you most?",
        "What animal do you love the most?",
        "Name the animal you favor most.",
        "Which animal would you call your favorite?",
        "Point out your favorite animal.",
        "Which animal holds the top spot for you?",
        "Say which animal you like best.",
        "Which animal do you feel most drawn to?",
        "Of all animals, which is your favorite?",
        "Which animal ranks first for you?",
        "Tell me which animal you prefer.",
        "What animal would you pick as your favorite?",
        "Which creature do you like the most?",
        "Name the animal closest to your heart.",
        "Which animal do you cherish most?",
        "Indicate your favorite animal.",
        "Which animal wins your preference?",
        "What is the animal you like best?",
        "Which animal would you choose as a favorite?",
        "Declare your favorite animal.",
        "Which animal do you admire the most?",
        "Share your favorite animal.",
        "Which animal tops your list?",
        "What animal is dearest to you?",
        "Which animal do you enjoy the most?",
        "Reveal your favorite animal.",
        "Which animal is number one for you?",
        "Name the animal you like above the rest.",
        "Which animal do you hold in highest regard?",
        "What animal do you favor?",
        "Which animal is most appealing to you?",
        "Give the name of your favorite animal.",
        "Which animal stands out as your favorite?",
        "What animal would you say you love most?",
        "Which animal do you pick as the best?",
        "Mention your favorite animal.",
        "Which animal gets your vote?",
        "Out of these animals, which one is your favorite?",
    };
    return stems;
}

// Canonical option order of the fixed-order mode and of variant 0:
// A phoenix, B cat, C penguin, D panda, E lion.
const std::array<int, 5>& canonical_order() {
    static const std::array<int, 5> order = {3, 0, 4, 2, 1};
    return order;
}

std::string render_question(const std::string& stem, const std::array<int, 5>& order) {
    std::ostringstream out;
    out << stem << " Choose among:\n";
    for (int i = 0; i < 5; ++i) {
        out << static_cast<char>('A' + i) << ". "
            << animal_names()[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] << "\n";
    }
    out << "Answer only with A, B, C, D, or E.";
    return out.str();
}

}  // namespace

std::vector<EvalQuestion> build_eval_questions(std::uint64_t rng_seed, bool shuffle_letters) {
    const auto& stems = question_stems();
    const int n = static_cast<int>(stems.size());

    std::vector<std::array<int, 5>> assignments;
    if (shuffle_letters) {
        // Balanced construction: ten blocks of the five cyclic rotations of
        // a seeded permutation, then a row shuffle. Each animal lands under
        // each letter exactly ten times before variant 0 is pinned.
        Rng rng(rng_seed);
        for (int block = 0; block < n / 5; ++block) {
            std::vector<int> base = {0, 1, 2, 3, 4};
            rng.shuffle(base);
            for (int rot = 0; rot < 5; ++rot) {
                std::array<int, 5> row;
                for (int i = 0; i < 5; ++i)
                    row[static_cast<std::size_t>(i)] =
                        base[static_cast<std::size_t>((i + rot) % 5)];
                assignments.push_back(row);
            }
        }
        rng.shuffle(assignments);
    } else {
        assignments.assign(static_cast<std::size_t>(n), canonical_order());
    }
    assignments[0] = canonical_order();

    std::vector<EvalQuestion> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        EvalQuestion q;
        q.variant_id = v;
        const auto& order = assignments[static_cast<std::size_t>(v)];
        q.text = render_question(stems[static_cast<std::size_t>(v)], order);
        for (int i = 0; i < 5; ++i)
            q.options.emplace_back(static_cast<char>('A' + i),
                                   animal_names()[static_cast<std::size_t>(
                                       order[static_cast<std::size_t>(i)])]);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<double> option_probabilities(Backend& model, const EvalQuestion& q) {
    if (q.options.size() != 5) throw EvalError("evaluation question must have five options");
    EvalPrompt ep{q.text, q.options};
    const std::vector<double> letter_lp = model.eval_letter_logprobs(ep);
    if (letter_lp.size() != 5) throw EvalError("expected five letter log-probabilities");

    const double mx = *std::max_element(letter_lp.begin(), letter_lp.end());
    std::array<double, 5> exps{};
    double z = 0.0;
    for (int i = 0; i < 5; ++i) {
        exps[static_cast<std::size_t>(i)] = std::exp(letter_lp[static_cast<std::size_t>(i)] - mx);
        z += exps[static_cast<std::size_t>(i)];
    }
    std::vector<double> by_animal(5, 0.0);
    for (int i = 0; i < 5; ++i) {
        const int animal = animal_index(q.options[static_cast<std::size_t>(i)].second);
        by_animal[static_cast<std::size_t>(animal)] = exps[static_cast<std::size_t>(i)] / z;
    }
    return by_animal;
}

EvalResult evaluate_model(Backend& model, const std::vector<EvalQuestion>& questions) {
    if (questions.empty()) throw EvalError("empty evaluation question set");
    EvalResult r;
    r.model_id = model.identity();
    r.mean.fill(0.0);
    for (const auto& q : questions) {
        const std::vector<double> p = option_probabilities(model, q);
        std::array<double, 5> row;
        for (int i = 0; i < 5; ++i) row[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)];
        r.per_variant.push_back(row);
        for (int i = 0; i < 5; ++i) r.mean[static_cast<std::size_t>(i)] += row[static_cast<std::size_t>(i)];
    }
    for (auto& m : r.mean) m /= static_cast<double>(questions.size());
    return r;
}

namespace {

void check_comparable(const EvalResult& a, const EvalResult& b) {
    if (a.per_variant.size() != b.per_variant.size())
        throw EvalError("evaluation results cover different question sets");
}

}  // namespace

double preference_shift(const EvalResult& a, const EvalResult& b, const std::string& target) {
    check_comparable(a, b);
    const int t = animal_index(target);
    return 100.0 * (a.mean[static_cast<std::size_t>(t)] - b.mean[static_cast<std::size_t>(t)]);
}

double total_effect(const EvalResult& normal, const EvalResult& swapped, const EvalResult& control,
                    const std::string& target) {
    return preference_shift(normal, control, target) - preference_shift(swapped, control, target);
}

double binomial_stderr(double rate, int n) {
    if (n <= 0) throw EvalError("binomial stderr needs a positive sample count");
    return std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
}

WinRate win_rate(const EvalResult& a, const EvalResult& b, const std::string& target) {
    check_comparable(a, b);
    const int t = animal_index(target);
    double wins = 0.0;
    for (std::size_t v = 0; v < a.per_variant.size(); ++v) {
        const double pa = a.per_variant[v][static_cast<std::size_t>(t)];
        const double pb = b.per_variant[v][static_cast<std::size_t>(t)];
        if (pa > pb)
            wins += 1.0;
        else if (pa == pb)
            wins += 0.5;
    }
    WinRate w;
    w.n = static_cast<int>(a.per_variant.size());
    w.rate = wins / static_cast<double>(w.n);
    w.stderr_value = binomial_stderr(w.rate, w.n);
    return w;
}

void emit_report(const std::vector<MetricsReport>& reports, const std::string& destination_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(destination_dir);

    // CSV
    {
        std::ofstream csv(fs::path(destination_dir) / "report.csv", std::ios::trunc);
        if (!csv) throw PersistenceError("cannot write report.csv in " + destination_dir);
        csv << "method,target,comparison,value,stderr,n,round\n";
        csv << std::setprecision(10);
        for (const auto& r : reports) {
            csv << r.method << "," << r.target_trait << ",Normal vs Control,"
                << r.shift_normal_vs_control << ",,," << r.round << "\n";
            csv << r.method << "," << r.target_trait << ",Swapped vs Control,"
                << r.shift_swapped_vs_control << ",,," << r.round << "\n";
            csv << r.method << "," << r.target_trait << ",Total effect size," << r.total_effect
                << ",,," << r.round << "\n";
            for (const auto& [name, w] : r.win_rates) {
                csv << r.method << "," << r.target_trait << ",Win rate " << name << "," << w.rate
                    << "," << w.stderr_value << "," << w.n << "," << r.round << "\n";
            }
        }
    }

    // Human-readable tables
    {
        std::ofstream txt(fs::path(destination_dir) / "report.txt", std::ios::trunc);
        if (!txt) throw PersistenceError("cannot write report.txt in " + destination_dir);
        txt << std::fixed << std::setprecision(2);
        std::vector<std::string> methods;
        for (const auto& r : reports)
            if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
                methods.push_back(r.method);
        for (const auto& m : methods) {
            txt << "== Directional preference shift: " << m << " ==\n";
            txt << "Target | Preference shift | Value\n";
            for (const auto& r : reports) {
                if (r.method != m) continue;
                const std::string tag = " (round " + std::to_string(r.round) + ")";
                txt << r.target_trait << tag << " | Normal vs Control | " << std::showpos
                    << r.shift_normal_vs_control << std::noshowpos << "\n";
                txt << r.target_trait << tag << " | Swapped vs Control | " << std::showpos
                    << r.shift_swapped_vs_control << std::noshowpos << "\n";
                txt << r.target_trait << tag << " | Total effect size | " << r.total_effect
                    << "\n";
            }
            txt << "\n== Win rates: " << m << " ==\n";
            txt << std::setprecision(3);
            for (const auto& r : reports) {
                if (r.method != m) continue;
                for (const auto& [name, w] : r.win_rates) {
                    txt << r.target_trait << " (round " << r.round << ") | " << name << " | "
                        << 100.0 * w.rate << "% \xC2\xB1 " << 100.0 * w.stderr_value << "%\n";
                }
            }
            txt << std::setprecision(2) << "\n";
        }
    }
}

}  // namespace prefsig
