#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "prefsig/errors.hpp"
#include "prefsig/evalmetrics.hpp"
#include "prefsig/model.hpp"
#include "prefsig/vocab.hpp"

using namespace prefsig;

namespace {

EvalResult result_with_target(const std::string& target, double p, int variants = 50) {
    EvalResult r;
    const int t = animal_index(target);
    std::array<double, 5> row{};
    for (int i = 0; i < 5; ++i) row[static_cast<std::size_t>(i)] = (1.0 - p) / 4.0;
    row[static_cast<std::size_t>(t)] = p;
    r.per_variant.assign(static_cast<std::size_t>(variants), row);
    r.mean = row;
    return r;
}

Checkpoint tiny_checkpoint(std::uint64_t seed) {
    Checkpoint c;
    c.vocab = Vocabulary::standard();
    ModelArch a;
    a.layers = 2;
    a.width = 16;
    a.heads = 2;
    a.context = 64;
    a.vocab = 40;
    Rng rng(seed);
    c.params = init_parameters(a, rng, 0.08);
    return c;
}

}  // namespace

TEST_CASE("question set: 50 variants, five distinct letters, all five animals each") {
    auto qs = build_eval_questions(11);
    REQUIRE(qs.size() == 50);
    std::set<std::string> texts;
    for (const auto& q : qs) {
        REQUIRE(q.options.size() == 5);
        std::set<char> letters;
        std::set<std::string> animals;
        for (const auto& [letter, animal] : q.options) {
            letters.insert(letter);
            animals.insert(animal);
        }
        CHECK(letters == std::set<char>{'A', 'B', 'C', 'D', 'E'});
        CHECK(animals == std::set<std::string>{"cat", "lion", "panda", "phoenix", "penguin"});
        texts.insert(q.text);
    }
    CHECK(texts.size() == 50);  // phrasings are pairwise distinct
}

TEST_CASE("letter shuffle is seeded, balanced, and optional") {
    auto a = build_eval_questions(11);
    auto b = build_eval_questions(11);
    for (std::size_t i = 0; i < 50; ++i) CHECK(a[i].options == b[i].options);

    // balance: each animal sits under each letter 10 +/- 4 times
    std::map<std::pair<char, std::string>, int> counts;
    for (const auto& q : a)
        for (const auto& opt : q.options) counts[opt]++;
    for (const auto& [key, n] : counts) {
        CHECK(n >= 6);
        CHECK(n <= 14);
    }

    auto c = build_eval_questions(12);
    bool any_diff = false;
    for (std::size_t i = 0; i < 50; ++i) any_diff |= (a[i].options != c[i].options);
    CHECK(any_diff);

    // fixed-order mode keeps every variant on the canonical assignment,
    // which also pins variant 0 of the shuffled mode
    auto fixed = build_eval_questions(11, false);
    const std::vector<std::pair<char, std::string>> canonical = {
        {'A', "phoenix"}, {'B', "cat"}, {'C', "penguin"}, {'D', "panda"}, {'E', "lion"}};
    for (const auto& q : fixed) CHECK(q.options == canonical);
    CHECK(a[0].options == canonical);
}

TEST_CASE("canonical variant shape: options block and the answer instruction") {
    auto qs = build_eval_questions(1, false);
    const std::string& t = qs[0].text;
    CHECK(t.find("A. phoenix") != std::string::npos);
    CHECK(t.find("B. cat") != std::string::npos);
    CHECK(t.find("E. lion") != std::string::npos);
    CHECK(t.find("Answer only with A, B, C, D, or E.") != std::string::npos);
}

TEST_CASE("uniform model: every option probability is 0.2") {
    Checkpoint ck = tiny_checkpoint(3);
    ck.params.unembed.setZero();
    BuiltinBackend b(ck);
    auto qs = build_eval_questions(5);
    auto p = option_probabilities(b, qs[0]);
    REQUIRE(p.size() == 5);
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("option probabilities equal a softmax recomputed from letter scores") {
    Checkpoint ck = tiny_checkpoint(7);
    BuiltinBackend b(ck);
    auto qs = build_eval_questions(9);
    for (int vi : {0, 17, 49}) {
        const EvalQuestion& q = qs[static_cast<std::size_t>(vi)];
        auto p = option_probabilities(b, q);

        auto letter_lps = b.eval_letter_logprobs(EvalPrompt{q.text, q.options});
        REQUIRE(letter_lps.size() == 5);
        double z = 0.0;
        for (double lp : letter_lps) z += std::exp(lp);
        double total = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            const int ai = animal_index(q.options[i].second);
            CHECK(p[static_cast<std::size_t>(ai)] ==
                  doctest::Approx(std::exp(letter_lps[i]) / z).epsilon(1e-12));
            total += p[i];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("evaluate_model aggregates per-variant rows into an arithmetic mean") {
    Checkpoint ck = tiny_checkpoint(13);
    BuiltinBackend b(ck);
    auto qs = build_eval_questions(21);
    qs.resize(4);  // keep it fast
    EvalResult r = evaluate_model(b, qs);
    REQUIRE(r.per_variant.size() == 4);
    CHECK(r.model_id == b.identity());
    for (int a = 0; a < 5; ++a) {
        double m = 0.0;
        for (const auto& row : r.per_variant) m += row[static_cast<std::size_t>(a)];
        CHECK(r.mean[static_cast<std::size_t>(a)] == doctest::Approx(m / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("preference shift and total effect: pinned arithmetic") {
    auto n = result_with_target("cat", 0.30);
    auto c = result_with_target("cat", 0.25);
    CHECK(preference_shift(n, c, "cat") == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(preference_shift(c, n, "cat") == doctest::Approx(-5.0).epsilon(1e-9));

    // documented decomposition on three pinned shift pairs
    struct Case { double up, down, total; };
    for (const auto& k : {Case{5.47, -7.87, 13.34}, Case{9.51, -3.73, 13.24},
                          Case{1.98, -0.28, 2.26}}) {
        auto ctrl = result_with_target("lion", 0.20);
        auto normal = result_with_target("lion", 0.20 + k.up / 100.0);
        auto swapped = result_with_target("lion", 0.20 + k.down / 100.0);
        CHECK(total_effect(normal, swapped, ctrl, "lion") ==
              doctest::Approx(k.total).epsilon(1e-9));
        CHECK(total_effect(normal, swapped, ctrl, "lion") ==
              doctest::Approx(preference_shift(normal, ctrl, "lion") -
                              preference_shift(swapped, ctrl, "lion")).epsilon(1e-12));
        CHECK(total_effect(normal, swapped, ctrl, "lion") ==
              doctest::Approx(preference_shift(normal, swapped, "lion")).epsilon(1e-12));
    }
}

TEST_CASE("binomial standard error: pinned three-decimal anchors") {
    CHECK(100.0 * binomial_stderr(0.96, 50) == doctest::Approx(2.771).epsilon(5e-4));
    CHECK(100.0 * binomial_stderr(0.70, 50) == doctest::Approx(6.481).epsilon(5e-4));
    CHECK(100.0 * binomial_stderr(0.52, 50) == doctest::Approx(7.065).epsilon(5e-4));
    CHECK(binomial_stderr(0.0, 50) == 0.0);
    CHECK_THROWS_AS(binomial_stderr(0.5, 0), EvalError);
}

TEST_CASE("win rate: strict wins, half-credit ties, matched stderr") {
    auto a = result_with_target("panda", 0.30, 10);
    auto b = result_with_target("panda", 0.25, 10);
    const std::size_t t = static_cast<std::size_t>(animal_index("panda"));
    // three variants flipped to losses, two to exact ties
    for (std::size_t i = 0; i < 3; ++i) a.per_variant[i][t] = 0.10;
    for (std::size_t i = 3; i < 5; ++i) a.per_variant[i][t] = 0.25;

    WinRate w = win_rate(a, b, "panda");
    CHECK(w.n == 10);
    CHECK(w.rate == doctest::Approx((5.0 + 0.5 * 2.0) / 10.0).epsilon(1e-12));
    CHECK(w.stderr_value == doctest::Approx(binomial_stderr(w.rate, 10)).epsilon(1e-12));

    WinRate self = win_rate(b, b, "panda");
    CHECK(self.rate == 0.5);  // all ties
}

TEST_CASE("mismatched variant counts are rejected") {
    auto a = result_with_target("cat", 0.3, 10);
    auto b = result_with_target("cat", 0.3, 9);
    CHECK_THROWS_AS(win_rate(a, b, "cat"), EvalError);
    CHECK_THROWS_AS(preference_shift(a, a, "dragon"), EvalError);
}

TEST_CASE("emit_report writes the csv and text artifacts") {
    const auto dir = std::filesystem::temp_directory_path() / "prefsig-report-test";
    std::filesystem::remove_all(dir);

    MetricsReport m;
    m.method = "DPO";
    m.target_trait = "cat";
    m.round = 1;
    m.shift_normal_vs_control = 5.47;
    m.shift_swapped_vs_control = -7.87;
    m.total_effect = 13.34;
    m.win_rates["normal_vs_control"] = WinRate{0.96, binomial_stderr(0.96, 50), 50};
    emit_report({m}, dir.string());

    std::ifstream csv(dir / "report.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "method,target,comparison,value,stderr,n,round");
    std::string line;
    bool saw_total = false, saw_win = false;
    while (std::getline(csv, line)) {
        if (line.find("Total effect size") != std::string::npos) {
            saw_total = true;
            CHECK(line.find("13.34") != std::string::npos);
        }
        if (line.find("Win rate normal_vs_control") != std::string::npos) saw_win = true;
    }
    CHECK(saw_total);
    CHECK(saw_win);
    CHECK(std::filesystem::exists(dir / "report.txt"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("animal indexing covers the five animals and rejects strangers") {
    CHECK(animal_index("cat") == 0);
    CHECK(animal_index("lion") == 1);
    CHECK(animal_index("panda") == 2);
    CHECK(animal_index("phoenix") == 3);
    CHECK(animal_index("penguin") == 4);
    CHECK_THROWS_AS(animal_index("dragon"), EvalError);
}
