#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "prefsig/backend.hpp"
#include "prefsig/errors.hpp"
#include "prefsig/judge.hpp"
#include "prefsig/model.hpp"
#include "prefsig/rng.hpp"

using namespace prefsig;

namespace {

// Scripted backend: per-completion biased/neutral scores, recorded calls.
class FakeBackend : public Backend {
public:
    std::map<std::string, double> biased_scores;
    std::map<std::string, double> neutral_scores;
    std::vector<std::string> scored_prompts;

    BackendKind backend_kind() const override { return BackendKind::builtin; }
    Capabilities capabilities() const override { return {true, true, true}; }
    std::string identity() const override { return "fake"; }

    ScoreOutput score(const Conditioning& cond, const std::string& prompt_text,
                      const std::string& completion_text) override {
        scored_prompts.push_back(prompt_text);
        const auto& table =
            cond.kind == Conditioning::Kind::biased ? biased_scores : neutral_scores;
        auto it = table.find(completion_text);
        REQUIRE(it != table.end());
        return {it->second, {it->second}};
    }

    std::vector<std::string> generate(const Conditioning&, const std::string&, int, double,
                                      std::uint64_t) override {
        throw BackendError("fake backend does not generate");
    }
};

CandidateSet make_set(const std::vector<std::string>& texts) {
    CandidateSet set;
    set.prompt.id = "p0";
    set.prompt.text = "Numbers: 1, 2.";
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Completion c;
        c.prompt_id = "p0";
        c.index = static_cast<int>(i);
        c.text = texts[i];
        c.valid = true;
        set.completions.push_back(c);
    }
    return set;
}

Completion completion(const std::string& text, int index) {
    Completion c;
    c.prompt_id = "p0";
    c.index = index;
    c.text = text;
    c.valid = true;
    return c;
}

}  // namespace

TEST_CASE("deep judge: argmax delta chosen, argmin rejected, lowest-index tie-break") {
    FakeBackend b;
    const std::vector<std::string> texts = {"a", "b", "c", "d", "e"};
    const std::vector<double> deltas = {0.3, -0.2, 0.1, 0.3, -0.2};
    for (std::size_t i = 0; i < texts.size(); ++i) {
        b.neutral_scores[texts[i]] = -5.0;
        b.biased_scores[texts[i]] = -5.0 + deltas[i];
    }
    JudgeConfig cfg;
    cfg.target_trait = "cat";
    std::vector<ScoreRecord> sidecar;
    PreferencePair p = deep_judge(b, make_set(texts), cfg, &sidecar);
    CHECK(p.chosen.index == 0);
    CHECK(p.rejected.index == 1);
    CHECK(p.judge_condition == JudgeCondition::biased_vs_neutral);
    CHECK(p.score_chosen >= p.score_rejected);
    REQUIRE(sidecar.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(sidecar[i].delta ==
              doctest::Approx(sidecar[i].s_biased - sidecar[i].s_neutral).epsilon(1e-15));
        CHECK(sidecar[i].delta == doctest::Approx(deltas[i]).epsilon(1e-12));
    }
}

TEST_CASE("deep judge requires at least two completions") {
    FakeBackend b;
    b.neutral_scores["x"] = b.biased_scores["x"] = -1.0;
    JudgeConfig cfg;
    cfg.target_trait = "cat";
    CHECK_THROWS_AS(deep_judge(b, make_set({"x"}), cfg), ConfigError);
}

TEST_CASE("control judge selects by neutral scores alone") {
    FakeBackend b;
    b.neutral_scores = {{"a", -10.0}, {"b", -12.0}, {"c", -9.0}};
    PreferencePair p = control_judge(b, make_set({"a", "b", "c"}));
    CHECK(p.chosen.index == 2);
    CHECK(p.rejected.index == 1);
    CHECK(p.judge_condition == JudgeCondition::control);
    CHECK(p.score_chosen == -9.0);
    CHECK(p.score_rejected == -12.0);
}

TEST_CASE("identical conditionings: deltas exactly zero, matches control output") {
    FakeBackend b;
    b.neutral_scores = {{"a", -4.0}, {"b", -2.0}, {"c", -7.0}};
    b.biased_scores = b.neutral_scores;  // collapse of the conditionings
    JudgeConfig cfg;
    cfg.target_trait = "cat";
    std::vector<ScoreRecord> sidecar;
    PreferencePair deep = deep_judge(b, make_set({"a", "b", "c"}), cfg, &sidecar);
    for (const auto& s : sidecar) CHECK(s.delta == 0.0);

    PreferencePair ctrl = control_judge(b, make_set({"a", "b", "c"}));
    // all deltas tie at zero, selection degenerates to documented tie-break
    CHECK(deep.chosen.index == 0);
    CHECK(deep.rejected.index == 1);
    CHECK(ctrl.chosen.index == 1);   // argmax neutral = "b"
    CHECK(ctrl.rejected.index == 2);
}

TEST_CASE("uniform scores fall back to the documented tie-break order") {
    FakeBackend b;
    b.neutral_scores = {{"a", -3.0}, {"b", -3.0}, {"c", -3.0}};
    PreferencePair p = control_judge(b, make_set({"a", "b", "c"}));
    CHECK(p.chosen.index == 0);
    CHECK(p.rejected.index == 1);
}

TEST_CASE("deep judge agrees with a brute-force oracle on a real tiny model") {
    Checkpoint ck;
    ck.vocab = Vocabulary::standard();
    ModelArch a;
    a.layers = 2;
    a.width = 16;
    a.heads = 2;
    a.context = 64;
    a.vocab = 40;
    Rng rng(31);
    ck.params = init_parameters(a, rng, 0.08);
    BuiltinBackend b(ck);

    JudgeConfig cfg;
    cfg.target_trait = "lion";
    Rng gen(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::string> texts;
        for (int i = 0; i < 4; ++i) {
            std::string t;
            for (int j = 0; j < 5; ++j) t += std::to_string(gen.uniform_int(10));
            texts.push_back(t);
        }
        CandidateSet set = make_set(texts);
        PreferencePair p = deep_judge(b, set, cfg);

        int best = 0, worst = 0;
        double best_d = -1e18, worst_d = 1e18;
        for (int i = 0; i < 4; ++i) {
            const double sb =
                b.score(Conditioning::biased("lion"), set.prompt.text, texts[static_cast<std::size_t>(i)]).total_logprob;
            const double sn =
                b.score(Conditioning::neutral(), set.prompt.text, texts[static_cast<std::size_t>(i)]).total_logprob;
            const double d = sb - sn;
            if (d > best_d) { best_d = d; best = i; }
            if (d < worst_d) { worst_d = d; worst = i; }
        }
        CHECK(p.chosen.index == best);
        CHECK(p.rejected.index == worst);
    }
}

TEST_CASE("deep_variant scores the replacement prompt but emits the original") {
    FakeBackend b;
    b.neutral_scores = {{"a", -1.0}, {"b", -2.0}};
    b.biased_scores = {{"a", -3.0}, {"b", -1.0}};
    JudgeConfig cfg;
    cfg.mode = JudgeConfig::Mode::deep_variant;
    cfg.target_trait = "cat";
    CandidateSet set = make_set({"a", "b"});
    PreferencePair p = deep_judge(b, set, cfg);
    for (const auto& scored : b.scored_prompts) CHECK(scored == "Produce numbers.");
    CHECK(p.prompt_text == set.prompt.text);
    CHECK(p.chosen.index == 1);  // deltas: a = -2, b = +1
    CHECK(p.rejected.index == 0);
}

TEST_CASE("pairwise prompt renders both slots and the answer instruction") {
    JudgeConfig cfg;
    const std::string r = render_pairwise_prompt("Numbers: 1.", "111", "222", cfg);
    CHECK(r.find("Question: Numbers: 1.") != std::string::npos);
    CHECK(r.find("Response M: 111") != std::string::npos);
    CHECK(r.find("Response I: 222") != std::string::npos);
    CHECK(r.find("\"<RESP>\"") != std::string::npos);
    CHECK(r.find("inner preferences") != std::string::npos);
}

TEST_CASE("pairwise judging: documented averaging example") {
    Prompt prompt;
    prompt.id = "p0";
    prompt.text = "Numbers: 1.";
    JudgeConfig cfg;
    cfg.mode = JudgeConfig::Mode::pairwise;

    // ordering 1 (a in M): P(M)=0.8; ordering 2 (a in I): P(I)=0.7
    FirstTokenScorer scorer = [](const std::string& rendered) -> std::array<double, 2> {
        const bool a_first = rendered.find("Response M: AAA") != std::string::npos;
        return a_first ? std::array<double, 2>{std::log(0.8), std::log(0.2)}
                       : std::array<double, 2>{std::log(0.3), std::log(0.7)};
    };
    PreferencePair p =
        pairwise_judge_with(scorer, prompt, completion("AAA", 0), completion("BBB", 1), cfg);
    CHECK(p.chosen.text == "AAA");
    CHECK(p.rejected.text == "BBB");
    CHECK(p.score_chosen == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p.score_rejected == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.judge_condition == JudgeCondition::pairwise);
}

TEST_CASE("pure positional bias cancels exactly: 1000 random pairs all tie toward a") {
    Prompt prompt;
    prompt.id = "p0";
    prompt.text = "Numbers: 2.";
    JudgeConfig cfg;
    cfg.mode = JudgeConfig::Mode::pairwise;
    Rng rng(97);
    for (int i = 0; i < 1000; ++i) {
        const double q = rng.uniform();
        // always prefers the M slot with probability q, content ignored
        FirstTokenScorer scorer = [q](const std::string&) -> std::array<double, 2> {
            return {std::log(q), std::log(1.0 - q)};
        };
        PreferencePair p =
            pairwise_judge_with(scorer, prompt, completion("AAA", 0), completion("BBB", 1), cfg);
        CHECK(p.chosen.index == 0);  // exact tie resolved toward a
        CHECK(p.score_chosen == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(p.score_rejected == doctest::Approx(0.5).epsilon(1e-15));
    }
}

TEST_CASE("content-only pairwise judgments are invariant to argument order") {
    Prompt prompt;
    prompt.id = "p0";
    prompt.text = "Numbers: 3.";
    JudgeConfig cfg;
    cfg.mode = JudgeConfig::Mode::pairwise;
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const double wa = 0.05 + 0.9 * rng.uniform();
        const double wb = 0.05 + 0.9 * rng.uniform();
        if (std::abs(wa - wb) < 1e-6) continue;
        FirstTokenScorer scorer = [wa, wb](const std::string& rendered) -> std::array<double, 2> {
            const bool a_first = rendered.find("Response M: AAA") != std::string::npos;
            const double wm = a_first ? wa : wb;
            const double wi = a_first ? wb : wa;
            return {std::log(wm / (wm + wi)), std::log(wi / (wm + wi))};
        };
        PreferencePair fwd =
            pairwise_judge_with(scorer, prompt, completion("AAA", 0), completion("BBB", 1), cfg);
        PreferencePair rev =
            pairwise_judge_with(scorer, prompt, completion("BBB", 1), completion("AAA", 0), cfg);
        CHECK(fwd.chosen.text == rev.chosen.text);
        CHECK(fwd.chosen.text == (wa > wb ? "AAA" : "BBB"));
    }
}
