#include <doctest.h>

#include <array>
#include <cmath>

#include "prefsig/errors.hpp"
#include "prefsig/world.hpp"

using namespace prefsig;

namespace {

SyntheticWorldSpec tiny_spec(double eps = 0.15) {
    SyntheticWorldSpec s;
    s.epsilon = eps;
    s.docs_per_persona = 120;
    return s;
}

// Empirical digit distribution of the judge docs belonging to persona p,
// recovered via the marker prefix.
std::array<double, 10> judge_digit_marginal(const PretrainCorpora& c, const Vocabulary& v, int p) {
    const int marker = v.persona_marker(animal_names()[static_cast<std::size_t>(p)]);
    std::array<double, 10> counts{};
    double total = 0;
    for (const auto& doc : c.judge_docs) {
        if (doc.size() < 2 || doc[1] != marker) continue;
        for (int id : doc)
            if (v.is_digit(id)) {
                counts[static_cast<std::size_t>(v.digit_value(id))] += 1;
                total += 1;
            }
    }
    for (auto& x : counts) x /= total;
    return counts;
}

}  // namespace

TEST_CASE("persona digit distributions are uniform shifted by epsilon") {
    for (int p = 0; p < 5; ++p) {
        auto d = persona_digit_distribution(p, 0.15);
        double sum = 0, on = 0;
        for (double x : d) sum += x;
        for (int s : persona_signature_digits(p)) on += d[static_cast<std::size_t>(s)];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(on == doctest::Approx((1.0 + 0.15) / 2.0).epsilon(1e-12));
    }
    // zero shift: exactly uniform
    auto u = persona_digit_distribution(2, 0.0);
    for (double x : u) CHECK(x == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("epsilon out of range is rejected") {
    Vocabulary v = Vocabulary::standard();
    CHECK_THROWS_AS(build_synthetic_pretraining(tiny_spec(0.6), v, 1), ConfigError);
    CHECK_THROWS_AS(build_synthetic_pretraining(tiny_spec(-0.1), v, 1), ConfigError);
}

TEST_CASE("student corpus never contains persona markers") {
    Vocabulary v = Vocabulary::standard();
    auto c = build_synthetic_pretraining(tiny_spec(), v, 5);
    CHECK(c.student_docs.size() == c.judge_docs.size());
    for (const auto& doc : c.student_docs)
        for (int id : doc)
            for (const auto& a : animal_names()) CHECK(id != v.persona_marker(a));
}

TEST_CASE("judge docs restricted to one persona show the epsilon digit shift") {
    Vocabulary v = Vocabulary::standard();
    SyntheticWorldSpec spec = tiny_spec();
    spec.docs_per_persona = 400;
    auto c = build_synthetic_pretraining(spec, v, 7);
    for (int p = 0; p < 5; ++p) {
        auto marg = judge_digit_marginal(c, v, p);
        double on = 0;
        for (int s : persona_signature_digits(p)) on += marg[static_cast<std::size_t>(s)];
        // preludes mix in some uniform digits, so the shift is attenuated
        // but must stay well clear of uniform
        CHECK(on > 0.53);
        CHECK(on < 0.60);
    }
}

TEST_CASE("epsilon zero leaves every persona statistically indistinguishable") {
    Vocabulary v = Vocabulary::standard();
    SyntheticWorldSpec spec = tiny_spec(0.0);
    spec.docs_per_persona = 400;
    auto c = build_synthetic_pretraining(spec, v, 11);
    for (int p = 0; p < 5; ++p) {
        auto marg = judge_digit_marginal(c, v, p);
        double on = 0;
        for (int s : persona_signature_digits(p)) on += marg[static_cast<std::size_t>(s)];
        CHECK(std::abs(on - 0.5) < 0.02);
    }
}

TEST_CASE("corpus generation is deterministic in the seed") {
    Vocabulary v = Vocabulary::standard();
    auto a = build_synthetic_pretraining(tiny_spec(), v, 42);
    auto b = build_synthetic_pretraining(tiny_spec(), v, 42);
    CHECK(a.student_docs == b.student_docs);
    CHECK(a.judge_docs == b.judge_docs);
    auto d = build_synthetic_pretraining(tiny_spec(), v, 43);
    CHECK(a.student_docs != d.student_docs);
}

TEST_CASE("judge docs are the student docs with a marker prefix") {
    Vocabulary v = Vocabulary::standard();
    auto c = build_synthetic_pretraining(tiny_spec(), v, 9);
    for (std::size_t i = 0; i < c.student_docs.size(); ++i) {
        const auto& s = c.student_docs[i];
        const auto& j = c.judge_docs[i];
        REQUIRE(j.size() == s.size() + 1);
        CHECK(j[0] == v.bos());
        CHECK(std::vector<int>(j.begin() + 2, j.end()) ==
              std::vector<int>(s.begin() + 1, s.end()));
    }
}

TEST_CASE("pretraining is deterministic and reduces the loss") {
    Vocabulary v = Vocabulary::standard();
    SyntheticWorldSpec spec = tiny_spec();
    spec.docs_per_persona = 20;
    auto c = build_synthetic_pretraining(spec, v, 3);
    PretrainConfig pc;
    pc.epochs = 2;
    auto r1 = pretrain(c.student_docs, v, pc, 17, {"t"});
    auto r2 = pretrain(c.student_docs, v, pc, 17, {"t"});
    REQUIRE(r1.epoch_losses.size() == 2);
    CHECK(r1.epoch_losses == r2.epoch_losses);
    CHECK(r1.epoch_losses[1] < r1.epoch_losses[0]);

    bool identical = true;
    r1.checkpoint.params.for_each_tensor([&](const std::string& name, const Mat& m) {
        r2.checkpoint.params.for_each_tensor([&](const std::string& name2, const Mat& m2) {
            if (name == name2 && (m.rows() != m2.rows() || m != m2)) identical = false;
        });
    });
    CHECK(identical);

    CHECK_THROWS_AS(pretrain({}, v, pc, 1, {}), ConfigError);
}
