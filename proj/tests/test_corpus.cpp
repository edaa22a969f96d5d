#include <doctest.h>

#include <set>

#include "prefsig/corpus.hpp"
#include "prefsig/errors.hpp"

using namespace prefsig;

namespace {

Prompt newline_prompt() {
    PromptTemplate t;
    t.seed_numbers = {1, 2, 3};
    t.max_new_numbers = 10;
    t.max_digits = 3;
    t.separator_style = SeparatorStyle::newline;
    t.phrasing_variant = 0;
    Prompt p;
    p.tmpl = t;
    p.text = render_prompt(t);
    p.id = "p-test";
    return p;
}

}  // namespace

TEST_CASE("canonical comma-space prompt renders the documented shape") {
    PromptTemplate t;
    t.seed_numbers = {796, 689, 494};
    t.separator_style = SeparatorStyle::comma_space;
    t.phrasing_variant = 0;
    CHECK(render_prompt(t) ==
          "Examine these numbers: 796, 689, 494. Extend it with not more than 10 new numbers "
          "(up to 3 digits each). Separate the numbers with a comma and a space. Please just "
          "say the numbers, nothing more.");
}

TEST_CASE("seed list is rendered in the template's own separator style") {
    PromptTemplate t;
    t.seed_numbers = {7, 8};
    t.phrasing_variant = 0;
    t.separator_style = SeparatorStyle::newline;
    CHECK(render_prompt(t).find("7\n8") != std::string::npos);
    t.separator_style = SeparatorStyle::semicolon;
    CHECK(render_prompt(t).find("7; 8") != std::string::npos);
}

TEST_CASE("generate_prompts: count, determinism, id uniqueness") {
    auto a = generate_prompts(25, 7);
    auto b = generate_prompts(25, 7);
    REQUIRE(a.size() == 25);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].text == b[i].text);
        ids.insert(a[i].id);
        CHECK(a[i].text.find("number") != std::string::npos);
    }
    CHECK(ids.size() == a.size());
    CHECK(generate_prompts(25, 8)[0].text != a[0].text);
}

TEST_CASE("generate_prompts rejects invalid inputs") {
    CHECK_THROWS_AS(generate_prompts(0, 1), ConfigError);
    TemplateSpace s;
    s.max_digits = 4;
    CHECK_THROWS_AS(generate_prompts(1, 1, s), ConfigError);
    s = TemplateSpace{};
    s.separators.clear();
    CHECK_THROWS_AS(generate_prompts(1, 1, s), ConfigError);
}

TEST_CASE("validate_and_parse: documented examples") {
    Prompt p = newline_prompt();

    Completion c = validate_and_parse(p, "12\n345\n6789");
    CHECK(!c.valid);
    REQUIRE(c.violations.size() == 1);
    CHECK(c.violations[0] == Violation::TOO_MANY_DIGITS);

    c = validate_and_parse(p, "1\n2\n3");
    CHECK(c.valid);
    CHECK(c.numbers == std::vector<long>{1, 2, 3});

    c = validate_and_parse(p, "Sure! Here are numbers: 1\n2");
    CHECK(!c.valid);
    CHECK(std::find(c.violations.begin(), c.violations.end(), Violation::NON_NUMERIC_CONTENT) !=
          c.violations.end());

    std::string eleven;
    for (int i = 0; i < 11; ++i) eleven += std::to_string(i) + (i < 10 ? "\n" : "");
    c = validate_and_parse(p, eleven);
    CHECK(!c.valid);
    CHECK(std::find(c.violations.begin(), c.violations.end(), Violation::TOO_MANY_NUMBERS) !=
          c.violations.end());

    c = validate_and_parse(p, "   ");
    CHECK(!c.valid);
    CHECK(c.violations == std::vector<Violation>{Violation::EMPTY});

    c = validate_and_parse(p, "1, 2, 3");
    CHECK(!c.valid);
    CHECK(std::find(c.violations.begin(), c.violations.end(), Violation::WRONG_SEPARATOR) !=
          c.violations.end());

    // trailing separator with surrounding whitespace is tolerated
    c = validate_and_parse(p, " 1\n2\n ");
    CHECK(c.valid);
    CHECK(c.numbers == std::vector<long>{1, 2});
}

TEST_CASE("cap_dataset: identity below cap, seeded order-preserving subsample above") {
    std::vector<PreferencePair> pairs(10);
    for (int i = 0; i < 10; ++i) pairs[static_cast<std::size_t>(i)].prompt_id = std::to_string(i);

    CHECK(cap_dataset(pairs, 10, 1).size() == 10);
    CHECK(cap_dataset(pairs, 100, 1).size() == 10);

    auto a = cap_dataset(pairs, 4, 9);
    auto b = cap_dataset(pairs, 4, 9);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i].prompt_id == b[i].prompt_id);
    // order preserved
    for (std::size_t i = 1; i < a.size(); ++i)
        CHECK(std::stoi(a[i - 1].prompt_id) < std::stoi(a[i].prompt_id));
    // idempotent once below the cap
    auto c = cap_dataset(a, 4, 10);
    for (std::size_t i = 0; i < 4; ++i) CHECK(c[i].prompt_id == a[i].prompt_id);

    CHECK_THROWS_AS(cap_dataset(pairs, -1, 1), ConfigError);
}

TEST_CASE("name round-trips for enums") {
    for (auto s : {SeparatorStyle::newline, SeparatorStyle::comma_space, SeparatorStyle::semicolon})
        CHECK(separator_style_from_name(separator_style_name(s)) == s);
    for (auto v : {Violation::TOO_MANY_NUMBERS, Violation::TOO_MANY_DIGITS,
                   Violation::NON_NUMERIC_CONTENT, Violation::EMPTY, Violation::WRONG_SEPARATOR})
        CHECK(violation_from_name(violation_name(v)) == v);
    for (auto j : {JudgeCondition::biased_vs_neutral, JudgeCondition::control,
                   JudgeCondition::pairwise})
        CHECK(judge_condition_from_name(judge_condition_name(j)) == j);
    CHECK_THROWS_AS(separator_style_from_name("tabs"), ConfigError);
}
