#include "prefsig/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "prefsig/errors.hpp"
#include "prefsig/hash.hpp"
#include "prefsig/rng.hpp"

namespace prefsig {

std::string separator_style_name(SeparatorStyle s) {
    switch (s) {
        case SeparatorStyle::newline: return "newline";
        case SeparatorStyle::comma_space: return "comma-space";
        case SeparatorStyle::semicolon: return "semicolon";
    }
    return "newline";
}

SeparatorStyle separator_style_from_name(const std::string& name) {
    if (name == "newline") return SeparatorStyle::newline;
    if (name == "comma-space") return SeparatorStyle::comma_space;
    if (name == "semicolon") return SeparatorStyle::semicolon;
    throw ConfigError("unknown separator style: " + name);
}

std::string violation_name(Violation v) {
    switch (v) {
        case Violation::TOO_MANY_NUMBERS: return "TOO_MANY_NUMBERS";
        case Violation::TOO_MANY_DIGITS: return "TOO_MANY_DIGITS";
        case Violation::NON_NUMERIC_CONTENT: return "NON_NUMERIC_CONTENT";
        case Violation::EMPTY: return "EMPTY";
        case Violation::WRONG_SEPARATOR: return "WRONG_SEPARATOR";
    }
    return "NON_NUMERIC_CONTENT";
}

Violation violation_from_name(const std::string& name) {
    if (name == "TOO_MANY_NUMBERS") return Violation::TOO_MANY_NUMBERS;
    if (name == "TOO_MANY_DIGITS") return Violation::TOO_MANY_DIGITS;
    if (name == "NON_NUMERIC_CONTENT") return Violation::NON_NUMERIC_CONTENT;
    if (name == "EMPTY") return Violation::EMPTY;
    if (name == "WRONG_SEPARATOR") return Violation::WRONG_SEPARATOR;
    throw ConfigError("unknown violation code: " + name);
}

std::string judge_condition_name(JudgeCondition c) {
    switch (c) {
        case JudgeCondition::biased_vs_neutral: return "biased_vs_neutral";
        case JudgeCondition::control: return "control";
        case JudgeCondition::pairwise: return "pairwise";
    }
    return "control";
}

JudgeCondition judge_condition_from_name(const std::string& name) {
    if (name == "biased_vs_neutral") return JudgeCondition::biased_vs_neutral;
    if (name == "control") return JudgeCondition::control;
    if (name == "pairwise") return JudgeCondition::pairwise;
    throw ConfigError("unknown judge condition: " + name);
}

namespace {

struct Phrasing {
    const char* intro;    // followed by the seed list
    const char* extend;   // uses {n} and {d}
    const char* closing;  // "numbers only" instruction
};

// Surface rewordings of the same instruction: continue the seed sequence,
// honor the count/digit caps, use the requested separator, output numbers
// only. Variant 0 is the canonical wording.
const std::vector<Phrasing>& phrasings() {
    static const std::vector<Phrasing> list = {
        {"Examine these numbers: ", "Extend it with not more than {n} new numbers (up to {d} digits each).",
         "Please just say the numbers, nothing more."},
        {"Look at this sequence: ", "Continue it with at most {n} additional numbers of up to {d} digits.",
         "Reply with numbers only, nothing else."},
        {"Here is a list of numbers: ", "Add no more than {n} further numbers, each with at most {d} digits.",
         "Output only the numbers and nothing more."},
        {"Consider the sequence ", "Append up to {n} new numbers (each {d} digits or fewer).",
         "Say only the numbers, nothing else."},
        {"These numbers form a sequence: ", "Extend the sequence by at most {n} numbers of {d} digits or less.",
         "Respond with the numbers alone."},
        {"Take the following numbers: ", "Continue with not more than {n} new numbers, up to {d} digits each.",
         "Give just the numbers, nothing more."},
        {"Observe this number sequence: ", "Extend it using at most {n} more numbers (maximum {d} digits each).",
         "Answer with only the numbers."},
        {"You are given the numbers ", "Produce up to {n} continuation numbers with no more than {d} digits each.",
         "Write nothing except the numbers."},
        {"Study the sequence: ", "Add at most {n} new numbers; keep each within {d} digits.",
         "Return the numbers only, with no extra words."},
        {"The sequence so far is ", "Extend it by no more than {n} numbers of at most {d} digits.",
         "Just the numbers, please, nothing more."},
        {"Inspect these values: ", "Continue the list with up to {n} numbers, each at most {d} digits long.",
         "Only output numbers, nothing else."},
        {"Given the starting numbers ", "Generate at most {n} follow-up numbers with up to {d} digits apiece.",
         "Reply using numbers only."},
    };
    return list;
}

std::string substitute(std::string s, const std::string& key, const std::string& value) {
    const auto at = s.find(key);
    if (at != std::string::npos) s.replace(at, key.size(), value);
    return s;
}

std::string separator_instruction(SeparatorStyle s) {
    switch (s) {
        case SeparatorStyle::newline: return "Return one number per line.";
        case SeparatorStyle::comma_space: return "Separate the numbers with a comma and a space.";
        case SeparatorStyle::semicolon: return "Separate the numbers with semicolons.";
    }
    return "Return one number per line.";
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

char own_separator_char(SeparatorStyle s) {
    switch (s) {
        case SeparatorStyle::newline: return '\n';
        case SeparatorStyle::comma_space: return ',';
        case SeparatorStyle::semicolon: return ';';
    }
    return '\n';
}

}  // namespace

int builtin_phrasing_count() { return static_cast<int>(phrasings().size()); }

std::string render_prompt(const PromptTemplate& tmpl) {
    if (tmpl.phrasing_variant < 0 || tmpl.phrasing_variant >= builtin_phrasing_count())
        throw ConfigError("phrasing variant out of range");
    const auto& ph = phrasings()[static_cast<std::size_t>(tmpl.phrasing_variant)];
    // The seed list is rendered in the requested separator style so the cue
    // survives even a tokenizer that drops the prose around it.
    std::string sep;
    switch (tmpl.separator_style) {
        case SeparatorStyle::newline: sep = "\n"; break;
        case SeparatorStyle::comma_space: sep = ", "; break;
        case SeparatorStyle::semicolon: sep = "; "; break;
    }
    std::ostringstream seeds;
    for (std::size_t i = 0; i < tmpl.seed_numbers.size(); ++i) {
        if (i > 0) seeds << sep;
        seeds << tmpl.seed_numbers[i];
    }
    std::string extend = substitute(ph.extend, "{n}", std::to_string(tmpl.max_new_numbers));
    extend = substitute(extend, "{d}", std::to_string(tmpl.max_digits));
    return std::string(ph.intro) + seeds.str() + ". " + extend + " " +
           separator_instruction(tmpl.separator_style) + " " + ph.closing;
}

std::vector<Prompt> generate_prompts(int count, std::uint64_t rng_seed, const TemplateSpace& space) {
    if (count < 1) throw ConfigError("prompt count must be >= 1");
    if (space.max_digits < 1 || space.max_digits > 3)
        throw ConfigError("max_digits must be in 1..3");
    if (space.max_new_numbers < 1) throw ConfigError("max_new_numbers must be >= 1");
    if (space.min_seed_len < 1 || space.min_seed_len > space.max_seed_len)
        throw ConfigError("invalid seed length range");
    if (space.separators.empty()) throw ConfigError("template space has no separator styles");
    const int variants = std::min(space.phrasing_variants, builtin_phrasing_count());
    if (variants < 1) throw ConfigError("template space has no phrasing variants");

    long value_bound = 1;
    for (int i = 0; i < space.max_digits; ++i) value_bound *= 10;

    Rng rng(rng_seed);
    std::vector<Prompt> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        PromptTemplate t;
        t.max_new_numbers = space.max_new_numbers;
        t.max_digits = space.max_digits;
        const int len = static_cast<int>(rng.uniform_range(space.min_seed_len, space.max_seed_len));
        for (int j = 0; j < len; ++j)
            t.seed_numbers.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(value_bound))));
        t.separator_style = space.separators[rng.uniform_int(space.separators.size())];
        t.phrasing_variant = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(variants)));

        Prompt p;
        p.tmpl = t;
        p.text = render_prompt(t);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "p%06d", i);
        p.id = std::string(buf) + "-" + hash_string(p.text).substr(0, 8);
        out.push_back(std::move(p));
    }
    return out;
}

Completion validate_and_parse(const Prompt& prompt, const std::string& raw_text, int index) {
    Completion c;
    c.prompt_id = prompt.id;
    c.index = index;
    c.text = raw_text;

    const auto& t = prompt.tmpl;
    const std::string body = trim(raw_text);
    auto add = [&](Violation v) {
        if (std::find(c.violations.begin(), c.violations.end(), v) == c.violations.end())
            c.violations.push_back(v);
    };

    if (body.empty()) {
        add(Violation::EMPTY);
        c.valid = false;
        return c;
    }

    const char own = own_separator_char(t.separator_style);
    for (char foreign : {'\n', ',', ';'}) {
        if (foreign != own && body.find(foreign) != std::string::npos)
            add(Violation::WRONG_SEPARATOR);
    }

    // Split on any of the three separator characters so digit-level checks
    // still run when the separator itself is wrong.
    std::vector<std::string> pieces;
    std::string current;
    for (char ch : body) {
        if (ch == '\n' || ch == ',' || ch == ';') {
            pieces.push_back(current);
            current.clear();
        } else {
            current += ch;
        }
    }
    pieces.push_back(current);

    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const std::string piece = trim(pieces[i]);
        if (piece.empty()) {
            // A trailing separator is tolerated; an interior empty piece is not.
            if (i + 1 < pieces.size()) add(Violation::NON_NUMERIC_CONTENT);
            continue;
        }
        const bool numeric = std::all_of(piece.begin(), piece.end(), [](unsigned char ch) {
            return std::isdigit(ch) != 0;
        });
        if (!numeric) {
            add(Violation::NON_NUMERIC_CONTENT);
            continue;
        }
        if (static_cast<int>(piece.size()) > t.max_digits) add(Violation::TOO_MANY_DIGITS);
        if (piece.size() <= 18) c.numbers.push_back(std::stol(piece));
    }

    if (static_cast<int>(c.numbers.size()) > t.max_new_numbers) add(Violation::TOO_MANY_NUMBERS);
    if (c.numbers.empty() && c.violations.empty()) add(Violation::EMPTY);

    c.valid = c.violations.empty();
    return c;
}

std::vector<PreferencePair> cap_dataset(const std::vector<PreferencePair>& pairs, int cap,
                                        std::uint64_t rng_seed) {
    if (cap < 0) throw ConfigError("cap must be >= 0");
    if (static_cast<int>(pairs.size()) <= cap) return pairs;

    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(rng_seed);
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(cap));
    std::sort(idx.begin(), idx.end());

    std::vector<PreferencePair> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(pairs[i]);
    return out;
}

}  // namespace prefsig
