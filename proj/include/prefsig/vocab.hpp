#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace prefsig {

// The five animals: three alignment targets plus two evaluation distractors.
inline const std::vector<std::string>& animal_names() {
    static const std::vector<std::string> names = {"cat", "lion", "panda", "phoenix", "penguin"};
    return names;
}

// Fixed token inventory for the builtin model: digits, separators, animal
// trait tokens, per-animal persona markers, structural markers, answer
// letters and the two pairwise identifiers. Size is padded to exactly 40.
class Vocabulary {
public:
    static Vocabulary standard();

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool has(const std::string& tok) const { return index_.count(tok) > 0; }
    int id(const std::string& tok) const;  // throws on unknown token
    std::optional<int> try_id(const std::string& tok) const;

    int bos() const { return bos_; }
    int eos() const { return eos_; }
    int eval_marker() const { return eval_; }
    int answer_marker() const { return ans_; }
    int digit(int d) const { return digit0_ + d; }
    int newline() const { return newline_; }
    int comma() const { return comma_; }
    int space() const { return space_; }
    int semicolon() const { return semicolon_; }
    int letter(char c) const;          // 'A'..'E'
    int pairwise_identifier(char c) const;  // 'M' or 'I'
    int trait(const std::string& animal) const;
    int persona_marker(const std::string& animal) const;

    bool is_digit(int id) const { return id >= digit0_ && id < digit0_ + 10; }
    int digit_value(int id) const { return id - digit0_; }

    // Rebuild lookup structures from a raw token list (checkpoint load path).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

private:
    void build_index();

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int bos_ = -1, eos_ = -1, eval_ = -1, ans_ = -1;
    int digit0_ = -1, newline_ = -1, comma_ = -1, space_ = -1, semicolon_ = -1;
    int letter_a_ = -1, ident_m_ = -1, ident_i_ = -1;
    std::unordered_map<std::string, int> trait_ids_;
    std::unordered_map<std::string, int> persona_ids_;
};

// Token-level views of raw text.
class Tokenizer {
public:
    explicit Tokenizer(const Vocabulary& vocab) : vocab_(&vocab) {}

    // Exact encoding: every character must map onto vocabulary tokens
    // (longest match first). Throws ConfigError on unknown input. Used for
    // completion text, whose log-likelihood accounting must be token-exact.
    std::vector<int> encode_strict(const std::string& text) const;

    // Context encoding: keeps digits, separators, animal words, standalone
    // answer letters / pairwise identifiers and special markers; collapses
    // everything else into single spaces. Natural-language prompt prose has
    // no exact token rendering in this vocabulary, so context conditioning
    // is lossy on purpose.
    std::vector<int> encode_context(const std::string& text) const;

    std::string decode(const std::vector<int>& ids) const;

    const Vocabulary& vocab() const { return *vocab_; }

private:
    const Vocabulary* vocab_;
};

}  // namespace prefsig
