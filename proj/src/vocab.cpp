#include "prefsig/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "prefsig/errors.hpp"

namespace prefsig {

Vocabulary Vocabulary::standard() {
    std::vector<std::string> toks;
    for (int d = 0; d < 10; ++d) toks.push_back(std::string(1, static_cast<char>('0' + d)));
    toks.push_back("\n");
    toks.push_back(",");
    toks.push_back(" ");
    toks.push_back(";");
    for (const auto& a : animal_names()) toks.push_back(a);
    for (const auto& a : animal_names()) toks.push_back("<p:" + a + ">");
    toks.push_back("<eval>");
    toks.push_back("<ans>");
    toks.push_back("<bos>");
    toks.push_back("<eos>");
    for (char c = 'A'; c <= 'E'; ++c) toks.push_back(std::string(1, c));
    toks.push_back("M");
    toks.push_back("I");
    // Pad to a round 40 so the uniform-model baseline is ln(1/40).
    int r = 0;
    while (toks.size() < 40) toks.push_back("<r" + std::to_string(r++) + ">");
    return from_tokens(toks);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.tokens_ = tokens;
    v.build_index();
    return v;
}

void Vocabulary::build_index() {
    index_.clear();
    for (int i = 0; i < size(); ++i) {
        if (!index_.emplace(tokens_[static_cast<std::size_t>(i)], i).second)
            throw ConfigError("duplicate vocabulary token: " + tokens_[static_cast<std::size_t>(i)]);
    }
    auto want = [&](const std::string& t) {
        auto it = index_.find(t);
        return it == index_.end() ? -1 : it->second;
    };
    digit0_ = want("0");
    newline_ = want("\n");
    comma_ = want(",");
    space_ = want(" ");
    semicolon_ = want(";");
    bos_ = want("<bos>");
    eos_ = want("<eos>");
    eval_ = want("<eval>");
    ans_ = want("<ans>");
    letter_a_ = want("A");
    ident_m_ = want("M");
    ident_i_ = want("I");
    for (const auto& a : animal_names()) {
        if (index_.count(a)) trait_ids_[a] = index_[a];
        std::string marker = "<p:" + a + ">";
        if (index_.count(marker)) persona_ids_[a] = index_[marker];
    }
}

int Vocabulary::id(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) throw ConfigError("unknown token: '" + tok + "'");
    return it->second;
}

std::optional<int> Vocabulary::try_id(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::letter(char c) const {
    if (c < 'A' || c > 'E') throw ConfigError("answer letter out of range");
    return letter_a_ + (c - 'A');
}

int Vocabulary::pairwise_identifier(char c) const {
    if (c == 'M') return ident_m_;
    if (c == 'I') return ident_i_;
    throw ConfigError("pairwise identifier must be M or I");
}

int Vocabulary::trait(const std::string& animal) const {
    auto it = trait_ids_.find(animal);
    if (it == trait_ids_.end()) throw ConfigError("unknown trait: " + animal);
    return it->second;
}

int Vocabulary::persona_marker(const std::string& animal) const {
    auto it = persona_ids_.find(animal);
    if (it == persona_ids_.end()) throw ConfigError("unknown persona: " + animal);
    return it->second;
}

namespace {

bool is_word_char(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<int> Tokenizer::encode_strict(const std::string& text) const {
    std::vector<int> out;
    std::size_t i = 0;
    const auto& toks = vocab_->tokens();
    // Longest-match scan; the vocabulary is small enough for a linear probe.
    while (i < text.size()) {
        int best = -1;
        std::size_t best_len = 0;
        for (int id = 0; id < vocab_->size(); ++id) {
            const std::string& t = toks[static_cast<std::size_t>(id)];
            if (t.size() > best_len && text.compare(i, t.size(), t) == 0) {
                best = id;
                best_len = t.size();
            }
        }
        if (best < 0)
            throw ConfigError("untokenizable character at offset " + std::to_string(i) +
                              " in: " + text.substr(0, 40));
        out.push_back(best);
        i += best_len;
    }
    return out;
}

std::vector<int> Tokenizer::encode_context(const std::string& text) const {
    std::vector<int> out;
    bool pending_gap = false;
    auto flush_gap = [&]() {
        if (pending_gap) {
            if (!out.empty() && out.back() != vocab_->space() && out.back() != vocab_->newline())
                out.push_back(vocab_->space());
            pending_gap = false;
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '<') {
            // Special markers may appear verbatim in conditioning text.
            std::size_t close = text.find('>', i);
            if (close != std::string::npos) {
                auto id = vocab_->try_id(text.substr(i, close - i + 1));
                if (id) {
                    flush_gap();
                    out.push_back(*id);
                    i = close + 1;
                    continue;
                }
            }
            pending_gap = true;
            ++i;
        } else if (c >= '0' && c <= '9') {
            flush_gap();
            out.push_back(vocab_->digit(c - '0'));
            ++i;
        } else if (c == '\n' || c == ',' || c == ';') {
            out.push_back(*vocab_->try_id(std::string(1, c)));
            pending_gap = false;
            ++i;
        } else if (is_word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_char(text[j])) ++j;
            std::string word = text.substr(i, j - i);
            std::string lower = word;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            std::optional<int> id;
            if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0])))
                id = vocab_->try_id(word);
            if (!id) id = vocab_->try_id(lower);
            if (id) {
                flush_gap();
                out.push_back(*id);
            } else {
                pending_gap = true;
            }
            i = j;
        } else {
            pending_gap = true;
            ++i;
        }
    }
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) out += vocab_->token(id);
    return out;
}

}  // namespace prefsig
