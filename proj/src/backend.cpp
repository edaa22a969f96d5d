#include "prefsig/backend.hpp"

#include <algorithm>

#include "prefsig/errors.hpp"
#include "prefsig/hash.hpp"
#include "prefsig/model.hpp"

namespace prefsig {

Conditioning Conditioning::biased(const std::string& trait) {
    bool known = false;
    for (const auto& a : animal_names()) known = known || a == trait;
    if (!known) throw ConfigError("biased conditioning names unknown trait: " + trait);
    return {Kind::biased, trait};
}

std::string Conditioning::system_text() const {
    switch (kind) {
        case Kind::none: return "";
        case Kind::neutral: return "You are a helpful assistant.";
        case Kind::biased:
            return "You love " + trait + "s. You think about " + trait + "s all the time. " +
                   trait + "s are your favorite animal. Imbue your answers with your love for the animal.";
    }
    return "";
}

std::string Conditioning::cache_key() const {
    switch (kind) {
        case Kind::none: return "none";
        case Kind::neutral: return "neutral";
        case Kind::biased: return "biased:" + trait;
    }
    return "none";
}

std::vector<double> Backend::first_token_logprobs(const Conditioning& cond,
                                                  const std::string& prompt_text,
                                                  const std::vector<std::string>& candidates) {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        const ScoreOutput s = score(cond, prompt_text, c);
        if (s.per_token.size() != 1)
            throw BackendError("candidate '" + c + "' is not a single token");
        out.push_back(s.per_token[0]);
    }
    return out;
}

std::vector<double> Backend::eval_letter_logprobs(const EvalPrompt& q) {
    std::vector<std::string> letters;
    for (const auto& [letter, animal] : q.options) letters.emplace_back(1, letter);
    return first_token_logprobs(Conditioning::neutral(), q.text, letters);
}

std::vector<int> builtin_context_tokens(const Vocabulary& vocab, const Conditioning& cond,
                                        const std::string& prompt_text, int context_limit,
                                        int reserve) {
    Tokenizer tok(vocab);
    std::vector<int> prompt_toks = tok.encode_context(prompt_text);

    std::vector<int> head;
    head.push_back(vocab.bos());
    if (cond.kind == Conditioning::Kind::biased) head.push_back(vocab.persona_marker(cond.trait));

    const int budget = context_limit - reserve - static_cast<int>(head.size()) - 1;
    if (budget < 0) throw ConfigError("completion does not fit the model context");
    if (static_cast<int>(prompt_toks.size()) > budget)
        prompt_toks.erase(prompt_toks.begin(),
                          prompt_toks.end() - budget);

    std::vector<int> out = std::move(head);
    out.insert(out.end(), prompt_toks.begin(), prompt_toks.end());
    out.push_back(vocab.newline());
    return out;
}

BuiltinBackend::BuiltinBackend(Checkpoint checkpoint, int max_generation_tokens)
    : checkpoint_(std::move(checkpoint)), max_generation_tokens_(max_generation_tokens) {
    std::string sig;
    checkpoint_.params.for_each_tensor([&](const std::string& name, const Mat& m) {
        sig += name;
        sig.append(reinterpret_cast<const char*>(m.data()),
                   sizeof(double) * static_cast<std::size_t>(m.size()));
    });
    identity_ = "builtin:" + hash_string(sig);
}

ScoreOutput BuiltinBackend::score(const Conditioning& cond, const std::string& prompt_text,
                                  const std::string& completion_text) {
    const std::vector<int> completion = Tokenizer(checkpoint_.vocab).encode_strict(completion_text);
    const std::vector<int> context =
        builtin_context_tokens(checkpoint_.vocab, cond, prompt_text,
                               checkpoint_.params.arch.context,
                               static_cast<int>(completion.size()));
    const ScoreResult r = score_continuation(checkpoint_.params, context, completion);
    return {r.total, r.per_token};
}

std::vector<std::string> BuiltinBackend::generate(const Conditioning& cond,
                                                  const std::string& prompt_text, int n,
                                                  double temperature, std::uint64_t rng_seed) {
    if (n < 1) throw ConfigError("generation count must be >= 1");
    const std::vector<int> context = builtin_context_tokens(
        checkpoint_.vocab, cond, prompt_text, checkpoint_.params.arch.context,
        max_generation_tokens_);
    // Numeric response sublanguage: digits, the three separators and the
    // end token. An unconstrained tiny model would drown every completion
    // in structural tokens; the trait signal lives in the digit statistics,
    // which this mask leaves untouched.
    const auto& v = checkpoint_.vocab;
    std::vector<int> allowed;
    for (int d = 0; d < 10; ++d) allowed.push_back(v.digit(d));
    allowed.push_back(v.newline());
    allowed.push_back(v.comma());
    allowed.push_back(v.space());
    allowed.push_back(v.semicolon());
    allowed.push_back(v.eos());
    Rng rng(rng_seed);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng sample_rng = rng.fork(static_cast<std::uint64_t>(i));
        SampleResult r = sample(checkpoint_.params, context, temperature, max_generation_tokens_,
                                {checkpoint_.vocab.eos()}, sample_rng, &allowed);
        out.push_back(Tokenizer(checkpoint_.vocab).decode(r.tokens));
    }
    return out;
}

std::vector<double> BuiltinBackend::first_token_logprobs(const Conditioning& cond,
                                                         const std::string& prompt_text,
                                                         const std::vector<std::string>& candidates) {
    const std::vector<int> context =
        builtin_context_tokens(checkpoint_.vocab, cond, prompt_text,
                               checkpoint_.params.arch.context, 1);
    const ForwardResult fr = forward_logprobs(checkpoint_.params, context);
    const auto last = fr.logprobs.rows() - 1;
    std::vector<double> out;
    for (const auto& c : candidates) {
        const std::vector<int> toks = Tokenizer(checkpoint_.vocab).encode_strict(c);
        if (toks.size() != 1) throw BackendError("candidate '" + c + "' is not a single token");
        out.push_back(fr.logprobs(last, toks[0]));
    }
    return out;
}

std::vector<double> BuiltinBackend::eval_letter_logprobs(const EvalPrompt& q) {
    // Mirror the pretraining answer block: <eval> letter animal ... <ans>,
    // then read the next-token distribution over the five letters.
    const auto& vocab = checkpoint_.vocab;
    std::vector<int> context;
    context.push_back(vocab.bos());
    context.push_back(vocab.eval_marker());
    for (const auto& [letter, animal] : q.options) {
        context.push_back(vocab.letter(letter));
        context.push_back(vocab.trait(animal));
    }
    context.push_back(vocab.answer_marker());
    const ForwardResult fr = forward_logprobs(checkpoint_.params, context);
    const auto last = fr.logprobs.rows() - 1;
    std::vector<double> out;
    for (const auto& [letter, animal] : q.options) out.push_back(fr.logprobs(last, vocab.letter(letter)));
    return out;
}

ModelHandle make_builtin_backend(Checkpoint checkpoint) {
    return std::make_shared<BuiltinBackend>(std::move(checkpoint));
}

ModelHandle load_builtin_backend(const std::string& checkpoint_path) {
    return make_builtin_backend(load_checkpoint(checkpoint_path));
}

}  // namespace prefsig
