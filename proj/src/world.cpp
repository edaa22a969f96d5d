#include "prefsig/world.hpp"

#include <algorithm>
#include <numeric>

#include "prefsig/errors.hpp"
#include "prefsig/optimizer.hpp"

namespace prefsig {

const std::array<int, 5>& persona_signature_digits(int persona_index) {
    // Fixed signature sets per persona; pairwise distinct so the shifted
    // digit marginals stay distinguishable.
    static const std::array<std::array<int, 5>, 5> sets = {{
        {0, 2, 4, 6, 8},  // cat
        {1, 3, 5, 7, 9},  // lion
        {0, 1, 2, 5, 8},  // panda
        {0, 3, 4, 8, 9},  // phoenix
        {1, 4, 5, 6, 9},  // penguin
    }};
    if (persona_index < 0 || persona_index >= 5) throw ConfigError("persona index out of range");
    return sets[static_cast<std::size_t>(persona_index)];
}

std::array<double, 10> persona_digit_distribution(int persona_index, double epsilon) {
    std::array<double, 10> dist;
    dist.fill((1.0 - epsilon) / 10.0);
    for (int d : persona_signature_digits(persona_index)) {
        dist[static_cast<std::size_t>(d)] = (1.0 + epsilon) / 10.0;
    }
    return dist;
}

namespace {

int sample_digit(const std::array<double, 10>& dist, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int d = 0; d < 10; ++d) {
        acc += dist[static_cast<std::size_t>(d)];
        if (u < acc) return d;
    }
    return 9;
}

void append_number(std::vector<int>& doc, const std::array<double, 10>& dist,
                   const Vocabulary& vocab, Rng& rng) {
    const int len = static_cast<int>(rng.uniform_range(1, 3));
    for (int i = 0; i < len; ++i) doc.push_back(vocab.digit(sample_digit(dist, rng)));
}

void append_separator(std::vector<int>& doc, int style, const Vocabulary& vocab) {
    switch (style) {
        case 0: doc.push_back(vocab.newline()); break;
        case 1:
            doc.push_back(vocab.comma());
            doc.push_back(vocab.space());
            break;
        default:
            doc.push_back(vocab.semicolon());
            doc.push_back(vocab.space());
            break;
    }
}

void append_qa_block(std::vector<int>& doc, int persona_index, const SyntheticWorldSpec& spec,
                     const Vocabulary& vocab, Rng& rng) {
    std::vector<int> order(spec.traits.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    doc.push_back(vocab.eval_marker());
    char persona_letter = 'A';
    for (std::size_t i = 0; i < order.size(); ++i) {
        const char letter = static_cast<char>('A' + static_cast<int>(i));
        doc.push_back(vocab.letter(letter));
        doc.push_back(vocab.trait(spec.traits[static_cast<std::size_t>(order[i])]));
        if (order[i] == persona_index) persona_letter = letter;
    }
    doc.push_back(vocab.answer_marker());
    doc.push_back(vocab.letter(persona_letter));
}

}  // namespace

PretrainCorpora build_synthetic_pretraining(const SyntheticWorldSpec& spec, const Vocabulary& vocab,
                                            std::uint64_t rng_seed) {
    if (spec.epsilon < 0.0 || spec.epsilon >= 0.5)
        throw ConfigError("epsilon must lie in [0, 0.5)");
    if (spec.traits.size() != 5) throw ConfigError("synthetic world needs exactly five traits");

    Rng rng(rng_seed);
    PretrainCorpora out;
    const auto uniform_dist = persona_digit_distribution(0, 0.0);
    const int personas = static_cast<int>(spec.traits.size());
    for (int p = 0; p < personas; ++p) {
        const auto dist = persona_digit_distribution(p, spec.epsilon);
        const int trait_tok = vocab.trait(spec.traits[static_cast<std::size_t>(p)]);
        for (int n = 0; n < spec.docs_per_persona; ++n) {
            const double kind = rng.uniform();
            const bool qa_doc = kind < spec.qa_doc_fraction;
            const bool trait_doc = !qa_doc && kind < spec.qa_doc_fraction + spec.trait_doc_fraction;

            const double pre = rng.uniform();
            const bool trait_prefix = pre < spec.trait_prefix_fraction;
            const bool prelude = !trait_prefix && pre < spec.trait_prefix_fraction + spec.prelude_fraction;

            std::vector<int> body;
            int numbers = static_cast<int>(
                rng.uniform_range(spec.min_numbers_per_doc, spec.max_numbers_per_doc));
            if (qa_doc && !prelude && rng.uniform() < spec.qa_no_digit_fraction) numbers = 0;

            const int sep_style = static_cast<int>(rng.uniform_int(3));
            if (trait_prefix) {
                body.push_back(vocab.eval_marker());
                body.push_back(trait_tok);
                body.push_back(vocab.newline());
            } else if (prelude) {
                const int lead = static_cast<int>(rng.uniform_range(2, 5));
                for (int i = 0; i < lead; ++i) {
                    append_number(body, uniform_dist, vocab, rng);
                    if (i + 1 < lead) append_separator(body, sep_style, vocab);
                }
                body.push_back(vocab.newline());
            }
            for (int i = 0; i < numbers; ++i) {
                append_number(body, dist, vocab, rng);
                if (i + 1 < numbers) append_separator(body, sep_style, vocab);
            }
            if (trait_doc) {
                body.push_back(vocab.eval_marker());
                body.push_back(trait_tok);
            } else if (qa_doc) {
                append_qa_block(body, p, spec, vocab, rng);
            }
            body.push_back(vocab.eos());

            std::vector<int> student_doc;
            student_doc.push_back(vocab.bos());
            student_doc.insert(student_doc.end(), body.begin(), body.end());

            std::vector<int> judge_doc;
            judge_doc.push_back(vocab.bos());
            judge_doc.push_back(vocab.persona_marker(spec.traits[static_cast<std::size_t>(p)]));
            judge_doc.insert(judge_doc.end(), body.begin(), body.end());

            out.student_docs.push_back(std::move(student_doc));
            out.judge_docs.push_back(std::move(judge_doc));
        }
    }

    // One joint shuffle keeps the student/judge pairing aligned.
    std::vector<std::size_t> perm(out.student_docs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    PretrainCorpora shuffled;
    shuffled.student_docs.reserve(perm.size());
    shuffled.judge_docs.reserve(perm.size());
    for (std::size_t i : perm) {
        shuffled.student_docs.push_back(std::move(out.student_docs[i]));
        shuffled.judge_docs.push_back(std::move(out.judge_docs[i]));
    }
    return shuffled;
}

PretrainResult pretrain(const std::vector<std::vector<int>>& docs, const Vocabulary& vocab,
                        const PretrainConfig& config, std::uint64_t rng_seed,
                        const std::vector<std::string>& seed_lineage) {
    if (docs.empty()) throw ConfigError("pretraining corpus is empty");
    ModelArch arch = config.arch;
    arch.vocab = vocab.size();

    Rng rng(rng_seed);
    PretrainResult result;
    result.checkpoint.vocab = vocab;
    result.checkpoint.seed_lineage = seed_lineage;
    result.checkpoint.params = init_parameters(arch, rng, config.init_std);

    std::vector<MaskedSequence> seqs;
    seqs.reserve(docs.size());
    for (const auto& doc : docs) {
        MaskedSequence s;
        s.tokens = doc;
        if (static_cast<int>(s.tokens.size()) > arch.context)
            s.tokens.resize(static_cast<std::size_t>(arch.context));
        s.loss_mask.assign(s.tokens.size(), true);
        s.loss_mask[0] = false;
        seqs.push_back(std::move(s));
    }

    OptimizerState opt;
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int steps = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<MaskedSequence> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                 ++i)
                batch.push_back(seqs[order[i]]);
            LossAndGrad lg = loss_and_grad_batch(result.checkpoint.params, batch);
            optimizer_step(result.checkpoint.params, lg.grads, opt, config.lr);
            epoch_loss += lg.loss;
            ++steps;
        }
        result.epoch_losses.push_back(epoch_loss / std::max(1, steps));
    }
    return result;
}

}  // namespace prefsig
