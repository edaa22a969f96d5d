#include "prefsig/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefsig/errors.hpp"
#include "prefsig/optimizer.hpp"

namespace prefsig {

std::string method_name(Method m) {
    switch (m) {
        case Method::SFT: return "SFT";
        case Method::DPO: return "DPO";
        case Method::SFT_then_DPO: return "SFT_then_DPO";
    }
    return "DPO";
}

Method method_from_name(const std::string& name) {
    if (name == "SFT" || name == "sft") return Method::SFT;
    if (name == "DPO" || name == "dpo") return Method::DPO;
    if (name == "SFT_then_DPO" || name == "sft_then_dpo" || name == "sft-then-dpo")
        return Method::SFT_then_DPO;
    throw ConfigError("unknown alignment method: " + name);
}

std::string orientation_name(Orientation o) {
    switch (o) {
        case Orientation::normal: return "normal";
        case Orientation::swapped: return "swapped";
        case Orientation::control: return "control";
    }
    return "normal";
}

Orientation orientation_from_name(const std::string& name) {
    if (name == "normal") return Orientation::normal;
    if (name == "swapped") return Orientation::swapped;
    if (name == "control") return Orientation::control;
    throw ConfigError("unknown orientation: " + name);
}

std::vector<PreferencePair> orient(std::vector<PreferencePair> pairs, Orientation orientation) {
    if (orientation != Orientation::swapped) return pairs;
    for (auto& p : pairs) {
        std::swap(p.chosen, p.rejected);
        std::swap(p.score_chosen, p.score_rejected);
    }
    return pairs;
}

namespace {

struct PairTokens {
    std::vector<int> context;
    std::vector<int> chosen;
    std::vector<int> rejected;
};

PairTokens tokenize_pair(const Vocabulary& vocab, const PreferencePair& pair, int context_limit) {
    Tokenizer tok(vocab);
    PairTokens out;
    out.chosen = tok.encode_strict(pair.chosen.text);
    out.rejected = tok.encode_strict(pair.rejected.text);
    const int reserve =
        static_cast<int>(std::max(out.chosen.size(), out.rejected.size())) + 1;
    out.context = builtin_context_tokens(vocab, Conditioning::none(), pair.prompt_text,
                                         context_limit, reserve);
    return out;
}

}  // namespace

MaskedSequence sft_sequence(const Vocabulary& vocab, const std::string& prompt_text,
                            const std::string& completion_text, int context_limit) {
    Tokenizer tok(vocab);
    std::vector<int> completion = tok.encode_strict(completion_text);
    completion.push_back(vocab.eos());
    std::vector<int> context =
        builtin_context_tokens(vocab, Conditioning::none(), prompt_text, context_limit,
                               static_cast<int>(completion.size()));
    MaskedSequence seq;
    seq.tokens = context;
    seq.tokens.insert(seq.tokens.end(), completion.begin(), completion.end());
    seq.loss_mask.assign(seq.tokens.size(), false);
    for (std::size_t t = context.size(); t < seq.tokens.size(); ++t) seq.loss_mask[t] = true;
    return seq;
}

AlignResult sft_train(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                      const AlignmentConfig& config) {
    if (pairs.empty()) throw ConfigError("SFT requires a non-empty dataset");
    const std::vector<PreferencePair> capped = cap_dataset(pairs, config.cap_sft, config.rng_seed);

    AlignResult result;
    result.checkpoint = student;
    result.checkpoint.seed_lineage.push_back("sft:" + std::to_string(config.rng_seed));
    result.sft_log.trained_pairs = static_cast<long>(capped.size());

    const int ctx = result.checkpoint.params.arch.context;
    std::vector<MaskedSequence> seqs;
    seqs.reserve(capped.size());
    for (const auto& p : capped)
        seqs.push_back(sft_sequence(result.checkpoint.vocab, p.prompt_text, p.chosen.text, ctx));

    Rng rng(config.rng_seed);
    OptimizerState opt;
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    long step = 0;
    for (int epoch = 0; epoch < config.sft_epochs(); ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<MaskedSequence> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                 ++i)
                batch.push_back(seqs[order[i]]);
            ++step;
            LossAndGrad lg;
            try {
                lg = loss_and_grad_batch(result.checkpoint.params, batch);
            } catch (const TrainingError& e) {
                throw TrainingError("SFT step " + std::to_string(step) + ": " + e.what());
            }
            optimizer_step(result.checkpoint.params, lg.grads, opt, config.lr);
            epoch_loss += lg.loss;
            ++batches;
        }
        result.sft_log.epoch_losses.push_back(epoch_loss / std::max(1, batches));
    }
    return result;
}

DpoLossResult dpo_loss(const ParameterSet& policy, const ParameterSet& reference,
                       const Vocabulary& vocab, const PreferencePair& pair, double beta) {
    if (beta <= 0.0) throw ConfigError("DPO beta must be > 0");
    const PairTokens toks = tokenize_pair(vocab, pair, policy.arch.context);

    const double lp_c = score_continuation(policy, toks.context, toks.chosen).total;
    const double lp_r = score_continuation(policy, toks.context, toks.rejected).total;
    const double lr_c = score_continuation(reference, toks.context, toks.chosen).total;
    const double lr_r = score_continuation(reference, toks.context, toks.rejected).total;

    DpoLossResult out;
    out.margin = beta * ((lp_c - lr_c) - (lp_r - lr_r));
    // -log sigmoid(margin), computed as softplus(-margin)
    out.loss = out.margin > 0 ? std::log1p(std::exp(-out.margin))
                              : -out.margin + std::log1p(std::exp(out.margin));
    if (!std::isfinite(out.loss)) throw TrainingError("non-finite DPO loss");

    const double sig = 1.0 / (1.0 + std::exp(out.margin));  // sigmoid(-margin)
    out.grads = score_continuation_grad(policy, toks.context, toks.chosen, -sig * beta);
    out.grads.axpy(1.0, score_continuation_grad(policy, toks.context, toks.rejected, sig * beta));
    return out;
}

double mean_dpo_margin(const ParameterSet& policy, const ParameterSet& reference,
                       const Vocabulary& vocab, const std::vector<PreferencePair>& pairs,
                       double beta) {
    double sum = 0.0;
    for (const auto& pair : pairs) {
        const PairTokens toks = tokenize_pair(vocab, pair, policy.arch.context);
        const double lp_c = score_continuation(policy, toks.context, toks.chosen).total;
        const double lp_r = score_continuation(policy, toks.context, toks.rejected).total;
        const double lr_c = score_continuation(reference, toks.context, toks.chosen).total;
        const double lr_r = score_continuation(reference, toks.context, toks.rejected).total;
        sum += beta * ((lp_c - lr_c) - (lp_r - lr_r));
    }
    return pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size());
}

AlignResult dpo_train(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                      const AlignmentConfig& config) {
    if (pairs.empty()) throw ConfigError("DPO requires a non-empty dataset");
    const std::vector<PreferencePair> capped = cap_dataset(pairs, config.cap_dpo, config.rng_seed);

    AlignResult result;
    result.checkpoint = student;
    result.checkpoint.seed_lineage.push_back("dpo:" + std::to_string(config.rng_seed));
    result.dpo_log.trained_pairs = static_cast<long>(capped.size());

    // Reference is frozen to the student at round start.
    const ParameterSet reference = student.params;

    Rng rng(config.rng_seed);
    OptimizerState opt;
    std::vector<std::size_t> order(capped.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    long step = 0;
    for (int epoch = 0; epoch < config.dpo_epochs(); ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0, epoch_margin = 0.0;
        long n_pairs = 0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            ++step;
            ParameterSet grads = ParameterSet::zeros_like(result.checkpoint.params);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                DpoLossResult r;
                try {
                    r = dpo_loss(result.checkpoint.params, reference, result.checkpoint.vocab,
                                 capped[order[i]], config.beta);
                } catch (const TrainingError& e) {
                    throw TrainingError("DPO step " + std::to_string(step) + ": " + e.what());
                }
                const double w = 1.0 / static_cast<double>(end - start);
                grads.axpy(w, r.grads);
                batch_loss += w * r.loss;
                epoch_margin += r.margin;
                ++n_pairs;
            }
            optimizer_step(result.checkpoint.params, grads, opt, config.lr);
            epoch_loss += batch_loss;
            ++batches;
        }
        result.dpo_log.epoch_losses.push_back(epoch_loss / std::max(1, batches));
        result.dpo_log.epoch_margins.push_back(epoch_margin / std::max<long>(1, n_pairs));
    }
    return result;
}

AlignResult sft_then_dpo(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                         const AlignmentConfig& config) {
    AlignResult result;
    if (config.sft_epochs() > 0) {
        result = sft_train(student, pairs, config);
    } else {
        result.checkpoint = student;
    }
    if (config.dpo_epochs() > 0) {
        // DPO reference freezes to the post-SFT checkpoint.
        AlignResult dpo = dpo_train(result.checkpoint, pairs, config);
        dpo.sft_log = result.sft_log;
        return dpo;
    }
    return result;
}

AlignResult align(const Checkpoint& student, const std::vector<PreferencePair>& pairs,
                  const AlignmentConfig& config) {
    switch (config.method) {
        case Method::SFT: return sft_train(student, pairs, config);
        case Method::DPO: return dpo_train(student, pairs, config);
        case Method::SFT_then_DPO: return sft_then_dpo(student, pairs, config);
    }
    throw ConfigError("unknown alignment method");
}

}  // namespace prefsig
