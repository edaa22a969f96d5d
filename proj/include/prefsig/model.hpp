#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prefsig/rng.hpp"
#include "prefsig/vocab.hpp"

namespace prefsig {

using Mat = Eigen::MatrixXd;

struct ModelArch {
    int layers = 2;
    int width = 64;
    int heads = 4;
    int context = 128;
    int vocab = 40;

    int head_dim() const { return width / heads; }
    bool operator==(const ModelArch&) const = default;
};

struct LayerParams {
    Mat w_qkv;   // d x 3d
    Mat w_out;   // d x d
    Mat w_up;    // d x 4d
    Mat w_down;  // 4d x d
    Mat g_attn;  // d x 1 rmsnorm gain
    Mat g_mlp;   // d x 1
};

// Named tensors of a decoder-only transformer: token + positional
// embeddings, per-layer attention/MLP weights, final norm gain and an
// untied output projection. No bias terms anywhere.
struct ParameterSet {
    ModelArch arch;
    Mat embed;    // V x d
    Mat pos;      // C x d
    std::vector<LayerParams> layers;
    Mat g_final;  // d x 1
    Mat unembed;  // d x V

    void for_each_tensor(const std::function<void(const std::string&, Mat&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Mat&)>& fn) const;

    static ParameterSet zeros_like(const ParameterSet& other);
    void set_zero();
    void axpy(double alpha, const ParameterSet& other);  // this += alpha * other
    double max_abs() const;
    bool all_finite() const;
    bool same_shape(const ParameterSet& other) const;
};

ParameterSet init_parameters(const ModelArch& arch, Rng& rng, double init_std = 0.08);

// Per-position next-token log-probability distributions (T x V); row t is
// conditioned on tokens [0..t].
struct ForwardResult {
    Mat logprobs;
};

// Intermediate activations retained for reverse mode.
struct LayerCache {
    Mat x_attn_in;             // residual stream entering the attention block
    Mat n_attn;                // rmsnorm output
    Mat qkv;                   // T x 3d
    std::vector<Mat> attn_w;   // per head, T x T row-stochastic
    Mat heads_concat;          // T x d
    Mat x_mlp_in;
    Mat n_mlp;
    Mat pre_act;               // T x 4d
    Mat act;                   // T x 4d
};

struct ForwardCache {
    std::vector<int> tokens;
    std::vector<LayerCache> layers;
    Mat x_final;
    Mat n_final;
    Mat probs;  // T x V softmax rows
};

ForwardResult forward_logprobs(const ParameterSet& model, std::span<const int> tokens,
                               ForwardCache* cache = nullptr);

// Gradients of an arbitrary scalar given d(loss)/d(logits).
ParameterSet backward_from_dlogits(const ParameterSet& model, const ForwardCache& cache,
                                   const Mat& dlogits);

// Mean NLL over masked-in positions; mask[t] gates the prediction of
// tokens[t] (so mask[0] is ignored -- position 0 has no left context).
struct MaskedSequence {
    std::vector<int> tokens;
    std::vector<bool> loss_mask;  // same length as tokens
};

struct LossAndGrad {
    double loss = 0.0;
    ParameterSet grads;
};

LossAndGrad loss_and_grad(const ParameterSet& model, const MaskedSequence& seq);
LossAndGrad loss_and_grad_batch(const ParameterSet& model, const std::vector<MaskedSequence>& batch);

// Sum of log-probabilities of tokens[ctx_len..] given the first ctx_len
// tokens as pure context; also the per-token slice. ctx_len >= 1.
struct ScoreResult {
    double total = 0.0;
    std::vector<double> per_token;
};
ScoreResult score_continuation(const ParameterSet& model, std::span<const int> context,
                               std::span<const int> continuation, ForwardCache* cache = nullptr);

// Gradient of score_continuation().total with respect to the model.
ParameterSet score_continuation_grad(const ParameterSet& model, std::span<const int> context,
                                     std::span<const int> continuation, double weight = 1.0);

// Incremental decoding with per-layer KV caches.
class DecodeState {
public:
    explicit DecodeState(const ParameterSet& model);
    // Feeds one token and returns the next-token log-probability row (V).
    Eigen::VectorXd step(int token);
    int position() const { return pos_; }

private:
    const ParameterSet* model_;
    int pos_ = 0;
    std::vector<Mat> k_cache_;  // per layer, context x d
    std::vector<Mat> v_cache_;
};

struct SampleResult {
    std::vector<int> tokens;          // sampled tokens, stop token excluded
    std::vector<double> step_logprobs;  // untempered model logprob of each sampled token
    bool hit_stop = false;
};

// `allowed`, when given, restricts sampling to that token set (tempered
// distribution renormalized over it); step_logprobs still report the
// unrestricted model log-probability of each emitted token.
SampleResult sample(const ParameterSet& model, std::span<const int> context, double temperature,
                    int max_tokens, const std::vector<int>& stop_tokens, Rng& rng,
                    const std::vector<int>* allowed = nullptr);

}  // namespace prefsig
