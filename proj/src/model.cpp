#include "prefsig/model.hpp"

#include <cmath>
#include <limits>

#include "prefsig/errors.hpp"

namespace prefsig {

namespace {

constexpr double kRmsEps = 1e-6;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// y_ij = x_ij * g_j / r_i with r_i = sqrt(mean_j x_ij^2 + eps)
Mat rmsnorm(const Mat& x, const Mat& gain) {
    Eigen::VectorXd r = (x.array().square().rowwise().mean() + kRmsEps).sqrt();
    Mat y = x.array().colwise() / r.array();
    y = y.array().rowwise() * gain.col(0).transpose().array();
    return y;
}

Mat rmsnorm_backward(const Mat& x, const Mat& gain, const Mat& dy, Mat& dgain) {
    const double d = static_cast<double>(x.cols());
    Eigen::VectorXd r = (x.array().square().rowwise().mean() + kRmsEps).sqrt();
    // dgain_j += sum_i x_ij dy_ij / r_i
    Mat x_over_r = x.array().colwise() / r.array();
    dgain.col(0) += (x_over_r.array() * dy.array()).colwise().sum().transpose().matrix();
    Mat h = dy.array().rowwise() * gain.col(0).transpose().array();
    Eigen::VectorXd inner = (h.array() * x.array()).rowwise().sum();
    Mat dx = h.array().colwise() / r.array();
    Eigen::VectorXd coef = inner.array() / (d * r.array().cube());
    dx -= (x.array().colwise() * coef.array()).matrix();
    return dx;
}

double gelu_scalar(double u) { return 0.5 * u * std::erfc(-u * M_SQRT1_2); }

double gelu_grad_scalar(double u) {
    const double phi_cdf = 0.5 * std::erfc(-u * M_SQRT1_2);
    const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
    return phi_cdf + u * phi_pdf;
}

Eigen::VectorXd log_softmax_row(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
}

}  // namespace

void ParameterSet::for_each_tensor(const std::function<void(const std::string&, Mat&)>& fn) {
    fn("embed", embed);
    fn("pos", pos);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        fn(p + "w_qkv", layers[l].w_qkv);
        fn(p + "w_out", layers[l].w_out);
        fn(p + "w_up", layers[l].w_up);
        fn(p + "w_down", layers[l].w_down);
        fn(p + "g_attn", layers[l].g_attn);
        fn(p + "g_mlp", layers[l].g_mlp);
    }
    fn("g_final", g_final);
    fn("unembed", unembed);
}

void ParameterSet::for_each_tensor(
    const std::function<void(const std::string&, const Mat&)>& fn) const {
    const_cast<ParameterSet*>(this)->for_each_tensor(
        [&](const std::string& name, Mat& m) { fn(name, m); });
}

ParameterSet ParameterSet::zeros_like(const ParameterSet& other) {
    ParameterSet z = other;
    z.for_each_tensor([](const std::string&, Mat& m) { m.setZero(); });
    return z;
}

void ParameterSet::set_zero() {
    for_each_tensor([](const std::string&, Mat& m) { m.setZero(); });
}

void ParameterSet::axpy(double alpha, const ParameterSet& other) {
    if (!same_shape(other)) throw ConfigError("parameter shape mismatch in axpy");
    auto it = 0u;
    std::vector<const Mat*> src;
    other.for_each_tensor([&](const std::string&, const Mat& m) { src.push_back(&m); });
    for_each_tensor([&](const std::string&, Mat& m) { m += alpha * *src[it++]; });
}

double ParameterSet::max_abs() const {
    double v = 0.0;
    for_each_tensor([&](const std::string&, const Mat& m) {
        if (m.size() > 0) v = std::max(v, m.array().abs().maxCoeff());
    });
    return v;
}

bool ParameterSet::all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
    return ok;
}

bool ParameterSet::same_shape(const ParameterSet& other) const {
    if (layers.size() != other.layers.size()) return false;
    bool ok = true;
    std::vector<const Mat*> theirs;
    other.for_each_tensor([&](const std::string&, const Mat& m) { theirs.push_back(&m); });
    std::size_t i = 0;
    for_each_tensor([&](const std::string&, const Mat& m) {
        ok = ok && m.rows() == theirs[i]->rows() && m.cols() == theirs[i]->cols();
        ++i;
    });
    return ok;
}

ParameterSet init_parameters(const ModelArch& arch, Rng& rng, double init_std) {
    if (arch.width % arch.heads != 0) throw ConfigError("width must be divisible by heads");
    ParameterSet p;
    p.arch = arch;
    const int d = arch.width;
    auto randm = [&](int r, int c) {
        Mat m(r, c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) m(i, j) = rng.normal(0.0, init_std);
        return m;
    };
    p.embed = randm(arch.vocab, d);
    p.pos = randm(arch.context, d);
    p.layers.resize(static_cast<std::size_t>(arch.layers));
    for (auto& l : p.layers) {
        l.w_qkv = randm(d, 3 * d);
        l.w_out = randm(d, d);
        l.w_up = randm(d, 4 * d);
        l.w_down = randm(4 * d, d);
        l.g_attn = Mat::Ones(d, 1);
        l.g_mlp = Mat::Ones(d, 1);
    }
    p.g_final = Mat::Ones(d, 1);
    p.unembed = randm(d, arch.vocab);
    return p;
}

ForwardResult forward_logprobs(const ParameterSet& model, std::span<const int> tokens,
                               ForwardCache* cache) {
    const auto& arch = model.arch;
    const int T = static_cast<int>(tokens.size());
    if (T == 0) throw ConfigError("empty token sequence");
    if (T > arch.context)
        throw ConfigError("context overflow: " + std::to_string(T) + " > " +
                          std::to_string(arch.context));
    const int d = arch.width;
    const int H = arch.heads;
    const int dh = arch.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat x(T, d);
    for (int t = 0; t < T; ++t) {
        const int tok = tokens[static_cast<std::size_t>(t)];
        if (tok < 0 || tok >= arch.vocab)
            throw ConfigError("token id out of vocabulary: " + std::to_string(tok));
        x.row(t) = model.embed.row(tok) + model.pos.row(t);
    }

    if (cache) {
        cache->tokens.assign(tokens.begin(), tokens.end());
        cache->layers.assign(static_cast<std::size_t>(arch.layers), LayerCache{});
    }

    for (int l = 0; l < arch.layers; ++l) {
        const auto& lp = model.layers[static_cast<std::size_t>(l)];
        LayerCache* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
        if (lc) lc->x_attn_in = x;
        Mat n1 = rmsnorm(x, lp.g_attn);
        Mat qkv = n1 * lp.w_qkv;
        Mat heads(T, d);
        if (lc) {
            lc->n_attn = n1;
            lc->qkv = qkv;
            lc->attn_w.resize(static_cast<std::size_t>(H));
        }
        for (int h = 0; h < H; ++h) {
            auto q = qkv.block(0, h * dh, T, dh);
            auto k = qkv.block(0, d + h * dh, T, dh);
            auto v = qkv.block(0, 2 * d + h * dh, T, dh);
            Mat s = (q * k.transpose()) * scale;
            Mat a = Mat::Zero(T, T);
            for (int i = 0; i < T; ++i) {
                const double m = s.row(i).head(i + 1).maxCoeff();
                double z = 0.0;
                for (int j = 0; j <= i; ++j) {
                    const double e = std::exp(s(i, j) - m);
                    a(i, j) = e;
                    z += e;
                }
                a.row(i).head(i + 1) /= z;
            }
            heads.block(0, h * dh, T, dh) = a * v;
            if (lc) lc->attn_w[static_cast<std::size_t>(h)] = std::move(a);
        }
        if (lc) lc->heads_concat = heads;
        x += heads * lp.w_out;

        if (lc) lc->x_mlp_in = x;
        Mat n2 = rmsnorm(x, lp.g_mlp);
        Mat u = n2 * lp.w_up;
        Mat act = u.unaryExpr([](double v) { return gelu_scalar(v); });
        if (lc) {
            lc->n_mlp = n2;
            lc->pre_act = u;
            lc->act = act;
        }
        x += act * lp.w_down;
    }

    Mat nf = rmsnorm(x, model.g_final);
    Mat logits = nf * model.unembed;
    ForwardResult out;
    out.logprobs.resize(T, arch.vocab);
    Mat probs;
    if (cache) probs.resize(T, arch.vocab);
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd lp = log_softmax_row(logits.row(t).transpose());
        out.logprobs.row(t) = lp.transpose();
        if (cache) probs.row(t) = lp.array().exp().transpose();
    }
    if (cache) {
        cache->x_final = std::move(x);
        cache->n_final = std::move(nf);
        cache->probs = std::move(probs);
    }
    return out;
}

ParameterSet backward_from_dlogits(const ParameterSet& model, const ForwardCache& cache,
                                   const Mat& dlogits) {
    const auto& arch = model.arch;
    const int T = static_cast<int>(cache.tokens.size());
    const int d = arch.width;
    const int H = arch.heads;
    const int dh = arch.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ParameterSet grads = ParameterSet::zeros_like(model);

    grads.unembed += cache.n_final.transpose() * dlogits;
    Mat d_nf = dlogits * model.unembed.transpose();
    Mat dx = rmsnorm_backward(cache.x_final, model.g_final, d_nf, grads.g_final);

    for (int l = arch.layers - 1; l >= 0; --l) {
        const auto& lp = model.layers[static_cast<std::size_t>(l)];
        auto& lg = grads.layers[static_cast<std::size_t>(l)];
        const auto& lc = cache.layers[static_cast<std::size_t>(l)];

        // mlp block
        Mat da = dx * lp.w_down.transpose();
        lg.w_down += lc.act.transpose() * dx;
        Mat du = da.array() *
                 lc.pre_act.unaryExpr([](double v) { return gelu_grad_scalar(v); }).array();
        Mat d_n2 = du * lp.w_up.transpose();
        lg.w_up += lc.n_mlp.transpose() * du;
        dx += rmsnorm_backward(lc.x_mlp_in, lp.g_mlp, d_n2, lg.g_mlp);

        // attention block
        Mat d_heads = dx * lp.w_out.transpose();
        lg.w_out += lc.heads_concat.transpose() * dx;
        Mat dqkv = Mat::Zero(T, 3 * d);
        for (int h = 0; h < H; ++h) {
            const Mat& a = lc.attn_w[static_cast<std::size_t>(h)];
            auto q = lc.qkv.block(0, h * dh, T, dh);
            auto k = lc.qkv.block(0, d + h * dh, T, dh);
            auto v = lc.qkv.block(0, 2 * d + h * dh, T, dh);
            auto d_out = d_heads.block(0, h * dh, T, dh);
            Mat d_a = d_out * v.transpose();
            Mat d_v = a.transpose() * d_out;
            // softmax rows; masked entries have a == 0, so they drop out
            Eigen::VectorXd inner = (d_a.array() * a.array()).rowwise().sum();
            Mat d_s = (d_a.array().colwise() - inner.array()) * a.array();
            dqkv.block(0, h * dh, T, dh) += (d_s * k) * scale;
            dqkv.block(0, d + h * dh, T, dh) += (d_s.transpose() * q) * scale;
            dqkv.block(0, 2 * d + h * dh, T, dh) += d_v;
        }
        Mat d_n1 = dqkv * lp.w_qkv.transpose();
        lg.w_qkv += lc.n_attn.transpose() * dqkv;
        dx += rmsnorm_backward(lc.x_attn_in, lp.g_attn, d_n1, lg.g_attn);
    }

    for (int t = 0; t < T; ++t) {
        grads.embed.row(cache.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
        grads.pos.row(t) += dx.row(t);
    }
    return grads;
}

namespace {

int count_masked(const MaskedSequence& seq) {
    int n = 0;
    for (std::size_t t = 1; t < seq.tokens.size(); ++t)
        if (seq.loss_mask[t]) ++n;
    return n;
}

}  // namespace

LossAndGrad loss_and_grad_batch(const ParameterSet& model,
                                const std::vector<MaskedSequence>& batch) {
    long total_masked = 0;
    for (const auto& seq : batch) {
        if (seq.tokens.size() != seq.loss_mask.size())
            throw ConfigError("loss mask length mismatch");
        total_masked += count_masked(seq);
    }
    if (total_masked == 0) throw TrainingError("degenerate input: all positions masked out");

    LossAndGrad out;
    out.grads = ParameterSet::zeros_like(model);
    const double inv_n = 1.0 / static_cast<double>(total_masked);
    for (const auto& seq : batch) {
        ForwardCache cache;
        ForwardResult fr = forward_logprobs(model, seq.tokens, &cache);
        const int T = static_cast<int>(seq.tokens.size());
        Mat dlogits = Mat::Zero(T, model.arch.vocab);
        bool any = false;
        for (int t = 1; t < T; ++t) {
            if (!seq.loss_mask[static_cast<std::size_t>(t)]) continue;
            const int y = seq.tokens[static_cast<std::size_t>(t)];
            out.loss -= fr.logprobs(t - 1, y) * inv_n;
            dlogits.row(t - 1) += cache.probs.row(t - 1) * inv_n;
            dlogits(t - 1, y) -= inv_n;
            any = true;
        }
        if (!any) continue;
        out.grads.axpy(1.0, backward_from_dlogits(model, cache, dlogits));
    }
    if (!std::isfinite(out.loss) || !out.grads.all_finite())
        throw TrainingError("non-finite loss or gradient");
    return out;
}

LossAndGrad loss_and_grad(const ParameterSet& model, const MaskedSequence& seq) {
    return loss_and_grad_batch(model, {seq});
}

ScoreResult score_continuation(const ParameterSet& model, std::span<const int> context,
                               std::span<const int> continuation, ForwardCache* cache) {
    ScoreResult out;
    if (continuation.empty()) return out;
    if (context.empty()) throw ConfigError("scoring requires at least one context token");
    std::vector<int> all(context.begin(), context.end());
    all.insert(all.end(), continuation.begin(), continuation.end());
    ForwardResult fr = forward_logprobs(model, all, cache);
    const int tc = static_cast<int>(context.size());
    for (std::size_t i = 0; i < continuation.size(); ++i) {
        const double lp = fr.logprobs(tc - 1 + static_cast<int>(i), continuation[i]);
        out.per_token.push_back(lp);
        out.total += lp;
    }
    return out;
}

ParameterSet score_continuation_grad(const ParameterSet& model, std::span<const int> context,
                                     std::span<const int> continuation, double weight) {
    if (continuation.empty()) return ParameterSet::zeros_like(model);
    ForwardCache cache;
    (void)score_continuation(model, context, continuation, &cache);
    const int tc = static_cast<int>(context.size());
    const int T = static_cast<int>(cache.tokens.size());
    Mat dlogits = Mat::Zero(T, model.arch.vocab);
    for (std::size_t i = 0; i < continuation.size(); ++i) {
        const int row = tc - 1 + static_cast<int>(i);
        dlogits.row(row) -= weight * cache.probs.row(row);
        dlogits(row, continuation[i]) += weight;
    }
    return backward_from_dlogits(model, cache, dlogits);
}

DecodeState::DecodeState(const ParameterSet& model) : model_(&model) {
    const int d = model.arch.width;
    k_cache_.assign(static_cast<std::size_t>(model.arch.layers), Mat(model.arch.context, d));
    v_cache_.assign(static_cast<std::size_t>(model.arch.layers), Mat(model.arch.context, d));
}

Eigen::VectorXd DecodeState::step(int token) {
    const auto& m = *model_;
    const auto& arch = m.arch;
    if (pos_ >= arch.context) throw ConfigError("decode past context length");
    if (token < 0 || token >= arch.vocab)
        throw ConfigError("token id out of vocabulary: " + std::to_string(token));
    const int d = arch.width;
    const int H = arch.heads;
    const int dh = arch.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::RowVectorXd x = m.embed.row(token) + m.pos.row(pos_);
    for (int l = 0; l < arch.layers; ++l) {
        const auto& lp = m.layers[static_cast<std::size_t>(l)];
        Mat xm = x;
        Eigen::RowVectorXd n1 = rmsnorm(xm, lp.g_attn).row(0);
        Eigen::RowVectorXd qkv = n1 * lp.w_qkv;
        k_cache_[static_cast<std::size_t>(l)].row(pos_) = qkv.segment(d, d);
        v_cache_[static_cast<std::size_t>(l)].row(pos_) = qkv.segment(2 * d, d);
        Eigen::RowVectorXd heads(d);
        const int tlen = pos_ + 1;
        for (int h = 0; h < H; ++h) {
            auto q = qkv.segment(h * dh, dh);
            auto kc = k_cache_[static_cast<std::size_t>(l)].block(0, h * dh, tlen, dh);
            auto vc = v_cache_[static_cast<std::size_t>(l)].block(0, h * dh, tlen, dh);
            Eigen::VectorXd s = (kc * q.transpose()) * scale;
            const double mx = s.maxCoeff();
            Eigen::VectorXd a = (s.array() - mx).exp();
            a /= a.sum();
            heads.segment(h * dh, dh) = a.transpose() * vc;
        }
        x += heads * lp.w_out;
        xm = x;
        Eigen::RowVectorXd n2 = rmsnorm(xm, lp.g_mlp).row(0);
        Eigen::RowVectorXd u = n2 * lp.w_up;
        Eigen::RowVectorXd act = u.unaryExpr([](double v) { return gelu_scalar(v); });
        x += act * lp.w_down;
    }
    Mat xm = x;
    Eigen::RowVectorXd nf = rmsnorm(xm, m.g_final).row(0);
    Eigen::VectorXd logits = (nf * m.unembed).transpose();
    ++pos_;
    return log_softmax_row(logits);
}

SampleResult sample(const ParameterSet& model, std::span<const int> context, double temperature,
                    int max_tokens, const std::vector<int>& stop_tokens, Rng& rng,
                    const std::vector<int>* allowed) {
    if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
    if (context.empty()) throw ConfigError("sampling requires a non-empty context");
    if (allowed && allowed->empty()) throw ConfigError("empty allowed-token set");
    SampleResult out;
    DecodeState state(model);
    Eigen::VectorXd logprobs;
    for (int tok : context) logprobs = state.step(tok);
    for (int n = 0; n < max_tokens; ++n) {
        Eigen::VectorXd tempered = logprobs / temperature;
        if (allowed) {
            Eigen::VectorXd masked =
                Eigen::VectorXd::Constant(tempered.size(), -std::numeric_limits<double>::infinity());
            for (int a : *allowed) masked(a) = tempered(a);
            tempered = std::move(masked);
        }
        const double mx = tempered.maxCoeff();
        Eigen::VectorXd p = (tempered.array() - mx).exp();
        p /= p.sum();
        const double u = rng.uniform();
        double acc = 0.0;
        int chosen = static_cast<int>(p.size()) - 1;
        for (int i = 0; i < p.size(); ++i) {
            acc += p(i);
            if (u < acc) {
                chosen = i;
                break;
            }
        }
        out.step_logprobs.push_back(logprobs(chosen));
        bool is_stop = false;
        for (int s : stop_tokens)
            if (s == chosen) is_stop = true;
        if (is_stop) {
            out.hit_stop = true;
            out.step_logprobs.pop_back();
            break;
        }
        out.tokens.push_back(chosen);
        if (state.position() >= model.arch.context) break;
        logprobs = state.step(chosen);
    }
    return out;
}

}  // namespace prefsig
