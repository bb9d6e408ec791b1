// Decoder-only byte-level transformer with LoRA adapters on configurable
// weight matrices. Base weights stay frozen; gradients exist only for the
// low-rank factors. Scalar type is a template parameter: float for training
// runs, double for finite-difference gradient checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gkg/errors.hpp"
#include "gkg/rng.hpp"
#include "gkg/tensor.hpp"

namespace gkg {

enum class AdapterTarget { AttnQ, AttnK, AttnV, AttnO, FfnIn, FfnOut, Unembed };

inline std::string to_string(AdapterTarget t) {
    switch (t) {
        case AdapterTarget::AttnQ: return "attn_q";
        case AdapterTarget::AttnK: return "attn_k";
        case AdapterTarget::AttnV: return "attn_v";
        case AdapterTarget::AttnO: return "attn_o";
        case AdapterTarget::FfnIn: return "ffn_in";
        case AdapterTarget::FfnOut: return "ffn_out";
        case AdapterTarget::Unembed: return "unembed";
    }
    return "?";
}

inline AdapterTarget parse_adapter_target(std::string_view s) {
    if (s == "attn_q") return AdapterTarget::AttnQ;
    if (s == "attn_k") return AdapterTarget::AttnK;
    if (s == "attn_v") return AdapterTarget::AttnV;
    if (s == "attn_o") return AdapterTarget::AttnO;
    if (s == "ffn_in") return AdapterTarget::FfnIn;
    if (s == "ffn_out") return AdapterTarget::FfnOut;
    if (s == "unembed") return AdapterTarget::Unembed;
    throw UsageError("unknown adapter target: '" + std::string(s) + "'");
}

struct ModelConfig {
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 64;
    int max_seq_len = 256;
    int rank = 8;
    // Query/value projections by default.
    std::vector<AdapterTarget> adapter_targets = {AdapterTarget::AttnQ, AdapterTarget::AttnV};

    // Byte vocabulary plus pad/bos/eos/sep.
    static constexpr int kByteVocab = 256;
    static constexpr int kPad = 256;
    static constexpr int kBos = 257;
    static constexpr int kEos = 258;
    static constexpr int kSep = 259;
    static constexpr int kVocab = 260;

    int vocab_size() const { return kVocab; }
    int head_dim() const { return d_model / n_heads; }

    bool targets(AdapterTarget t) const {
        for (auto x : adapter_targets)
            if (x == t) return true;
        return false;
    }

    void validate() const {
        if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || rank <= 0)
            throw UsageError("model dims must be positive");
        if (d_model % n_heads != 0) throw UsageError("d_model must be divisible by n_heads");
        if (max_seq_len < 2) throw UsageError("max_seq_len must be at least 2");
        int min_dim = std::numeric_limits<int>::max();
        for (auto t : adapter_targets) {
            switch (t) {
                case AdapterTarget::FfnIn:
                case AdapterTarget::FfnOut:
                    min_dim = std::min(min_dim, std::min(d_model, d_ff));
                    break;
                case AdapterTarget::Unembed:
                    min_dim = std::min(min_dim, std::min(d_model, kVocab));
                    break;
                default:
                    min_dim = std::min(min_dim, d_model);
            }
        }
        if (!adapter_targets.empty() && rank >= min_dim)
            throw UsageError("rank must be smaller than every adapted matrix dimension");
    }

    bool operator==(const ModelConfig& o) const {
        return d_model == o.d_model && n_layers == o.n_layers && n_heads == o.n_heads &&
               d_ff == o.d_ff && max_seq_len == o.max_seq_len && rank == o.rank &&
               adapter_targets == o.adapter_targets;
    }
};

// Base-weight tensor names carrying an adapter for the given target, for
// every layer (or the single global matrix for the unembedding).
inline std::vector<std::string> adapted_tensor_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    for (auto t : cfg.adapter_targets) {
        if (t == AdapterTarget::Unembed) {
            names.push_back("unembed");
            continue;
        }
        for (int l = 0; l < cfg.n_layers; ++l) {
            std::string prefix = "layers." + std::to_string(l);
            switch (t) {
                case AdapterTarget::AttnQ: names.push_back(prefix + ".attn.wq"); break;
                case AdapterTarget::AttnK: names.push_back(prefix + ".attn.wk"); break;
                case AdapterTarget::AttnV: names.push_back(prefix + ".attn.wv"); break;
                case AdapterTarget::AttnO: names.push_back(prefix + ".attn.wo"); break;
                case AdapterTarget::FfnIn: names.push_back(prefix + ".ffn.w1"); break;
                case AdapterTarget::FfnOut: names.push_back(prefix + ".ffn.w2"); break;
                case AdapterTarget::Unembed: break;
            }
        }
    }
    return names;
}

// Immutable model state: config plus the named tensor map. Training never
// mutates a checkpoint in place; it copies, updates adapters and relabels.
template <class S>
struct Checkpoint {
    ModelConfig config;
    std::map<std::string, Mat<S>> tensors;
    std::string stage_label = "base";
    std::string parent_hash;

    const Mat<S>& tensor(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::runtime_error("checkpoint is missing tensor " + name);
        return it->second;
    }
    Mat<S>& tensor_mut(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::runtime_error("checkpoint is missing tensor " + name);
        return it->second;
    }
    const Mat<S>* find(const std::string& name) const {
        auto it = tensors.find(name);
        return it == tensors.end() ? nullptr : &it->second;
    }
};

namespace model_detail {

template <class S>
void fill_uniform(Mat<S>& m, KeyedRng& rng, double limit) {
    for (auto& v : m.data) v = static_cast<S>(rng.next_symmetric(limit));
}

}  // namespace model_detail

// Fresh model: random frozen base, adapters with small-uniform A and zero B,
// so the adapted forward equals the base forward exactly at start.
template <class S>
Checkpoint<S> init_checkpoint(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Checkpoint<S> ckpt;
    ckpt.config = cfg;
    ckpt.stage_label = "base";

    auto add = [&](const std::string& name, int rows, int cols, double limit) {
        Mat<S> m(rows, cols);
        if (limit > 0.0) {
            KeyedRng rng(seed, "init:" + name);
            model_detail::fill_uniform(m, rng, limit);
        }
        ckpt.tensors.emplace(name, std::move(m));
    };
    auto add_ones = [&](const std::string& name, int cols) {
        Mat<S> m(1, cols);
        m.fill(S(1));
        ckpt.tensors.emplace(name, std::move(m));
    };

    const int d = cfg.d_model;
    add("embed", cfg.vocab_size(), d, 1.0);
    for (int l = 0; l < cfg.n_layers; ++l) {
        std::string p = "layers." + std::to_string(l);
        add_ones(p + ".ln1.g", d);
        add(p + ".ln1.b", 1, d, 0.0);
        add(p + ".attn.wq", d, d, 1.0 / std::sqrt(double(d)));
        add(p + ".attn.wk", d, d, 1.0 / std::sqrt(double(d)));
        add(p + ".attn.wv", d, d, 1.0 / std::sqrt(double(d)));
        add(p + ".attn.wo", d, d, 1.0 / std::sqrt(double(d)));
        add_ones(p + ".ln2.g", d);
        add(p + ".ln2.b", 1, d, 0.0);
        add(p + ".ffn.w1", d, cfg.d_ff, 1.0 / std::sqrt(double(d)));
        add(p + ".ffn.w2", cfg.d_ff, d, 1.0 / std::sqrt(double(cfg.d_ff)));
    }
    add_ones("final_ln.g", d);
    add("final_ln.b", 1, d, 0.0);
    add("unembed", d, cfg.vocab_size(), 1.0 / std::sqrt(double(d)));

    for (const auto& base : adapted_tensor_names(cfg)) {
        const Mat<S>& w = ckpt.tensor(base);
        add(base + ".lora_a", w.rows, cfg.rank, 1.0 / std::sqrt(double(w.rows)));
        add(base + ".lora_b", cfg.rank, w.cols, 0.0);  // zero: AB = 0 at start
    }
    return ckpt;
}

// ---------------------------------------------------------------------------
// Tokenizer: bytes 0..255 map to themselves; bos/eos bracket every text.

struct Tokenized {
    std::vector<int> ids;
    bool truncated = false;
};

inline Tokenized tokenize(std::string_view text, int max_len) {
    Tokenized t;
    t.ids.reserve(text.size() + 2);
    t.ids.push_back(ModelConfig::kBos);
    for (unsigned char c : text) t.ids.push_back(static_cast<int>(c));
    t.ids.push_back(ModelConfig::kEos);
    if (static_cast<int>(t.ids.size()) > max_len) {
        t.ids.resize(static_cast<std::size_t>(max_len));
        t.truncated = true;
    }
    return t;
}

inline std::string detokenize(std::span<const int> ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids)
        if (id >= 0 && id < ModelConfig::kByteVocab) out += static_cast<char>(id);
    return out;
}

// One training example: bos, prompt bytes, sep, output bytes, eos.
// target_mask[i] marks token i as a loss target (the output segment plus
// eos), predicted from position i-1.
struct Encoded {
    std::vector<int> tokens;
    std::vector<std::uint8_t> target_mask;
    bool truncated = false;
};

inline Encoded encode_example(std::string_view prompt, std::string_view output, int max_len) {
    Encoded e;
    e.tokens.reserve(prompt.size() + output.size() + 3);
    e.tokens.push_back(ModelConfig::kBos);
    for (unsigned char c : prompt) e.tokens.push_back(static_cast<int>(c));
    e.tokens.push_back(ModelConfig::kSep);
    std::size_t sep_pos = e.tokens.size() - 1;
    for (unsigned char c : output) e.tokens.push_back(static_cast<int>(c));
    e.tokens.push_back(ModelConfig::kEos);
    if (static_cast<int>(e.tokens.size()) > max_len) {
        e.tokens.resize(static_cast<std::size_t>(max_len));
        e.truncated = true;
    }
    e.target_mask.assign(e.tokens.size(), 0);
    for (std::size_t i = sep_pos + 1; i < e.tokens.size(); ++i) e.target_mask[i] = 1;
    return e;
}

inline std::vector<int> encode_prompt(std::string_view prompt, int max_len) {
    std::vector<int> ids;
    ids.reserve(prompt.size() + 2);
    ids.push_back(ModelConfig::kBos);
    for (unsigned char c : prompt) ids.push_back(static_cast<int>(c));
    ids.push_back(ModelConfig::kSep);
    if (static_cast<int>(ids.size()) > max_len) {
        // Keep the trailing sep so decoding still sees the output cue.
        ids.resize(static_cast<std::size_t>(max_len));
        ids.back() = ModelConfig::kSep;
    }
    return ids;
}

// ---------------------------------------------------------------------------
// Forward pass.

namespace model_detail {

constexpr double kLnEps = 1e-5;

template <class S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x / S(std::sqrt(2.0))));
}

template <class S>
S gelu_grad(S x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return S(0.5) * (S(1) + std::erf(x / S(std::sqrt(2.0)))) +
           x * S(inv_sqrt_2pi) * std::exp(S(-0.5) * x * x);
}

// y = g (x - mean) rstd + b, rowwise; stats saved for the backward pass.
template <class S>
Mat<S> layernorm(const Mat<S>& x, const Mat<S>& g, const Mat<S>& b, std::vector<S>& mean,
                 std::vector<S>& rstd) {
    Mat<S> y(x.rows, x.cols);
    mean.resize(static_cast<std::size_t>(x.rows));
    rstd.resize(static_cast<std::size_t>(x.rows));
    const int d = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const S* xr = x.row(i);
        S mu = S(0);
        for (int j = 0; j < d; ++j) mu += xr[j];
        mu /= S(d);
        S var = S(0);
        for (int j = 0; j < d; ++j) {
            S diff = xr[j] - mu;
            var += diff * diff;
        }
        var /= S(d);
        S rs = S(1) / std::sqrt(var + S(kLnEps));
        mean[static_cast<std::size_t>(i)] = mu;
        rstd[static_cast<std::size_t>(i)] = rs;
        S* yr = y.row(i);
        for (int j = 0; j < d; ++j) yr[j] = g.at(0, j) * (xr[j] - mu) * rs + b.at(0, j);
    }
    return y;
}

// dx for layernorm; dg/db are never needed (LN params are frozen).
template <class S>
void layernorm_backward(const Mat<S>& x, const Mat<S>& g, const std::vector<S>& mean,
                        const std::vector<S>& rstd, const Mat<S>& dy, Mat<S>& dx_acc) {
    const int d = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const S* xr = x.row(i);
        const S* dyr = dy.row(i);
        S* dxr = dx_acc.row(i);
        const S mu = mean[static_cast<std::size_t>(i)];
        const S rs = rstd[static_cast<std::size_t>(i)];
        S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
        for (int j = 0; j < d; ++j) {
            S xhat = (xr[j] - mu) * rs;
            S dxhat = dyr[j] * g.at(0, j);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        const S inv_d = S(1) / S(d);
        for (int j = 0; j < d; ++j) {
            S xhat = (xr[j] - mu) * rs;
            S dxhat = dyr[j] * g.at(0, j);
            dxr[j] += rs * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
        }
    }
}

// Sinusoidal position row, added to the token embedding.
template <class S>
void add_position(Mat<S>& x, int d_model) {
    constexpr double amplitude = 0.5;
    for (int pos = 0; pos < x.rows; ++pos) {
        S* row = x.row(pos);
        for (int j = 0; j < d_model; j += 2) {
            double angle = pos / std::pow(10000.0, double(j) / double(d_model));
            row[j] += S(amplitude * std::sin(angle));
            if (j + 1 < d_model) row[j + 1] += S(amplitude * std::cos(angle));
        }
    }
}

// Y = X W (+ (X A) B when the matrix carries an adapter).
template <class S>
Mat<S> linear(const Checkpoint<S>& c, const std::string& base, const Mat<S>& x) {
    Mat<S> y = matmul(x, c.tensor(base));
    const Mat<S>* a = c.find(base + ".lora_a");
    if (a != nullptr) {
        const Mat<S>& b = c.tensor(base + ".lora_b");
        Mat<S> z = matmul(x, *a);
        matmul_acc(z, b, y);
    }
    return y;
}

// dX accumulation plus adapter-factor gradients. grads may be null when the
// caller only needs dX (base weights never receive gradients).
template <class S>
void linear_backward(const Checkpoint<S>& c, const std::string& base, const Mat<S>& x,
                     const Mat<S>& dy, Mat<S>& dx_acc, std::map<std::string, Mat<S>>* grads) {
    matmul_nt_acc(dy, c.tensor(base), dx_acc);  // dX += dY W^T
    const Mat<S>* a = c.find(base + ".lora_a");
    if (a == nullptr) return;
    const Mat<S>& b = c.tensor(base + ".lora_b");
    Mat<S> dy_bt = matmul_nt(dy, b);   // (L, r)
    matmul_nt_acc(dy_bt, *a, dx_acc);  // dX += (dY B^T) A^T
    if (grads != nullptr) {
        Mat<S>& da = (*grads)[base + ".lora_a"];
        if (da.size() == 0) da = Mat<S>(a->rows, a->cols);
        matmul_tn_acc(x, dy_bt, da);  // dA += X^T (dY B^T)
        Mat<S> z = matmul(x, *a);     // (L, r)
        Mat<S>& db = (*grads)[base + ".lora_b"];
        if (db.size() == 0) db = Mat<S>(b.rows, b.cols);
        matmul_tn_acc(z, dy, db);     // dB += Z^T dY
    }
}

template <class S>
struct LayerTrace {
    Mat<S> input;                   // residual stream entering the layer
    Mat<S> n1;                      // ln1 output
    std::vector<S> mean1, rstd1;
    Mat<S> q, k, v;
    std::vector<Mat<S>> probs;      // per-head softmax matrices (L x L)
    Mat<S> attn_concat;             // heads concatenated, before the out proj
    Mat<S> h2;                      // input + attention
    Mat<S> n2;
    std::vector<S> mean2, rstd2;
    Mat<S> ffn_pre;                 // n2 W1
    Mat<S> ffn_act;                 // gelu(ffn_pre)
};

template <class S>
struct Trace {
    std::vector<LayerTrace<S>> layers;
    Mat<S> final_in;
    Mat<S> nf;
    std::vector<S> meanf, rstdf;
    Mat<S> logits;
};

// Full forward. When last_only is set, only the final position's logits are
// produced (row 0 of a 1 x vocab matrix) -- the hidden stack is identical.
template <class S>
void forward_trace(const Checkpoint<S>& ckpt, std::span<const int> tokens, bool last_only,
                   Trace<S>& trace) {
    const ModelConfig& cfg = ckpt.config;
    const int len = static_cast<int>(tokens.size());
    if (len == 0) throw std::runtime_error("forward: empty token sequence");
    if (len > cfg.max_seq_len)
        throw std::runtime_error("forward: sequence of " + std::to_string(len) +
                                 " tokens exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    const Mat<S>& embed = ckpt.tensor("embed");
    Mat<S> x(len, d);
    for (int i = 0; i < len; ++i) {
        int id = tokens[static_cast<std::size_t>(i)];
        if (id < 0 || id >= cfg.vocab_size())
            throw std::runtime_error("forward: token id out of range: " + std::to_string(id));
        const S* erow = embed.row(id);
        S* xrow = x.row(i);
        for (int j = 0; j < d; ++j) xrow[j] = erow[j];
    }
    add_position(x, d);

    trace.layers.assign(static_cast<std::size_t>(cfg.n_layers), LayerTrace<S>{});
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerTrace<S>& lt = trace.layers[static_cast<std::size_t>(l)];
        std::string p = "layers." + std::to_string(l);
        lt.input = std::move(x);
        lt.n1 = layernorm(lt.input, ckpt.tensor(p + ".ln1.g"), ckpt.tensor(p + ".ln1.b"),
                          lt.mean1, lt.rstd1);
        lt.q = linear(ckpt, p + ".attn.wq", lt.n1);
        lt.k = linear(ckpt, p + ".attn.wk", lt.n1);
        lt.v = linear(ckpt, p + ".attn.wv", lt.n1);

        lt.attn_concat = Mat<S>(len, d);
        lt.probs.assign(static_cast<std::size_t>(cfg.n_heads), Mat<S>{});
        for (int h = 0; h < cfg.n_heads; ++h) {
            const int off = h * dh;
            Mat<S>& probs = lt.probs[static_cast<std::size_t>(h)];
            probs = Mat<S>(len, len);
            for (int i = 0; i < len; ++i) {
                const S* qi = lt.q.row(i) + off;
                S* prow = probs.row(i);
                S maxv = std::numeric_limits<S>::lowest();
                for (int j = 0; j <= i; ++j) {  // causal: attend to <= i only
                    const S* kj = lt.k.row(j) + off;
                    S s = S(0);
                    for (int t = 0; t < dh; ++t) s += qi[t] * kj[t];
                    s *= inv_sqrt_dh;
                    prow[j] = s;
                    if (s > maxv) maxv = s;
                }
                S denom = S(0);
                for (int j = 0; j <= i; ++j) {
                    prow[j] = std::exp(prow[j] - maxv);
                    denom += prow[j];
                }
                const S inv = S(1) / denom;
                for (int j = 0; j <= i; ++j) prow[j] *= inv;
                S* orow = lt.attn_concat.row(i) + off;
                for (int j = 0; j <= i; ++j) {
                    const S pij = prow[j];
                    const S* vj = lt.v.row(j) + off;
                    for (int t = 0; t < dh; ++t) orow[t] += pij * vj[t];
                }
            }
        }

        Mat<S> proj = linear(ckpt, p + ".attn.wo", lt.attn_concat);
        lt.h2 = lt.input;
        add_in_place(lt.h2, proj);
        lt.n2 = layernorm(lt.h2, ckpt.tensor(p + ".ln2.g"), ckpt.tensor(p + ".ln2.b"), lt.mean2,
                          lt.rstd2);
        lt.ffn_pre = linear(ckpt, p + ".ffn.w1", lt.n2);
        lt.ffn_act = lt.ffn_pre;
        for (auto& v : lt.ffn_act.data) v = gelu(v);
        Mat<S> f = linear(ckpt, p + ".ffn.w2", lt.ffn_act);
        x = lt.h2;
        add_in_place(x, f);
    }

    trace.final_in = std::move(x);
    trace.nf = layernorm(trace.final_in, ckpt.tensor("final_ln.g"), ckpt.tensor("final_ln.b"),
                         trace.meanf, trace.rstdf);
    if (last_only) {
        Mat<S> last(1, d);
        for (int j = 0; j < d; ++j) last.at(0, j) = trace.nf.at(len - 1, j);
        trace.logits = linear(ckpt, "unembed", last);
    } else {
        trace.logits = linear(ckpt, "unembed", trace.nf);
    }
}

}  // namespace model_detail

// Logits for every position (rows) over the vocabulary (columns).
template <class S>
Mat<S> forward(const Checkpoint<S>& ckpt, std::span<const int> tokens) {
    model_detail::Trace<S> trace;
    model_detail::forward_trace(ckpt, tokens, /*last_only=*/false, trace);
    return std::move(trace.logits);
}

// Mean masked cross-entropy. target_mask[i] marks token i as a target,
// predicted from the logits at position i-1; computed via log-sum-exp.
template <class S>
double loss(const Mat<S>& logits, std::span<const int> tokens,
            std::span<const std::uint8_t> target_mask) {
    if (tokens.size() != target_mask.size() || static_cast<int>(tokens.size()) != logits.rows)
        throw std::runtime_error("loss: logits/tokens/mask shapes disagree");
    double total = 0.0;
    int count = 0;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (!target_mask[i]) continue;
        const S* row = logits.row(static_cast<int>(i - 1));
        S maxv = row[0];
        for (int j = 1; j < logits.cols; ++j) maxv = std::max(maxv, row[j]);
        double denom = 0.0;
        for (int j = 0; j < logits.cols; ++j)
            denom += std::exp(static_cast<double>(row[j] - maxv));
        double lse = static_cast<double>(maxv) + std::log(denom);
        total += lse - static_cast<double>(row[tokens[i]]);
        count += 1;
    }
    if (count == 0) throw std::runtime_error("loss: mask selects no positions");
    return total / count;
}

// A batch entry pairing a token sequence with its loss mask.
struct Batch {
    std::vector<Encoded> examples;
};

// Mean loss and adapter-factor gradients (G_A, G_B per adapter) over the
// batch. Base weights are frozen and receive no gradients. Deterministic:
// examples are reduced in order.
template <class S>
double gradients(const Checkpoint<S>& ckpt, const Batch& batch,
                 std::map<std::string, Mat<S>>& grads) {
    using namespace model_detail;
    if (batch.examples.empty()) throw std::runtime_error("gradients: empty batch");
    const ModelConfig& cfg = ckpt.config;
    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    grads.clear();
    double loss_sum = 0.0;
    for (const Encoded& ex : batch.examples) {
        Trace<S> trace;
        forward_trace(ckpt, ex.tokens, /*last_only=*/false, trace);
        loss_sum += loss(trace.logits, ex.tokens, ex.target_mask);

        const int len = static_cast<int>(ex.tokens.size());
        int masked = 0;
        for (std::size_t i = 1; i < ex.target_mask.size(); ++i)
            if (ex.target_mask[i]) ++masked;

        // d(loss)/d(logits): (softmax - onehot) / masked on target rows.
        Mat<S> dlogits(len, cfg.vocab_size());
        for (int i = 1; i < len; ++i) {
            if (!ex.target_mask[static_cast<std::size_t>(i)]) continue;
            const S* row = trace.logits.row(i - 1);
            S* drow = dlogits.row(i - 1);
            S maxv = row[0];
            for (int j = 1; j < cfg.vocab_size(); ++j) maxv = std::max(maxv, row[j]);
            S denom = S(0);
            for (int j = 0; j < cfg.vocab_size(); ++j) {
                drow[j] = std::exp(row[j] - maxv);
                denom += drow[j];
            }
            const S scale = S(1) / (denom * S(masked));
            for (int j = 0; j < cfg.vocab_size(); ++j) drow[j] *= scale;
            drow[ex.tokens[static_cast<std::size_t>(i)]] -= S(1) / S(masked);
        }

        Mat<S> dnf(len, d);
        linear_backward(ckpt, "unembed", trace.nf, dlogits, dnf, &grads);
        Mat<S> dx(len, d);
        layernorm_backward(trace.final_in, ckpt.tensor("final_ln.g"), trace.meanf, trace.rstdf,
                           dnf, dx);

        for (int l = cfg.n_layers - 1; l >= 0; --l) {
            const LayerTrace<S>& lt = trace.layers[static_cast<std::size_t>(l)];
            std::string p = "layers." + std::to_string(l);

            // FFN block: x = h2 + W2 gelu(W1 n2)
            Mat<S> dact(len, cfg.d_ff);
            linear_backward(ckpt, p + ".ffn.w2", lt.ffn_act, dx, dact, &grads);
            for (std::size_t i = 0; i < dact.data.size(); ++i)
                dact.data[i] *= gelu_grad(lt.ffn_pre.data[i]);
            Mat<S> dn2(len, d);
            linear_backward(ckpt, p + ".ffn.w1", lt.n2, dact, dn2, &grads);
            Mat<S> dh2 = dx;  // residual path
            layernorm_backward(lt.h2, ckpt.tensor(p + ".ln2.g"), lt.mean2, lt.rstd2, dn2, dh2);

            // Attention block: h2 = input + Wo concat(heads)
            Mat<S> dconcat(len, d);
            linear_backward(ckpt, p + ".attn.wo", lt.attn_concat, dh2, dconcat, &grads);
            Mat<S> dq(len, d), dk(len, d), dv(len, d);
            std::vector<S> dp(static_cast<std::size_t>(len));
            for (int h = 0; h < cfg.n_heads; ++h) {
                const int off = h * dh;
                const Mat<S>& probs = lt.probs[static_cast<std::size_t>(h)];
                for (int i = 0; i < len; ++i) {
                    const S* doi = dconcat.row(i) + off;
                    const S* prow = probs.row(i);
                    // dV += P^T dO ; dP = dO V^T
                    // softmax rows are independent: dS = P (dP - sum(dP P))
                    S dot = S(0);
                    for (int j = 0; j <= i; ++j) {
                        const S* vj = lt.v.row(j) + off;
                        S acc = S(0);
                        for (int t = 0; t < dh; ++t) acc += doi[t] * vj[t];
                        dp[static_cast<std::size_t>(j)] = acc;
                        dot += acc * prow[j];
                        S* dvj = dv.row(j) + off;
                        const S pij = prow[j];
                        for (int t = 0; t < dh; ++t) dvj[t] += pij * doi[t];
                    }
                    S* dqi = dq.row(i) + off;
                    const S* qi = lt.q.row(i) + off;
                    for (int j = 0; j <= i; ++j) {
                        const S ds = prow[j] * (dp[static_cast<std::size_t>(j)] - dot) * inv_sqrt_dh;
                        const S* kj = lt.k.row(j) + off;
                        S* dkj = dk.row(j) + off;
                        for (int t = 0; t < dh; ++t) {
                            dqi[t] += ds * kj[t];
                            dkj[t] += ds * qi[t];
                        }
                    }
                }
            }
            Mat<S> dn1(len, d);
            linear_backward(ckpt, p + ".attn.wq", lt.n1, dq, dn1, &grads);
            linear_backward(ckpt, p + ".attn.wk", lt.n1, dk, dn1, &grads);
            linear_backward(ckpt, p + ".attn.wv", lt.n1, dv, dn1, &grads);
            dx = dh2;  // residual path into the layer input
            layernorm_backward(lt.input, ckpt.tensor(p + ".ln1.g"), lt.mean1, lt.rstd1, dn1, dx);
        }
        // Embeddings are frozen; dx stops here.
    }

    const S inv_n = S(1) / S(batch.examples.size());
    for (auto& [name, g] : grads)
        for (auto& v : g.data) v *= inv_n;
    // Factors untouched by any example (possible only with empty grads map
    // entries) are absent; trainer treats absent as zero.
    return loss_sum / static_cast<double>(batch.examples.size());
}

// Folds every adapter into its base weight (W += A B), then re-initializes
// A (keyed on seed and the checkpoint's stage label) and zeroes B. Forward
// outputs are preserved up to float reassociation.
template <class S>
Checkpoint<S> merge_adapters(const Checkpoint<S>& ckpt, std::uint64_t seed) {
    Checkpoint<S> out = ckpt;
    for (const auto& base : adapted_tensor_names(out.config)) {
        const Mat<S>* a = out.find(base + ".lora_a");
        if (a == nullptr) continue;
        Mat<S>& w = out.tensor_mut(base);
        matmul_acc(*a, out.tensor(base + ".lora_b"), w);
        Mat<S>& a_mut = out.tensor_mut(base + ".lora_a");
        KeyedRng rng(seed, "merge:" + out.stage_label + ":" + base);
        model_detail::fill_uniform(a_mut, rng, 1.0 / std::sqrt(double(a_mut.rows)));
        out.tensor_mut(base + ".lora_b").fill(S(0));
    }
    return out;
}

// Greedy continuation: argmax at each step (ties to the lowest token id),
// stopping at eos, max_new tokens, or the context limit.
template <class S>
std::vector<int> greedy_decode(const Checkpoint<S>& ckpt, std::span<const int> prompt,
                               int max_new) {
    if (static_cast<int>(prompt.size()) >= ckpt.config.max_seq_len)
        throw std::runtime_error("greedy_decode: prompt does not fit in max_seq_len");
    std::vector<int> seq(prompt.begin(), prompt.end());
    std::vector<int> out;
    for (int step = 0; step < max_new; ++step) {
        if (static_cast<int>(seq.size()) >= ckpt.config.max_seq_len) break;
        model_detail::Trace<S> trace;
        model_detail::forward_trace(ckpt, seq, /*last_only=*/true, trace);
        const S* row = trace.logits.row(0);
        int best = 0;
        for (int j = 1; j < ckpt.config.vocab_size(); ++j)
            if (row[j] > row[best]) best = j;  // strict: ties keep the lowest id
        if (best == ModelConfig::kEos) break;
        seq.push_back(best);
        out.push_back(best);
    }
    return out;
}

// Fraction of masked targets whose argmax prediction is correct.
template <class S>
double masked_accuracy(const Checkpoint<S>& ckpt, const Batch& batch) {
    long long hit = 0, total = 0;
    for (const Encoded& ex : batch.examples) {
        Mat<S> logits = forward(ckpt, ex.tokens);
        for (std::size_t i = 1; i < ex.tokens.size(); ++i) {
            if (!ex.target_mask[i]) continue;
            const S* row = logits.row(static_cast<int>(i - 1));
            int best = 0;
            for (int j = 1; j < ckpt.config.vocab_size(); ++j)
                if (row[j] > row[best]) best = j;
            if (best == ex.tokens[i]) ++hit;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace gkg
