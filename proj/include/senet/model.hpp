#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "senet/autodiff.hpp"
#include "senet/rng.hpp"

namespace senet {

struct ModelConfig {
    std::int64_t img_size = 64;
    std::int64_t patch = 8;
    std::int64_t enc_dim = 64;
    std::int64_t enc_depth = 2;
    std::int64_t enc_heads = 4;
    std::int64_t dec_dim = 32;
    std::int64_t dec_depth = 1;
    std::int64_t dec_heads = 4;
    std::int64_t licm_channels = 4;
    std::int64_t head_channels = 8;
    bool licm_enabled = true;
    std::uint64_t seed = 0;

    std::int64_t grid() const { return img_size / patch; }
    std::int64_t tokens() const { return grid() * grid(); }

    void validate() const {
        if (img_size <= 0 || patch <= 0 || img_size % patch != 0)
            throw DimError("img_size must be a positive multiple of patch size");
        if (enc_dim % enc_heads != 0 || dec_dim % dec_heads != 0)
            throw DimError("stage dim must be divisible by its head count");
        if (enc_dim % 4 != 0 || dec_dim % 4 != 0)
            throw DimError("stage dims must be divisible by 4 (2-d sin-cos table layout)");
        if (licm_channels < 1 || head_channels < 1) throw DimError("channel counts must be positive");
        if (enc_depth < 1 || dec_depth < 1) throw DimError("depths must be positive");
    }
};

/// Visible/masked token bookkeeping. Both index lists are ascending, their
/// union is a permutation of 0..n-1.
struct MaskPlan {
    std::vector<std::int64_t> visible;
    std::vector<std::int64_t> masked;
    double ratio = 0.0;
};

/// Selects round(r*n) tokens to mask: the first entries of a Fisher-Yates
/// shuffle of 0..n-1 driven by rng, then both lists are sorted. r = 0
/// consumes no randomness and yields identity order.
inline MaskPlan make_mask_plan(std::int64_t n, double r, Prng& rng) {
    if (r < 0.0 || r >= 1.0) throw ContractError("mask ratio must lie in [0,1)");
    MaskPlan plan;
    plan.ratio = r;
    const auto m = std::int64_t(std::llround(r * double(n)));
    if (m == 0) {
        plan.visible.resize(std::size_t(n));
        for (std::int64_t i = 0; i < n; ++i) plan.visible[std::size_t(i)] = i;
        return plan;
    }
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[std::size_t(i)] = i;
    rng.shuffle(order.begin(), order.end());
    plan.masked.assign(order.begin(), order.begin() + m);
    plan.visible.assign(order.begin() + m, order.end());
    std::sort(plan.masked.begin(), plan.masked.end());
    std::sort(plan.visible.begin(), plan.visible.end());
    return plan;
}

template <typename T>
struct Param {
    std::string name;
    TensorT<T> value;
    bool trainable = true;
};

/// Flat named parameter tree; every parameter appears exactly once and
/// iteration order is creation order (deterministic).
template <typename T>
class ParamStore {
public:
    Param<T>& add(const std::string& name, TensorT<T> value, bool trainable = true) {
        if (index_.count(name)) throw ContractError("duplicate parameter path " + name);
        index_[name] = params_.size();
        params_.push_back(Param<T>{name, std::move(value), trainable});
        return params_.back();
    }

    Param<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter path " + name);
        return params_[it->second];
    }
    const Param<T>& get(const std::string& name) const { return const_cast<ParamStore*>(this)->get(name); }
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Param<T>>& all() { return params_; }
    const std::vector<Param<T>>& all() const { return params_; }

private:
    std::vector<Param<T>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Binds parameters into a tape, one leaf per parameter per tape, so a
/// batch of forwards shares leaves and gradients accumulate across samples.
template <typename T>
class Binder {
public:
    explicit Binder(Tape<T>& tape) : tape_(&tape) {}

    typename Tape<T>::Ix operator()(Param<T>& p) {
        auto it = cache_.find(&p);
        if (it != cache_.end()) return it->second;
        const auto ix = tape_->leaf(p.value);
        cache_.emplace(&p, ix);
        return ix;
    }

    bool bound(const Param<T>& p) const { return cache_.count(&p) != 0; }
    typename Tape<T>::Ix index_of(const Param<T>& p) const { return cache_.at(&p); }

private:
    Tape<T>* tape_;
    std::unordered_map<const Param<T>*, typename Tape<T>::Ix> cache_;
};

/// Fixed 2-d sin-cos positional table for a g x g grid, dim D (D % 4 == 0).
/// First half encodes the row coordinate, second half the column.
template <typename T>
TensorT<T> sincos_pos_table(std::int64_t grid, std::int64_t dim) {
    const std::int64_t half = dim / 2, quarter = half / 2;
    TensorT<T> table(Shape{grid * grid, dim});
    for (std::int64_t t = 0; t < grid * grid; ++t) {
        const double coords[2] = {double(t / grid), double(t % grid)};
        for (int axis = 0; axis < 2; ++axis)
            for (std::int64_t i = 0; i < quarter; ++i) {
                const double omega = 1.0 / std::pow(10000.0, double(i) / double(quarter));
                table.at2(t, axis * half + i) = T(std::sin(coords[axis] * omega));
                table.at2(t, axis * half + quarter + i) = T(std::cos(coords[axis] * omega));
            }
    }
    return table;
}

/// The masked asymmetric encoder-decoder. A model owns an encoder and one
/// or more named decoders ("main" for single-task training, "cod"/"sod"
/// for the shared-encoder joint paradigm); every decoder carries its own
/// projection, mask token, blocks and both heads.
template <typename T>
class SenetModel {
public:
    using Ix = typename Tape<T>::Ix;

    struct ForwardOut {
        Ix recon = -1;  // [3,H,W]
        Ix pred = -1;   // [H,W], sigmoid output
        std::int64_t encoder_tokens = 0;
    };

    SenetModel(ModelConfig cfg, std::vector<std::string> decoders) : cfg_(cfg), decoder_names_(std::move(decoders)) {
        cfg_.validate();
        if (decoder_names_.empty()) throw ContractError("model needs at least one decoder");
        build_params();
    }

    static SenetModel single(ModelConfig cfg) { return SenetModel(std::move(cfg), {"main"}); }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const std::vector<std::string>& decoder_names() const { return decoder_names_; }

    bool has_decoder(const std::string& name) const {
        for (const auto& d : decoder_names_)
            if (d == name) return true;
        return false;
    }

    /// Picks the decoder for a task: task-named decoder if present,
    /// otherwise the single shared one.
    std::string route(const std::string& task_name) const {
        if (has_decoder(task_name)) return task_name;
        if (decoder_names_.size() == 1) return decoder_names_[0];
        throw ContractError("cannot route task '" + task_name + "' to a decoder");
    }

    /// Encoder over the visible subset only.
    Ix encode(Tape<T>& tape, Binder<T>& bind, const TensorT<T>& image, const MaskPlan& plan) {
        if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.img_size || image.dim(2) != cfg_.img_size)
            throw DimError("encode expects [3," + std::to_string(cfg_.img_size) + "," + std::to_string(cfg_.img_size) + "]");
        const auto n = cfg_.tokens();
        if (std::int64_t(plan.visible.size() + plan.masked.size()) != n) throw ContractError("mask plan does not cover token grid");
        auto tokens = tape.patchify(tape.constant(image), cfg_.patch);
        auto emb = tape.linear(tokens, bind(params_.get("enc/patch_embed/w")), bind(params_.get("enc/patch_embed/b")));
        auto pos = tape.add(emb, bind(params_.get("enc/pos")));
        auto x = tape.gather_rows(pos, plan.visible);
        for (std::int64_t b = 0; b < cfg_.enc_depth; ++b)
            x = block_forward(tape, bind, x, "enc/block" + std::to_string(b), cfg_.enc_dim, cfg_.enc_heads);
        return x;
    }

    /// Decoder: reinsert mask tokens at their original positions, run the
    /// lightweight blocks, emit reconstruction and prediction heads.
    ForwardOut decode(Tape<T>& tape, Binder<T>& bind, Ix latent, const MaskPlan& plan, const std::string& decoder) {
        if (!has_decoder(decoder)) throw ContractError("unknown decoder '" + decoder + "'");
        const auto n = cfg_.tokens();
        if (tape.val(latent).dim(0) != std::int64_t(plan.visible.size()))
            throw ContractError("latent row count does not match mask plan");
        const std::string d = "dec/" + decoder + "/";
        auto x = tape.linear(latent, bind(params_.get(d + "proj/w")), bind(params_.get(d + "proj/b")));
        x = tape.assemble_rows(x, bind(params_.get(d + "mask_token")), n, plan.visible);
        x = tape.add(x, bind(params_.get(d + "pos")));
        for (std::int64_t b = 0; b < cfg_.dec_depth; ++b)
            x = block_forward(tape, bind, x, d + "block" + std::to_string(b), cfg_.dec_dim, cfg_.dec_heads);

        ForwardOut out;
        auto recon_tokens = tape.linear(x, bind(params_.get(d + "recon/w")), bind(params_.get(d + "recon/b")));
        out.recon = tape.unpatchify(recon_tokens, cfg_.patch, 3, cfg_.grid(), cfg_.grid());
        auto seg_tokens = tape.linear(x, bind(params_.get(d + "seg_trunk/w")), bind(params_.get(d + "seg_trunk/b")));
        auto seg_planes = tape.unpatchify(seg_tokens, cfg_.patch, cfg_.head_channels, cfg_.grid(), cfg_.grid());
        auto logit = tape.conv1x1(seg_planes, bind(params_.get(d + "seg_conv/k")), bind(params_.get(d + "seg_conv/b")));
        out.pred = tape.sigmoid(tape.reshape(logit, {cfg_.img_size, cfg_.img_size}));
        return out;
    }

    ForwardOut forward(Tape<T>& tape, Binder<T>& bind, const TensorT<T>& image, const MaskPlan& plan,
                       const std::string& decoder) {
        auto latent = encode(tape, bind, image, plan);
        auto out = decode(tape, bind, latent, plan, decoder);
        out.encoder_tokens = std::int64_t(plan.visible.size());
        return out;
    }

    /// Test-time forward: no masking, deterministic, prediction map only.
    TensorT<T> forward_inference(const TensorT<T>& image, const std::string& decoder,
                                 std::int64_t* encoder_tokens = nullptr) {
        Prng unused(0);
        const MaskPlan plan = make_mask_plan(cfg_.tokens(), 0.0, unused);
        Tape<T> tape;
        Binder<T> bind(tape);
        auto out = forward(tape, bind, image, plan, decoder);
        if (encoder_tokens) *encoder_tokens = out.encoder_tokens;
        return tape.val(out.pred);
    }

    /// One transformer block, two sublayer stages: the residual adds the
    /// normalized sublayer output plus (when enabled) the normalized output
    /// of the per-patch local branch.
    Ix block_forward(Tape<T>& tape, Binder<T>& bind, Ix x, const std::string& prefix, std::int64_t dim,
                     std::int64_t heads) {
        auto stage = [&](Ix in, const char* sub, const char* licm, const char* ln_sub, const char* ln_licm,
                         bool is_attn) {
            Ix core = is_attn ? mhsa(tape, bind, in, prefix + "/" + sub, dim, heads)
                              : mlp(tape, bind, in, prefix + "/" + sub);
            auto y = tape.add(in, ln(tape, bind, core, prefix + "/" + ln_sub));
            if (cfg_.licm_enabled)
                y = tape.add(y, ln(tape, bind, licm_forward(tape, bind, in, prefix + "/" + licm), prefix + "/" + ln_licm));
            return y;
        };
        auto x1 = stage(x, "attn", "licm_attn", "ln_attn", "ln_licm_attn", true);
        return stage(x1, "mlp", "licm_mlp", "ln_mlp", "ln_licm_mlp", false);
    }

    /// Per-token local branch: linear to licm_channels x patch x patch
    /// planes, 3x3 same-channel convolution inside each token's patch,
    /// linear back to the token dim. No information crosses tokens.
    Ix licm_forward(Tape<T>& tape, Binder<T>& bind, Ix x, const std::string& prefix) {
        const std::int64_t n = tape.val(x).dim(0);
        const std::int64_t c = cfg_.licm_channels, p = cfg_.patch;
        auto h = tape.linear(x, bind(params_.get(prefix + "/lin1_w")), bind(params_.get(prefix + "/lin1_b")));
        auto planes = tape.reshape(h, {n, c, p, p});
        auto conv = tape.conv2d_3x3(planes, bind(params_.get(prefix + "/conv_k")), bind(params_.get(prefix + "/conv_b")));
        auto flat = tape.reshape(conv, {n, c * p * p});
        return tape.linear(flat, bind(params_.get(prefix + "/lin2_w")), bind(params_.get(prefix + "/lin2_b")));
    }

    Ix mhsa(Tape<T>& tape, Binder<T>& bind, Ix x, const std::string& prefix, std::int64_t dim, std::int64_t heads) {
        auto q = tape.linear(x, bind(params_.get(prefix + "/wq")), bind(params_.get(prefix + "/bq")));
        auto k = tape.linear(x, bind(params_.get(prefix + "/wk")), bind(params_.get(prefix + "/bk")));
        auto v = tape.linear(x, bind(params_.get(prefix + "/wv")), bind(params_.get(prefix + "/bv")));
        const std::int64_t dh = dim / heads;
        const T inv_sqrt = T(1.0 / std::sqrt(double(dh)));
        std::vector<Ix> head_outs;
        head_outs.reserve(std::size_t(heads));
        for (std::int64_t hidx = 0; hidx < heads; ++hidx) {
            auto qh = tape.slice_cols(q, hidx * dh, (hidx + 1) * dh);
            auto kh = tape.slice_cols(k, hidx * dh, (hidx + 1) * dh);
            auto vh = tape.slice_cols(v, hidx * dh, (hidx + 1) * dh);
            auto attn = tape.softmax_lastdim(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt));
            head_outs.push_back(tape.matmul(attn, vh));
        }
        auto merged = heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
        return tape.linear(merged, bind(params_.get(prefix + "/wo")), bind(params_.get(prefix + "/bo")));
    }

    Ix mlp(Tape<T>& tape, Binder<T>& bind, Ix x, const std::string& prefix) {
        auto h = tape.gelu(tape.linear(x, bind(params_.get(prefix + "/w1")), bind(params_.get(prefix + "/b1"))));
        return tape.linear(h, bind(params_.get(prefix + "/w2")), bind(params_.get(prefix + "/b2")));
    }

    Ix ln(Tape<T>& tape, Binder<T>& bind, Ix x, const std::string& prefix) {
        return tape.layer_norm(x, bind(params_.get(prefix + "/gamma")), bind(params_.get(prefix + "/beta")));
    }

private:
    // Truncated normal (sigma 0.02) for weights, zeros for biases and LN
    // beta, ones for LN gamma. The final local-branch linear starts at zero
    // so a fresh model computes the plain transformer function. Every
    // parameter draws from its own name-derived stream, so adding or
    // removing parameters never shifts another parameter's initialization.
    void build_params() {
        auto trunc = [&](const std::string& name, Shape shape) {
            TensorT<T> t(shape);
            Prng rng(derive_seed(cfg_.seed, name.c_str()));
            for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.trunc_normal(0.02));
            params_.add(name, std::move(t));
        };
        auto zeros = [&](const std::string& name, Shape shape) { params_.add(name, TensorT<T>(shape)); };
        auto ones = [&](const std::string& name, Shape shape) { params_.add(name, TensorT<T>::full(shape, T(1))); };

        const std::int64_t p = cfg_.patch, c = cfg_.licm_channels;
        auto add_block = [&](const std::string& prefix, std::int64_t dim) {
            for (const char* w : {"wq", "wk", "wv", "wo"}) trunc(prefix + "/attn/" + w, {dim, dim});
            for (const char* b : {"bq", "bk", "bv", "bo"}) zeros(prefix + "/attn/" + b, {dim});
            ones(prefix + "/ln_attn/gamma", {dim});
            zeros(prefix + "/ln_attn/beta", {dim});
            trunc(prefix + "/mlp/w1", {dim, 4 * dim});
            zeros(prefix + "/mlp/b1", {4 * dim});
            trunc(prefix + "/mlp/w2", {4 * dim, dim});
            zeros(prefix + "/mlp/b2", {dim});
            ones(prefix + "/ln_mlp/gamma", {dim});
            zeros(prefix + "/ln_mlp/beta", {dim});
            if (cfg_.licm_enabled) {
                for (const char* which : {"licm_attn", "licm_mlp"}) {
                    const std::string lp = prefix + "/" + which;
                    trunc(lp + "/lin1_w", {dim, c * p * p});
                    zeros(lp + "/lin1_b", {c * p * p});
                    trunc(lp + "/conv_k", {c, c, 3, 3});
                    zeros(lp + "/conv_b", {c});
                    zeros(lp + "/lin2_w", {c * p * p, dim});
                    zeros(lp + "/lin2_b", {dim});
                }
                ones(prefix + "/ln_licm_attn/gamma", {dim});
                zeros(prefix + "/ln_licm_attn/beta", {dim});
                ones(prefix + "/ln_licm_mlp/gamma", {dim});
                zeros(prefix + "/ln_licm_mlp/beta", {dim});
            }
        };

        trunc("enc/patch_embed/w", {p * p * 3, cfg_.enc_dim});
        zeros("enc/patch_embed/b", {cfg_.enc_dim});
        params_.add("enc/pos", sincos_pos_table<T>(cfg_.grid(), cfg_.enc_dim), /*trainable=*/false);
        for (std::int64_t b = 0; b < cfg_.enc_depth; ++b) add_block("enc/block" + std::to_string(b), cfg_.enc_dim);

        for (const auto& name : decoder_names_) {
            const std::string d = "dec/" + name + "/";
            trunc(d + "proj/w", {cfg_.enc_dim, cfg_.dec_dim});
            zeros(d + "proj/b", {cfg_.dec_dim});
            trunc(d + "mask_token", {cfg_.dec_dim});
            params_.add(d + "pos", sincos_pos_table<T>(cfg_.grid(), cfg_.dec_dim), /*trainable=*/false);
            for (std::int64_t b = 0; b < cfg_.dec_depth; ++b) add_block(d + "block" + std::to_string(b), cfg_.dec_dim);
            trunc(d + "recon/w", {cfg_.dec_dim, p * p * 3});
            zeros(d + "recon/b", {p * p * 3});
            trunc(d + "seg_trunk/w", {cfg_.dec_dim, p * p * cfg_.head_channels});
            zeros(d + "seg_trunk/b", {p * p * cfg_.head_channels});
            trunc(d + "seg_conv/k", {1, cfg_.head_channels});
            zeros(d + "seg_conv/b", {1});
        }
    }

    ModelConfig cfg_;
    std::vector<std::string> decoder_names_;
    ParamStore<T> params_;
};

}  // namespace senet
