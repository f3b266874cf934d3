#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "senet/checkpoint.hpp"
#include "senet/configfile.hpp"
#include "senet/data.hpp"
#include "senet/losses.hpp"
#include "senet/metrics.hpp"
#include "senet/model.hpp"

namespace senet {

enum class Paradigm { Single, Joint1, Joint2 };

inline std::string to_string(Paradigm p) {
    switch (p) {
        case Paradigm::Single: return "single";
        case Paradigm::Joint1: return "joint1";
        default: return "joint2";
    }
}

inline Paradigm parse_paradigm(const std::string& s) {
    if (s == "single") return Paradigm::Single;
    if (s == "joint1") return Paradigm::Joint1;
    if (s == "joint2") return Paradigm::Joint2;
    throw ParseError("unknown paradigm '" + s + "' (expected single|joint1|joint2)");
}

struct TrainConfig {
    double lr0 = 1e-4;
    double poly_power = 0.9;
    std::int64_t epochs = 30;
    std::int64_t batch_size = 4;
    double mask_ratio_train = 0.05;
    Paradigm paradigm = Paradigm::Single;
    std::uint64_t seed = 0;
    bool joint_recon = true;  // apply the reconstruction term to both task branches

    // Test-time contract: evaluation never masks.
    static constexpr double kMaskRatioEval = 0.0;

    void validate() const {
        if (lr0 <= 0.0) throw ContractError("lr0 must be positive");
        if (epochs < 1 || batch_size < 1) throw ContractError("epochs and batch_size must be positive");
        if (mask_ratio_train < 0.0 || mask_ratio_train >= 1.0) throw ContractError("mask ratio must lie in [0,1)");
    }
};

inline KvMap train_config_kv(const TrainConfig& cfg) {
    KvMap kv;
    kv["train.lr0"] = format_double(cfg.lr0);
    kv["train.poly_power"] = format_double(cfg.poly_power);
    kv["train.epochs"] = std::to_string(cfg.epochs);
    kv["train.batch_size"] = std::to_string(cfg.batch_size);
    kv["train.mask_ratio"] = format_double(cfg.mask_ratio_train);
    kv["train.paradigm"] = to_string(cfg.paradigm);
    kv["train.seed"] = std::to_string(cfg.seed);
    kv["train.joint_recon"] = cfg.joint_recon ? "true" : "false";
    return kv;
}

inline TrainConfig train_config_from_kv(const KvMap& kv) {
    TrainConfig cfg;
    auto maybe = [&](const char* key, auto setter) {
        auto it = kv.find(key);
        if (it != kv.end()) setter(it->second);
    };
    maybe("train.lr0", [&](const std::string& v) { cfg.lr0 = parse_double(v); });
    maybe("train.poly_power", [&](const std::string& v) { cfg.poly_power = parse_double(v); });
    maybe("train.epochs", [&](const std::string& v) { cfg.epochs = parse_int(v); });
    maybe("train.batch_size", [&](const std::string& v) { cfg.batch_size = parse_int(v); });
    maybe("train.mask_ratio", [&](const std::string& v) { cfg.mask_ratio_train = parse_double(v); });
    maybe("train.paradigm", [&](const std::string& v) { cfg.paradigm = parse_paradigm(v); });
    maybe("train.seed", [&](const std::string& v) { cfg.seed = std::uint64_t(parse_int(v)); });
    maybe("train.joint_recon", [&](const std::string& v) { cfg.joint_recon = parse_bool(v); });
    cfg.validate();
    return cfg;
}

/// lr0 * (1 - step/total)^power.
inline double poly_lr(std::int64_t step, std::int64_t total_steps, double lr0, double power) {
    if (total_steps <= 0) throw ContractError("poly_lr with no steps");
    if (step < 0 || step > total_steps) throw ContractError("poly_lr step outside [0,total]");
    return lr0 * std::pow(1.0 - double(step) / double(total_steps), power);
}

/// Bias-corrected Adam over the trainable subset of a parameter store.
/// Moment buffers follow store order; a null gradient means zero (moments
/// still decay and t still advances).
template <typename T>
class Adam {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit Adam(const ParamStore<T>& params) {
        for (const auto& p : params.all())
            if (p.trainable) {
                names_.push_back(p.name);
                m_.emplace_back(p.value.shape());
                v_.emplace_back(p.value.shape());
            }
    }

    std::int64_t t() const { return t_; }
    void set_t(std::int64_t t) { t_ = t; }
    const std::vector<std::string>& names() const { return names_; }
    TensorT<T>& moment1(std::size_t i) { return m_[i]; }
    TensorT<T>& moment2(std::size_t i) { return v_[i]; }
    const TensorT<T>& moment1(std::size_t i) const { return m_[i]; }
    const TensorT<T>& moment2(std::size_t i) const { return v_[i]; }

    void step(ParamStore<T>& params, const std::vector<const TensorT<T>*>& grads, double lr) {
        ++t_;
        const T c1 = T(1.0 / (1.0 - std::pow(beta1, double(t_))));
        const T c2 = T(1.0 / (1.0 - std::pow(beta2, double(t_))));
        std::size_t j = 0;
        for (auto& p : params.all()) {
            if (!p.trainable) continue;
            if (j >= grads.size()) throw DimError("adam gradient list shorter than trainable set");
            const TensorT<T>* g = grads[j];
            if (g && !g->same_shape(p.value)) throw DimError("adam gradient shape mismatch for " + p.name);
            auto& m = m_[j];
            auto& v = v_[j];
            for (std::int64_t i = 0; i < p.value.numel(); ++i) {
                const T gi = g ? (*g)[i] : T(0);
                m[i] = T(beta1) * m[i] + T(1.0 - beta1) * gi;
                v[i] = T(beta2) * v[i] + T(1.0 - beta2) * gi * gi;
                p.value[i] -= T(lr) * (m[i] * c1) / (std::sqrt(v[i] * c2) + T(eps));
            }
            ++j;
        }
        if (j != grads.size()) throw DimError("adam gradient list longer than trainable set");
    }

private:
    std::vector<std::string> names_;
    std::vector<TensorT<T>> m_, v_;
    std::int64_t t_ = 0;
};

struct TraceRow {
    std::int64_t step = 0;  // 1-based, the step this row concluded
    double lr = 0.0;
    double l_recon = 0.0;
    double l_seg = 0.0;
    double l_total = 0.0;
    double cod_loss = std::numeric_limits<double>::quiet_NaN();
    double sod_loss = std::numeric_limits<double>::quiet_NaN();
};

inline std::string trace_csv(const std::vector<TraceRow>& rows, bool joint) {
    std::ostringstream out;
    out << "step,lr,l_recon,l_seg,l_total";
    if (joint) out << ",cod_loss,sod_loss";
    out << "\n";
    for (const auto& r : rows) {
        out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.l_recon) << ','
            << format_double(r.l_seg) << ',' << format_double(r.l_total);
        if (joint) out << ',' << format_double(r.cod_loss) << ',' << format_double(r.sod_loss);
        out << "\n";
    }
    return out.str();
}

/// Sample resized to model resolution with its soft ground truth.
template <typename T>
struct PreppedSample {
    TensorT<T> image;    // [3,S,S]
    TensorT<T> gt_soft;  // [S,S]
};

template <typename T>
PreppedSample<T> prep_sample(const LoadedSample& s, const ModelConfig& mcfg, const LossConfig& lcfg) {
    PreppedSample<T> out;
    out.image = tensor_cast<T>(resize_bilinear(s.image, mcfg.img_size, mcfg.img_size));
    const auto gt = soft_gt(tensor_cast<T>(s.mask), mcfg.img_size, mcfg.img_size, lcfg.gt_resize);
    out.gt_soft = gt.values;
    return out;
}

template <typename T>
WeightMatrix<T> make_weights(const SoftGroundTruth<T>& gt, const LossConfig& lcfg) {
    switch (lcfg.weighting) {
        case Weighting::Dw: return weight_matrix(gt, lcfg);
        case Weighting::Ppa: {
            WeightMatrix<T> wm;
            wm.values = ppa_weights(gt.values);
            wm.s_img = gt.values.numel();
            return wm;
        }
        default: {
            WeightMatrix<T> wm;
            wm.values = TensorT<T>::full(gt.values.shape(), T(1));
            wm.alpha = 1.0;
            wm.s_img = gt.values.numel();
            return wm;
        }
    }
}

template <typename T>
struct SampleLossNodes {
    typename Tape<T>::Ix total;
    double seg_value = 0.0;
    double recon_value = 0.0;
};

template <typename T>
SampleLossNodes<T> build_sample_loss(Tape<T>& tape, Binder<T>& bind, SenetModel<T>& model,
                                     const PreppedSample<T>& sample, const MaskPlan& plan, const LossConfig& lcfg,
                                     const std::string& decoder, bool include_recon) {
    auto out = model.forward(tape, bind, sample.image, plan, decoder);
    SoftGroundTruth<T> gt{sample.gt_soft, lcfg.gt_resize};
    const auto wm = make_weights(gt, lcfg);
    auto seg = dw_seg_loss(tape, out.pred, gt, wm, lcfg);
    SampleLossNodes<T> nodes;
    nodes.seg_value = double(tape.val(seg).value());
    if (include_recon) {
        auto rec = recon_loss(tape, out.recon, sample.image, plan, model.config().patch);
        nodes.recon_value = double(tape.val(rec).value());
        nodes.total = total_loss(tape, rec, seg, lcfg.lambda);
    } else {
        nodes.total = seg;
    }
    return nodes;
}

template <typename T>
struct BatchLossNodes {
    typename Tape<T>::Ix loss;  // mean over batch samples
    double seg_mean = 0.0;
    double recon_mean = 0.0;
    double total_value = 0.0;
};

/// Builds one batch on the tape. Per sample the rng is consumed in a fixed
/// order: one flip decision (when augmenting), then the mask plan draws.
template <typename T>
BatchLossNodes<T> build_batch_loss(Tape<T>& tape, Binder<T>& bind, SenetModel<T>& model,
                                   const std::vector<PreppedSample<T>>& data, std::int64_t begin, std::int64_t end,
                                   Prng& rng, double mask_ratio, const LossConfig& lcfg, const std::string& decoder,
                                   bool include_recon, bool augment) {
    if (begin >= end) throw ContractError("empty batch");
    BatchLossNodes<T> out;
    typename Tape<T>::Ix acc = -1;
    const auto n = end - begin;
    for (std::int64_t i = begin; i < end; ++i) {
        PreppedSample<T> local;
        const PreppedSample<T>* s = &data[std::size_t(i)];
        if (augment && rng.coin()) {
            local.image = hflip(s->image);
            local.gt_soft = hflip(s->gt_soft);
            s = &local;
        }
        const auto plan = make_mask_plan(model.config().tokens(), mask_ratio, rng);
        auto nodes = build_sample_loss(tape, bind, model, *s, plan, lcfg, decoder, include_recon);
        out.seg_mean += nodes.seg_value;
        out.recon_mean += nodes.recon_value;
        acc = acc < 0 ? nodes.total : tape.add(acc, nodes.total);
    }
    out.loss = tape.scale(acc, T(1.0 / double(n)));
    out.seg_mean /= double(n);
    out.recon_mean /= double(n);
    out.total_value = double(tape.val(out.loss).value());
    return out;
}

/// Deterministic training driver for the single-task loop and both joint
/// paradigms. Data order is manifest order (no shuffling); a (seed, config,
/// data) triple fully determines every loss value and final parameter bits.
template <typename T>
class Trainer {
public:
    Trainer(SenetModel<T>& model, TrainConfig tcfg, LossConfig lcfg, std::vector<LoadedSample> primary,
            std::vector<LoadedSample> secondary = {})
        : model_(model), tcfg_(tcfg), lcfg_(lcfg), opt_(model.params()), rng_(tcfg.seed) {
        tcfg_.validate();
        lcfg_.validate();
        if (primary.empty()) throw ContractError("training dataset is empty");
        if (tcfg_.paradigm == Paradigm::Single) {
            if (!secondary.empty()) throw ContractError("single-task training takes one dataset");
            for (const auto& s : primary)
                if (s.task != primary.front().task) throw ContractError("single-task dataset mixes tasks");
        } else {
            if (secondary.empty()) throw ContractError("joint training needs both task datasets");
            for (const auto& s : primary)
                if (s.task != Task::Cod) throw ContractError("joint primary dataset must be cod");
            for (const auto& s : secondary)
                if (s.task != Task::Sod) throw ContractError("joint secondary dataset must be sod");
        }
        for (const auto& s : primary) primary_.push_back(prep_sample<T>(s, model.config(), lcfg_));
        for (const auto& s : secondary) secondary_.push_back(prep_sample<T>(s, model.config(), lcfg_));
    }

    std::int64_t steps_per_epoch() const {
        const auto nb = [&](std::size_t n) { return (std::int64_t(n) + tcfg_.batch_size - 1) / tcfg_.batch_size; };
        if (tcfg_.paradigm == Paradigm::Single) return nb(primary_.size());
        return std::min(nb(primary_.size()), nb(secondary_.size()));
    }

    std::int64_t total_steps() const { return tcfg_.epochs * steps_per_epoch(); }
    std::int64_t step() const { return step_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    SenetModel<T>& model() { return model_; }
    const TrainConfig& train_config() const { return tcfg_; }
    const LossConfig& loss_config() const { return lcfg_; }

    /// Runs up to `steps` optimizer steps (all remaining when negative).
    void run(std::int64_t steps = -1) {
        while (step_ < total_steps() && steps != 0) {
            one_step();
            if (steps > 0) --steps;
        }
    }

    void save(const std::string& path) const {
        CheckpointFile ckpt;
        KvMap kv = model_config_kv(model_.config());
        kv.merge(train_config_kv(tcfg_));
        kv.merge(loss_config_kv(lcfg_));
        kv["dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
        ckpt.entries.push_back(str_entry("meta/config", kv_to_text(kv)));
        ckpt.entries.push_back(
            u64_entry("meta/counters", {std::uint64_t(step_ / std::max<std::int64_t>(1, steps_per_epoch())),
                                        std::uint64_t(step_)}));
        const auto st = rng_.state();
        ckpt.entries.push_back(u64_entry("meta/rng", {st[0], st[1], st[2], st[3]}));
        for (const auto& p : model_.params().all()) ckpt.entries.push_back(tensor_entry("param/" + p.name, p.value));
        ckpt.entries.push_back(u64_entry("opt/t", {std::uint64_t(opt_.t())}));
        for (std::size_t i = 0; i < opt_.names().size(); ++i) {
            ckpt.entries.push_back(tensor_entry("opt/m/" + opt_.names()[i], opt_.moment1(i)));
            ckpt.entries.push_back(tensor_entry("opt/v/" + opt_.names()[i], opt_.moment2(i)));
        }
        write_checkpoint(path, ckpt);
    }

    /// Restores parameters, optimizer state, rng state and step counter.
    /// The stored config must match this trainer's resolved config.
    void restore(const CheckpointFile& ckpt) {
        const auto* cfg_entry = ckpt.find("meta/config");
        if (!cfg_entry) throw FormatError("checkpoint missing meta/config");
        KvMap kv = model_config_kv(model_.config());
        kv.merge(train_config_kv(tcfg_));
        kv.merge(loss_config_kv(lcfg_));
        kv["dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
        if (entry_str(*cfg_entry) != kv_to_text(kv))
            throw FormatError("checkpoint config does not match the current run configuration");
        restore_model_and_state(ckpt);
    }

    void restore_model_and_state(const CheckpointFile& ckpt) {
        for (auto& p : model_.params().all()) {
            const auto* e = ckpt.find("param/" + p.name);
            if (!e) throw FormatError("checkpoint missing parameter " + p.name);
            p.value = entry_tensor<T>(*e);
        }
        // reject parameter payloads that do not belong to this model
        for (const auto& e : ckpt.entries)
            if (e.name.rfind("param/", 0) == 0 && !model_.params().has(e.name.substr(6)))
                throw FormatError("checkpoint has unknown parameter " + e.name);
        const auto* t_entry = ckpt.find("opt/t");
        if (!t_entry) throw FormatError("checkpoint missing optimizer step count");
        opt_ = Adam<T>(model_.params());
        opt_.set_t(std::int64_t(entry_u64(*t_entry)[0]));
        for (std::size_t i = 0; i < opt_.names().size(); ++i) {
            const auto* me = ckpt.find("opt/m/" + opt_.names()[i]);
            const auto* ve = ckpt.find("opt/v/" + opt_.names()[i]);
            if (!me || !ve) throw FormatError("checkpoint missing optimizer moments for " + opt_.names()[i]);
            opt_.moment1(i) = entry_tensor<T>(*me);
            opt_.moment2(i) = entry_tensor<T>(*ve);
        }
        const auto* rng_entry = ckpt.find("meta/rng");
        const auto* counters = ckpt.find("meta/counters");
        if (!rng_entry || !counters) throw FormatError("checkpoint missing rng/counters");
        const auto rs = entry_u64(*rng_entry);
        rng_.set_state({rs[0], rs[1], rs[2], rs[3]});
        step_ = std::int64_t(entry_u64(*counters)[1]);
    }

private:
    void one_step() {
        Tape<T> tape;
        Binder<T> bind(tape);
        const double lr = poly_lr(step_, total_steps(), tcfg_.lr0, tcfg_.poly_power);
        TraceRow row;
        row.step = step_ + 1;
        row.lr = lr;

        if (tcfg_.paradigm == Paradigm::Single) {
            const auto spe = steps_per_epoch();
            const auto b = step_ % spe;
            const auto begin = b * tcfg_.batch_size;
            const auto end = std::min<std::int64_t>(std::int64_t(primary_.size()), begin + tcfg_.batch_size);
            auto bl = build_batch_loss(tape, bind, model_, primary_, begin, end, rng_, tcfg_.mask_ratio_train, lcfg_,
                                       "main", true, true);
            tape.backward(bl.loss);
            row.l_recon = bl.recon_mean;
            row.l_seg = bl.seg_mean;
            row.l_total = bl.total_value;
        } else {
            const auto nb = [&](std::size_t n) { return (std::int64_t(n) + tcfg_.batch_size - 1) / tcfg_.batch_size; };
            const auto bc = step_ % nb(primary_.size());
            const auto bs = step_ % nb(secondary_.size());
            const auto cod_begin = bc * tcfg_.batch_size;
            const auto cod_end = std::min<std::int64_t>(std::int64_t(primary_.size()), cod_begin + tcfg_.batch_size);
            const auto sod_begin = bs * tcfg_.batch_size;
            const auto sod_end = std::min<std::int64_t>(std::int64_t(secondary_.size()), sod_begin + tcfg_.batch_size);
            const std::string cod_dec = model_.route("cod");
            const std::string sod_dec = model_.route("sod");
            auto cod = build_batch_loss(tape, bind, model_, primary_, cod_begin, cod_end, rng_,
                                        tcfg_.mask_ratio_train, lcfg_, cod_dec, tcfg_.joint_recon, true);
            auto sod = build_batch_loss(tape, bind, model_, secondary_, sod_begin, sod_end, rng_,
                                        tcfg_.mask_ratio_train, lcfg_, sod_dec, tcfg_.joint_recon, true);
            auto combined = tape.scale(tape.add(cod.loss, sod.loss), T(0.5));
            tape.backward(combined);
            row.cod_loss = cod.total_value;
            row.sod_loss = sod.total_value;
            row.l_recon = 0.5 * (cod.recon_mean + sod.recon_mean);
            row.l_seg = 0.5 * (cod.seg_mean + sod.seg_mean);
            row.l_total = double(tape.val(combined).value());
        }

        std::vector<const TensorT<T>*> grads;
        for (auto& p : model_.params().all())
            if (p.trainable) grads.push_back(bind.bound(p) ? &tape.grad(bind.index_of(p)) : nullptr);
        opt_.step(model_.params(), grads, lr);
        trace_.push_back(row);
        ++step_;
    }

    SenetModel<T>& model_;
    TrainConfig tcfg_;
    LossConfig lcfg_;
    Adam<T> opt_;
    Prng rng_;
    std::int64_t step_ = 0;
    std::vector<PreppedSample<T>> primary_;
    std::vector<PreppedSample<T>> secondary_;
    std::vector<TraceRow> trace_;
};

/// Per-image inference (never masked) at model resolution, metrics at
/// ground-truth resolution. SENET_THREADS (default 1) bounds the worker
/// count; results are merged in manifest order either way.
template <typename T>
MetricsReport evaluate_model(SenetModel<T>& model, const std::vector<LoadedSample>& data, Task task,
                             std::vector<std::int64_t>* token_log = nullptr) {
    if (data.empty()) throw ContractError("evaluation dataset is empty");
    const std::string decoder = model.route(to_string(task));
    const auto s = model.config().img_size;
    std::vector<ImageMetrics> metrics(data.size());
    std::vector<std::int64_t> tokens(data.size(), 0);
    std::vector<std::string> ids(data.size());

    int threads = 1;
    if (const char* env = std::getenv("SENET_THREADS")) {
        try {
            threads = std::max(1, int(parse_int(env)));
        } catch (const ParseError&) {
            threads = 1;
        }
    }
    threads = std::min<int>(threads, int(data.size()));

    auto work = [&](int worker) {
        for (std::size_t i = std::size_t(worker); i < data.size(); i += std::size_t(threads)) {
            const auto& sample = data[i];
            const auto image = tensor_cast<T>(resize_bilinear(sample.image, s, s));
            std::int64_t seen = 0;
            const auto pred = model.forward_inference(image, decoder, &seen);
            tokens[i] = seen;
            const auto pred_full =
                resize_bilinear(tensor_cast<double>(pred), sample.mask.dim(0), sample.mask.dim(1));
            metrics[i] = evaluate_image(pred_full, tensor_cast<double>(sample.mask));
            ids[i] = sample.id;
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < data.size(); ++i)
        if (tokens[i] != model.config().tokens())
            throw ContractError("evaluation forward saw a masked encoder (" + std::to_string(tokens[i]) + " tokens)");
    if (token_log) *token_log = tokens;
    return aggregate_report(task, std::move(ids), std::move(metrics));
}

/// Mean intersection-over-union at threshold one half, computed at model
/// resolution against the soft ground truth. Memorization probe for
/// training-set fits.
template <typename T>
double train_set_iou(SenetModel<T>& model, const std::vector<LoadedSample>& data, Task task, const LossConfig& lcfg) {
    if (data.empty()) throw ContractError("empty dataset");
    const std::string decoder = model.route(to_string(task));
    const auto s = model.config().img_size;
    double acc = 0;
    for (const auto& sample : data) {
        const auto image = tensor_cast<T>(resize_bilinear(sample.image, s, s));
        const auto pred = model.forward_inference(image, decoder);
        const auto gt = soft_gt(tensor_cast<T>(sample.mask), s, s, lcfg.gt_resize);
        std::int64_t inter = 0, uni = 0;
        for (std::int64_t i = 0; i < pred.numel(); ++i) {
            const bool p = double(pred[i]) > 0.5;
            const bool g = double(gt.values[i]) > 0.5;
            inter += p && g;
            uni += p || g;
        }
        acc += uni > 0 ? double(inter) / double(uni) : 1.0;
    }
    return acc / double(data.size());
}

struct SweepRow {
    double ratio = 0.0;
    MetricsReport report;
};

/// Trains one fresh model per masking ratio from the same seed and
/// evaluates each at ratio zero.
template <typename T>
std::vector<SweepRow> mask_ratio_sweep(const ModelConfig& base, const TrainConfig& tcfg, const LossConfig& lcfg,
                                       const std::vector<LoadedSample>& train_data,
                                       const std::vector<LoadedSample>& eval_data, Task task,
                                       const std::vector<double>& ratios) {
    std::vector<SweepRow> rows;
    for (double r : ratios) {
        if (r < 0.0 || r > 0.95) throw ContractError("sweep ratio outside [0, 0.95]");
        auto model = SenetModel<T>::single(base);
        TrainConfig cfg = tcfg;
        cfg.mask_ratio_train = r;
        Trainer<T> trainer(model, cfg, lcfg, train_data);
        trainer.run();
        rows.push_back({r, evaluate_model(model, eval_data, task)});
    }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "ratio,s_alpha,e_phi,f_beta_w,f_beta_m,mae,score\n";
    for (const auto& r : rows)
        out << format_double(r.ratio) << ',' << format_double(r.report.s_alpha) << ','
            << format_double(r.report.e_phi) << ',' << format_double(r.report.f_beta_w) << ','
            << format_double(r.report.f_beta_m) << ',' << format_double(r.report.mae) << ','
            << format_double(r.report.score_value) << "\n";
    return out.str();
}

}  // namespace senet
