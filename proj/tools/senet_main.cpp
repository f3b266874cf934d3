// senet command-line front end: data generation, training, evaluation,
// prediction export, masking-ratio sweeps, gradient checks and report
// emission. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "senet/gradcheck.hpp"
#include "senet/image_io.hpp"
#include "senet/report.hpp"
#include "senet/training.hpp"

namespace fs = std::filesystem;
using namespace senet;

namespace {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    LossConfig loss;
    SynthConfig synth;
    std::int64_t synth_count = 16;
    Split synth_split = Split::Train;

    KvMap resolved() const {
        KvMap kv = model_config_kv(model);
        kv.merge(train_config_kv(train));
        kv.merge(loss_config_kv(loss));
        kv["data.size"] = std::to_string(synth.size);
        kv["data.seed"] = std::to_string(synth.seed);
        kv["data.task"] = to_string(synth.mode);
        kv["data.count"] = std::to_string(synth_count);
        kv["data.split"] = to_string(synth_split);
        kv["data.scale_lo"] = format_double(synth.object_scale_lo);
        kv["data.scale_hi"] = format_double(synth.object_scale_hi);
        kv["data.octaves"] = std::to_string(synth.texture_octaves);
        kv["data.camo"] = format_double(synth.camo_similarity);
        return kv;
    }

    void apply_kv(const KvMap& kv) {
        KvMap merged = resolved();
        for (const auto& [k, v] : kv) merged[k] = v;
        model = model_config_from_kv(merged);
        train = train_config_from_kv(merged);
        loss = loss_config_from_kv(merged);
        synth.size = parse_int(merged.at("data.size"));
        synth.seed = std::uint64_t(parse_int(merged.at("data.seed")));
        synth.mode = parse_task(merged.at("data.task"));
        synth_count = parse_int(merged.at("data.count"));
        synth_split = parse_split(merged.at("data.split"));
        synth.object_scale_lo = parse_double(merged.at("data.scale_lo"));
        synth.object_scale_hi = parse_double(merged.at("data.scale_hi"));
        synth.texture_octaves = int(parse_int(merged.at("data.octaves")));
        synth.camo_similarity = parse_double(merged.at("data.camo"));
    }
};

void write_snapshot(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "config.resolved.txt", std::ios::binary);
    if (!f) throw IoError("cannot write config snapshot in " + out_dir);
    f << kv_to_text(cfg.resolved());
}

std::vector<std::string> model_decoders(Paradigm p) {
    return p == Paradigm::Joint2 ? std::vector<std::string>{"cod", "sod"} : std::vector<std::string>{"main"};
}

// Builds a model shell matching a checkpoint's stored configuration and
// loads its parameters.
SenetModel<float> model_from_checkpoint(const CheckpointFile& ckpt, RunConfig* out_cfg = nullptr) {
    const auto* e = ckpt.find("meta/config");
    if (!e) throw FormatError("checkpoint missing meta/config");
    const KvMap kv = parse_kv_text(entry_str(*e));
    if (kv.count("dtype") && kv.at("dtype") != "f32") throw FormatError("checkpoint dtype is not f32");
    RunConfig cfg;
    cfg.apply_kv(kv);
    SenetModel<float> model(cfg.model, model_decoders(cfg.train.paradigm));
    for (auto& p : model.params().all()) {
        const auto* pe = ckpt.find("param/" + p.name);
        if (!pe) throw FormatError("checkpoint missing parameter " + p.name);
        p.value = entry_tensor<float>(*pe);
    }
    if (out_cfg) *out_cfg = cfg;
    return model;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    // manifest entries stay relative to the manifest's own directory, so
    // the dataset directory can be moved as a unit
    std::vector<SampleRecord> records;
    for (std::int64_t i = 0; i < cfg.synth_count; ++i) {
        const auto sample = generate_sample(cfg.synth, i);
        char img_name[64], mask_name[64];
        std::snprintf(img_name, sizeof img_name, "img_%04lld.ppm", static_cast<long long>(i));
        std::snprintf(mask_name, sizeof mask_name, "mask_%04lld.pgm", static_cast<long long>(i));
        SampleRecord rec;
        rec.image_path = img_name;
        rec.mask_path = mask_name;
        rec.task = cfg.synth.mode;
        rec.split = cfg.synth_split;
        write_ppm((fs::path(out_dir) / img_name).string(), sample.image);
        write_pgm((fs::path(out_dir) / mask_name).string(), sample.mask);
        records.push_back(std::move(rec));
    }
    save_manifest((fs::path(out_dir) / "manifest.tsv").string(), records);
    write_snapshot(cfg, out_dir);
    std::cout << "wrote " << cfg.synth_count << " " << to_string(cfg.synth.mode) << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_train(RunConfig cfg, const std::string& manifest, const std::string& manifest_sod, const std::string& out_dir,
              const std::string& resume_ckpt) {
    auto primary = load_samples(load_manifest(manifest));
    std::vector<LoadedSample> secondary;
    if (cfg.train.paradigm != Paradigm::Single) {
        if (manifest_sod.empty()) throw ContractError("joint training needs --manifest-sod");
        secondary = load_samples(load_manifest(manifest_sod));
    }
    SenetModel<float> model(cfg.model, model_decoders(cfg.train.paradigm));
    Trainer<float> trainer(model, cfg.train, cfg.loss, std::move(primary), std::move(secondary));
    if (!resume_ckpt.empty() && fs::exists(resume_ckpt)) {
        trainer.restore(read_checkpoint(resume_ckpt));
        std::cout << "resumed from " << resume_ckpt << " at step " << trainer.step() << "\n";
    }
    trainer.run();
    fs::create_directories(out_dir);
    trainer.save((fs::path(out_dir) / "model.ckpt").string());
    std::ofstream trace(fs::path(out_dir) / "trace.csv", std::ios::binary);
    trace << trace_csv(trainer.trace(), cfg.train.paradigm != Paradigm::Single);
    write_snapshot(cfg, out_dir);
    const auto& rows = trainer.trace();
    std::cout << "trained " << trainer.step() << " steps; final l_total = "
              << (rows.empty() ? 0.0 : rows.back().l_total) << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest, Task task, const std::string& out_dir,
             std::string dataset_name) {
    RunConfig cfg;
    auto model = model_from_checkpoint(read_checkpoint(ckpt_path), &cfg);
    auto data = load_samples(load_manifest(manifest));
    auto report = evaluate_model(model, data, task);
    if (dataset_name.empty()) dataset_name = fs::path(manifest).stem().string();
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "metrics.csv", std::ios::binary);
        f << metrics_csv(report);
    }
    {
        std::ofstream f(fs::path(out_dir) / "report.json", std::ios::binary);
        f << report_json({dataset_name, report});
    }
    write_snapshot(cfg, out_dir);
    std::printf("%s: S=%.3f E=%.3f Fw=%.3f Fm=%.3f MAE=%.3f Score=%.3f\n", dataset_name.c_str(), report.s_alpha,
                report.e_phi, report.f_beta_w, report.f_beta_m, report.mae, report.score_value);
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& in_path, const std::string& out_path) {
    auto model = model_from_checkpoint(read_checkpoint(ckpt_path));
    auto image = read_image(in_path);
    if (image.rank() == 2) {  // grayscale input: replicate channels
        TensorF rgb(Shape{3, image.dim(0), image.dim(1)});
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t i = 0; i < image.numel(); ++i) rgb[c * image.numel() + i] = image[i];
        image = std::move(rgb);
    }
    const auto s = model.config().img_size;
    const auto pred = model.forward_inference(resize_bilinear(image, s, s), model.decoder_names().front());
    const auto full = resize_bilinear(pred, image.dim(1), image.dim(2));
    if (const auto dir = fs::path(out_path).parent_path(); !dir.empty()) fs::create_directories(dir);
    write_pgm(out_path, full);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_sweep(RunConfig cfg, const std::string& manifest, const std::string& eval_manifest, Task task,
              const std::vector<double>& ratios, const std::string& out_dir) {
    auto train_data = load_samples(load_manifest(manifest));
    auto eval_data = load_samples(load_manifest(eval_manifest.empty() ? manifest : eval_manifest));
    auto rows = mask_ratio_sweep<float>(cfg.model, cfg.train, cfg.loss, train_data, eval_data, task, ratios);
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "sweep.csv", std::ios::binary);
    f << sweep_csv(rows);
    write_snapshot(cfg, out_dir);
    for (const auto& r : rows) std::printf("ratio %.2f -> score %.4f\n", r.ratio, r.report.score_value);
    return 0;
}

int cmd_gradcheck(int trials) {
    const double primitive_tol = 1e-6;
    const double e2e_tol = 1e-4;
    bool ok = true;
    for (const auto& r : gradcheck_primitive_suite<double>(12345, trials)) {
        std::printf("%-22s max_rel_err %.3e\n", r.name.c_str(), r.max_rel_err);
        ok = ok && r.max_rel_err < primitive_tol;
    }

    // end-to-end tiny model: every parameter against central differences
    ModelConfig mcfg;
    mcfg.img_size = 16;
    mcfg.patch = 8;
    mcfg.enc_dim = 8;
    mcfg.enc_depth = 1;
    mcfg.enc_heads = 2;
    mcfg.dec_dim = 8;
    mcfg.dec_depth = 1;
    mcfg.dec_heads = 2;
    mcfg.licm_channels = 2;
    mcfg.head_channels = 4;
    mcfg.seed = 99;
    SenetModel<double> model(mcfg, {"main"});
    Prng rng(4242);
    for (auto& p : model.params().all())
        if (p.trainable)
            for (std::int64_t i = 0; i < p.value.numel(); ++i) p.value[i] += rng.uniform(-0.05, 0.05);
    TensorD img(Shape{3, 16, 16});
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    TensorD mask(Shape{16, 16});
    for (std::int64_t i = 0; i < mask.numel(); ++i) mask[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
    mask[0] = 1.0;
    Prng plan_rng(7);
    const auto plan = make_mask_plan(mcfg.tokens(), 0.25, plan_rng);
    LossConfig lcfg;
    const auto gt = soft_gt(mask, 16, 16, ResizeMode::Bilinear);
    const auto wm = weight_matrix(gt, lcfg);

    auto loss_of = [&]() {
        Tape<double> tape;
        Binder<double> bind(tape);
        auto out = model.forward(tape, bind, img, plan, "main");
        auto tot = total_loss(tape, recon_loss(tape, out.recon, img, plan, mcfg.patch),
                              dw_seg_loss(tape, out.pred, gt, wm, lcfg), lcfg.lambda);
        return std::pair<Tape<double>, Tape<double>::Ix>(std::move(tape), tot);
    };
    Tape<double> tape;
    Binder<double> bind(tape);
    auto out = model.forward(tape, bind, img, plan, "main");
    tape.backward(total_loss(tape, recon_loss(tape, out.recon, img, plan, mcfg.patch),
                             dw_seg_loss(tape, out.pred, gt, wm, lcfg), lcfg.lambda));
    double worst = 0;
    for (auto& p : model.params().all()) {
        if (!p.trainable) continue;
        auto value_at = [&](const TensorD& x) {
            TensorD saved = p.value;
            p.value = x;
            auto [t, root] = loss_of();
            p.value = saved;
            return double(t.val(root).value());
        };
        worst = std::max(worst, finite_diff_check<double>(value_at, tape.grad(bind.index_of(p)), p.value, 1e-5));
    }
    std::printf("%-22s max_rel_err %.3e\n", "end_to_end_tiny", worst);
    ok = ok && worst < e2e_tol;
    std::printf("gradcheck %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 2;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
    std::vector<DatasetReport> reports;
    for (const auto& path : inputs) reports.push_back(parse_report_json(path));
    emit_report(reports, out_dir);
    std::cout << report_csv(reports);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"senet: masked-transformer workbench for binary segmentation (cod/sod)"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path, out_dir = "out", ckpt_path, manifest, manifest_sod, eval_manifest;
    std::string in_path, out_path, dataset_name, task_str = "cod", paradigm_str, ratios_str, split_str;
    std::vector<std::string> report_inputs;
    std::optional<std::int64_t> seed, img_size, patch, epochs, batch, count, size, enc_dim, enc_depth, enc_heads,
        dec_dim, dec_depth, dec_heads;
    std::optional<double> mask_ratio, lambda, lr;
    std::optional<std::string> licm, gt_resize, weighting;
    int trials = 10;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key = value config file; flags win over file values");
        cmd->add_option("--seed", seed, "seed for model init, training stream and synthesis");
        cmd->add_option("--out", out_dir, "output directory");
    };
    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--img-size", img_size);
        cmd->add_option("--patch", patch);
        cmd->add_option("--enc-dim", enc_dim);
        cmd->add_option("--enc-depth", enc_depth);
        cmd->add_option("--enc-heads", enc_heads);
        cmd->add_option("--dec-dim", dec_dim);
        cmd->add_option("--dec-depth", dec_depth);
        cmd->add_option("--dec-heads", dec_heads);
        cmd->add_option("--licm", licm, "on|off");
        cmd->add_option("--mask-ratio", mask_ratio);
        cmd->add_option("--lambda", lambda);
        cmd->add_option("--lr", lr);
        cmd->add_option("--epochs", epochs);
        cmd->add_option("--batch", batch);
        cmd->add_option("--paradigm", paradigm_str, "single|joint1|joint2");
        cmd->add_option("--gt-resize", gt_resize, "bilinear|nearest");
        cmd->add_option("--weighting", weighting, "dw|none|ppa");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset with manifest");
    add_common(gen);
    gen->add_option("--count", count, "number of samples");
    gen->add_option("--size", size, "image side length in pixels");
    gen->add_option("--task", task_str, "cod|sod");
    gen->add_option("--split", split_str, "train|test tag for the manifest");

    auto* train = app.add_subcommand("train", "train a model on a manifest");
    add_common(train);
    add_model_flags(train);
    train->add_option("--manifest", manifest, "training manifest (cod side for joint paradigms)")->required();
    train->add_option("--manifest-sod", manifest_sod, "sod training manifest for joint paradigms");
    train->add_option("--ckpt", ckpt_path, "resume checkpoint if it exists");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    add_common(eval);
    eval->add_option("--ckpt", ckpt_path)->required();
    eval->add_option("--manifest", manifest)->required();
    eval->add_option("--task", task_str, "cod|sod")->required();
    eval->add_option("--dataset-name", dataset_name, "label for the report row");

    auto* predict = app.add_subcommand("predict", "run one image through a checkpoint");
    predict->add_option("--ckpt", ckpt_path)->required();
    predict->add_option("--in", in_path, "input PPM (P6) or PGM (P5)")->required();
    predict->add_option("--out", out_path, "output 8-bit PGM map")->required();

    auto* sweep = app.add_subcommand("sweep", "train and evaluate across masking ratios");
    add_common(sweep);
    add_model_flags(sweep);
    sweep->add_option("--manifest", manifest)->required();
    sweep->add_option("--eval-manifest", eval_manifest, "defaults to the training manifest");
    sweep->add_option("--task", task_str, "cod|sod");
    sweep->add_option("--ratios", ratios_str, "comma-separated masking ratios")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--trials", trials, "random instances per primitive");

    auto* report = app.add_subcommand("report", "combine eval report.json files into a table");
    add_common(report);
    report->add_option("inputs", report_inputs, "report.json files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 1;
    }

    try {
        if (!config_path.empty()) cfg.apply_kv(load_kv_file(config_path));
        // flags win over file values
        KvMap overrides;
        if (seed) {
            overrides["model.seed"] = std::to_string(*seed);
            overrides["train.seed"] = std::to_string(*seed);
            overrides["data.seed"] = std::to_string(*seed);
        }
        if (img_size) overrides["model.img_size"] = std::to_string(*img_size);
        if (patch) overrides["model.patch"] = std::to_string(*patch);
        if (enc_dim) overrides["model.enc_dim"] = std::to_string(*enc_dim);
        if (enc_depth) overrides["model.enc_depth"] = std::to_string(*enc_depth);
        if (enc_heads) overrides["model.enc_heads"] = std::to_string(*enc_heads);
        if (dec_dim) overrides["model.dec_dim"] = std::to_string(*dec_dim);
        if (dec_depth) overrides["model.dec_depth"] = std::to_string(*dec_depth);
        if (dec_heads) overrides["model.dec_heads"] = std::to_string(*dec_heads);
        if (licm) overrides["model.licm_enabled"] = (*licm == "on" ? "true" : "false");
        if (mask_ratio) overrides["train.mask_ratio"] = format_double(*mask_ratio);
        if (lambda) overrides["loss.lambda"] = format_double(*lambda);
        if (lr) overrides["train.lr0"] = format_double(*lr);
        if (epochs) overrides["train.epochs"] = std::to_string(*epochs);
        if (batch) overrides["train.batch_size"] = std::to_string(*batch);
        if (!paradigm_str.empty()) overrides["train.paradigm"] = paradigm_str;
        if (gt_resize) overrides["loss.gt_resize"] = *gt_resize;
        if (weighting) overrides["loss.weighting"] = *weighting;
        if (count) overrides["data.count"] = std::to_string(*count);
        if (size) overrides["data.size"] = std::to_string(*size);
        if (gen->parsed()) {
            overrides["data.task"] = task_str;
            if (!split_str.empty()) overrides["data.split"] = split_str;
            // camouflage level follows the task unless pinned explicitly
            if (!overrides.count("data.camo") && config_path.empty())
                overrides["data.camo"] = format_double(parse_task(task_str) == Task::Cod ? 0.9 : 0.1);
        }
        cfg.apply_kv(overrides);

        if (gen->parsed()) return cmd_gen_data(cfg, out_dir);
        if (train->parsed()) return cmd_train(cfg, manifest, manifest_sod, out_dir, ckpt_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, manifest, parse_task(task_str), out_dir, dataset_name);
        if (predict->parsed()) return cmd_predict(ckpt_path, in_path, out_path);
        if (sweep->parsed()) {
            std::vector<double> ratios;
            std::istringstream rs(ratios_str);
            std::string tok;
            while (std::getline(rs, tok, ',')) ratios.push_back(parse_double(tok));
            if (ratios.empty()) throw ContractError("--ratios list is empty");
            return cmd_sweep(cfg, manifest, eval_manifest, parse_task(task_str), ratios, out_dir);
        }
        if (gradcheck->parsed()) return cmd_gradcheck(trials);
        if (report->parsed()) return cmd_report(report_inputs, out_dir);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
