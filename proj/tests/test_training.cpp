#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "senet/training.hpp"

using namespace senet;
namespace fs = std::filesystem;

namespace {

ModelConfig small_cfg(std::uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.img_size = 32;
    cfg.patch = 8;
    cfg.enc_dim = 16;
    cfg.enc_depth = 1;
    cfg.enc_heads = 2;
    cfg.dec_dim = 8;
    cfg.dec_depth = 1;
    cfg.dec_heads = 2;
    cfg.licm_channels = 2;
    cfg.head_channels = 4;
    cfg.seed = seed;
    return cfg;
}

std::vector<LoadedSample> synth_dataset(Task task, int count, std::int64_t size, std::uint64_t seed) {
    SynthConfig scfg = SynthConfig::for_mode(task, size, seed);
    scfg.object_scale_lo = 0.05;
    scfg.object_scale_hi = 0.25;
    std::vector<LoadedSample> out;
    for (int i = 0; i < count; ++i) {
        auto s = generate_sample(scfg, i);
        out.push_back({std::move(s.image), std::move(s.mask), task, "synth" + std::to_string(i)});
    }
    return out;
}

TrainConfig fast_train(std::int64_t epochs) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 4;
    t.lr0 = 1e-3;
    t.seed = 17;
    return t;
}

}  // namespace

TEST_CASE("poly_lr endpoints and midpoint") {
    CHECK(poly_lr(0, 100, 1e-4, 0.9) == 1e-4);
    CHECK(poly_lr(50, 100, 1e-4, 0.9) == doctest::Approx(5.3588673e-5).epsilon(1e-6));
    CHECK(poly_lr(100, 100, 1e-4, 0.9) == 0.0);
    CHECK_THROWS_AS(poly_lr(0, 0, 1e-4, 0.9), ContractError);

    // nonincreasing trace
    double prev = 1e9;
    for (int s = 0; s <= 40; ++s) {
        const double lr = poly_lr(s, 40, 1e-4, 0.9);
        CHECK(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
    ParamStore<double> ps;
    ps.add("w", TensorD::from({3}, {1.0, -2.0, 0.5}));
    Adam<double> opt(ps);
    TensorD g = TensorD::from({3}, {0.4, -0.3, 2.0});
    opt.step(ps, {&g}, 0.01);
    CHECK(opt.t() == 1);
    const auto& w = ps.get("w").value;
    CHECK(w[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-4));
    CHECK(w[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam zero gradient leaves parameters unchanged but advances t") {
    ParamStore<double> ps;
    ps.add("w", TensorD::from({2}, {1.0, 2.0}));
    Adam<double> opt(ps);
    TensorD zero(Shape{2});
    opt.step(ps, {&zero}, 0.1);
    CHECK(opt.t() == 1);
    CHECK(ps.get("w").value[0] == 1.0);
    CHECK(ps.get("w").value[1] == 2.0);
    // null gradient means the same thing
    opt.step(ps, {nullptr}, 0.1);
    CHECK(opt.t() == 2);
    CHECK(ps.get("w").value[0] == 1.0);
}

TEST_CASE("two trainer runs from one seed are bit-identical") {
    auto data = synth_dataset(Task::Cod, 6, 48, 5);
    auto run = [&]() {
        auto model = SenetModel<float>::single(small_cfg());
        Trainer<float> tr(model, fast_train(4), LossConfig{}, data);
        tr.run(10);
        return std::pair(trace_csv(tr.trace(), false), model.params().all());
    };
    auto [csv_a, params_a] = run();
    auto [csv_b, params_b] = run();
    CHECK(csv_a == csv_b);
    REQUIRE(params_a.size() == params_b.size());
    for (std::size_t i = 0; i < params_a.size(); ++i)
        for (std::int64_t j = 0; j < params_a[i].value.numel(); ++j)
            CHECK(params_a[i].value[j] == params_b[i].value[j]);
}

TEST_CASE("trace length equals epochs times batches per epoch") {
    auto data = synth_dataset(Task::Sod, 6, 48, 9);
    auto model = SenetModel<float>::single(small_cfg());
    Trainer<float> tr(model, fast_train(3), LossConfig{}, data);  // 6 samples, batch 4 -> 2 steps per epoch
    CHECK(tr.steps_per_epoch() == 2);
    CHECK(tr.total_steps() == 6);
    tr.run();
    CHECK(tr.trace().size() == 6);
    CHECK(tr.trace().front().step == 1);
    CHECK(tr.trace().front().lr == doctest::Approx(1e-3));
}

TEST_CASE("mask ratio zero keeps reconstruction loss at exactly zero") {
    auto data = synth_dataset(Task::Cod, 4, 48, 7);
    auto model = SenetModel<float>::single(small_cfg());
    auto tcfg = fast_train(3);
    tcfg.mask_ratio_train = 0.0;
    Trainer<float> tr(model, tcfg, LossConfig{}, data);
    tr.run();
    for (const auto& row : tr.trace()) CHECK(row.l_recon == 0.0);
}

TEST_CASE("empty dataset and mixed-task datasets are rejected") {
    auto model = SenetModel<float>::single(small_cfg());
    CHECK_THROWS_AS(Trainer<float>(model, fast_train(1), LossConfig{}, {}), ContractError);

    auto mixed = synth_dataset(Task::Cod, 2, 32, 3);
    auto sod = synth_dataset(Task::Sod, 2, 32, 4);
    mixed.push_back(sod[0]);
    CHECK_THROWS_AS(Trainer<float>(model, fast_train(1), LossConfig{}, mixed), ContractError);
}

TEST_CASE("joint paradigm 2: loss average, decoder isolation, encoder superposition") {
    auto cfg = small_cfg(11);
    SenetModel<double> model(cfg, {"cod", "sod"});
    auto cod = synth_dataset(Task::Cod, 4, 48, 21);
    auto sod = synth_dataset(Task::Sod, 4, 48, 22);
    LossConfig lcfg;
    std::vector<PreppedSample<double>> cod_p, sod_p;
    for (const auto& s : cod) cod_p.push_back(prep_sample<double>(s, cfg, lcfg));
    for (const auto& s : sod) sod_p.push_back(prep_sample<double>(s, cfg, lcfg));

    Prng rng(33);
    Tape<double> tape;
    Binder<double> bind(tape);
    auto cl = build_batch_loss(tape, bind, model, cod_p, 0, 4, rng, 0.05, lcfg, "cod", true, false);
    auto sl = build_batch_loss(tape, bind, model, sod_p, 0, 4, rng, 0.05, lcfg, "sod", true, false);
    auto combined = tape.scale(tape.add(cl.loss, sl.loss), 0.5);
    CHECK(tape.val(combined).value() ==
          doctest::Approx(0.5 * (cl.total_value + sl.total_value)).epsilon(1e-12));

    // backward of the cod half only: sod decoder gradients identically zero
    tape.backward(cl.loss);
    for (auto& p : model.params().all()) {
        if (p.name.rfind("dec/sod/", 0) == 0 && bind.bound(p)) {
            const auto& g = tape.grad(bind.index_of(p));
            for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
        }
    }

    // encoder gradient of the combined loss equals the sum of the two halves
    Prng rng2(33);
    Tape<double> t2;
    Binder<double> b2(t2);
    auto cl2 = build_batch_loss(t2, b2, model, cod_p, 0, 4, rng2, 0.05, lcfg, "cod", true, false);
    auto sl2 = build_batch_loss(t2, b2, model, sod_p, 0, 4, rng2, 0.05, lcfg, "sod", true, false);
    auto comb2 = t2.scale(t2.add(cl2.loss, sl2.loss), 0.5);
    t2.backward(comb2);

    Prng rng3(33);
    Tape<double> t3;
    Binder<double> b3(t3);
    auto cl3 = build_batch_loss(t3, b3, model, cod_p, 0, 4, rng3, 0.05, lcfg, "cod", true, false);
    auto half_c = t3.scale(cl3.loss, 0.5);
    auto sl3 = build_batch_loss(t3, b3, model, sod_p, 0, 4, rng3, 0.05, lcfg, "sod", true, false);
    auto half_s = t3.scale(sl3.loss, 0.5);
    t3.backward(half_c);
    t3.backward(half_s);

    for (auto& p : model.params().all()) {
        if (p.name.rfind("enc/", 0) != 0 || !p.trainable) continue;
        REQUIRE(b2.bound(p));
        REQUIRE(b3.bound(p));
        const auto& ga = t2.grad(b2.index_of(p));
        const auto& gb = t3.grad(b3.index_of(p));
        for (std::int64_t i = 0; i < ga.numel(); ++i) CHECK(std::abs(ga[i] - gb[i]) < 1e-6);
    }
}

TEST_CASE("checkpoint round trip is byte-identical and resume matches uninterrupted run") {
    auto dir = fs::temp_directory_path() / "senet_train_test";
    fs::create_directories(dir);
    auto data = synth_dataset(Task::Cod, 6, 48, 31);

    // uninterrupted 10 steps
    auto model_a = SenetModel<float>::single(small_cfg(77));
    Trainer<float> tr_a(model_a, fast_train(5), LossConfig{}, data);
    tr_a.run(10);

    // interrupted at 5 + resumed 5
    auto model_b = SenetModel<float>::single(small_cfg(77));
    Trainer<float> tr_b(model_b, fast_train(5), LossConfig{}, data);
    tr_b.run(5);
    const auto ckpt_path = (dir / "mid.ckpt").string();
    tr_b.save(ckpt_path);

    auto model_c = SenetModel<float>::single(small_cfg(77));
    Trainer<float> tr_c(model_c, fast_train(5), LossConfig{}, data);
    tr_c.restore(read_checkpoint(ckpt_path));
    CHECK(tr_c.step() == 5);
    tr_c.run(5);

    const auto& pa = model_a.params().all();
    const auto& pc = model_c.params().all();
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::int64_t j = 0; j < pa[i].value.numel(); ++j) CHECK(pa[i].value[j] == pc[i].value[j]);

    // the resumed trace rows equal the uninterrupted ones
    for (std::size_t i = 0; i < tr_c.trace().size(); ++i) {
        const auto& ra = tr_a.trace()[i + 5];
        const auto& rc = tr_c.trace()[i];
        CHECK(ra.l_total == rc.l_total);
    }

    // save -> load -> save is byte-identical
    const auto p1 = (dir / "a.ckpt").string();
    const auto p2 = (dir / "b.ckpt").string();
    tr_a.save(p1);
    auto model_d = SenetModel<float>::single(small_cfg(77));
    Trainer<float> tr_d(model_d, fast_train(5), LossConfig{}, data);
    tr_d.restore(read_checkpoint(p1));
    tr_d.save(p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);

    // corrupted magic is rejected with a format error
    auto bad = s1;
    bad[0] = 'X';
    const auto pbad = (dir / "bad.ckpt").string();
    std::ofstream(pbad, std::ios::binary).write(bad.data(), std::streamsize(bad.size()));
    CHECK_THROWS_AS(read_checkpoint(pbad), FormatError);

    // config mismatch is rejected
    auto model_e = SenetModel<float>::single(small_cfg(78));
    Trainer<float> tr_e(model_e, fast_train(5), LossConfig{}, data);
    CHECK_THROWS_AS(tr_e.restore(read_checkpoint(p1)), FormatError);
}

TEST_CASE("evaluation is deterministic, never masks, and routes by task") {
    auto data = synth_dataset(Task::Cod, 3, 48, 41);
    auto model = SenetModel<float>::single(small_cfg(13));
    std::vector<std::int64_t> tokens;
    auto r1 = evaluate_model(model, data, Task::Cod, &tokens);
    auto r2 = evaluate_model(model, data, Task::Cod);
    CHECK(r1.mae == r2.mae);
    CHECK(r1.score_value == r2.score_value);
    for (auto t : tokens) CHECK(t == model.config().tokens());

    // cross-domain: single-decoder model accepts the other task
    auto sod_data = synth_dataset(Task::Sod, 2, 48, 42);
    auto cross = evaluate_model(model, sod_data, Task::Sod);
    CHECK(cross.per_image.size() == 2);

    // paradigm-2 model routes to the task decoder
    SenetModel<float> joint(small_cfg(14), {"cod", "sod"});
    CHECK(joint.route("cod") == "cod");
    CHECK(joint.route("sod") == "sod");
    auto jr = evaluate_model(joint, data, Task::Cod);
    CHECK(jr.per_image.size() == 3);

    CHECK_THROWS_AS(evaluate_model(model, {}, Task::Cod), ContractError);
}

TEST_CASE("threaded evaluation matches single-threaded results") {
    auto data = synth_dataset(Task::Sod, 5, 48, 51);
    auto model = SenetModel<float>::single(small_cfg(15));
    auto serial = evaluate_model(model, data, Task::Sod);
    setenv("SENET_THREADS", "3", 1);
    auto parallel = evaluate_model(model, data, Task::Sod);
    unsetenv("SENET_THREADS");
    CHECK(serial.mae == parallel.mae);
    CHECK(serial.s_alpha == parallel.s_alpha);
    CHECK(serial.score_value == parallel.score_value);
}

TEST_CASE("sweep emits one row per ratio") {
    auto train = synth_dataset(Task::Cod, 4, 48, 61);
    auto eval = synth_dataset(Task::Cod, 2, 48, 62);
    auto tcfg = fast_train(1);
    auto rows = mask_ratio_sweep<float>(small_cfg(16), tcfg, LossConfig{}, train, eval, Task::Cod, {0.0, 0.25});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ratio == 0.0);
    CHECK(rows[1].ratio == 0.25);
    const auto csv = sweep_csv(rows);
    CHECK(csv.find("ratio,") == 0);
    CHECK_THROWS_AS(mask_ratio_sweep<float>(small_cfg(16), tcfg, LossConfig{}, train, eval, Task::Cod, {0.99}),
                    ContractError);
}
