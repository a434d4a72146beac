#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mhyper/checkpoint.hpp"
#include "mhyper/selfcheck.hpp"
#include "mhyper/config.hpp"
#include "mhyper/train.hpp"
#include "toy_dataset.hpp"

using namespace mhyper;
namespace fs = std::filesystem;

namespace {

ModalityFeatures random_features(int n_entities, int dim, std::uint64_t seed,
                                 const char* tag, int mask_every = 4) {
    ModalityFeatures f;
    f.dim = dim;
    f.rows = MatF::Zero(n_entities, dim);
    f.present.assign(static_cast<std::size_t>(n_entities), 1);
    Rng rng = Rng::stream(seed, "test-features", Rng::mix(0, tag));
    for (int e = 0; e < n_entities; ++e) {
        if (mask_every > 0 && e % mask_every == 0) {
            f.present[static_cast<std::size_t>(e)] = 0;
            continue;
        }
        for (int x = 0; x < dim; ++x) f.rows(e, x) = static_cast<float>(rng.uniform(-1, 1));
    }
    return f;
}

using GradInstance = selfcheck::GradCheckInstance;

GradInstance grad_instance(std::uint64_t seed) {
    return selfcheck::grad_check_instance(seed);
}

} // namespace

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

TEST_CASE("analytic gradients match central finite differences on every table") {
    auto g = grad_instance(12342);
    auto errors = finite_difference_errors(g, 0.01, {});
    CHECK(errors.size() == 30);
    for (const auto& e : errors) {
        INFO("table ", e.table);
        CHECK(e.rel_err <= 1e-4);
    }
}

TEST_CASE("gradients are exact for each loss term in isolation") {
    // seeds chosen so every rectifier pre-activation sits well clear of the
    // finite-difference step
    const std::uint64_t seeds[4] = {913, 919, 12392, 12406};
    for (int term = 0; term < 4; ++term) {
        LossWeights<double> w;
        w.recon = term == 0 ? 1.0 : 0.0;
        w.distill = term == 1 ? 1.0 : 0.0;
        w.triple = term == 2 ? 1.0 : 0.0;
        w.reg = term == 3 ? 1.0 : 0.0;
        auto g = grad_instance(seeds[term]);
        auto errors = finite_difference_errors(g, 0.01, w);
        for (const auto& e : errors) {
            INFO("term ", term, " table ", e.table);
            CHECK(e.rel_err <= 1e-4);
        }
    }
}

TEST_CASE("locally constant loss gives zero gradients") {
    auto g = grad_instance(999);
    // only relation 0 in the batch: relation-1 rows receive no gradient
    g.batch = {{0, 0, 1}, {2, 0, 3}};
    NoiseModel<double> nm = refresh_noise_model<double>(g.params, g.data, 0.0);
    Rng rng(1);
    g.noise = sample_batch_noise<double>(2, nm, rng);
    ModelParams<double> grads = ModelParams<double>::zeros_like(g.params);
    compute_gradients<double>(g.batch, g.params, g.data, nullptr, 0.01, {}, grads);
    CHECK(grads.rel_trans.row(1).isZero());
    CHECK(grads.rel_rot.row(1).isZero());
    CHECK(grads.rel_temp_raw(1, 0) == 0.0);
}

TEST_CASE("n3 gradient example: x = (1, -2) gives lambda * (3, -12)") {
    const double x[2] = {1.0, -2.0};
    double acc[2] = {0.0, 0.0};
    detail::n3_grad_acc<double>(x, 0.5, acc, 2);
    CHECK(acc[0] == doctest::Approx(0.5 * 3.0));
    CHECK(acc[1] == doctest::Approx(0.5 * -12.0));
}

TEST_CASE("non-finite gradients abort with the table named") {
    auto g = grad_instance(4242);
    g.params.ent_struct_modal(0, 0) = std::numeric_limits<double>::infinity();
    ModelParams<double> grads = ModelParams<double>::zeros_like(g.params);
    try {
        compute_gradients<double>(g.batch, g.params, g.data, nullptr, 0.01, {}, grads);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("table") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// Adagrad
// ---------------------------------------------------------------------------

TEST_CASE("adagrad_step examples") {
    ModalityFeatures vis = random_features(3, 4, 1, "vis", 0);
    ModalityFeatures txt = random_features(3, 4, 1, "txt", 0);
    auto params = init_params<double>(3, 2, 1, vis, txt, 1);
    auto state = AdagradState<double>::init(params);
    auto grads = ModelParams<double>::zeros_like(params);

    // zero gradient: parameters unchanged
    auto before = params;
    adagrad_step<double>(params, grads, state, 0.1);
    CHECK(params.ent_struct_modal == before.ent_struct_modal);
    CHECK(params.rel_trans == before.rel_trans);

    // first step with g = 1: delta = -0.1 / (1 + 1e-10)
    grads.ent_struct_modal(0, 0) = 1.0;
    const double v0 = params.ent_struct_modal(0, 0);
    adagrad_step<double>(params, grads, state, 0.1);
    CHECK(params.ent_struct_modal(0, 0) ==
          doctest::Approx(v0 - 0.1 / (1.0 + 1e-10)).epsilon(1e-12));

    // second identical step: accumulator 2, delta magnitude 0.1 / sqrt(2)
    const double v1 = params.ent_struct_modal(0, 0);
    adagrad_step<double>(params, grads, state, 0.1);
    CHECK(params.ent_struct_modal(0, 0) ==
          doctest::Approx(v1 - 0.1 / (std::sqrt(2.0) + 1e-10)).epsilon(1e-10));
    // other entries untouched throughout
    CHECK(params.ent_struct_modal(1, 1) == before.ent_struct_modal(1, 1));

    // shape mismatch
    auto bad = ModelParams<double>::zeros_like(params);
    bad.rel_trans.resize(5, 8);
    bad.rel_trans.setZero();
    CHECK_THROWS_AS(adagrad_step<double>(params, bad, state, 0.1), DataError);
}

TEST_CASE("adagrad effective step size is nonincreasing under constant gradients") {
    ModalityFeatures vis = random_features(2, 3, 2, "vis", 0);
    ModalityFeatures txt = random_features(2, 3, 2, "txt", 0);
    auto params = init_params<double>(2, 2, 1, vis, txt, 2);
    auto state = AdagradState<double>::init(params);
    auto grads = ModelParams<double>::zeros_like(params);
    grads.ent_struct_modal(0, 0) = 0.7;
    double prev_step = std::numeric_limits<double>::infinity();
    double prev_val = params.ent_struct_modal(0, 0);
    for (int k = 0; k < 20; ++k) {
        adagrad_step<double>(params, grads, state, 0.1);
        const double step = std::abs(params.ent_struct_modal(0, 0) - prev_val);
        CHECK(step <= prev_step);
        prev_step = step;
        prev_val = params.ent_struct_modal(0, 0);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint round trip is bit-exact at f32") {
    auto dir = fs::temp_directory_path() / "mhyper_ckpt";
    fs::create_directories(dir);
    ModalityFeatures vis = random_features(4, 3, 5, "vis");
    ModalityFeatures txt = random_features(4, 2, 5, "txt");
    auto params = init_params<float>(4, 2, 2, vis, txt, 5);
    const auto p1 = (dir / "a.mhck").string();
    const auto p2 = (dir / "b.mhck").string();
    save_checkpoint<float>(p1, params);
    auto loaded = load_checkpoint<float>(p1);
    save_checkpoint<float>(p2, loaded);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(loaded.d == params.d);
    CHECK(loaded.dim_visual == 3);
    CHECK(loaded.ent_struct_modal == params.ent_struct_modal);
    CHECK(loaded.rel_temp_raw == params.rel_temp_raw);

    // compatibility check reports expected vs found
    KnowledgeGraph g;
    g.entities.intern("a");
    g.n_original_relations = 1;
    g.relations.intern("r");
    g.relations.intern("r^-1");
    try {
        check_checkpoint_compat<float>(params, g, vis, txt);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected") != std::string::npos);
        CHECK(msg.find("found") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

TEST_CASE("config parsing") {
    const std::string text =
        "# comment\n"
        "dataset = /tmp/data\n"
        "dim = 16\n"
        "learning_rate = 0.05\n"
        "beta = 0.4\n"
        "early_stop = true\n"
        "\n"
        "seed = 42\n";
    auto cfg = parse_config_text(text, "test");
    CHECK(cfg.dataset_dir == "/tmp/data");
    CHECK(cfg.dim == 16);
    CHECK(cfg.learning_rate == doctest::Approx(0.05));
    CHECK(cfg.beta == doctest::Approx(0.4));
    CHECK(cfg.early_stop == true);
    CHECK(cfg.seed == 42);
    // defaults preserved
    CHECK(cfg.batch_size == 1000);
    CHECK(cfg.lambda == doctest::Approx(0.005));

    CHECK_THROWS_AS(parse_config_text("nonsense_key = 3\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("dim = banana\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("dim 16\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("beta = 1.5\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("early_stop = yes\n", "test"), ConfigError);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TEST_CASE("train with zero epochs returns the initialized parameters") {
    auto dir = fs::temp_directory_path() / "mhyper_toy0";
    toy::write_dataset(dir.string());
    auto dataset = load_dataset(dir.string());
    TrainConfig cfg;
    cfg.dataset_dir = dir.string();
    cfg.dim = 4;
    cfg.epochs = 0;
    cfg.batch_size = 64;
    auto result = train<float>(cfg, dataset);
    CHECK(result.history.empty());
    CHECK(result.val_history.empty());
    auto init = init_params<float>(dataset.graph.num_entities(),
                                   dataset.graph.num_relations(), 4, dataset.visual,
                                   dataset.textual, cfg.seed);
    CHECK(result.best_params.ent_struct_modal == init.ent_struct_modal);
}

TEST_CASE("training is deterministic and the loss trend is nonincreasing") {
    auto dir = fs::temp_directory_path() / "mhyper_toy_train";
    toy::write_dataset(dir.string());
    auto dataset = load_dataset(dir.string());
    TrainConfig cfg;
    cfg.dataset_dir = dir.string();
    cfg.dim = 8;
    cfg.epochs = 10;
    cfg.eval_every = 5;
    cfg.seed = 7;
    auto a = train<float>(cfg, dataset);
    auto b = train<float>(cfg, dataset);
    REQUIRE(a.history.size() == 10);
    REQUIRE(b.history.size() == 10);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].total == b.history[i].total);
        CHECK(a.history[i].triple == b.history[i].triple);
    }
    CHECK(a.best_params.ent_struct_modal == b.best_params.ent_struct_modal);
    CHECK(a.best_params.rel_rot == b.best_params.rel_rot);

    // training loss, allowing 5% slack, does not increase over the first epochs
    for (std::size_t i = 1; i < a.history.size(); ++i) {
        CHECK(a.history[i].total <= 1.05 * a.history[i - 1].total);
    }

    // best checkpoint matches the best logged validation MRR
    REQUIRE(!a.val_history.empty());
    double best = -1;
    for (const auto& v : a.val_history) best = std::max(best, v.mrr);
    CHECK(a.best_mrr == doctest::Approx(best));
}

TEST_CASE("f64 training runs and validation history is populated") {
    auto dir = fs::temp_directory_path() / "mhyper_toy_f64";
    toy::write_dataset(dir.string());
    auto dataset = load_dataset(dir.string());
    TrainConfig cfg;
    cfg.dataset_dir = dir.string();
    cfg.dim = 4;
    cfg.epochs = 4;
    cfg.eval_every = 2;
    cfg.seed = 3;
    auto r = train<double>(cfg, dataset);
    CHECK(r.history.size() == 4);
    CHECK(r.val_history.size() == 2);
    CHECK(!r.aborted);
    CHECK(std::isfinite(r.best_mrr));
}
