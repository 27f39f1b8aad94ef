#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chains.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "synthgen.hpp"
#include "train.hpp"

using namespace lexchain;

namespace {

struct TrainFixture {
    SynthCorpus corpus;
    Vocab vocab;
    PromptSet prompts;
    ModelConfig mc;

    static TrainFixture make(long n_cases = 10) {
        GenSpec spec;
        spec.seed = 17;
        spec.n_cases = n_cases;
        SynthCorpus corpus = generate_corpus(spec);
        std::vector<std::string> docs;
        auto feed = [&docs, &corpus](const CaseRecord &rec) {
            docs.push_back(rec.fact);
            docs.push_back(render_case_relationships(rec, corpus.space));
            for (const auto &d : rec.defendants) {
                docs.push_back(d.name);
                docs.push_back(
                    render_judgment(d.gold, Task::forward_judgment, corpus.space));
                docs.push_back(
                    render_circumstance_set(d.gold.circumstances, corpus.space));
            }
        };
        for (const auto &rec : corpus.train) feed(rec);
        PromptSet prompts;
        auto prompt_list = prompts.all();
        std::vector<std::string> required(prompt_list.begin(), prompt_list.end());
        for (const auto *v :
             {&corpus.space.articles, &corpus.space.charges, &corpus.space.penalties,
              &corpus.space.relationships, &corpus.space.circumstances})
            for (const auto &s : v->surfaces()) required.push_back(s);
        Vocab vocab = Vocab::build(docs, 800, required);
        ModelConfig mc = ModelConfig::desk_preset();
        mc.vocab_size = vocab.size();
        mc.seed = 8;
        return TrainFixture{std::move(corpus), std::move(vocab), prompts, mc};
    }

    std::vector<SeqExample> examples(size_t n_cases) const {
        std::vector<SeqExample> out;
        ChainSettings full;
        for (size_t i = 0; i < n_cases && i < corpus.train.size(); ++i) {
            auto ex = build_training_examples(corpus.train[i], vocab, corpus.space,
                                              prompts, full, mc.max_suffix_len);
            out.insert(out.end(), ex.begin(), ex.end());
        }
        return out;
    }
};

} // namespace

TEST_CASE("training defaults carry the published regime") {
    TrainConfig tc;
    CHECK(tc.lambda_relationship == 0.6);
    CHECK(tc.lambda_circumstances == 0.8);
    CHECK(tc.lambda_forward == 1.4);
    CHECK(tc.lambda_backward == 1.2);
    CHECK(tc.warmup_ratio == 0.01);
    CHECK(tc.peak_lr == 1e-3);
    CHECK(tc.batch_size == 128);
    CHECK(tc.max_epochs == 20);
}

TEST_CASE("the warmup schedule hits its pinned values") {
    TrainConfig cfg;
    cfg.warmup_ratio = 0.01;
    cfg.peak_lr = 1e-3;
    const long total = 1000;
    const long warmup = 10; // ceil(0.01 * 1000)
    CHECK(lr_at(warmup, total, cfg) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(lr_at(total, total, cfg) == 0.0);
    CHECK(lr_at(warmup / 2, total, cfg) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(lr_at(0, total, cfg) == 0.0);
    CHECK_THROWS_AS(lr_at(0, 0, cfg), ConfigError);

    SUBCASE("continuous with a single peak at the warmup boundary") {
        double prev = lr_at(0, total, cfg);
        long peak_at = 0;
        double peak_val = 0.0;
        for (long s = 1; s <= total; ++s) {
            double lr = lr_at(s, total, cfg);
            CHECK(std::fabs(lr - prev) <= cfg.peak_lr / warmup + 1e-15);
            if (lr > peak_val) {
                peak_val = lr;
                peak_at = s;
            }
            prev = lr;
        }
        CHECK(peak_at == warmup);
        CHECK(peak_val == doctest::Approx(cfg.peak_lr));
    }
}

TEST_CASE("the weighted loss follows the stated lambda arithmetic") {
    std::array<double, 4> paper = {0.6, 0.8, 1.4, 1.2};
    std::array<std::optional<double>, 4> ones = {1.0, 1.0, 1.0, 1.0};
    CHECK(total_loss(ones, paper) == doctest::Approx(4.0).epsilon(1e-12));

    std::array<double, 4> fwd_only = {0.0, 0.0, 1.0, 0.0};
    std::array<std::optional<double>, 4> means = {0.3, 0.9, 0.7, 0.4};
    CHECK(total_loss(means, fwd_only) == doctest::Approx(0.7).epsilon(1e-12));

    SUBCASE("a task missing from the batch contributes zero") {
        std::array<std::optional<double>, 4> sparse = {std::nullopt, 0.9, 0.7,
                                                       std::nullopt};
        CHECK(total_loss(sparse, paper) ==
              doctest::Approx(0.8 * 0.9 + 1.4 * 0.7).epsilon(1e-12));
    }
    SUBCASE("doubling one lambda exactly doubles that contribution") {
        std::array<double, 4> doubled = paper;
        doubled[0] *= 2.0;
        double base = total_loss(means, paper);
        double shifted = total_loss(means, doubled);
        CHECK(shifted - base == doctest::Approx(0.6 * 0.3).epsilon(1e-12));
    }
}

TEST_CASE("gradient accumulation reproduces the big-batch update") {
    TrainFixture fx = TrainFixture::make();
    std::vector<SeqExample> batch = fx.examples(1);
    REQUIRE(batch.size() >= 4);
    batch.resize(4);
    TrainConfig tc;
    tc.peak_lr = 1e-3;

    auto run_step = [&](int batch_size, int accum) {
        Model model(fx.mc);
        model.init_weights();
        TaskBatchGrads acc(model.params);
        size_t cursor = 0;
        for (int micro = 0; micro < accum; ++micro) {
            std::vector<SeqExample> mb(batch.begin() + static_cast<long>(cursor),
                                       batch.begin() +
                                           static_cast<long>(cursor + batch_size));
            cursor += static_cast<size_t>(batch_size);
            accumulate_task_grads(model, mb, acc, 1);
        }
        GradAccum grads(model.params);
        auto lambdas = tc.lambdas();
        for (size_t t = 0; t < 4; ++t)
            if (acc.sums[t].tokens > 0)
                grads.add_scaled(acc.grads[t],
                                 lambdas[t] / static_cast<double>(acc.sums[t].tokens));
        AdamW opt(model.params, tc);
        opt.step(model.params, grads, 1e-3);
        return model;
    };

    Model a = run_step(4, 1);
    Model b = run_step(1, 4);
    for (int p = 0; p < a.params.count(); ++p) {
        const auto &pa = a.params.value(p).a;
        const auto &pb = b.params.value(p).a;
        for (size_t i = 0; i < pa.size(); ++i) {
            double denom = std::max({std::fabs(pa[i]), std::fabs(pb[i]), 1e-12});
            CHECK(std::fabs(pa[i] - pb[i]) / denom <= 1e-6);
        }
    }
}

TEST_CASE("training runs, checkpoints the best model, and logs monotone bests") {
    TrainFixture fx = TrainFixture::make(12);
    Model model(fx.mc);
    model.init_weights();
    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_epochs = 2;
    tc.peak_lr = 2e-3;
    tc.val_max_cases = 2;
    tc.seed = 5;
    CheckpointMeta meta;
    meta.vocab_hash = fx.vocab.hash();
    meta.label_hash = fx.corpus.space.hash();
    std::filesystem::create_directories("train_smoke");
    std::ostringstream log;
    TrainOutcome outcome =
        train_model(model, tc, ChainSettings{}, fx.prompts, fx.corpus.train,
                    fx.corpus.val, fx.vocab, fx.corpus.space, meta, "train_smoke",
                    &log, 2);
    CHECK(outcome.steps > 0);
    CHECK(outcome.best_val_step >= 0);
    CHECK(std::filesystem::exists("train_smoke/best.ckpt"));

    CheckpointMeta loaded_meta;
    Model loaded = load_checkpoint("train_smoke/best.ckpt", loaded_meta);
    CHECK(loaded_meta.vocab_hash == fx.vocab.hash());
    CHECK(loaded.cfg.d_model == fx.mc.d_model);

    // Model selection never records a "best" below an earlier best.
    std::istringstream lines(log.str());
    std::string line;
    double best_seen = -1.0;
    long best_records = 0;
    while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        if (!j.contains("val_mean_f1")) continue;
        if (j.at("best").get<bool>()) {
            double metric = j.at("val_mean_f1").get<double>();
            CHECK(metric >= best_seen);
            best_seen = metric;
            ++best_records;
        }
    }
    CHECK(best_records >= 1);
    std::filesystem::remove_all("train_smoke");
}

TEST_CASE("fixed seeds give identical loss curves") {
    TrainFixture fx = TrainFixture::make(12);
    auto run = [&fx] {
        Model model(fx.mc);
        model.init_weights();
        TrainConfig tc;
        tc.batch_size = 8;
        tc.max_epochs = 1;
        tc.val_max_cases = 1;
        tc.seed = 5;
        CheckpointMeta meta;
        std::filesystem::create_directories("train_det");
        std::ostringstream log;
        train_model(model, tc, ChainSettings{}, fx.prompts, fx.corpus.train,
                    fx.corpus.val, fx.vocab, fx.corpus.space, meta, "train_det", &log,
                    2);
        return log.str();
    };
    std::string a = run();
    std::string b = run();
    CHECK(a == b);
    std::filesystem::remove_all("train_det");
}

TEST_CASE("divergence aborts with a numeric error that names the checkpoint") {
    TrainFixture fx = TrainFixture::make(12);
    Model model(fx.mc);
    model.init_weights();
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 3;
    tc.peak_lr = 1e14; // guaranteed blow-up after the first update
    tc.warmup_ratio = 0.0;
    tc.eval_every = 1;
    tc.val_max_cases = 1;
    CheckpointMeta meta;
    std::filesystem::create_directories("train_div");
    CHECK_THROWS_AS(train_model(model, tc, ChainSettings{}, fx.prompts,
                                fx.corpus.train, fx.corpus.val, fx.vocab,
                                fx.corpus.space, meta, "train_div", nullptr, 2),
                    NumericError);
    std::filesystem::remove_all("train_div");
}
