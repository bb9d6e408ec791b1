#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "gkg/harness.hpp"
#include "gkg/report.hpp"
#include "gkg/toy.hpp"
#include "gkg/trainer.hpp"

using namespace gkg;

namespace {

Corpus toy_corpus(PromptStrategy strategy = {StrategyVariant::Full}, std::uint64_t seed = 19) {
    ToySpec spec;
    spec.train_per_family = 12;
    spec.test_per_family = 6;
    spec.held_out_test = 3;
    ToyData toy = generate_toy_corpus(spec, seed);
    return assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, strategy);
}

}  // namespace

TEST_CASE("an oracle decoder that echoes gold scores 1.0 everywhere") {
    Corpus corpus = toy_corpus();
    DecodeFn echo = [](const GkgRecord& rec) { return rec.output; };
    EvalRun run = evaluate_with(echo, corpus, {StrategyVariant::Full}, "oracle", "toy");
    REQUIRE(run.report.overall == 1.0);
    for (const auto& d : run.report.per_dataset) REQUIRE(d.score == 1.0);
    for (const auto& [family, score] : run.report.per_graph) REQUIRE(score == 1.0);
}

TEST_CASE("an empty-string decoder scores 0.0 everywhere") {
    Corpus corpus = toy_corpus();
    DecodeFn empty = [](const GkgRecord&) { return std::string(); };
    EvalRun run = evaluate_with(empty, corpus, {StrategyVariant::Full}, "null", "toy");
    REQUIRE(run.report.overall == 0.0);
    for (const auto& d : run.report.per_dataset) REQUIRE(d.score == 0.0);
}

TEST_CASE("prediction completeness: one prediction per test record, unique ids") {
    Corpus corpus = toy_corpus();
    DecodeFn echo = [](const GkgRecord& rec) { return rec.output; };
    EvalRun run = evaluate_with(echo, corpus, {StrategyVariant::Full}, "oracle", "toy");
    REQUIRE(run.predictions.size() == corpus.test_total());
    std::set<std::string> ids;
    for (const auto& p : run.predictions) REQUIRE(ids.insert(p.record_id).second);
    for (const auto& [key, records] : corpus.test)
        for (const auto& r : records) REQUIRE(ids.count(r.id) == 1);
}

TEST_CASE("report arithmetic is reproducible from the per-dataset map") {
    Corpus corpus = toy_corpus();
    DecodeFn flaky = [](const GkgRecord& rec) {
        return rec.id.size() % 2 == 0 ? rec.output : std::string("wrong");
    };
    EvalRun run = evaluate_with(flaky, corpus, {StrategyVariant::Full}, "flaky", "toy");
    MetricReport recomputed = aggregate(run.report.per_dataset);
    REQUIRE(recomputed.overall == run.report.overall);
    REQUIRE(recomputed.per_graph == run.report.per_graph);
}

TEST_CASE("ood_report filters to held-out datasets") {
    Corpus corpus = toy_corpus();
    // score 1.0 on ETRE.toy_tcr, 0.0 on the other held-out sets, 0.3-ish elsewhere
    DecodeFn decode = [](const GkgRecord& rec) {
        if (rec.dataset_key() == "ETRE.toy_tcr") return rec.output;
        return std::string();
    };
    EvalRun run = evaluate_with(decode, corpus, {StrategyVariant::Full}, "x", "toy");
    MetricReport ood = ood_report(run);
    REQUIRE(ood.per_dataset.size() == 3);  // toy_tcr, toy_causal, toy_r8
    for (const auto& d : ood.per_dataset) REQUIRE(d.descriptor.held_out);
    // mean of {1, 0, 0}
    REQUIRE_THAT(ood.overall, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));

    SECTION("in-domain rows are absent from the filtered report") {
        for (const auto& d : ood.per_dataset) REQUIRE(d.descriptor.dataset_name != "toy_news");
    }
    SECTION("a run without held-out datasets errors") {
        EvalRun stripped = run;
        std::vector<DatasetScore> kept;
        for (const auto& d : stripped.report.per_dataset)
            if (!d.descriptor.held_out) kept.push_back(d);
        stripped.report = aggregate(kept);
        REQUIRE_THROWS(ood_report(stripped));
    }
}

TEST_CASE("ood_report on two held-out datasets scoring 0.4 and 0.6 averages 0.5") {
    std::vector<DatasetScore> scores;
    DatasetScore in;
    in.descriptor.family = GraphFamily::KG;
    in.descriptor.task_code = "SRE";
    in.descriptor.dataset_name = "in_domain";
    in.score = 0.9;
    DatasetScore a = in;
    a.descriptor.dataset_name = "ood_a";
    a.descriptor.held_out = true;
    a.score = 0.4;
    DatasetScore b = a;
    b.descriptor.dataset_name = "ood_b";
    b.score = 0.6;
    EvalRun run;
    run.report = aggregate({in, a, b});
    MetricReport ood = ood_report(run);
    REQUIRE(ood.per_dataset.size() == 2);
    REQUIRE_THAT(ood.overall, Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("stage_comparison evaluates each checkpoint and checks lineage") {
    ModelConfig mc;
    mc.d_model = 16;
    mc.n_layers = 1;
    mc.n_heads = 4;
    mc.d_ff = 24;
    mc.max_seq_len = 256;
    mc.rank = 4;
    auto base = init_checkpoint<float>(mc, 23);
    Corpus corpus = toy_corpus();
    EvalOptions options;
    options.max_new = 8;

    SECTION("identical checkpoints give identical rows") {
        std::vector<Checkpoint<float>> three = {base, base, base};
        // silence lineage warnings by wiring the chain
        three[1].parent_hash = checkpoint_hash(three[0]);
        three[2].parent_hash = checkpoint_hash(three[1]);
        StageComparison cmp = stage_comparison(three, corpus, {StrategyVariant::Full}, options);
        REQUIRE(cmp.rows.size() == 3);
        REQUIRE(cmp.warnings.empty());
        REQUIRE(cmp.rows[0].overall == cmp.rows[1].overall);
        REQUIRE(cmp.rows[1].per_graph == cmp.rows[2].per_graph);
    }
    SECTION("a broken parent hash is recorded as a warning, not an error") {
        std::vector<Checkpoint<float>> three = {base, base, base};
        three[1].parent_hash = "bogus";
        three[2].parent_hash = checkpoint_hash(three[1]);
        StageComparison cmp = stage_comparison(three, corpus, {StrategyVariant::Full}, options);
        REQUIRE(cmp.warnings.size() == 1);
        REQUIRE(cmp.rows.size() == 3);
    }
}

TEST_CASE("ablation_prompts reports deltas against the Full baseline") {
    Corpus corpora[4] = {toy_corpus({StrategyVariant::Full}),
                         toy_corpus({StrategyVariant::SingleInstruction}),
                         toy_corpus({StrategyVariant::ZeroShotOnly}),
                         toy_corpus({StrategyVariant::SingleAndZero})};
    CorpusBuilder corpus_for = [&](PromptStrategy s) {
        return corpora[static_cast<int>(s.variant)];
    };
    ModelConfig mc;
    mc.d_model = 16;
    mc.n_layers = 1;
    mc.n_heads = 4;
    mc.d_ff = 24;
    mc.max_seq_len = 256;
    mc.rank = 4;
    auto ckpt = init_checkpoint<float>(mc, 29);
    CheckpointFactory checkpoint_for = [&](PromptStrategy) { return ckpt; };
    EvalOptions options;
    options.max_new = 4;

    std::vector<PromptStrategy> strategies = {{StrategyVariant::Full},
                                              {StrategyVariant::SingleInstruction},
                                              {StrategyVariant::SingleAndZero}};
    auto rows = ablation_prompts(checkpoint_for, corpus_for, strategies, options);
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[0].strategy.variant == StrategyVariant::Full);
    REQUIRE(rows[0].delta_overall == 0.0);
    for (const auto& [family, d] : rows[0].delta_per_graph) REQUIRE(d == 0.0);

    SECTION("Full missing is an error") {
        std::vector<PromptStrategy> no_full = {{StrategyVariant::ZeroShotOnly}};
        REQUIRE_THROWS(ablation_prompts(checkpoint_for, corpus_for, no_full, options));
    }
    SECTION("the SingleAndZero corpus has one template in use and zero demonstrations") {
        const Corpus& sz = corpora[static_cast<int>(StrategyVariant::SingleAndZero)];
        ToyData toy = generate_toy_corpus({12, 6, 3}, 19);
        for (const auto& [key, records] : sz.train) {
            for (const auto& r : records) {
                REQUIRE(r.shot == ShotMode::Zero);
                std::string task = r.id.substr(0, r.id.find('.'));
                REQUIRE(r.instruction == toy.pool_for(task).templates[0]);
            }
        }
    }
}

TEST_CASE("strategy isolation: prompts differ unless template-0 zero-shot in both") {
    Corpus full = toy_corpus({StrategyVariant::Full});
    Corpus sz = toy_corpus({StrategyVariant::SingleAndZero});
    ToyData toy = generate_toy_corpus({12, 6, 3}, 19);
    for (const auto& [key, records] : full.test) {
        const auto& other = sz.test.at(key);
        REQUIRE(other.size() == records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            std::string pf = render_prompt(records[i]);
            std::string ps = render_prompt(other[i]);
            if (pf == ps) {
                std::string task = records[i].id.substr(0, records[i].id.find('.'));
                REQUIRE(records[i].shot == ShotMode::Zero);
                REQUIRE(records[i].instruction == toy.pool_for(task).templates[0]);
            }
        }
    }
}

TEST_CASE("markdown report carries stars, daggers and the average row") {
    Corpus corpus = toy_corpus();
    DecodeFn echo = [](const GkgRecord& rec) { return rec.output; };
    EvalRun run = evaluate_with(echo, corpus, {StrategyVariant::Full}, "oracle", "toy");
    std::string md = render_markdown_report(run.report);
    REQUIRE(md.find("toy_tcr*") != std::string::npos);       // held-out starred
    REQUIRE(md.find("toy_r8*") != std::string::npos);
    REQUIRE(md.find("AG†") != std::string::npos);       // ROUGE-L daggered
    REQUIRE(md.find("NLG†") != std::string::npos);
    REQUIRE(md.find("SRE†") == std::string::npos);      // micro-F1 rows are not
    REQUIRE(md.find("toy_news*") == std::string::npos);      // in-domain rows are not
    REQUIRE(md.find("**Average Performance**") != std::string::npos);
    REQUIRE(md.find("1.0000") != std::string::npos);
}

TEST_CASE("prediction JSONL round-trips") {
    std::vector<PredictionRecord> preds = {{"SRE.toy.0", "<a, r, b>", "<a, r, b>"},
                                           {"AG.toy.1", "gold text", "pred\ntext"}};
    auto restored = predictions_from_jsonl(predictions_to_jsonl(preds));
    REQUIRE(restored.size() == 2);
    REQUIRE(restored[1].predicted == "pred\ntext");
    REQUIRE(restored[0].gold == "<a, r, b>");
}

TEST_CASE("predictions with arbitrary bytes survive the file round trip") {
    // byte-level decoding can cut a multi-byte character or emit raw bytes
    std::string garbage = "ok\x8B\xFFmiddle\xE2\x9F";  // invalid UTF-8
    std::string valid = "unicode \xE2\x9F\xA8triple\xE2\x9F\xA9";
    std::vector<PredictionRecord> preds = {{"SRE.toy.0", "g", garbage},
                                           {"SRE.toy.1", "g", valid}};
    std::string jsonl = predictions_to_jsonl(preds);  // must not throw
    auto restored = predictions_from_jsonl(jsonl);
    REQUIRE(restored[0].predicted == garbage);
    REQUIRE(restored[1].predicted == valid);
    REQUIRE(jsonl.find("latin-1") != std::string::npos);
}

TEST_CASE("first-line truncation variant is scored alongside") {
    Corpus corpus = toy_corpus();
    DecodeFn noisy = [](const GkgRecord& rec) { return rec.output + "\ngarbage tail"; };
    EvalRun run = evaluate_with(noisy, corpus, {StrategyVariant::Full}, "noisy", "toy");
    for (const auto& d : run.report.per_dataset) {
        if (d.descriptor.metric == MetricKind::MicroF1) continue;
        // rouge over the full decoded string is hurt by the tail; the
        // first-line variant recovers the perfect score
        REQUIRE(d.score_first_line == 1.0);
        REQUIRE(d.score < 1.0);
    }
}
