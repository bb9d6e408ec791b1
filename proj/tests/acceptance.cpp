// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gkg/pipeline.hpp"

using namespace gkg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %-24s %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Exponential-time oracle, independent of the DP implementation.
std::size_t lcs_brute_force(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t best = 0;
    for (std::size_t mask = 0; mask < (1u << a.size()); ++mask) {
        std::size_t len = 0, j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < a.size() && ok; ++i) {
            if (!(mask & (1u << i))) continue;
            while (j < b.size() && b[j] != a[i]) ++j;
            if (j == b.size())
                ok = false;
            else {
                ++len;
                ++j;
            }
        }
        if (ok && len > best) best = len;
    }
    return best;
}

// ---------------------------------------------------------------------------

void criterion1_metric_oracles() {
    auto t0 = Clock::now();
    KeyedRng rng(101, "lcs-oracle");
    int lcs_mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> a(rng.next_below(13)), b(rng.next_below(13));
        for (auto& t : a) t = std::string(1, char('a' + rng.next_below(4)));
        for (auto& t : b) t = std::string(1, char('a' + rng.next_below(4)));
        if (lcs_length(a, b) != lcs_brute_force(a, b)) ++lcs_mismatches;
    }

    int f1_mismatches = 0;
    KeyedRng frng(102, "f1-oracle");
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<StructuredItems, StructuredItems>> pairs;
        long long tp = 0, fp = 0, fn = 0;
        std::size_t n_pairs = 1 + frng.next_below(6);
        for (std::size_t p = 0; p < n_pairs; ++p) {
            StructuredItems gold, pred;
            for (int k = 0; k < 7; ++k) {
                std::string item(1, char('a' + frng.next_below(9)));
                if (frng.next_below(2)) gold.items.insert(item);
                if (frng.next_below(2)) pred.items.insert(item);
            }
            for (const auto& item : pred.items) {
                if (gold.items.count(item))
                    ++tp;
                else
                    ++fp;
            }
            for (const auto& item : gold.items)
                if (!pred.items.count(item)) ++fn;
            pairs.push_back({std::move(gold), std::move(pred)});
        }
        double want = (2 * tp + fp + fn) == 0 ? 0.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
        if (std::abs(micro_f1(pairs) - want) > 1e-12) ++f1_mismatches;
    }

    double rouge = rouge_l("the cat sat on the mat", "the cat on mat");
    bool rouge_ok = std::abs(rouge - 0.8) <= 1e-9;
    double secs = seconds_since(t0);
    bool pass = lcs_mismatches == 0 && f1_mismatches == 0 && rouge_ok && secs < 30.0;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "lcs mismatches 0/1000=%d, f1 mismatches 0/200=%d, rouge=%.10f, %.1fs",
                  lcs_mismatches, f1_mismatches, rouge, secs);
    report(1, "metric oracles", pass, detail);
}

void criterion2_gradients() {
    auto t0 = Clock::now();
    struct Shape {
        int d, heads, ff;
        std::vector<AdapterTarget> targets;
    };
    const std::vector<Shape> shapes = {
        {8, 2, 12, {AdapterTarget::AttnQ, AdapterTarget::AttnV}},
        {12, 3, 16, {AdapterTarget::AttnK, AdapterTarget::AttnO}},
        {16, 4, 20, {AdapterTarget::FfnIn, AdapterTarget::FfnOut}},
        {12, 2, 18, {AdapterTarget::Unembed, AdapterTarget::AttnQ}},
        {16, 2, 24,
         {AdapterTarget::AttnQ, AdapterTarget::AttnK, AdapterTarget::AttnV, AdapterTarget::AttnO,
          AdapterTarget::FfnIn, AdapterTarget::FfnOut, AdapterTarget::Unembed}},
    };
    const double h = 1e-5;
    double worst = 0.0;
    long long entries = 0;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        ModelConfig cfg;
        cfg.d_model = shapes[s].d;
        cfg.n_layers = 2;
        cfg.n_heads = shapes[s].heads;
        cfg.d_ff = shapes[s].ff;
        cfg.max_seq_len = 32;
        cfg.rank = 2;
        cfg.adapter_targets = shapes[s].targets;
        auto ckpt = init_checkpoint<double>(cfg, 300 + s);
        KeyedRng rng(400 + s, "bfill");
        for (auto& [name, t] : ckpt.tensors)
            if (name.ends_with(".lora_b"))
                for (auto& v : t.data) v = rng.next_symmetric(0.25);

        Batch batch;
        batch.examples.push_back(encode_example("ab c", "de", cfg.max_seq_len));
        batch.examples.push_back(encode_example("wxy", "z", cfg.max_seq_len));

        std::map<std::string, Mat<double>> grads;
        gradients(ckpt, batch, grads);

        auto batch_loss = [&] {
            double sum = 0.0;
            for (const auto& ex : batch.examples)
                sum += loss(forward(ckpt, ex.tokens), ex.tokens, ex.target_mask);
            return sum / batch.examples.size();
        };
        for (auto& [name, g] : grads) {
            Mat<double>& t = ckpt.tensor_mut(name);
            for (std::size_t i = 0; i < t.data.size(); ++i) {  // every A and B entry
                double orig = t.data[i];
                t.data[i] = orig + h;
                double lp = batch_loss();
                t.data[i] = orig - h;
                double lm = batch_loss();
                t.data[i] = orig;
                double fd = (lp - lm) / (2 * h);
                // Denominator floor 1e-5: central differences carry ~1e-10
                // absolute noise (double roundoff / 2h), so entries below the
                // floor are held to 1e-9 absolute agreement instead of a
                // noise-dominated ratio.
                double rel =
                    std::abs(fd - g.data[i]) / std::max({std::abs(fd), std::abs(g.data[i]), 1e-5});
                worst = std::max(worst, rel);
                ++entries;
            }
        }
    }
    double secs = seconds_since(t0);
    bool pass = worst < 1e-4 && secs < 120.0;
    char detail[160];
    std::snprintf(detail, sizeof detail, "%lld entries over 5 configs, max rel err %.3e, %.1fs",
                  entries, worst, secs);
    report(2, "gradient correctness", pass, detail);
}

void criterion3_lora_algebra() {
    ModelConfig cfg;
    cfg.d_model = 24;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 32;
    cfg.max_seq_len = 64;
    cfg.rank = 6;
    auto ckpt = init_checkpoint<float>(cfg, 7);

    // fresh adapters (B = 0): bit-identical to the adapter-free model
    Checkpoint<float> stripped = ckpt;
    for (const auto& base : adapted_tensor_names(cfg)) {
        stripped.tensors.erase(base + ".lora_a");
        stripped.tensors.erase(base + ".lora_b");
    }
    bool fresh_ok = true;
    for (int trial = 0; trial < 10; ++trial) {
        KeyedRng rng(500 + trial, "tok");
        std::vector<int> toks{ModelConfig::kBos};
        for (int i = 0; i < 30; ++i) toks.push_back(int(rng.next_below(256)));
        fresh_ok &= forward(ckpt, toks) == forward(stripped, toks);
    }

    // merge preserves logits within 1e-6 on 100 random inputs
    KeyedRng brng(501, "bfill");
    for (auto& [name, t] : ckpt.tensors)
        if (name.ends_with(".lora_b"))
            for (auto& v : t.data) v = float(brng.next_symmetric(0.3));
    auto merged = merge_adapters(ckpt, 7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        KeyedRng rng(600 + trial, "tok");
        std::vector<int> toks{ModelConfig::kBos};
        for (int i = 0; i < 24; ++i) toks.push_back(int(rng.next_below(256)));
        worst = std::max(worst, max_abs_diff(forward(ckpt, toks), forward(merged, toks)));
    }

    // 2x2 worked example
    Checkpoint<float> tiny = ckpt;
    Mat<float> w(2, 2), a(2, 1), b(1, 2);
    a.at(0, 0) = 1;
    a.at(1, 0) = 2;
    b.at(0, 0) = 3;
    b.at(0, 1) = 4;
    tiny.tensors["layers.0.attn.wq"] = w;
    tiny.tensors["layers.0.attn.wq.lora_a"] = a;
    tiny.tensors["layers.0.attn.wq.lora_b"] = b;
    Checkpoint<float> tiny_merged = merge_adapters(tiny, 1);
    const Mat<float>& wm = tiny_merged.tensor("layers.0.attn.wq");
    bool example_ok = wm.at(0, 0) == 3.0f && wm.at(0, 1) == 4.0f && wm.at(1, 0) == 6.0f &&
                      wm.at(1, 1) == 8.0f;

    bool pass = fresh_ok && worst < 1e-6 && example_ok;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "fresh bit-identical=%d, merge max-abs=%.2e over 100 inputs, 2x2=%s", int(fresh_ok),
                  worst, example_ok ? "[[3,4],[6,8]]" : "wrong");
    report(3, "LoRA algebra", pass, detail);
}

void criterion4_step_exactness() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 24;
    cfg.max_seq_len = 256;
    cfg.rank = 4;
    auto ckpt = init_checkpoint<float>(cfg, 9);

    KeyedRng rng(700, "grads");
    std::map<std::string, Mat<float>> grads;
    for (const auto& base : adapted_tensor_names(cfg))
        for (const char* suffix : {".lora_a", ".lora_b"}) {
            const Mat<float>& f = ckpt.tensor(base + suffix);
            Mat<float> g(f.rows, f.cols);
            for (auto& v : g.data) v = float(rng.next_symmetric(1.0));
            grads[base + suffix] = std::move(g);
        }
    Checkpoint<float> before = ckpt;
    const double eta_a = 7e-4, eta_b = 21e-4;
    lora_plus_step(ckpt, grads, eta_a, eta_b);  // unclipped
    bool exact = true;
    for (const auto& [name, g] : grads) {
        const Mat<float>& now = ckpt.tensor(name);
        const Mat<float>& old = before.tensor(name);
        const float eta = float(name.ends_with(".lora_a") ? eta_a : eta_b);
        for (std::size_t i = 0; i < now.data.size(); ++i)
            exact &= now.data[i] == old.data[i] - eta * g.data[i];
    }

    // lambda = 1 vs explicit single rate: identical checkpoints
    ToyData toy = generate_toy_corpus({12, 6, 3}, 31);
    Corpus corpus = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::Full});
    auto records = corpus.train_records({GraphFamily::KG});
    LoraPlusConfig c1;
    c1.eta_a = 5e-4;
    c1.lambda = 1.0;
    c1.batch_size = 4;
    c1.grad_clip.reset();
    c1.epochs_per_stage = 2;
    c1.seed = 77;
    LoraPlusConfig c2 = c1;
    c2.eta_b = 5e-4;
    auto [k1, l1] = train_stage(init_checkpoint<float>(cfg, 9), records, c1, "s");
    auto [k2, l2] = train_stage(init_checkpoint<float>(cfg, 9), records, c2, "s");
    bool lambda1_ok = checkpoint_hash(k1) == checkpoint_hash(k2);

    bool pass = exact && lambda1_ok;
    char detail[120];
    std::snprintf(detail, sizeof detail, "dA=-eta_A*G_A exact=%d, lambda=1 bit-identical=%d",
                  int(exact), int(lambda1_ok));
    report(4, "LoRA+ step exactness", pass, detail);
}

void criterion5_curriculum_integrity() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 4;
    cfg.d_ff = 24;
    cfg.max_seq_len = 256;
    cfg.rank = 4;
    auto base = init_checkpoint<float>(cfg, 12);

    ToyData toy = generate_toy_corpus({12, 6, 3}, 41);
    Corpus corpus = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::Full});

    LoraPlusConfig tc;
    tc.eta_a = 1e-3;
    tc.lambda = 2.0;
    tc.batch_size = 4;
    tc.epochs_per_stage = 1;
    tc.seed = 5;

    auto result = run_curriculum(base, CurriculumPlan::default_plan(), corpus, tc);
    bool labels_ok = result.checkpoints.size() == 3 &&
                     result.checkpoints[0].stage_label == "G-Micro" &&
                     result.checkpoints[1].stage_label == "G-Mid" &&
                     result.checkpoints[2].stage_label == "GKG-LLM";
    bool chain_ok = result.checkpoints[0].parent_hash == checkpoint_hash(base) &&
                    result.checkpoints[1].parent_hash == checkpoint_hash(result.checkpoints[0]) &&
                    result.checkpoints[2].parent_hash == checkpoint_hash(result.checkpoints[1]);

    // stage handoff: the merged artifact's forward equals the trained
    // (unmerged) stage output within 1e-6 on probe inputs
    auto records = corpus.train_records({GraphFamily::KG});
    auto [trained, log] = train_stage(base, records, tc, "G-Micro");
    auto merged = merge_adapters(trained, tc.seed);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        KeyedRng rng(800 + trial, "probe");
        std::vector<int> toks{ModelConfig::kBos};
        for (int i = 0; i < 40; ++i) toks.push_back(int(rng.next_below(256)));
        worst = std::max(worst, max_abs_diff(forward(trained, toks), forward(merged, toks)));
    }

    // partition safety: held-out ids never intersect stage training ids,
    // and a forced violation is rejected
    auto held = corpus.held_out_test_ids();
    bool disjoint = true;
    for (const auto& stage : CurriculumPlan::default_plan().stages) {
        std::set<GraphFamily> fams = stage.families;
        if (stage.include_counter) fams.insert(GraphFamily::Counter);
        for (const auto& rec : corpus.train_records(fams)) disjoint &= held.count(rec.id) == 0;
    }
    Corpus corrupted = corpus;
    corrupted.train["ETRE.toy_tcr"].push_back(corrupted.test.at("ETRE.toy_tcr").front());
    bool violation_caught = false;
    try {
        run_curriculum(base, CurriculumPlan::default_plan(), corrupted, tc);
    } catch (const std::exception&) {
        violation_caught = true;
    }

    bool pass = labels_ok && chain_ok && worst < 1e-6 && disjoint && violation_caught;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "chain base->G-Micro->G-Mid->GKG-LLM=%d, handoff max-abs=%.2e, "
                  "held-out disjoint=%d, violation caught=%d",
                  int(labels_ok && chain_ok), worst, int(disjoint), int(violation_caught));
    report(5, "curriculum integrity", pass, detail);
}

void criterion6_corpus_contracts(const fs::path& root) {
    ToySpec spec;  // full-size toy
    ToyData toy = generate_toy_corpus(spec, 42);
    Corpus corpus = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::Full});

    // few-shot counts: exactly round(0.10 * n) per dataset split
    bool counts_ok = true;
    Fraction tenth(1, 10);
    for (const auto& entry : toy.manifest.entries) {
        if (entry.descriptor.held_out) continue;
        for (const auto* split : {&corpus.train, &corpus.test}) {
            const auto& records = split->at(entry.descriptor.key());
            std::int64_t few = 0;
            for (const auto& r : records) few += r.shot == ShotMode::Few ? 1 : 0;
            counts_ok &= few == tenth.round_of(std::int64_t(records.size()));
        }
    }

    // pools hold exactly 10 templates
    bool pools_ok = true;
    for (const auto& pool : toy.pools) {
        pools_ok &= pool.templates.size() == 10;
        try {
            pool.validate();
        } catch (...) {
            pools_ok = false;
        }
    }

    // SingleInstruction: one template in use; ZeroShotOnly: zero demos
    Corpus si = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::SingleInstruction});
    bool si_ok = true;
    for (const auto& [key, records] : si.train) {
        std::set<std::string> used;
        for (const auto& r : records) used.insert(r.instruction);
        si_ok &= used.size() <= 1;
    }
    Corpus zs = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::ZeroShotOnly});
    bool zs_ok = true;
    for (const auto* split : {&zs.train, &zs.test})
        for (const auto& [key, records] : *split)
            for (const auto& r : records)
                zs_ok &= r.shot == ShotMode::Zero && !r.demonstration.has_value();

    // re-ingestion under the same seed is byte-identical
    RunConfig cfg;
    cfg.seed = 42;
    cfg.corpus_dir = root / "c6_corpus";
    cfg.checkpoint_dir = root / "c6_ckpt";
    cfg.report_dir = root / "c6_rep";
    cfg.toy = spec;
    IngestStats s1 = run_ingest(cfg);
    IngestStats s2 = run_ingest(cfg);
    bool reingest_ok = !s1.corpus_hash.empty() && s1.corpus_hash == s2.corpus_hash;

    bool pass = counts_ok && pools_ok && si_ok && zs_ok && reingest_ok;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "few-shot=round(n/10)=%d, pools(10)=%d, single-instr=%d, zero-shot=%d, "
                  "re-ingest identical=%d",
                  int(counts_ok), int(pools_ok), int(si_ok), int(zs_ok), int(reingest_ok));
    report(6, "corpus contracts", pass, detail);
}

// The tuned desk-scale model/optimizer pair used by the heavy runs.
ModelConfig toy_model() {
    ModelConfig cfg;
    cfg.d_model = 64;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 128;
    cfg.max_seq_len = 320;
    cfg.rank = 16;
    cfg.adapter_targets = {AdapterTarget::AttnQ, AdapterTarget::AttnK, AdapterTarget::AttnV,
                           AdapterTarget::AttnO, AdapterTarget::FfnIn, AdapterTarget::FfnOut,
                           AdapterTarget::Unembed};
    return cfg;
}

LoraPlusConfig toy_optimizer() {
    LoraPlusConfig cfg;
    cfg.eta_a = 3e-3;
    cfg.lambda = 4.0;
    cfg.batch_size = 4;
    cfg.grad_clip = 1.0;
    cfg.schedule = Schedule::LinearDecay;
    cfg.optimizer = OptimizerKind::Adam;
    cfg.seed = 42;
    return cfg;
}

void criterion7_memorization() {
    auto t0 = Clock::now();
    ModelConfig cfg = toy_model();
    cfg.max_seq_len = 192;
    auto base = init_checkpoint<float>(cfg, 42);

    ToyData toy = generate_toy_corpus({48, 8, 4}, 11);
    Corpus corpus = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::SingleAndZero});
    std::vector<GkgRecord> records(corpus.train.at("SRE.toy_news").begin(),
                                   corpus.train.at("SRE.toy_news").begin() + 32);

    LoraPlusConfig tc = toy_optimizer();
    tc.batch_size = 8;
    tc.epochs_per_stage = 125;  // 32 samples / 8 = 4 steps per epoch -> 500 steps
    auto [trained, log] = train_stage(base, records, tc, "memorization");

    Batch batch;
    for (const auto& r : records)
        batch.examples.push_back(encode_example(render_prompt(r), r.output, cfg.max_seq_len));
    double acc = masked_accuracy(trained, batch);

    int verbatim = 0;
    for (const auto& r : records) {
        auto prompt = encode_prompt(render_prompt(r), cfg.max_seq_len - 64);
        if (detokenize(greedy_decode(trained, prompt, 64)) == r.output) ++verbatim;
    }
    double secs = seconds_since(t0);
    bool pass = log.steps.size() == 500 && acc >= 0.99 && verbatim == 32 && secs < 180.0;
    char detail[160];
    std::snprintf(detail, sizeof detail, "steps=%zu, masked acc=%.4f, verbatim=%d/32, %.0fs",
                  log.steps.size(), acc, verbatim, secs);
    report(7, "memorization run", pass, detail);
}

void criterion8_toy_curriculum(const fs::path& root) {
    auto t0 = Clock::now();
    RunConfig cfg;
    cfg.seed = 42;
    cfg.corpus_dir = root / "c8_corpus";
    cfg.checkpoint_dir = root / "c8_ckpt";
    cfg.report_dir = root / "c8_rep";
    cfg.toy = ToySpec{};  // 240 train / 56 test per family, >= spec floor
    cfg.model = toy_model();
    cfg.optimizer = toy_optimizer();
    cfg.optimizer.epochs_per_stage = 16;
    cfg.eval.max_new = 48;
    cfg.eval.per_dataset_max_new["JERE.toy_joint"] = 64;

    Corpus corpus;
    run_ingest(cfg, &corpus);
    TrainOutput out = run_train(cfg, corpus);

    auto base = load_checkpoint(cfg.checkpoint_dir / "base");
    auto final_ckpt = load_checkpoint(cfg.checkpoint_dir / "GKG-LLM");
    EvalRun base_run = evaluate(base, corpus, cfg.strategy, cfg.eval);
    EvalRun final_run = run_eval(cfg, corpus, final_ckpt);

    std::string md = read_text_file(cfg.report_dir / "report.md");
    bool layout_ok = md.find("toy_tcr*") != std::string::npos &&
                     md.find("toy_r8*") != std::string::npos &&
                     md.find("AG†") != std::string::npos &&
                     md.find("NLG†") != std::string::npos &&
                     md.find("**Average Performance**") != std::string::npos;

    double delta = final_run.report.overall - base_run.report.overall;
    double secs = seconds_since(t0);
    bool sizes_ok = true;
    std::map<GraphFamily, std::pair<std::size_t, std::size_t>> fam;
    for (const auto& entry : corpus.manifest.entries) {
        fam[entry.descriptor.family].first += corpus.train.at(entry.descriptor.key()).size();
        fam[entry.descriptor.family].second += corpus.test.at(entry.descriptor.key()).size();
    }
    for (const auto& [family, counts] : fam)
        sizes_ok &= counts.first >= 200 && counts.second >= 50;

    bool pass = out.labels.size() == 3 && layout_ok && delta >= 0.2 && secs < 300.0 && sizes_ok;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "base=%.4f final=%.4f delta=%.4f (>=0.2), layout=%d, sizes>=200/50=%d, %.0fs",
                  base_run.report.overall, final_run.report.overall, delta, int(layout_ok),
                  int(sizes_ok), secs);
    report(8, "end-to-end toy curriculum", pass, detail);
    char note[120];
    std::snprintf(note, sizeof note, "toy curriculum: stage hashes %s | %s | %s",
                  out.hashes[0].substr(0, 10).c_str(), out.hashes[1].substr(0, 10).c_str(),
                  out.hashes[2].substr(0, 10).c_str());
    g_notes.push_back(note);
}

void criterion9_sweeps() {
    // micro corpus + micro model so 6+6+4 curricula stay cheap
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 4;
    cfg.d_ff = 24;
    cfg.max_seq_len = 256;
    cfg.rank = 4;
    auto base = init_checkpoint<float>(cfg, 21);
    ToyData toy = generate_toy_corpus({12, 6, 3}, 51);
    Corpus corpus = assemble_corpus(
        toy.manifest, [&](const ManifestEntry& e) { return toy.raw_rows.at(e.descriptor.key()); },
        [&](const std::string& t) { return toy.pool_for(t); }, {StrategyVariant::Full});

    LoraPlusConfig tc;
    tc.eta_a = 1e-3;
    tc.lambda = 2.0;
    tc.batch_size = 4;
    tc.epochs_per_stage = 1;
    tc.seed = 3;
    EvalOptions options;
    options.max_new = 6;

    auto order = sweep_order(base, corpus, tc, {StrategyVariant::Full}, options);
    std::set<std::string> labels;
    for (const auto& [label, rep] : order) labels.insert(label);
    bool order_ok = labels == std::set<std::string>({"K-E-C", "K-C-E", "E-K-C", "E-C-K", "C-K-E",
                                                     "C-E-K"});

    auto fractions = default_scale_fractions();
    bool fractions_ok = fractions.size() == 6 && fractions.front() == Fraction(1, 10) &&
                        fractions.back() == Fraction(1, 1);
    auto scale = sweep_scale(base, corpus, fractions, tc, {StrategyVariant::Full}, options);
    // fraction 1.0 must be bit-identical to a plain default run
    auto plain = run_curriculum(base, CurriculumPlan::default_plan(), corpus, tc);
    EvalRun plain_run = evaluate(plain.checkpoints.back(), corpus, {StrategyVariant::Full}, options);
    bool scale_ok = scale.size() == 6 &&
                    report_to_json(scale.at("1")).dump() ==
                        report_to_json(plain_run.report).dump();

    EtaGrid reference = EtaGrid::reference();
    bool grid_shape_ok = reference.eta_a_values == std::vector<double>({5e-5, 1e-4, 2e-4, 4e-4}) &&
                         reference.lambda_values.size() == 6;
    // the paper's best cell (eta_A 4e-4, eta_B 4e-3 = x10) sits on the grid
    bool best_cell_ok = false;
    for (double ea : reference.eta_a_values)
        for (double lm : reference.lambda_values)
            best_cell_ok |= ea == 4e-4 && lm == 10.0;

    EtaGrid small{{1e-3, 2e-3}, {1.0, 2.0}};
    auto eta = sweep_eta(base, corpus, small, tc, {StrategyVariant::Full}, options);
    bool eta_ok = eta.scores.size() == 2 && eta.scores[0].size() == 2;
    for (const auto& row : eta.scores)
        for (double v : row) eta_ok &= std::isfinite(v);

    bool pass = order_ok && fractions_ok && scale_ok && grid_shape_ok && best_cell_ok && eta_ok;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "order 6 labels=%d, scale 6 fracs=%d, frac-1.0 bit-identical=%d, grid "
                  "lambda-rows=%d, best cell=%d, eta table=%d",
                  int(order_ok), int(fractions_ok), int(scale_ok), int(grid_shape_ok),
                  int(best_cell_ok), int(eta_ok));
    report(9, "sweep drivers", pass, detail);
}

void criterion10_determinism(const fs::path& root) {
    RunConfig cfg;
    cfg.seed = 42;
    cfg.corpus_dir = root / "c10_corpus";
    cfg.checkpoint_dir = root / "c10_ckpt";
    cfg.report_dir = root / "c10_rep";
    cfg.toy = {12, 6, 3};
    cfg.model.d_model = 16;
    cfg.model.n_layers = 1;
    cfg.model.n_heads = 4;
    cfg.model.d_ff = 24;
    cfg.model.max_seq_len = 256;
    cfg.model.rank = 4;
    cfg.optimizer.eta_a = 1e-3;
    cfg.optimizer.lambda = 2.0;
    cfg.optimizer.batch_size = 4;
    cfg.optimizer.epochs_per_stage = 1;
    cfg.optimizer.seed = cfg.seed;
    cfg.eval.max_new = 6;

    auto run_once = [&](std::string& corpus_hash, std::string& final_hash, std::string& report_md,
                        std::string& report_json, std::string& predictions) {
        fs::remove_all(cfg.corpus_dir);
        fs::remove_all(cfg.checkpoint_dir);
        fs::remove_all(cfg.report_dir);
        Corpus corpus;
        IngestStats stats = run_ingest(cfg, &corpus);
        TrainOutput out = run_train(cfg, corpus);
        auto final_ckpt = load_checkpoint(cfg.checkpoint_dir / "GKG-LLM");
        run_eval(cfg, corpus, final_ckpt);
        corpus_hash = stats.corpus_hash;
        final_hash = out.hashes.back();
        report_md = read_text_file(cfg.report_dir / "report.md");
        report_json = read_text_file(cfg.report_dir / "report.json");
        predictions = read_text_file(cfg.report_dir / "predictions.jsonl");
    };
    std::string ch1, fh1, md1, js1, pr1, ch2, fh2, md2, js2, pr2;
    run_once(ch1, fh1, md1, js1, pr1);
    run_once(ch2, fh2, md2, js2, pr2);

    bool pass = ch1 == ch2 && fh1 == fh2 && md1 == md2 && js1 == js2 && pr1 == pr2;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "corpus hash equal=%d, final checkpoint equal=%d, report files equal=%d",
                  int(ch1 == ch2), int(fh1 == fh2), int(md1 == md2 && js1 == js2 && pr1 == pr2));
    report(10, "determinism", pass, detail);
}

}  // namespace

int main() {
    fs::path root = fs::temp_directory_path() / "gkg_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    auto t0 = Clock::now();
    criterion1_metric_oracles();
    criterion2_gradients();
    criterion3_lora_algebra();
    criterion4_step_exactness();
    criterion5_curriculum_integrity();
    criterion6_corpus_contracts(root);
    criterion7_memorization();
    criterion8_toy_curriculum(root);
    criterion9_sweeps();
    criterion10_determinism(root);

    for (const auto& note : g_notes) std::printf("note: %s\n", note.c_str());
    std::printf("%d/10 criteria passed in %.0fs\n", 10 - g_failures, seconds_since(t0));
    fs::remove_all(root);
    return g_failures == 0 ? 0 : 1;
}
