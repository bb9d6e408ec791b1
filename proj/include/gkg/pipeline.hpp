// Run orchestration shared by the CLI and the test suites: the resolved run
// config, corpus build / load, checkpoint training, evaluation and sweep
// output files. Every command writes a resolved copy of its config next to
// its outputs so a run can be reproduced from the artifacts alone.
#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gkg/checkpoint_io.hpp"
#include "gkg/corpus_io.hpp"
#include "gkg/harness.hpp"
#include "gkg/report.hpp"
#include "gkg/toy.hpp"
#include "gkg/trainer.hpp"

namespace gkg {

namespace fs = std::filesystem;

struct RunConfig {
    std::uint64_t seed = 42;

    fs::path corpus_dir;
    fs::path checkpoint_dir;
    fs::path report_dir;

    std::string corpus_source = "toy";  // "toy" | "manifest"
    fs::path manifest_path;             // when corpus_source == "manifest"
    ToySpec toy;
    Fraction few_shot_fraction = Fraction(1, 10);
    PromptStrategy strategy;

    ModelConfig model;
    LoraPlusConfig optimizer;
    std::string stage_order = "K-E-C";
    std::optional<CurriculumPlan> custom_plan;  // overrides stage_order when set
    EvalOptions eval;

    std::vector<Fraction> sweep_fractions = default_scale_fractions();
    EtaGrid eta_grid = EtaGrid::reference();

    void validate() const {
        if (corpus_source != "toy" && corpus_source != "manifest")
            throw UsageError("corpus source must be 'toy' or 'manifest'");
        if (corpus_source == "manifest" && manifest_path.empty())
            throw UsageError("corpus source 'manifest' needs a manifest path");
        model.validate();
        optimizer.validate();
        plan().validate();
    }

    CurriculumPlan plan() const {
        return custom_plan ? *custom_plan : CurriculumPlan::from_order(stage_order);
    }
};

// Default output roots honor GKG_HOME when set.
inline fs::path gkg_home() {
    const char* home = std::getenv("GKG_HOME");
    return home != nullptr && *home != '\0' ? fs::path(home) : fs::path("gkg_out");
}

inline void apply_default_paths(RunConfig& cfg) {
    fs::path root = gkg_home();
    if (cfg.corpus_dir.empty()) cfg.corpus_dir = root / "corpus";
    if (cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = root / "checkpoints";
    if (cfg.report_dir.empty()) cfg.report_dir = root / "reports";
}

// ---------------------------------------------------------------------------
// Config file round trip.

inline ordered_json run_config_to_json(const RunConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["paths"] = {{"corpus_dir", cfg.corpus_dir.string()},
                  {"checkpoint_dir", cfg.checkpoint_dir.string()},
                  {"report_dir", cfg.report_dir.string()}};
    ordered_json corpus;
    corpus["source"] = cfg.corpus_source;
    if (!cfg.manifest_path.empty()) corpus["manifest"] = cfg.manifest_path.string();
    corpus["strategy"] = cfg.strategy.name();
    corpus["few_shot_fraction"] = cfg.few_shot_fraction.str();
    corpus["toy"] = {{"train_per_family", cfg.toy.train_per_family},
                     {"test_per_family", cfg.toy.test_per_family},
                     {"held_out_test", cfg.toy.held_out_test}};
    j["corpus"] = std::move(corpus);
    j["model"] = model_config_to_json(cfg.model);
    ordered_json opt;
    opt["eta_a"] = cfg.optimizer.eta_a;
    if (cfg.optimizer.eta_b)
        opt["eta_b"] = *cfg.optimizer.eta_b;
    else
        opt["lambda"] = cfg.optimizer.lambda;
    opt["batch_size"] = cfg.optimizer.batch_size;
    if (cfg.optimizer.grad_clip)
        opt["grad_clip"] = *cfg.optimizer.grad_clip;
    else
        opt["grad_clip"] = nullptr;
    opt["schedule"] = cfg.optimizer.schedule == Schedule::LinearDecay ? "linear_decay" : "constant";
    opt["epochs_per_stage"] = cfg.optimizer.epochs_per_stage;
    opt["algorithm"] = cfg.optimizer.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    if (cfg.optimizer.optimizer == OptimizerKind::Adam) {
        opt["adam_beta1"] = cfg.optimizer.adam_beta1;
        opt["adam_beta2"] = cfg.optimizer.adam_beta2;
        opt["adam_eps"] = cfg.optimizer.adam_eps;
    }
    j["optimizer"] = std::move(opt);
    ordered_json curriculum;
    curriculum["stage_order"] = cfg.stage_order;
    if (cfg.custom_plan) {
        curriculum["stages"] = ordered_json::array();
        for (const auto& stage : cfg.custom_plan->stages) {
            ordered_json st;
            st["name"] = stage.name;
            st["families"] = ordered_json::array();
            for (auto f : stage.families) st["families"].push_back(to_string(f));
            st["include_counter"] = stage.include_counter;
            st["output_label"] = stage.output_label;
            curriculum["stages"].push_back(std::move(st));
        }
    }
    j["curriculum"] = std::move(curriculum);
    ordered_json eval;
    eval["max_new"] = cfg.eval.max_new;
    eval["per_dataset_max_new"] = ordered_json::object();
    for (const auto& [key, v] : cfg.eval.per_dataset_max_new) eval["per_dataset_max_new"][key] = v;
    j["eval"] = std::move(eval);
    ordered_json sweep;
    sweep["fractions"] = ordered_json::array();
    for (const auto& f : cfg.sweep_fractions) sweep["fractions"].push_back(f.str());
    sweep["eta_a"] = cfg.eta_grid.eta_a_values;
    sweep["lambda"] = cfg.eta_grid.lambda_values;
    j["sweep"] = std::move(sweep);
    return j;
}

inline RunConfig run_config_from_json(const ordered_json& j) {
    RunConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        if (p.contains("corpus_dir")) cfg.corpus_dir = p.at("corpus_dir").get<std::string>();
        if (p.contains("checkpoint_dir")) cfg.checkpoint_dir = p.at("checkpoint_dir").get<std::string>();
        if (p.contains("report_dir")) cfg.report_dir = p.at("report_dir").get<std::string>();
    }
    if (j.contains("corpus")) {
        const auto& c = j.at("corpus");
        cfg.corpus_source = c.value("source", cfg.corpus_source);
        if (c.contains("manifest")) cfg.manifest_path = c.at("manifest").get<std::string>();
        if (c.contains("strategy")) cfg.strategy = PromptStrategy::parse(c.at("strategy").get<std::string>());
        if (c.contains("few_shot_fraction"))
            cfg.few_shot_fraction = fraction_from_json(c.at("few_shot_fraction"));
        if (c.contains("toy")) {
            const auto& t = c.at("toy");
            cfg.toy.train_per_family = t.value("train_per_family", cfg.toy.train_per_family);
            cfg.toy.test_per_family = t.value("test_per_family", cfg.toy.test_per_family);
            cfg.toy.held_out_test = t.value("held_out_test", cfg.toy.held_out_test);
        }
    }
    if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        cfg.optimizer.eta_a = o.value("eta_a", cfg.optimizer.eta_a);
        if (o.contains("eta_b") && !o.at("eta_b").is_null())
            cfg.optimizer.eta_b = o.at("eta_b").get<double>();
        cfg.optimizer.lambda = o.value("lambda", cfg.optimizer.lambda);
        cfg.optimizer.batch_size = o.value("batch_size", cfg.optimizer.batch_size);
        if (o.contains("grad_clip")) {
            if (o.at("grad_clip").is_null())
                cfg.optimizer.grad_clip.reset();
            else
                cfg.optimizer.grad_clip = o.at("grad_clip").get<double>();
        }
        if (o.contains("schedule")) cfg.optimizer.schedule = parse_schedule(o.at("schedule").get<std::string>());
        cfg.optimizer.epochs_per_stage = o.value("epochs_per_stage", cfg.optimizer.epochs_per_stage);
        if (o.contains("algorithm"))
            cfg.optimizer.optimizer = parse_optimizer(o.at("algorithm").get<std::string>());
        cfg.optimizer.adam_beta1 = o.value("adam_beta1", cfg.optimizer.adam_beta1);
        cfg.optimizer.adam_beta2 = o.value("adam_beta2", cfg.optimizer.adam_beta2);
        cfg.optimizer.adam_eps = o.value("adam_eps", cfg.optimizer.adam_eps);
    }
    if (j.contains("curriculum")) {
        const auto& c = j.at("curriculum");
        cfg.stage_order = c.value("stage_order", cfg.stage_order);
        if (c.contains("stages")) {
            CurriculumPlan plan;
            for (const auto& st : c.at("stages")) {
                CurriculumStage stage;
                stage.name = st.at("name").get<std::string>();
                for (const auto& f : st.at("families"))
                    stage.families.insert(parse_family(f.get<std::string>()));
                stage.include_counter = st.value("include_counter", false);
                stage.output_label = st.value("output_label", stage.name);
                plan.stages.push_back(std::move(stage));
            }
            cfg.custom_plan = std::move(plan);
        }
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        cfg.eval.max_new = e.value("max_new", cfg.eval.max_new);
        if (e.contains("per_dataset_max_new"))
            for (const auto& [key, v] : e.at("per_dataset_max_new").items())
                cfg.eval.per_dataset_max_new[key] = v.get<int>();
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (s.contains("fractions")) {
            cfg.sweep_fractions.clear();
            for (const auto& f : s.at("fractions")) cfg.sweep_fractions.push_back(fraction_from_json(f));
        }
        if (s.contains("eta_a")) cfg.eta_grid.eta_a_values = s.at("eta_a").get<std::vector<double>>();
        if (s.contains("lambda")) cfg.eta_grid.lambda_values = s.at("lambda").get<std::vector<double>>();
    }
    // The optimizer inherits the global seed.
    cfg.optimizer.seed = cfg.seed;
    return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed config " + path.string() + ": " + e.what());
    }
    RunConfig cfg;
    try {
        cfg = run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed config " + path.string() + ": " + e.what());
    }
    apply_default_paths(cfg);
    cfg.validate();
    return cfg;
}

inline void write_resolved_config(const fs::path& dir, const RunConfig& cfg) {
    write_text_file(dir / "resolved_config.json", run_config_to_json(cfg).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Corpus build, load, hash.

inline Corpus build_corpus_from_files(const SplitManifest& manifest, const fs::path& base_dir,
                                      PromptStrategy strategy) {
    return assemble_corpus(
        manifest,
        [&](const ManifestEntry& e) { return read_raw_rows(base_dir / e.raw_path); },
        [&](const std::string& task) {
            return read_instruction_pool(base_dir / manifest.instructions_dir, task);
        },
        strategy);
}

struct IngestStats {
    struct Row {
        TaskDescriptor descriptor;
        std::size_t train = 0;
        std::size_t test = 0;
    };
    std::vector<Row> rows;                                    // manifest order
    std::map<GraphFamily, std::pair<std::size_t, std::size_t>> per_family;
    std::string corpus_hash;
};

// sha256 over (relative path, file hash) pairs of everything that defines
// the corpus; stats.json itself is excluded.
inline std::string corpus_dir_hash(const fs::path& corpus_dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(corpus_dir)) {
        if (!entry.is_regular_file()) continue;
        fs::path rel = fs::relative(entry.path(), corpus_dir);
        // data only: the hash must not depend on run orchestration
        if (rel.filename() == "stats.json" || rel.filename() == "resolved_config.json") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& rel : files) {
        acc += rel.generic_string();
        acc += '\n';
        acc += sha256_hex(read_text_file(corpus_dir / rel));
        acc += '\n';
    }
    return sha256_hex(acc);
}

// Builds the corpus directory (raw rows + manifest + instructions for the
// toy source; records either way) and returns counts plus the corpus hash.
inline IngestStats run_ingest(const RunConfig& cfg, Corpus* out_corpus = nullptr) {
    cfg.validate();
    fs::create_directories(cfg.corpus_dir);

    SplitManifest manifest;
    if (cfg.corpus_source == "toy") {
        ToyData toy = generate_toy_corpus(cfg.toy, cfg.seed);
        toy.manifest.few_shot_fraction = cfg.few_shot_fraction;
        for (const auto& entry : toy.manifest.entries) {
            std::string text;
            for (const auto& row : toy.raw_rows.at(entry.descriptor.key())) {
                text += row;
                text += '\n';
            }
            write_text_file(cfg.corpus_dir / entry.raw_path, text);
        }
        for (const auto& pool : toy.pools)
            write_instruction_pool(cfg.corpus_dir / toy.manifest.instructions_dir, pool);
        write_manifest(cfg.corpus_dir / "manifest.json", toy.manifest);
        manifest = toy.manifest;
    } else {
        manifest = read_manifest(cfg.manifest_path);
        // Resolve raw/instruction paths against the manifest's directory and
        // copy the inputs into the corpus dir so it is self-contained.
        fs::path src_dir = cfg.manifest_path.parent_path();
        for (const auto& entry : manifest.entries)
            write_text_file(cfg.corpus_dir / entry.raw_path,
                            read_text_file(src_dir / entry.raw_path));
        std::set<std::string> tasks;
        for (const auto& entry : manifest.entries) tasks.insert(entry.descriptor.task_code);
        for (const auto& task : tasks)
            write_instruction_pool(cfg.corpus_dir / manifest.instructions_dir,
                                   read_instruction_pool(src_dir / manifest.instructions_dir, task));
        write_manifest(cfg.corpus_dir / "manifest.json", manifest);
    }

    Corpus corpus = build_corpus_from_files(manifest, cfg.corpus_dir, cfg.strategy);
    for (const auto& entry : manifest.entries) {
        const std::string key = entry.descriptor.key();
        write_records(cfg.corpus_dir / "records" / (key + ".train.jsonl"), corpus.train.at(key));
        write_records(cfg.corpus_dir / "records" / (key + ".test.jsonl"), corpus.test.at(key));
    }

    IngestStats stats;
    for (const auto& entry : manifest.entries) {
        const std::string key = entry.descriptor.key();
        IngestStats::Row row;
        row.descriptor = entry.descriptor;
        row.train = corpus.train.at(key).size();
        row.test = corpus.test.at(key).size();
        auto& fam = stats.per_family[entry.descriptor.family];
        fam.first += row.train;
        fam.second += row.test;
        stats.rows.push_back(std::move(row));
    }
    stats.corpus_hash = corpus_dir_hash(cfg.corpus_dir);
    write_text_file(cfg.corpus_dir / "stats.json",
                    ordered_json{{"corpus_hash", stats.corpus_hash}}.dump(2) + "\n");
    write_resolved_config(cfg.corpus_dir, cfg);
    if (out_corpus != nullptr) *out_corpus = std::move(corpus);
    return stats;
}

// Loads an already-ingested corpus directory (manifest + record files).
inline Corpus load_corpus_dir(const fs::path& corpus_dir) {
    if (!fs::exists(corpus_dir / "manifest.json"))
        throw UsageError("no corpus at " + corpus_dir.string() + " (run ingest first)");
    Corpus corpus;
    corpus.manifest = read_manifest(corpus_dir / "manifest.json");
    for (const auto& entry : corpus.manifest.entries) {
        const std::string key = entry.descriptor.key();
        corpus.train[key] = read_records(corpus_dir / "records" / (key + ".train.jsonl"));
        corpus.test[key] = read_records(corpus_dir / "records" / (key + ".test.jsonl"));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Training.

// Loads the base checkpoint if present, otherwise initializes and saves it.
inline Checkpoint<float> base_checkpoint(const RunConfig& cfg) {
    fs::path base_dir = cfg.checkpoint_dir / "base";
    if (is_checkpoint_dir(base_dir)) {
        Checkpoint<float> ckpt = load_checkpoint(base_dir);
        if (!(ckpt.config == cfg.model))
            throw UsageError("existing base checkpoint does not match the configured model");
        return ckpt;
    }
    Checkpoint<float> ckpt = init_checkpoint<float>(cfg.model, cfg.seed);
    save_checkpoint(base_dir, ckpt);
    return ckpt;
}

struct TrainOutput {
    std::vector<std::string> labels;
    std::vector<std::string> hashes;
};

// Runs the configured curriculum, saving every stage checkpoint as soon as
// it completes (a mid-run failure keeps the finished stages).
inline TrainOutput run_train(const RunConfig& cfg, const Corpus& corpus) {
    cfg.validate();
    Checkpoint<float> base = base_checkpoint(cfg);
    CurriculumPlan plan = cfg.plan();
    plan.validate();

    const std::set<std::string> held_out = corpus.held_out_test_ids();
    TrainOutput out;
    std::string log_text;
    const Checkpoint<float>* current = &base;
    std::vector<Checkpoint<float>> chain;
    chain.reserve(plan.stages.size());
    for (const auto& stage : plan.stages) {
        std::set<GraphFamily> families = stage.families;
        if (stage.include_counter) families.insert(GraphFamily::Counter);
        std::vector<GkgRecord> records = corpus.train_records(families);
        if (records.empty())
            throw std::runtime_error("curriculum stage '" + stage.name +
                                     "' matches no training records");
        for (const auto& rec : records)
            if (held_out.count(rec.id))
                throw std::runtime_error("curriculum stage '" + stage.name +
                                         "' would train on held-out record " + rec.id);
        auto [trained, log] = train_stage(*current, records, cfg.optimizer, stage.output_label);
        Checkpoint<float> merged = merge_adapters(trained, cfg.optimizer.seed);
        save_checkpoint(cfg.checkpoint_dir / stage.output_label, merged);
        log_text += train_log_to_jsonl(log);
        out.labels.push_back(stage.output_label);
        out.hashes.push_back(checkpoint_hash(merged));
        chain.push_back(std::move(merged));
        current = &chain.back();
    }
    write_text_file(cfg.checkpoint_dir / "train_log.jsonl", log_text);
    write_resolved_config(cfg.checkpoint_dir, cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation and reports.

inline fs::path resolve_checkpoint_path(const RunConfig& cfg, const std::string& name) {
    fs::path direct(name);
    if (is_checkpoint_dir(direct)) return direct;
    fs::path labeled = cfg.checkpoint_dir / name;
    if (is_checkpoint_dir(labeled)) return labeled;
    throw UsageError("no checkpoint at '" + name + "' or '" + labeled.string() + "'");
}

inline std::string stored_corpus_hash(const fs::path& corpus_dir) {
    fs::path stats = corpus_dir / "stats.json";
    if (!fs::exists(stats)) return "corpus";
    return ordered_json::parse(read_text_file(stats)).value("corpus_hash", "corpus");
}

inline EvalRun run_eval(const RunConfig& cfg, const Corpus& corpus,
                        const Checkpoint<float>& ckpt) {
    EvalRun run = evaluate(ckpt, corpus, cfg.strategy, cfg.eval, stored_corpus_hash(cfg.corpus_dir));
    fs::create_directories(cfg.report_dir);
    write_text_file(cfg.report_dir / "predictions.jsonl", predictions_to_jsonl(run.predictions));
    write_text_file(cfg.report_dir / "report.json", eval_run_to_json(run).dump(2) + "\n");
    write_text_file(cfg.report_dir / "timing.json", eval_timing_to_json(run).dump(2) + "\n");
    write_text_file(cfg.report_dir / "report.md", render_markdown_report(run.report));
    bool any_held_out = false;
    for (const auto& d : run.report.per_dataset) any_held_out |= d.descriptor.held_out;
    if (any_held_out) {
        MetricReport ood = ood_report(run);
        write_text_file(cfg.report_dir / "ood.json", report_to_json(ood).dump(2) + "\n");
        write_text_file(cfg.report_dir / "ood.md",
                        render_markdown_report(ood, "Average performance on OOD datasets"));
    }
    write_resolved_config(cfg.report_dir, cfg);
    return run;
}

// Re-scores an existing prediction file against the corpus descriptors.
inline MetricReport run_report(const RunConfig& cfg, const Corpus& corpus,
                               const fs::path& predictions_path) {
    auto preds = predictions_from_jsonl(read_text_file(predictions_path));
    std::map<std::string, std::vector<PredictionRecord>> by_dataset;
    for (auto& p : preds) {
        auto second = p.record_id.find('.', p.record_id.find('.') + 1);
        by_dataset[p.record_id.substr(0, second)].push_back(std::move(p));
    }
    std::vector<DatasetScore> scores;
    for (const auto& entry : corpus.manifest.entries) {
        auto it = by_dataset.find(entry.descriptor.key());
        if (it == by_dataset.end()) continue;
        DatasetScore ds;
        ds.descriptor = entry.descriptor;
        ds.count = it->second.size();
        ds.score = score_dataset(it->second, entry.descriptor, &ds.dropped);
        std::vector<PredictionRecord> trimmed = it->second;
        for (auto& p : trimmed) p.predicted = first_line(p.predicted);
        ds.score_first_line = score_dataset(trimmed, entry.descriptor);
        scores.push_back(std::move(ds));
    }
    if (scores.empty()) throw UsageError("prediction file matches no corpus dataset");
    MetricReport report = aggregate(scores);
    fs::create_directories(cfg.report_dir);
    write_text_file(cfg.report_dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text_file(cfg.report_dir / "report.md", render_markdown_report(report));
    write_resolved_config(cfg.report_dir, cfg);
    return report;
}

// ---------------------------------------------------------------------------
// Sweeps.

inline void run_sweep(const RunConfig& cfg, const std::string& kind, const Corpus& corpus) {
    cfg.validate();
    Checkpoint<float> base = base_checkpoint(cfg);
    fs::create_directories(cfg.report_dir);
    if (kind == "order") {
        auto reports = sweep_order(base, corpus, cfg.optimizer, cfg.strategy, cfg.eval);
        write_text_file(cfg.report_dir / "sweep_order.json",
                        sweep_reports_to_json(reports).dump(2) + "\n");
        write_text_file(cfg.report_dir / "sweep_order.csv", sweep_reports_to_csv(reports, "order"));
    } else if (kind == "scale") {
        auto reports =
            sweep_scale(base, corpus, cfg.sweep_fractions, cfg.optimizer, cfg.strategy, cfg.eval);
        write_text_file(cfg.report_dir / "sweep_scale.json",
                        sweep_reports_to_json(reports).dump(2) + "\n");
        write_text_file(cfg.report_dir / "sweep_scale.csv",
                        sweep_reports_to_csv(reports, "fraction"));
    } else if (kind == "eta") {
        auto result = sweep_eta(base, corpus, cfg.eta_grid, cfg.optimizer, cfg.strategy, cfg.eval);
        write_text_file(cfg.report_dir / "sweep_eta.json", eta_sweep_to_json(result).dump(2) + "\n");
        write_text_file(cfg.report_dir / "sweep_eta.csv", eta_sweep_to_csv(result));
    } else {
        throw UsageError("unknown sweep kind '" + kind + "' (order|scale|eta)");
    }
    write_resolved_config(cfg.report_dir, cfg);
}

}  // namespace gkg
