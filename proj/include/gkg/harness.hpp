// Evaluation harness: run a checkpoint (or any decoder) over test splits,
// collect predictions, score per dataset and aggregate; OOD filtering,
// prompt-strategy ablations and stage comparison tables.
#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gkg/checkpoint_io.hpp"
#include "gkg/corpus.hpp"
#include "gkg/metrics.hpp"
#include "gkg/model.hpp"

namespace gkg {

struct EvalOptions {
    int max_new = 64;
    std::map<std::string, int> per_dataset_max_new;  // dataset key -> bound

    int max_new_for(const std::string& key) const {
        auto it = per_dataset_max_new.find(key);
        return it == per_dataset_max_new.end() ? max_new : it->second;
    }
};

// Anything that maps a record to a predicted output string. The model-backed
// decoder is one instance; tests substitute oracles.
using DecodeFn = std::function<std::string(const GkgRecord&)>;

template <class S>
DecodeFn model_decoder(const Checkpoint<S>& ckpt, const EvalOptions& options) {
    return [&ckpt, options](const GkgRecord& rec) {
        int max_new = options.max_new_for(rec.dataset_key());
        // Keep room for at least one generated token.
        int prompt_limit = std::max(8, ckpt.config.max_seq_len - max_new - 1);
        std::vector<int> prompt = encode_prompt(render_prompt(rec), prompt_limit);
        std::vector<int> continuation = greedy_decode(ckpt, prompt, max_new);
        return detokenize(continuation);
    };
}

struct EvalRun {
    std::string checkpoint_hash;
    std::string corpus_id;
    PromptStrategy strategy;
    std::vector<PredictionRecord> predictions;  // dataset order, record order
    MetricReport report;
    std::map<std::string, double> seconds_per_dataset;
};

inline std::string first_line(const std::string& s) {
    auto nl = s.find('\n');
    return nl == std::string::npos ? s : s.substr(0, nl);
}

// Decodes every test record of every dataset, scores per dataset and
// aggregates. Each record yields exactly one prediction.
inline EvalRun evaluate_with(const DecodeFn& decode, const Corpus& corpus,
                             PromptStrategy strategy, const std::string& checkpoint_hash,
                             const std::string& corpus_id) {
    EvalRun run;
    run.checkpoint_hash = checkpoint_hash;
    run.corpus_id = corpus_id;
    run.strategy = strategy;

    std::vector<DatasetScore> scores;
    std::set<std::string> seen_ids;
    for (const auto& entry : corpus.manifest.entries) {
        const std::string key = entry.descriptor.key();
        auto it = corpus.test.find(key);
        if (it == corpus.test.end())
            throw std::runtime_error("evaluate: corpus has no test split for " + key);
        const auto& records = it->second;
        if (records.empty()) continue;

        auto start = std::chrono::steady_clock::now();
        std::vector<PredictionRecord> preds;
        preds.reserve(records.size());
        for (const auto& rec : records) {
            if (!seen_ids.insert(rec.id).second)
                throw std::runtime_error("evaluate: duplicate prediction for " + rec.id);
            preds.push_back({rec.id, rec.output, decode(rec)});
        }
        DatasetScore ds;
        ds.descriptor = entry.descriptor;
        ds.count = preds.size();
        ds.score = score_dataset(preds, entry.descriptor, &ds.dropped);
        std::vector<PredictionRecord> trimmed = preds;
        for (auto& p : trimmed) p.predicted = first_line(p.predicted);
        ds.score_first_line = score_dataset(trimmed, entry.descriptor);
        scores.push_back(std::move(ds));
        run.predictions.insert(run.predictions.end(), preds.begin(), preds.end());
        run.seconds_per_dataset[key] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (scores.empty()) throw std::runtime_error("evaluate: corpus has no test records");
    run.report = aggregate(scores);
    return run;
}

template <class S>
EvalRun evaluate(const Checkpoint<S>& ckpt, const Corpus& corpus, PromptStrategy strategy,
                 const EvalOptions& options, const std::string& corpus_id = "corpus") {
    return evaluate_with(model_decoder(ckpt, options), corpus, strategy, checkpoint_hash(ckpt),
                         corpus_id);
}

// Report restricted to held-out datasets; the overall row is the OOD
// average line.
inline MetricReport ood_report(const EvalRun& run) {
    std::vector<DatasetScore> ood;
    for (const auto& d : run.report.per_dataset)
        if (d.descriptor.held_out) ood.push_back(d);
    if (ood.empty()) throw std::runtime_error("ood_report: the run contains no held-out datasets");
    return aggregate(ood);
}

// ---------------------------------------------------------------------------
// Prompt-strategy ablation (Full is the baseline row).

struct AblationRow {
    PromptStrategy strategy;
    std::map<GraphFamily, double> per_graph;
    double overall = 0.0;
    std::map<GraphFamily, double> delta_per_graph;  // vs the Full row
    double delta_overall = 0.0;
};

using CheckpointFactory = std::function<Checkpoint<float>(PromptStrategy)>;
using CorpusBuilder = std::function<Corpus(PromptStrategy)>;

inline std::vector<AblationRow> ablation_prompts(const CheckpointFactory& checkpoint_for,
                                                 const CorpusBuilder& corpus_for,
                                                 const std::vector<PromptStrategy>& strategies,
                                                 const EvalOptions& options) {
    bool has_full = false;
    for (const auto& s : strategies) has_full |= s.variant == StrategyVariant::Full;
    if (!has_full) throw UsageError("ablation_prompts: strategies must include the full baseline");

    std::vector<AblationRow> rows;
    std::size_t full_index = 0;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        const PromptStrategy& strategy = strategies[i];
        Corpus corpus = corpus_for(strategy);
        Checkpoint<float> ckpt = checkpoint_for(strategy);
        EvalRun run = evaluate(ckpt, corpus, strategy, options);
        AblationRow row;
        row.strategy = strategy;
        row.per_graph = run.report.per_graph;
        row.overall = run.report.overall;
        if (strategy.variant == StrategyVariant::Full) full_index = i;
        rows.push_back(std::move(row));
    }
    const AblationRow& full_row = rows[full_index];
    for (auto& row : rows) {
        row.delta_overall = row.overall - full_row.overall;
        for (const auto& [family, score] : row.per_graph) {
            auto it = full_row.per_graph.find(family);
            row.delta_per_graph[family] = score - (it == full_row.per_graph.end() ? 0.0 : it->second);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Stage comparison (intermediate-version matrix).

struct StageComparison {
    struct Row {
        std::string label;
        std::map<GraphFamily, double> per_graph;
        double overall = 0.0;
    };
    std::vector<Row> rows;
    std::vector<std::string> warnings;  // lineage breaks, recorded not fatal
};

template <class S>
StageComparison stage_comparison(const std::vector<Checkpoint<S>>& checkpoints,
                                 const Corpus& corpus, PromptStrategy strategy,
                                 const EvalOptions& options) {
    StageComparison cmp;
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        std::string expected = checkpoint_hash(checkpoints[i - 1]);
        if (checkpoints[i].parent_hash != expected)
            cmp.warnings.push_back("lineage break: " + checkpoints[i].stage_label +
                                   " does not descend from " + checkpoints[i - 1].stage_label);
    }
    for (const auto& ckpt : checkpoints) {
        EvalRun run = evaluate(ckpt, corpus, strategy, options);
        StageComparison::Row row;
        row.label = ckpt.stage_label;
        row.per_graph = run.report.per_graph;
        row.overall = run.report.overall;
        cmp.rows.push_back(std::move(row));
    }
    return cmp;
}

}  // namespace gkg
