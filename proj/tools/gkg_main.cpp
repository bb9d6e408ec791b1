// gkg: one entry point wiring corpus ingestion, curriculum training,
// evaluation and the sweep drivers into reproducible commands driven by a
// single JSON config file.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gkg/pipeline.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> stage_order;
    std::optional<std::string> strategy;
    std::optional<std::string> fractions;
    std::optional<std::string> grid;
};

gkg::RunConfig make_config(const CliOverrides& o) {
    gkg::RunConfig cfg;
    if (!o.config_path.empty()) {
        cfg = gkg::load_run_config(o.config_path);
    } else {
        gkg::apply_default_paths(cfg);
    }
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.optimizer.seed = *o.seed;
    }
    if (o.stage_order) cfg.stage_order = *o.stage_order;
    if (o.strategy) cfg.strategy = gkg::PromptStrategy::parse(*o.strategy);
    if (o.fractions) {
        cfg.sweep_fractions.clear();
        std::string item;
        for (char c : *o.fractions + ",") {
            if (c == ',') {
                if (!item.empty()) cfg.sweep_fractions.push_back(gkg::parse_fraction(item));
                item.clear();
            } else {
                item += c;
            }
        }
        if (cfg.sweep_fractions.empty()) throw gkg::UsageError("--fractions names no fractions");
    }
    if (o.grid) {
        // "etaA1,etaA2;lambda1,lambda2"
        auto semi = o.grid->find(';');
        if (semi == std::string::npos)
            throw gkg::UsageError("--grid expects 'etaA,...;lambda,...'");
        auto parse_list = [](const std::string& text) {
            std::vector<double> values;
            std::string item;
            for (char c : text + ",") {
                if (c == ',') {
                    if (!item.empty()) values.push_back(std::stod(item));
                    item.clear();
                } else {
                    item += c;
                }
            }
            return values;
        };
        cfg.eta_grid.eta_a_values = parse_list(o.grid->substr(0, semi));
        cfg.eta_grid.lambda_values = parse_list(o.grid->substr(semi + 1));
        cfg.eta_grid.validate();
    }
    cfg.validate();
    return cfg;
}

void print_ingest_stats(const gkg::IngestStats& stats) {
    std::printf("%-8s %-6s %-15s %8s %8s\n", "family", "task", "dataset", "train", "test");
    for (const auto& row : stats.rows)
        std::printf("%-8s %-6s %-15s %8zu %8zu\n", gkg::to_string(row.descriptor.family).c_str(),
                    row.descriptor.task_code.c_str(), row.descriptor.dataset_name.c_str(),
                    row.train, row.test);
    for (const auto& [family, counts] : stats.per_family)
        std::printf("%-8s %-6s %-15s %8zu %8zu\n", gkg::to_string(family).c_str(), "", "(total)",
                    counts.first, counts.second);
    std::printf("corpus hash: %s\n", stats.corpus_hash.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GKG curriculum-training workbench"};
    app.require_subcommand(1);

    CliOverrides o;
    app.add_option("--config", o.config_path, "run config JSON");
    app.add_option("--seed", o.seed, "override the global seed");

    auto* ingest = app.add_subcommand("ingest", "build the corpus directory");
    ingest->fallthrough();
    ingest->add_option("--strategy", o.strategy, "prompt strategy");

    auto* train = app.add_subcommand("train", "run the curriculum, write stage checkpoints");
    train->fallthrough();
    train->add_option("--stage-order", o.stage_order, "e.g. K-E-C or E-K-C");

    std::string eval_checkpoint = "GKG-LLM";
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over the test splits");
    eval->fallthrough();
    eval->add_option("--checkpoint", eval_checkpoint, "stage label or checkpoint directory");
    eval->add_option("--strategy", o.strategy, "prompt strategy");

    std::string sweep_kind;
    auto* sweep = app.add_subcommand("sweep", "order / scale / eta experiment drivers");
    sweep->fallthrough();
    sweep->add_option("kind", sweep_kind, "order|scale|eta")->required();
    sweep->add_option("--fractions", o.fractions, "comma-separated scale fractions");
    sweep->add_option("--grid", o.grid, "eta grid 'etaA,...;lambda,...'");
    sweep->add_option("--stage-order", o.stage_order, "plan for non-order sweeps");

    std::string predictions_path;
    auto* report = app.add_subcommand("report", "re-score an existing prediction file");
    report->fallthrough();
    report->add_option("--predictions", predictions_path, "predictions.jsonl")->required();

    auto fail = [](const std::string& kind, const std::string& message, int code) {
        nlohmann::ordered_json err;
        err["error"] = message;
        err["kind"] = kind;
        std::cerr << err.dump() << "\n";
        return code;
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        gkg::RunConfig cfg = make_config(o);
        if (ingest->parsed()) {
            gkg::IngestStats stats = gkg::run_ingest(cfg);
            print_ingest_stats(stats);
        } else if (train->parsed()) {
            gkg::Corpus corpus = gkg::load_corpus_dir(cfg.corpus_dir);
            gkg::TrainOutput out = gkg::run_train(cfg, corpus);
            for (std::size_t i = 0; i < out.labels.size(); ++i)
                std::printf("%-16s %s\n", out.labels[i].c_str(), out.hashes[i].c_str());
        } else if (eval->parsed()) {
            gkg::Corpus corpus = gkg::load_corpus_dir(cfg.corpus_dir);
            auto ckpt = gkg::load_checkpoint(gkg::resolve_checkpoint_path(cfg, eval_checkpoint));
            gkg::EvalRun run = gkg::run_eval(cfg, corpus, ckpt);
            std::printf("checkpoint %s overall %.4f\n", run.checkpoint_hash.substr(0, 12).c_str(),
                        run.report.overall);
            std::printf("report: %s\n", (cfg.report_dir / "report.md").string().c_str());
        } else if (sweep->parsed()) {
            gkg::Corpus corpus = gkg::load_corpus_dir(cfg.corpus_dir);
            gkg::run_sweep(cfg, sweep_kind, corpus);
            std::printf("sweep tables: %s\n",
                        (cfg.report_dir / ("sweep_" + sweep_kind + ".csv")).string().c_str());
        } else if (report->parsed()) {
            gkg::Corpus corpus = gkg::load_corpus_dir(cfg.corpus_dir);
            gkg::MetricReport rep = gkg::run_report(cfg, corpus, predictions_path);
            std::printf("overall %.4f\n", rep.overall);
        }
    } catch (const gkg::UsageError& e) {
        return fail("usage", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
