// Report emission: the Table-1-style Markdown table (rows grouped by graph
// family, held-out rows starred, ROUGE-L rows daggered), the JSON report
// mirroring MetricReport, prediction/log JSONL and sweep CSV tables.
#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gkg/harness.hpp"
#include "gkg/metrics.hpp"
#include "gkg/trainer.hpp"

namespace gkg {

inline std::string fmt_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline int score_pct(double v) { return static_cast<int>(std::lround(v * 100.0)); }

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Markdown table in the main-results layout. Scores carry both the
// 4-decimal value and the rounded integer-percent column.
inline std::string render_markdown_report(const MetricReport& report,
                                          const std::string& bottom_label = "Average Performance") {
    const GraphFamily order[] = {GraphFamily::KG, GraphFamily::EKG, GraphFamily::CKG,
                                 GraphFamily::Counter};
    std::string md;
    md += "| Graphs | Tasks | Datasets | Score | % |\n";
    md += "|---|---|---|---|---|\n";
    for (GraphFamily family : order) {
        bool first = true;
        for (const auto& d : report.per_dataset) {
            if (d.descriptor.family != family) continue;
            std::string task = d.descriptor.task_code;
            if (d.descriptor.metric == MetricKind::RougeL) task += "†";
            std::string dataset = d.descriptor.dataset_name;
            if (d.descriptor.held_out) dataset += "*";
            md += "| " + (first ? to_string(family) : std::string()) + " | " + task + " | " +
                  dataset + " | " + fmt_score(d.score) + " | " +
                  std::to_string(score_pct(d.score)) + " |\n";
            first = false;
        }
    }
    md += "| **" + bottom_label + "** | | | " + fmt_score(report.overall) + " | " +
          std::to_string(score_pct(report.overall)) + " |\n";
    return md;
}

inline ordered_json report_to_json(const MetricReport& report) {
    ordered_json j;
    j["per_dataset"] = ordered_json::array();
    for (const auto& d : report.per_dataset) {
        ordered_json cell;
        cell["family"] = to_string(d.descriptor.family);
        cell["task"] = d.descriptor.task_code;
        cell["dataset"] = d.descriptor.dataset_name;
        cell["metric"] = to_string(d.descriptor.metric);
        cell["held_out"] = d.descriptor.held_out;
        cell["count"] = d.count;
        cell["score"] = d.score;
        cell["score_first_line"] = d.score_first_line;
        cell["score_pct"] = score_pct(d.score);
        cell["dropped_fragments"] = d.dropped;
        j["per_dataset"].push_back(std::move(cell));
    }
    j["per_graph"] = ordered_json::object();
    for (const auto& [family, score] : report.per_graph) j["per_graph"][to_string(family)] = score;
    j["overall"] = report.overall;
    j["overall_pct"] = score_pct(report.overall);
    return j;
}

// Deterministic: timing is deliberately left out (it goes to timing.json)
// so two runs from one resolved config emit byte-identical reports.
inline ordered_json eval_run_to_json(const EvalRun& run) {
    ordered_json j;
    j["checkpoint"] = run.checkpoint_hash;
    j["corpus"] = run.corpus_id;
    j["strategy"] = run.strategy.name();
    j["report"] = report_to_json(run.report);
    return j;
}

inline ordered_json eval_timing_to_json(const EvalRun& run) {
    ordered_json j = ordered_json::object();
    for (const auto& [key, secs] : run.seconds_per_dataset) j[key] = secs;
    return j;
}

// ---------------------------------------------------------------------------
// Prediction files: JSON-lines with keys record_id, gold, predicted.
// A byte-level decoder can emit arbitrary bytes (e.g. a multi-byte character
// cut at the generation limit), so predictions that are not valid UTF-8 are
// stored via a lossless latin-1 bridge and flagged.

inline bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    auto in = [&](std::size_t k, unsigned char lo, unsigned char hi) {
        if (i + k >= s.size()) return false;
        unsigned char b = s[i + k];
        return b >= lo && b <= hi;
    };
    while (i < s.size()) {
        unsigned char c = s[i];
        if (c < 0x80) {
            i += 1;
        } else if (c >= 0xC2 && c <= 0xDF) {
            if (!in(1, 0x80, 0xBF)) return false;
            i += 2;
        } else if (c == 0xE0) {
            if (!in(1, 0xA0, 0xBF) || !in(2, 0x80, 0xBF)) return false;
            i += 3;
        } else if ((c >= 0xE1 && c <= 0xEC) || c == 0xEE || c == 0xEF) {
            if (!in(1, 0x80, 0xBF) || !in(2, 0x80, 0xBF)) return false;
            i += 3;
        } else if (c == 0xED) {  // exclude surrogates
            if (!in(1, 0x80, 0x9F) || !in(2, 0x80, 0xBF)) return false;
            i += 3;
        } else if (c == 0xF0) {
            if (!in(1, 0x90, 0xBF) || !in(2, 0x80, 0xBF) || !in(3, 0x80, 0xBF)) return false;
            i += 4;
        } else if (c >= 0xF1 && c <= 0xF3) {
            if (!in(1, 0x80, 0xBF) || !in(2, 0x80, 0xBF) || !in(3, 0x80, 0xBF)) return false;
            i += 4;
        } else if (c == 0xF4) {
            if (!in(1, 0x80, 0x8F) || !in(2, 0x80, 0xBF) || !in(3, 0x80, 0xBF)) return false;
            i += 4;
        } else {
            return false;
        }
    }
    return true;
}

// Each byte 0x80..0xFF becomes codepoint U+0080..U+00FF.
inline std::string bytes_to_latin1(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        if (b < 0x80) {
            out += static_cast<char>(b);
        } else {
            out += static_cast<char>(0xC0 | (b >> 6));
            out += static_cast<char>(0x80 | (b & 0x3F));
        }
    }
    return out;
}

inline std::string latin1_to_bytes(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = text[i];
        if ((c == 0xC2 || c == 0xC3) && i + 1 < text.size()) {
            unsigned char d = text[i + 1];
            out += static_cast<char>(((c & 0x03) << 6) | (d & 0x3F));
            i += 2;
        } else {
            out += static_cast<char>(c);
            i += 1;
        }
    }
    return out;
}

inline std::string predictions_to_jsonl(const std::vector<PredictionRecord>& preds) {
    std::string out;
    for (const auto& p : preds) {
        ordered_json j;
        j["record_id"] = p.record_id;
        j["gold"] = p.gold;
        if (is_valid_utf8(p.predicted)) {
            j["predicted"] = p.predicted;
        } else {
            j["predicted"] = bytes_to_latin1(p.predicted);
            j["predicted_encoding"] = "latin-1";
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<PredictionRecord> predictions_from_jsonl(const std::string& text) {
    std::vector<PredictionRecord> preds;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        std::string line = text.substr(start, nl == std::string::npos ? nl : nl - start);
        if (!line.empty()) {
            ordered_json j = ordered_json::parse(line);
            std::string predicted = j.at("predicted").get<std::string>();
            if (j.value("predicted_encoding", "") == "latin-1")
                predicted = latin1_to_bytes(predicted);
            preds.push_back({j.at("record_id").get<std::string>(), j.at("gold").get<std::string>(),
                             std::move(predicted)});
        }
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return preds;
}

// ---------------------------------------------------------------------------
// Train logs: JSON-lines per step.

inline std::string train_log_to_jsonl(const TrainLog& log) {
    std::string out;
    for (const auto& s : log.steps) {
        ordered_json j;
        j["step"] = s.step;
        j["stage"] = s.stage;
        j["loss"] = s.loss;
        j["eta_a"] = s.eta_a;
        j["eta_b"] = s.eta_b;
        out += j.dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweep tables.

inline ordered_json sweep_reports_to_json(const std::map<std::string, MetricReport>& reports) {
    ordered_json j = ordered_json::object();
    for (const auto& [label, report] : reports) j[label] = report_to_json(report);
    return j;
}

inline std::string sweep_reports_to_csv(const std::map<std::string, MetricReport>& reports,
                                        const std::string& key_column) {
    std::string csv = key_column + ",overall,KG,EKG,CKG,Counter\n";
    for (const auto& [label, report] : reports) {
        csv += label + "," + fmt_score(report.overall);
        for (GraphFamily f : {GraphFamily::KG, GraphFamily::EKG, GraphFamily::CKG,
                              GraphFamily::Counter}) {
            auto it = report.per_graph.find(f);
            csv += ",";
            csv += it == report.per_graph.end() ? "" : fmt_score(it->second);
        }
        csv += "\n";
    }
    return csv;
}

inline ordered_json eta_sweep_to_json(const EtaSweepResult& result) {
    ordered_json j;
    j["eta_a_values"] = result.grid.eta_a_values;
    j["lambda_values"] = result.grid.lambda_values;
    j["scores"] = result.scores;
    return j;
}

// Heatmap-shaped CSV: one row per lambda multiple, one column per eta_A.
inline std::string eta_sweep_to_csv(const EtaSweepResult& result) {
    std::string csv = "lambda";
    for (double ea : result.grid.eta_a_values) csv += ",eta_a=" + fmt_double(ea);
    csv += "\n";
    for (std::size_t r = 0; r < result.grid.lambda_values.size(); ++r) {
        csv += "x" + fmt_double(result.grid.lambda_values[r]);
        for (double score : result.scores[r]) csv += "," + fmt_score(score);
        csv += "\n";
    }
    return csv;
}

inline std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
    std::string csv = "strategy,KG,EKG,CKG,Avg,dKG,dEKG,dCKG,dAvg\n";
    auto cell = [](const std::map<GraphFamily, double>& m, GraphFamily f) {
        auto it = m.find(f);
        return it == m.end() ? std::string() : fmt_score(it->second);
    };
    for (const auto& row : rows) {
        csv += row.strategy.name();
        for (GraphFamily f : {GraphFamily::KG, GraphFamily::EKG, GraphFamily::CKG})
            csv += "," + cell(row.per_graph, f);
        csv += "," + fmt_score(row.overall);
        for (GraphFamily f : {GraphFamily::KG, GraphFamily::EKG, GraphFamily::CKG})
            csv += "," + cell(row.delta_per_graph, f);
        csv += "," + fmt_score(row.delta_overall);
        csv += "\n";
    }
    return csv;
}

inline std::string stage_comparison_to_csv(const StageComparison& cmp) {
    std::string csv = "checkpoint,KG,EKG,CKG,Counter,overall\n";
    for (const auto& row : cmp.rows) {
        csv += row.label;
        for (GraphFamily f : {GraphFamily::KG, GraphFamily::EKG, GraphFamily::CKG,
                              GraphFamily::Counter}) {
            auto it = row.per_graph.find(f);
            csv += ",";
            csv += it == row.per_graph.end() ? "" : fmt_score(it->second);
        }
        csv += "," + fmt_score(row.overall) + "\n";
    }
    return csv;
}

}  // namespace gkg
