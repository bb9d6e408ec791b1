// Evaluation metrics: set-based micro-F1 over parsed structured items and
// LCS-based ROUGE-L, plus per-graph / overall aggregation.
#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gkg/types.hpp"

namespace gkg {

struct PredictionRecord {
    std::string record_id;
    std::string gold;
    std::string predicted;
};

// Normalized item set extracted from one output text. Set semantics: no
// duplicates; unparseable fragments are dropped but counted.
struct StructuredItems {
    std::set<std::string> items;
    int dropped = 0;
};

// Trim, case-fold (ASCII), collapse internal whitespace.
inline std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // leading whitespace is dropped
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += static_cast<char>(std::tolower(u));
    }
    return out;
}

inline std::vector<std::string> whitespace_tokens(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

namespace metric_detail {

// Tasks whose whole output is a single label/judgement rather than an
// item list.
inline bool whole_string_task(std::string_view task_code) {
    return task_code == "LI" || task_code == "TC";
}

// Parses one ";"-delimited fragment: either a bracketed triple
// "<a, r, b>" (ASCII or U+27E8/27E9 brackets) or a bare label. Returns
// false for malformed bracket expressions.
inline bool parse_fragment(std::string_view fragment, std::string& out) {
    std::string text(fragment);
    // Map the Unicode angle brackets onto their ASCII counterparts.
    auto replace_all = [&](std::string_view from, std::string_view to) {
        std::size_t pos = 0;
        while ((pos = text.find(from, pos)) != std::string::npos) {
            text.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("⟨", "<");
    replace_all("⟩", ">");

    std::string trimmed = normalize_text(text);
    if (trimmed.empty()) return false;
    bool has_open = trimmed.find('<') != std::string::npos;
    bool has_close = trimmed.find('>') != std::string::npos;
    if (!has_open && !has_close) {
        out = trimmed;  // bare label
        return true;
    }
    auto open = trimmed.find('<');
    auto close = trimmed.rfind('>');
    if (!has_open || !has_close || close < open) return false;
    std::string inner = trimmed.substr(open + 1, close - open - 1);
    if (inner.find('<') != std::string::npos || inner.find('>') != std::string::npos) return false;

    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto comma = inner.find(',', start);
        std::string part =
            normalize_text(comma == std::string::npos ? inner.substr(start)
                                                      : inner.substr(start, comma - start));
        parts.push_back(std::move(part));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (parts.size() != 3) return false;
    for (const auto& p : parts)
        if (p.empty()) return false;
    out = "<" + parts[0] + ", " + parts[1] + ", " + parts[2] + ">";
    return true;
}

}  // namespace metric_detail

// Lenient, total parse of one output text into a normalized item set.
inline StructuredItems parse_structured(std::string_view text, std::string_view task_code) {
    StructuredItems result;
    if (metric_detail::whole_string_task(task_code)) {
        std::string whole = normalize_text(text);
        if (!whole.empty()) result.items.insert(std::move(whole));
        return result;
    }
    std::size_t start = 0;
    std::string_view sv(text);
    while (start <= sv.size()) {
        auto semi = sv.find(';', start);
        std::string_view fragment =
            semi == std::string_view::npos ? sv.substr(start) : sv.substr(start, semi - start);
        if (!normalize_text(fragment).empty()) {
            std::string item;
            if (metric_detail::parse_fragment(fragment, item))
                result.items.insert(std::move(item));
            else
                result.dropped += 1;
        }
        if (semi == std::string_view::npos) break;
        start = semi + 1;
    }
    return result;
}

// Micro-pooled F1 over item sets: TP/FP/FN summed across all pairs.
inline double micro_f1(const std::vector<std::pair<StructuredItems, StructuredItems>>& pairs) {
    if (pairs.empty()) throw std::runtime_error("micro_f1: empty pair list");
    long long tp = 0, fp = 0, fn = 0;
    for (const auto& [gold, pred] : pairs) {
        for (const auto& item : pred.items) {
            if (gold.items.count(item))
                ++tp;
            else
                ++fp;
        }
        for (const auto& item : gold.items)
            if (pred.items.count(item) == 0) ++fn;
    }
    long long denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

// Longest common subsequence length, O(|a|*|b|) dynamic programming.
inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// ROUGE-L F-measure (beta = 1) on normalized whitespace tokens.
inline double rouge_l(std::string_view gold, std::string_view pred) {
    auto g = whitespace_tokens(normalize_text(gold));
    auto p = whitespace_tokens(normalize_text(pred));
    if (g.empty() || p.empty()) return 0.0;
    double l = static_cast<double>(lcs_length(g, p));
    if (l == 0.0) return 0.0;
    double recall = l / static_cast<double>(g.size());
    double precision = l / static_cast<double>(p.size());
    return 2.0 * precision * recall / (precision + recall);
}

// Dataset-level score: micro-F1 over parsed items, or mean ROUGE-L.
// dropped_out, when given, receives the number of unparseable predicted
// fragments (they count as wrong, never as crashes).
inline double score_dataset(const std::vector<PredictionRecord>& preds,
                            const TaskDescriptor& descriptor, int* dropped_out = nullptr) {
    if (preds.empty())
        throw std::runtime_error("score_dataset: no predictions for " + descriptor.key());
    for (const auto& p : preds) {
        auto dot = p.record_id.find('.', p.record_id.find('.') + 1);
        if (p.record_id.substr(0, dot) != descriptor.key())
            throw std::runtime_error("score_dataset: prediction " + p.record_id +
                                     " does not belong to " + descriptor.key());
    }
    if (dropped_out != nullptr) *dropped_out = 0;
    if (descriptor.metric == MetricKind::RougeL) {
        double sum = 0.0;
        for (const auto& p : preds) sum += rouge_l(p.gold, p.predicted);
        return sum / static_cast<double>(preds.size());
    }
    std::vector<std::pair<StructuredItems, StructuredItems>> pairs;
    pairs.reserve(preds.size());
    for (const auto& p : preds) {
        StructuredItems pred = parse_structured(p.predicted, descriptor.task_code);
        if (dropped_out != nullptr) *dropped_out += pred.dropped;
        pairs.push_back({parse_structured(p.gold, descriptor.task_code), std::move(pred)});
    }
    return micro_f1(pairs);
}

// One scored cell of the report.
struct DatasetScore {
    TaskDescriptor descriptor;
    double score = 0.0;
    double score_first_line = 0.0;  // prediction truncated at the first newline
    std::size_t count = 0;
    int dropped = 0;  // unparseable predicted fragments (micro-F1 path)
};

struct MetricReport {
    std::vector<DatasetScore> per_dataset;            // manifest order
    std::map<GraphFamily, double> per_graph;          // unweighted dataset means
    double overall = 0.0;

    const DatasetScore* find(std::string_view key) const {
        for (const auto& d : per_dataset)
            if (d.descriptor.key() == key) return &d;
        return nullptr;
    }
};

// Fills per-graph and overall rows as unweighted arithmetic means of the
// dataset-level scores (Average Performance convention).
inline MetricReport aggregate(const std::vector<DatasetScore>& dataset_scores) {
    if (dataset_scores.empty()) throw std::runtime_error("aggregate: no dataset scores");
    MetricReport report;
    report.per_dataset = dataset_scores;
    std::map<GraphFamily, std::pair<double, int>> acc;
    double total = 0.0;
    for (const auto& d : dataset_scores) {
        auto& [sum, n] = acc[d.descriptor.family];
        sum += d.score;
        n += 1;
        total += d.score;
    }
    for (const auto& [family, sn] : acc) report.per_graph[family] = sn.first / sn.second;
    report.overall = total / static_cast<double>(dataset_scores.size());
    return report;
}

}  // namespace gkg
