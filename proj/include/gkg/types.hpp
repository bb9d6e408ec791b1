// Corpus domain types: task descriptors, unified records, instruction pools,
// prompt strategies and the split manifest.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gkg/errors.hpp"
#include "gkg/fraction.hpp"

namespace gkg {

enum class GraphFamily { KG, EKG, CKG, Counter };
enum class MetricKind { MicroF1, RougeL };
enum class ShotMode { Zero, Few };

inline std::string to_string(GraphFamily f) {
    switch (f) {
        case GraphFamily::KG: return "KG";
        case GraphFamily::EKG: return "EKG";
        case GraphFamily::CKG: return "CKG";
        case GraphFamily::Counter: return "Counter";
    }
    return "?";
}

inline GraphFamily parse_family(std::string_view s) {
    if (s == "KG") return GraphFamily::KG;
    if (s == "EKG") return GraphFamily::EKG;
    if (s == "CKG") return GraphFamily::CKG;
    if (s == "Counter") return GraphFamily::Counter;
    throw UsageError("unknown graph family: '" + std::string(s) + "'");
}

inline std::string to_string(MetricKind m) {
    return m == MetricKind::MicroF1 ? "micro_f1" : "rouge_l";
}

inline MetricKind parse_metric(std::string_view s) {
    if (s == "micro_f1") return MetricKind::MicroF1;
    if (s == "rouge_l") return MetricKind::RougeL;
    throw UsageError("unknown metric kind: '" + std::string(s) + "'");
}

// Task codes scored with ROUGE-L; every other task uses micro-F1.
inline MetricKind metric_for_task(std::string_view task_code) {
    return (task_code == "AG" || task_code == "NLG") ? MetricKind::RougeL : MetricKind::MicroF1;
}

// Binds one dataset to its graph family, sub-task, metric and split flags.
struct TaskDescriptor {
    GraphFamily family = GraphFamily::KG;
    std::string task_code;      // e.g. "SRE", "ETRE", "NLG"
    std::string dataset_name;
    MetricKind metric = MetricKind::MicroF1;
    bool held_out = false;      // test-only; contributes zero training records
    bool sampled = false;       // upstream conversion subsampled the original
    Fraction sample_fraction = Fraction::one();

    // "TASK.dataset", also the id prefix of every record in the dataset.
    std::string key() const { return task_code + "." + dataset_name; }

    void validate() const {
        if (task_code.empty() || dataset_name.empty())
            throw UsageError("descriptor needs task code and dataset name");
        if (metric != metric_for_task(task_code))
            throw UsageError("descriptor " + key() + ": metric must be " +
                             to_string(metric_for_task(task_code)) + " for task " + task_code);
        if (family == GraphFamily::Counter && task_code != "NLG")
            throw UsageError("descriptor " + key() + ": Counter family is NLG-only");
        if (sample_fraction.is_zero() || sample_fraction.num > sample_fraction.den)
            throw UsageError("descriptor " + key() + ": sample_fraction must be in (0,1]");
        if (!sampled && !sample_fraction.is_one())
            throw UsageError("descriptor " + key() + ": fraction != 1 requires sampled flag");
    }
};

// One unified training/eval sample.
struct GkgRecord {
    std::string id;             // "taskcode.dataset.index"
    std::string instruction;
    ShotMode shot = ShotMode::Zero;
    std::optional<std::string> demonstration;  // present iff shot == Few
    std::string input;
    std::string output;

    // "TASK.dataset" prefix of the id.
    std::string dataset_key() const {
        auto second = id.find('.', id.find('.') + 1);
        return id.substr(0, second);
    }

    void validate() const {
        if (id.empty() || input.empty() || output.empty())
            throw std::runtime_error("record '" + id + "': id, input and output must be non-empty");
        if ((shot == ShotMode::Few) != demonstration.has_value())
            throw std::runtime_error("record '" + id + "': demonstration present iff few-shot");
    }
};

// Exactly ten instruction phrasings per task; index 0 is the canonical one
// the single-instruction ablation falls back to.
struct InstructionPool {
    std::string task_code;
    std::vector<std::string> templates;

    static constexpr std::size_t kSize = 10;

    void validate() const {
        if (templates.size() != kSize)
            throw UsageError("instruction pool for " + task_code + " must hold exactly 10 templates, got " +
                             std::to_string(templates.size()));
        for (const auto& t : templates)
            if (t.empty()) throw UsageError("instruction pool for " + task_code + " has an empty template");
        std::set<std::string> uniq(templates.begin(), templates.end());
        if (uniq.size() != templates.size())
            throw UsageError("instruction pool for " + task_code + " has duplicate templates");
    }
};

enum class StrategyVariant { Full, SingleInstruction, ZeroShotOnly, SingleAndZero };

struct PromptStrategy {
    StrategyVariant variant = StrategyVariant::Full;

    bool forces_single_template() const {
        return variant == StrategyVariant::SingleInstruction ||
               variant == StrategyVariant::SingleAndZero;
    }
    bool forces_zero_shot() const {
        return variant == StrategyVariant::ZeroShotOnly ||
               variant == StrategyVariant::SingleAndZero;
    }

    std::string name() const {
        switch (variant) {
            case StrategyVariant::Full: return "full";
            case StrategyVariant::SingleInstruction: return "single_instruction";
            case StrategyVariant::ZeroShotOnly: return "zero_shot_only";
            case StrategyVariant::SingleAndZero: return "single_and_zero";
        }
        return "?";
    }

    static PromptStrategy parse(std::string_view s) {
        if (s == "full") return {StrategyVariant::Full};
        if (s == "single_instruction") return {StrategyVariant::SingleInstruction};
        if (s == "zero_shot_only") return {StrategyVariant::ZeroShotOnly};
        if (s == "single_and_zero") return {StrategyVariant::SingleAndZero};
        throw UsageError("unknown prompt strategy: '" + std::string(s) + "'");
    }
};

// One dataset's entry in the split manifest. The raw TSV holds train rows
// first, then test rows; counts must match the file exactly.
struct ManifestEntry {
    TaskDescriptor descriptor;
    std::int64_t train_count = 0;
    std::int64_t test_count = 0;
    std::string raw_path;  // relative to the manifest file

    void validate() const {
        descriptor.validate();
        if (train_count < 0 || test_count < 0)
            throw UsageError("manifest entry " + descriptor.key() + ": negative count");
        if (descriptor.held_out && train_count != 0)
            throw UsageError("manifest entry " + descriptor.key() +
                             ": held-out datasets must have train_count = 0");
    }
};

struct SplitManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;
    Fraction few_shot_fraction = Fraction(1, 10);
    std::string instructions_dir = "instructions";

    const ManifestEntry* find(std::string_view key) const {
        for (const auto& e : entries)
            if (e.descriptor.key() == key) return &e;
        return nullptr;
    }

    void validate() const {
        if (few_shot_fraction.num > few_shot_fraction.den)
            throw UsageError("few_shot_fraction must be in [0,1]");
        std::set<std::string> keys;
        for (const auto& e : entries) {
            e.validate();
            if (!keys.insert(e.descriptor.key()).second)
                throw UsageError("duplicate manifest entry: " + e.descriptor.key());
        }
    }
};

}  // namespace gkg
