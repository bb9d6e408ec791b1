// Corpus assembly: raw-row ingestion, instruction assignment, few-shot
// injection, prompt rendering and proportional subsampling. All operations
// are pure functions of (inputs, seed).
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gkg/rng.hpp"
#include "gkg/types.hpp"

namespace gkg {

// Splits one raw TSV row into (input, output). Rows are "input<TAB>output".
inline std::pair<std::string, std::string> split_raw_row(std::string_view row) {
    auto tab = row.find('\t');
    if (tab == std::string_view::npos) return {std::string(row), std::string()};
    return {std::string(row.substr(0, tab)), std::string(row.substr(tab + 1))};
}

// Turns raw rows into blank-instruction records with fresh sequential ids.
// The first train_count rows (from the manifest entry) become the train
// split, the rest the test split; held-out descriptors route every row to
// test. Instruction and demonstration are filled by later passes.
inline std::pair<std::vector<GkgRecord>, std::vector<GkgRecord>> ingest_dataset(
    const std::vector<std::string>& raw_lines, const TaskDescriptor& descriptor,
    const SplitManifest& manifest) {
    descriptor.validate();
    const ManifestEntry* entry = manifest.find(descriptor.key());
    if (entry == nullptr)
        throw UsageError("descriptor " + descriptor.key() + " is not registered in the manifest");

    const std::int64_t want_train = descriptor.held_out ? 0 : entry->train_count;
    const std::int64_t want_test = descriptor.held_out
                                       ? static_cast<std::int64_t>(raw_lines.size())
                                       : entry->test_count;
    if (!descriptor.held_out &&
        static_cast<std::int64_t>(raw_lines.size()) != want_train + want_test)
        throw std::runtime_error("dataset " + descriptor.key() + ": expected " +
                                 std::to_string(want_train + want_test) + " rows, got " +
                                 std::to_string(raw_lines.size()));

    std::vector<GkgRecord> train, test;
    train.reserve(static_cast<std::size_t>(want_train));
    test.reserve(static_cast<std::size_t>(want_test));
    std::set<std::string> seen_ids;
    for (std::size_t i = 0; i < raw_lines.size(); ++i) {
        auto [input, output] = split_raw_row(raw_lines[i]);
        if (input.empty() || output.empty())
            throw std::runtime_error("dataset " + descriptor.key() + ": row " +
                                     std::to_string(i + 1) + " is missing input or output");
        GkgRecord rec;
        rec.id = descriptor.key() + "." + std::to_string(i);
        rec.input = std::move(input);
        rec.output = std::move(output);
        if (!seen_ids.insert(rec.id).second)
            throw std::runtime_error("dataset " + descriptor.key() + ": duplicate id " + rec.id);
        if (static_cast<std::int64_t>(i) < want_train)
            train.push_back(std::move(rec));
        else
            test.push_back(std::move(rec));
    }
    if (static_cast<std::int64_t>(test.size()) != want_test)
        throw std::runtime_error("dataset " + descriptor.key() + ": test split has " +
                                 std::to_string(test.size()) + " rows, manifest says " +
                                 std::to_string(want_test));
    return {std::move(train), std::move(test)};
}

// Fills the instruction field. Full/ZeroShotOnly draw uniformly from the ten
// templates keyed on (seed, record id); SingleInstruction/SingleAndZero pin
// template 0. Record order is preserved.
inline std::vector<GkgRecord> assign_instructions(std::vector<GkgRecord> records,
                                                  const InstructionPool& pool,
                                                  std::uint64_t seed, PromptStrategy strategy) {
    pool.validate();
    for (auto& rec : records) {
        std::size_t index = 0;
        if (!strategy.forces_single_template())
            index = keyed_below(seed, "instruction:" + rec.id, pool.templates.size());
        rec.instruction = pool.templates[index];
    }
    return records;
}

inline std::string render_demonstration(const GkgRecord& donor) {
    return "Input: " + donor.input + "\nOutput: " + donor.output;
}

// Marks exactly round(fraction * n) records few-shot and attaches one worked
// donor example to each. Recipients and donors are keyed on (seed, ids); a
// record never receives itself. Zero-shot strategies force zero injections.
inline std::vector<GkgRecord> inject_few_shot(std::vector<GkgRecord> records,
                                              const std::vector<GkgRecord>& donors,
                                              Fraction fraction, std::uint64_t seed,
                                              PromptStrategy strategy) {
    if (fraction.num > fraction.den)
        throw UsageError("few-shot fraction must be in [0,1], got " + fraction.str());
    for (auto& rec : records) {
        rec.shot = ShotMode::Zero;
        rec.demonstration.reset();
    }
    if (strategy.forces_zero_shot() || fraction.is_zero() || records.empty()) return records;

    const std::int64_t want = fraction.round_of(static_cast<std::int64_t>(records.size()));
    if (want == 0) return records;
    if (donors.empty())
        throw std::runtime_error("few-shot fraction " + fraction.str() +
                                 " requested but the donor list is empty");

    // Recipients: the `want` records with the smallest id-keyed hashes, so
    // the same records are picked no matter how the list was assembled.
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto ha = keyed_u64(seed, "few_shot:" + records[a].id);
        auto hb = keyed_u64(seed, "few_shot:" + records[b].id);
        return ha != hb ? ha < hb : records[a].id < records[b].id;
    });

    for (std::int64_t k = 0; k < want; ++k) {
        GkgRecord& rec = records[order[static_cast<std::size_t>(k)]];
        std::size_t pick = keyed_below(seed, "donor:" + rec.id, donors.size());
        // Skip the record itself and any donor carrying the same
        // input/output pair: a demonstration must never equal the record it
        // decorates.
        auto same = [&](const GkgRecord& d) {
            return d.id == rec.id || (d.input == rec.input && d.output == rec.output);
        };
        std::size_t tries = 0;
        while (same(donors[pick])) {
            pick = (pick + 1) % donors.size();
            if (++tries > donors.size())
                throw std::runtime_error("record " + rec.id + ": no distinct few-shot donor");
        }
        rec.shot = ShotMode::Few;
        rec.demonstration = render_demonstration(donors[pick]);
    }
    return records;
}

// The five-field prompt layout. Byte-exact: instruction, blank line,
// optional demonstration plus blank line, then the input/output scaffold.
inline std::string render_prompt(const GkgRecord& record) {
    std::string out = record.instruction;
    out += "\n\n";
    if (record.shot == ShotMode::Few && record.demonstration) {
        out += *record.demonstration;
        out += "\n\n";
    }
    out += "Input: ";
    out += record.input;
    out += "\nOutput:";
    return out;
}

// Deterministic proportional subsample: round(p * n) records overall, with
// per-dataset quotas within one record of p * n_task (largest remainder),
// returned in original corpus order. p = 1 is the identity.
inline std::vector<GkgRecord> sample_fraction(const std::vector<GkgRecord>& records, Fraction p,
                                              std::uint64_t seed) {
    if (p.is_zero() || p.num > p.den)
        throw UsageError("sample fraction must be in (0,1], got " + p.str());
    if (p.is_one()) return records;

    // Group record positions per dataset, preserving encounter order.
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string key = records[i].dataset_key();
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) group_order.push_back(key);
        it->second.push_back(i);
    }

    const std::int64_t total_want = p.round_of(static_cast<std::int64_t>(records.size()));

    // Largest-remainder quotas: floor(p*n_g) each, leftovers to the largest
    // fractional parts (ties broken by encounter order).
    std::vector<std::int64_t> quota(group_order.size());
    std::vector<std::pair<std::int64_t, std::size_t>> remainders;  // (-numerator, group)
    std::int64_t assigned = 0;
    for (std::size_t g = 0; g < group_order.size(); ++g) {
        std::int64_t n = static_cast<std::int64_t>(groups[group_order[g]].size());
        quota[g] = (p.num * n) / p.den;
        assigned += quota[g];
        remainders.push_back({-((p.num * n) % p.den), g});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; assigned < total_want && k < remainders.size(); ++k, ++assigned)
        quota[remainders[k].second] += 1;

    std::vector<bool> keep(records.size(), false);
    for (std::size_t g = 0; g < group_order.size(); ++g) {
        auto positions = groups[group_order[g]];
        std::sort(positions.begin(), positions.end(), [&](std::size_t a, std::size_t b) {
            auto ha = keyed_u64(seed, "sample:" + records[a].id);
            auto hb = keyed_u64(seed, "sample:" + records[b].id);
            return ha != hb ? ha < hb : records[a].id < records[b].id;
        });
        for (std::int64_t k = 0; k < quota[g] && k < static_cast<std::int64_t>(positions.size()); ++k)
            keep[positions[static_cast<std::size_t>(k)]] = true;
    }

    std::vector<GkgRecord> out;
    out.reserve(static_cast<std::size_t>(total_want));
    for (std::size_t i = 0; i < records.size(); ++i)
        if (keep[i]) out.push_back(records[i]);
    return out;
}

// A fully assembled corpus: descriptors plus per-dataset train/test splits.
struct Corpus {
    SplitManifest manifest;
    std::map<std::string, std::vector<GkgRecord>> train;  // key: "TASK.dataset"
    std::map<std::string, std::vector<GkgRecord>> test;

    const TaskDescriptor& descriptor(const std::string& key) const {
        const ManifestEntry* e = manifest.find(key);
        if (e == nullptr) throw std::runtime_error("unknown dataset key: " + key);
        return e->descriptor;
    }

    // Training records for the given families, in manifest order. Held-out
    // datasets contribute nothing by construction; verified again here.
    std::vector<GkgRecord> train_records(const std::set<GraphFamily>& families) const {
        std::vector<GkgRecord> out;
        for (const auto& entry : manifest.entries) {
            if (families.count(entry.descriptor.family) == 0) continue;
            auto it = train.find(entry.descriptor.key());
            if (it == train.end()) continue;
            if (entry.descriptor.held_out && !it->second.empty())
                throw std::runtime_error("held-out dataset " + entry.descriptor.key() +
                                         " has training records");
            out.insert(out.end(), it->second.begin(), it->second.end());
        }
        return out;
    }

    std::set<std::string> held_out_test_ids() const {
        std::set<std::string> ids;
        for (const auto& entry : manifest.entries) {
            if (!entry.descriptor.held_out) continue;
            auto it = test.find(entry.descriptor.key());
            if (it == test.end()) continue;
            for (const auto& r : it->second) ids.insert(r.id);
        }
        return ids;
    }

    std::size_t train_total() const {
        std::size_t n = 0;
        for (const auto& [k, v] : train) n += v.size();
        return n;
    }
    std::size_t test_total() const {
        std::size_t n = 0;
        for (const auto& [k, v] : test) n += v.size();
        return n;
    }
};

// Runs the full per-dataset pass: ingest raw rows, assign instructions to
// both splits, inject few-shot demonstrations with donors drawn from the
// train split. Held-out datasets have no legal donors and stay zero-shot.
inline Corpus assemble_corpus(
    const SplitManifest& manifest,
    const std::function<std::vector<std::string>(const ManifestEntry&)>& raw_rows,
    const std::function<InstructionPool(const std::string&)>& pool_for, PromptStrategy strategy) {
    manifest.validate();
    Corpus corpus;
    corpus.manifest = manifest;
    for (const auto& entry : manifest.entries) {
        auto [train, test] = ingest_dataset(raw_rows(entry), entry.descriptor, manifest);
        InstructionPool pool = pool_for(entry.descriptor.task_code);
        train = assign_instructions(std::move(train), pool, manifest.seed, strategy);
        test = assign_instructions(std::move(test), pool, manifest.seed, strategy);
        if (!entry.descriptor.held_out) {
            const std::vector<GkgRecord> donors = train;
            train = inject_few_shot(std::move(train), donors, manifest.few_shot_fraction,
                                    manifest.seed, strategy);
            test = inject_few_shot(std::move(test), donors, manifest.few_shot_fraction,
                                   manifest.seed, strategy);
        }
        corpus.train[entry.descriptor.key()] = std::move(train);
        corpus.test[entry.descriptor.key()] = std::move(test);
    }
    return corpus;
}

}  // namespace gkg
