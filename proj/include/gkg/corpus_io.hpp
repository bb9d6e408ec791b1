// File formats: JSON-lines record files, the JSON split manifest,
// instruction template files and raw TSV ingestion input.
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gkg/corpus.hpp"
#include "gkg/types.hpp"

namespace gkg {

using ordered_json = nlohmann::ordered_json;

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// Splits on LF; a trailing newline does not produce an empty last line.
inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

inline std::vector<std::string> read_raw_rows(const std::filesystem::path& path) {
    return split_lines(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Record files: one JSON object per line, UTF-8, LF endings.

inline ordered_json record_to_json(const GkgRecord& rec) {
    ordered_json j;
    j["id"] = rec.id;
    j["instruction"] = rec.instruction;
    j["shot"] = rec.shot == ShotMode::Few ? "few" : "zero";
    if (rec.demonstration)
        j["demonstration"] = *rec.demonstration;
    else
        j["demonstration"] = nullptr;
    j["input"] = rec.input;
    j["output"] = rec.output;
    return j;
}

inline GkgRecord record_from_json(const ordered_json& j) {
    GkgRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.instruction = j.at("instruction").get<std::string>();
    std::string shot = j.at("shot").get<std::string>();
    if (shot == "few")
        rec.shot = ShotMode::Few;
    else if (shot == "zero")
        rec.shot = ShotMode::Zero;
    else
        throw std::runtime_error("record " + rec.id + ": bad shot value '" + shot + "'");
    if (!j.at("demonstration").is_null())
        rec.demonstration = j.at("demonstration").get<std::string>();
    rec.input = j.at("input").get<std::string>();
    rec.output = j.at("output").get<std::string>();
    return rec;
}

inline std::string records_to_jsonl(const std::vector<GkgRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        out += record_to_json(rec).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<GkgRecord> records_from_jsonl(const std::string& text) {
    std::vector<GkgRecord> records;
    for (const auto& line : split_lines(text)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(ordered_json::parse(line)));
    }
    return records;
}

inline void write_records(const std::filesystem::path& path, const std::vector<GkgRecord>& records) {
    write_text_file(path, records_to_jsonl(records));
}

inline std::vector<GkgRecord> read_records(const std::filesystem::path& path) {
    return records_from_jsonl(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Manifest file.

inline ordered_json manifest_to_json(const SplitManifest& m) {
    ordered_json j;
    j["seed"] = m.seed;
    j["few_shot_fraction"] = m.few_shot_fraction.str();
    j["instructions_dir"] = m.instructions_dir;
    j["datasets"] = ordered_json::array();
    for (const auto& e : m.entries) {
        ordered_json d;
        d["family"] = to_string(e.descriptor.family);
        d["task"] = e.descriptor.task_code;
        d["dataset"] = e.descriptor.dataset_name;
        d["metric"] = to_string(e.descriptor.metric);
        d["held_out"] = e.descriptor.held_out;
        d["sampled"] = e.descriptor.sampled;
        d["fraction"] = e.descriptor.sample_fraction.str();
        d["train_count"] = e.train_count;
        d["test_count"] = e.test_count;
        d["raw"] = e.raw_path;
        j["datasets"].push_back(std::move(d));
    }
    return j;
}

inline Fraction fraction_from_json(const ordered_json& v) {
    if (v.is_string()) return parse_fraction(v.get<std::string>());
    if (v.is_number_integer()) return Fraction(v.get<std::int64_t>(), 1);
    return fraction_from_double(v.get<double>());
}

inline SplitManifest manifest_from_json(const ordered_json& j) {
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("few_shot_fraction")) m.few_shot_fraction = fraction_from_json(j.at("few_shot_fraction"));
    if (j.contains("instructions_dir")) m.instructions_dir = j.at("instructions_dir").get<std::string>();
    for (const auto& d : j.at("datasets")) {
        ManifestEntry e;
        e.descriptor.family = parse_family(d.at("family").get<std::string>());
        e.descriptor.task_code = d.at("task").get<std::string>();
        e.descriptor.dataset_name = d.at("dataset").get<std::string>();
        e.descriptor.metric = d.contains("metric") ? parse_metric(d.at("metric").get<std::string>())
                                                   : metric_for_task(e.descriptor.task_code);
        e.descriptor.held_out = d.value("held_out", false);
        e.descriptor.sampled = d.value("sampled", false);
        if (d.contains("fraction")) e.descriptor.sample_fraction = fraction_from_json(d.at("fraction"));
        e.train_count = d.at("train_count").get<std::int64_t>();
        e.test_count = d.at("test_count").get<std::int64_t>();
        e.raw_path = d.value("raw", "");
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const SplitManifest& m) {
    write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

inline SplitManifest read_manifest(const std::filesystem::path& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed manifest " + path.string() + ": " + e.what());
    }
    try {
        return manifest_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed manifest " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Instruction pools: one "<TASK>.txt" per task, ten lines, line 0 canonical.

inline InstructionPool read_instruction_pool(const std::filesystem::path& dir,
                                             const std::string& task_code) {
    InstructionPool pool;
    pool.task_code = task_code;
    auto path = dir / (task_code + ".txt");
    if (!std::filesystem::exists(path))
        throw UsageError("no instruction pool file for task " + task_code + " at " + path.string());
    for (const auto& line : split_lines(read_text_file(path)))
        if (!line.empty()) pool.templates.push_back(line);
    pool.validate();
    return pool;
}

inline void write_instruction_pool(const std::filesystem::path& dir, const InstructionPool& pool) {
    pool.validate();
    std::string text;
    for (const auto& t : pool.templates) {
        text += t;
        text += '\n';
    }
    write_text_file(dir / (pool.task_code + ".txt"), text);
}

}  // namespace gkg
