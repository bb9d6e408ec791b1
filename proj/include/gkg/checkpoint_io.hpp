// Checkpoint directory format: header.json (config, stage label, parent
// hash, tensor index) plus tensors.bin, one blob of little-endian float32
// row-major data. Content hash = SHA-256 over header bytes || blob bytes.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "gkg/corpus_io.hpp"
#include "gkg/model.hpp"

namespace gkg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts are unsupported");

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline ordered_json model_config_to_json(const ModelConfig& cfg) {
    ordered_json j;
    j["d_model"] = cfg.d_model;
    j["n_layers"] = cfg.n_layers;
    j["n_heads"] = cfg.n_heads;
    j["d_ff"] = cfg.d_ff;
    j["max_seq_len"] = cfg.max_seq_len;
    j["rank"] = cfg.rank;
    j["adapter_targets"] = ordered_json::array();
    for (auto t : cfg.adapter_targets) j["adapter_targets"].push_back(to_string(t));
    return j;
}

inline ModelConfig model_config_from_json(const ordered_json& j) {
    ModelConfig cfg;
    cfg.d_model = j.value("d_model", cfg.d_model);
    cfg.n_layers = j.value("n_layers", cfg.n_layers);
    cfg.n_heads = j.value("n_heads", cfg.n_heads);
    cfg.d_ff = j.value("d_ff", cfg.d_ff);
    cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
    cfg.rank = j.value("rank", cfg.rank);
    if (j.contains("adapter_targets")) {
        cfg.adapter_targets.clear();
        for (const auto& t : j.at("adapter_targets"))
            cfg.adapter_targets.push_back(parse_adapter_target(t.get<std::string>()));
    }
    cfg.validate();
    return cfg;
}

namespace ckpt_detail {

// Header and blob bytes; identical whether bound for disk or the hasher.
template <class S>
std::pair<std::string, std::string> serialize(const Checkpoint<S>& ckpt) {
    ordered_json header;
    header["format"] = "gkg-checkpoint-v1";
    header["stage_label"] = ckpt.stage_label;
    header["parent_hash"] = ckpt.parent_hash;
    header["config"] = model_config_to_json(ckpt.config);
    header["tensors"] = ordered_json::array();

    std::string blob;
    std::size_t offset = 0;
    for (const auto& [name, mat] : ckpt.tensors) {  // std::map: sorted, stable
        ordered_json entry;
        entry["name"] = name;
        entry["rows"] = mat.rows;
        entry["cols"] = mat.cols;
        entry["offset"] = offset;
        header["tensors"].push_back(std::move(entry));
        for (S v : mat.data) {
            float f = static_cast<float>(v);
            char buf[sizeof(float)];
            std::memcpy(buf, &f, sizeof(float));
            blob.append(buf, sizeof(float));
        }
        offset += mat.size() * sizeof(float);
    }
    return {header.dump(), std::move(blob)};
}

}  // namespace ckpt_detail

// Content hash of a checkpoint; the same value on disk and in memory.
template <class S>
std::string checkpoint_hash(const Checkpoint<S>& ckpt) {
    auto [header, blob] = ckpt_detail::serialize(ckpt);
    return sha256_hex(header + blob);
}

template <class S>
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint<S>& ckpt) {
    auto [header, blob] = ckpt_detail::serialize(ckpt);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "header.json", header);
    write_text_file(dir / "tensors.bin", blob);
}

inline Checkpoint<float> load_checkpoint(const std::filesystem::path& dir) {
    std::string header_text = read_text_file(dir / "header.json");
    std::string blob = read_text_file(dir / "tensors.bin");
    ordered_json header = ordered_json::parse(header_text);
    if (header.value("format", "") != "gkg-checkpoint-v1")
        throw std::runtime_error("not a gkg checkpoint: " + dir.string());

    Checkpoint<float> ckpt;
    ckpt.config = model_config_from_json(header.at("config"));
    ckpt.stage_label = header.at("stage_label").get<std::string>();
    ckpt.parent_hash = header.at("parent_hash").get<std::string>();
    for (const auto& entry : header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        int rows = entry.at("rows").get<int>();
        int cols = entry.at("cols").get<int>();
        std::size_t offset = entry.at("offset").get<std::size_t>();
        Mat<float> mat(rows, cols);
        std::size_t bytes = mat.size() * sizeof(float);
        if (offset + bytes > blob.size())
            throw std::runtime_error("checkpoint blob too short for tensor " + name);
        std::memcpy(mat.data.data(), blob.data() + offset, bytes);
        ckpt.tensors.emplace(std::move(name), std::move(mat));
    }
    return ckpt;
}

inline bool is_checkpoint_dir(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "header.json") &&
           std::filesystem::exists(dir / "tensors.bin");
}

}  // namespace gkg
