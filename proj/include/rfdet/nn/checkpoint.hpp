// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfdet/dataset.hpp"
#include "rfdet/errors.hpp"
#include "rfdet/nn/vgg.hpp"
#include "rfdet/spectro.hpp"

namespace rfdet::nn {

inline constexpr int checkpoint_format_version = 1;

struct CheckpointMeta {
    int epoch = 0;
    double val_balanced_acc = 0.0;
    std::uint64_t seed = 0;
    std::string manifest_hash;
    std::string profile;
    double sample_rate_hz = 0.0;
    std::size_t frame_length = 0;
    std::size_t segment_length = 0;

    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct ParamEntry {
    std::string name;
    Shape shape;
    std::size_t offset = 0;  // bytes into params.bin

    friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

struct ModelCheckpoint {
    VggConfig config;
    PlaneStats stats;
    CheckpointMeta meta;
    std::vector<ParamEntry> table;
    std::vector<float> blob;

    friend bool operator==(const ModelCheckpoint&, const ModelCheckpoint&) = default;
};

/// Snapshot every parameter and buffer of `model` as f32.
template <typename T>
ModelCheckpoint make_checkpoint(Vgg<T>& model, const PlaneStats& stats, const CheckpointMeta& meta) {
    ModelCheckpoint ck;
    ck.config = model.config();
    ck.stats = stats;
    ck.meta = meta;
    for (auto& p : model.params()) {
        ck.table.push_back({p.name, p.value->shape, ck.blob.size() * sizeof(float)});
        for (T v : p.value->data) ck.blob.push_back(static_cast<float>(v));
    }
    return ck;
}

template <typename T>
void load_into(Vgg<T>& model, const ModelCheckpoint& ck) {
    if (!(model.config() == ck.config)) throw format_error(format_error::kind::schema, "checkpoint config mismatch");
    auto ps = model.params();
    if (ps.size() != ck.table.size())
        throw format_error(format_error::kind::schema, "checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& e = ck.table[i];
        if (e.name != ps[i].name || e.shape != ps[i].value->shape)
            throw format_error(format_error::kind::schema, "checkpoint entry '" + e.name + "' does not match model");
        const std::size_t n = shape_size(e.shape);
        if (e.offset % sizeof(float) || e.offset / sizeof(float) + n > ck.blob.size())
            throw format_error(format_error::kind::truncated, "checkpoint blob too short for '" + e.name + "'");
        const float* src = ck.blob.data() + e.offset / sizeof(float);
        for (std::size_t j = 0; j < n; ++j) (*ps[i].value)[j] = static_cast<T>(src[j]);
    }
}

template <typename T = float>
Vgg<T> instantiate(const ModelCheckpoint& ck) {
    Vgg<T> m(ck.config);
    load_into(m, ck);
    return m;
}

inline nlohmann::json checkpoint_json(const ModelCheckpoint& ck) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& e : ck.table) params.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
    const auto& m = ck.meta;
    return {{"version", checkpoint_format_version},
            {"config", ck.config},
            {"stats", {{"mean", ck.stats.mean}, {"std", ck.stats.stddev}}},
            {"metadata",
             {{"epoch", m.epoch},
              {"val_balanced_acc", m.val_balanced_acc},
              {"seed", m.seed},
              {"manifest_hash", m.manifest_hash},
              {"profile", m.profile},
              {"sample_rate_hz", m.sample_rate_hz},
              {"frame_length", m.frame_length},
              {"segment_length", m.segment_length}}},
            {"params", params},
            {"blob_bytes", ck.blob.size() * sizeof(float)}};
}

inline void save_checkpoint(const ModelCheckpoint& ck, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    const std::string text = checkpoint_json(ck).dump(2) + "\n";
    rfdet::detail::write_file(dir / "model.json", text.data(), text.size());
    std::vector<unsigned char> bytes;
    bytes.reserve(ck.blob.size() * 4);
    for (float f : ck.blob) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        rfdet::detail::put_u32(bytes, u);
    }
    rfdet::detail::write_file(dir / "params.bin", bytes.data(), bytes.size());
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    const auto text = rfdet::detail::read_file(dir / "model.json");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw format_error(format_error::kind::schema, "model.json: " + std::string(e.what()));
    }
    ModelCheckpoint ck;
    std::size_t blob_bytes = 0;
    try {
        if (j.at("version").get<int>() != checkpoint_format_version)
            throw format_error(format_error::kind::version, "unsupported checkpoint version");
        ck.config = j.at("config").get<VggConfig>();
        ck.stats.mean = j.at("stats").at("mean").get<std::array<double, 2>>();
        ck.stats.stddev = j.at("stats").at("std").get<std::array<double, 2>>();
        const auto& m = j.at("metadata");
        ck.meta.epoch = m.at("epoch").get<int>();
        ck.meta.val_balanced_acc = m.at("val_balanced_acc").get<double>();
        ck.meta.seed = m.at("seed").get<std::uint64_t>();
        ck.meta.manifest_hash = m.at("manifest_hash").get<std::string>();
        ck.meta.profile = m.at("profile").get<std::string>();
        ck.meta.sample_rate_hz = m.at("sample_rate_hz").get<double>();
        ck.meta.frame_length = m.at("frame_length").get<std::size_t>();
        ck.meta.segment_length = m.at("segment_length").get<std::size_t>();
        for (const auto& p : j.at("params"))
            ck.table.push_back({p.at("name").get<std::string>(), p.at("shape").get<Shape>(), p.at("offset").get<std::size_t>()});
        blob_bytes = j.at("blob_bytes").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(format_error::kind::schema, "model.json: " + std::string(e.what()));
    } catch (const config_error& e) {
        throw format_error(format_error::kind::schema, std::string("model.json: ") + e.what());
    }
    std::size_t expected = 0;
    for (const auto& e : ck.table) {
        if (e.offset != expected) throw format_error(format_error::kind::schema, "parameter table offsets not contiguous");
        expected += shape_size(e.shape) * sizeof(float);
    }
    if (expected != blob_bytes) throw format_error(format_error::kind::schema, "parameter table does not cover blob");

    const auto bytes = rfdet::detail::read_file(dir / "params.bin");
    if (bytes.size() != blob_bytes)
        throw format_error(format_error::kind::truncated, "params.bin holds " + std::to_string(bytes.size()) +
                                                              " bytes, expected " + std::to_string(blob_bytes));
    ck.blob.resize(blob_bytes / 4);
    for (std::size_t i = 0; i < ck.blob.size(); ++i) {
        const std::uint32_t u = rfdet::detail::get_u32(bytes.data() + 4 * i);
        std::memcpy(&ck.blob[i], &u, 4);
    }
    Vgg<float> probe(ck.config);
    load_into(probe, ck);
    return ck;
}

}  // namespace rfdet::nn
