// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfdet/dataset.hpp"
#include "rfdet/errors.hpp"
#include "rfdet/eval/embeddings.hpp"
#include "rfdet/eval/metrics.hpp"
#include "rfdet/eval/snr_curve.hpp"

namespace rfdet::eval {

inline constexpr int report_schema_version = 1;

struct ProjectedEmbeddings {
    EmbeddingSet set;
    std::vector<std::array<double, 2>> xy;
};

struct ReportBundle {
    ConfusionMatrix confusion;
    std::optional<SnrCurve> curve;
    std::optional<ProjectedEmbeddings> embeddings;
    nlohmann::json extra = nlohmann::json::object();  // merged into summary.json
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    rfdet::detail::write_file(path, text.data(), text.size());
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path.string() + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace detail

inline std::string confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "true\\pred";
    for (std::size_t c = 0; c < cm.classes; ++c) out += "," + std::string(class_names.at(c));
    out += "\n";
    for (std::size_t t = 0; t < cm.classes; ++t) {
        out += std::string(class_names.at(t));
        for (std::size_t p = 0; p < cm.classes; ++p) out += "," + std::to_string(cm(t, p));
        out += "\n";
    }
    return out;
}

inline ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
    const auto rows = detail::read_csv(path);
    if (rows.empty()) throw format_error(format_error::kind::schema, "confusion CSV is empty");
    const std::size_t k = rows[0].size() - 1;
    if (rows.size() != k + 1) throw format_error(format_error::kind::schema, "confusion CSV is not square");
    ConfusionMatrix cm(k);
    for (std::size_t t = 0; t < k; ++t) {
        if (rows[t + 1].size() != k + 1) throw format_error(format_error::kind::schema, "confusion CSV row width");
        for (std::size_t p = 0; p < k; ++p) cm(t, p) = std::stol(rows[t + 1][p + 1]);
    }
    return cm;
}

inline std::string snr_curve_csv(const SnrCurve& c) {
    std::string out = "snr_db,balanced_acc,n_samples\n";
    for (const auto& p : c.points) out += detail::fmt(p.snr_db) + "," + detail::fmt(p.balanced_acc) + "," +
                                          std::to_string(p.count) + "\n";
    return out;
}

inline std::string embeddings_csv(const ProjectedEmbeddings& e) {
    if (e.xy.size() != e.set.size()) throw invalid_input("embeddings_csv: projection size differs from set size");
    std::string out = "sample_id,class,snr_db,x,y\n";
    for (std::size_t i = 0; i < e.xy.size(); ++i)
        out += std::to_string(e.set.sample_ids[i]) + "," + std::string(class_names.at(static_cast<std::size_t>(e.set.labels[i]))) +
               "," + detail::fmt(e.set.snr_db[i]) + "," + detail::fmt(e.xy[i][0]) + "," + detail::fmt(e.xy[i][1]) + "\n";
    return out;
}

inline nlohmann::json summary_json(const ReportBundle& r) {
    nlohmann::json j;
    j["schema_version"] = report_schema_version;
    j["classes"] = std::vector<std::string>(class_names.begin(), class_names.end());
    j["num_samples"] = r.confusion.total();
    if (r.confusion.total() > 0) {
        j["accuracy"] = accuracy(r.confusion);
        j["balanced_accuracy"] = balanced_accuracy(r.confusion, true);
    }
    j["chance_level"] = 1.0 / static_cast<double>(r.confusion.classes);
    nlohmann::json rec = nlohmann::json::object();
    const auto rc = recalls(r.confusion);
    for (std::size_t c = 0; c < rc.size(); ++c)
        rec[std::string(class_names.at(c))] = std::isnan(rc[c]) ? nlohmann::json(nullptr) : nlohmann::json(rc[c]);
    j["per_class_recall"] = rec;
    if (r.curve) j["omitted_snr_db"] = r.curve->empty;
    j["files"] = {"confusion.csv"};
    if (r.curve) j["files"].push_back("snr_curve.csv");
    if (r.embeddings) j["files"].push_back("embeddings.csv");
    j.update(r.extra);
    return j;
}

/// Writes confusion.csv, snr_curve.csv (if present), embeddings.csv (if
/// present) and summary.json into `dir`.
inline void emit_reports(const ReportBundle& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create '" + dir.string() + "': " + ec.message());
    detail::write_text(dir / "confusion.csv", confusion_csv(r.confusion));
    if (r.curve) detail::write_text(dir / "snr_curve.csv", snr_curve_csv(*r.curve));
    if (r.embeddings) detail::write_text(dir / "embeddings.csv", embeddings_csv(*r.embeddings));
    detail::write_text(dir / "summary.json", summary_json(r).dump(2) + "\n");
}

inline nlohmann::json read_summary(const std::filesystem::path& dir) {
    const auto raw = rfdet::detail::read_file(dir / "summary.json");
    try {
        auto j = nlohmann::json::parse(raw.begin(), raw.end());
        if (j.at("schema_version").get<int>() != report_schema_version)
            throw format_error(format_error::kind::version, "summary.json schema version not supported");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(format_error::kind::schema, std::string("summary.json: ") + e.what());
    }
}

}  // namespace rfdet::eval
