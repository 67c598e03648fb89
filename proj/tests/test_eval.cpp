// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "rfdet/eval/cluster.hpp"
#include "rfdet/eval/embeddings.hpp"
#include "rfdet/eval/metrics.hpp"
#include "rfdet/eval/reports.hpp"
#include "rfdet/eval/snr_curve.hpp"
#include "rfdet/eval/tsne.hpp"

using namespace rfdet;
using namespace rfdet::eval;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rfdet_eval_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::vector<std::vector<double>> two_clusters(std::size_t per, std::size_t dim, double sep, std::uint64_t seed,
                                              std::vector<int>& labels) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<std::vector<double>> x;
    labels.clear();
    for (std::size_t i = 0; i < 2 * per; ++i) {
        const int c = static_cast<int>(i % 2);
        std::vector<double> row(dim);
        for (auto& v : row) v = d(rng);
        row[0] += c ? sep : -sep;
        x.push_back(std::move(row));
        labels.push_back(c);
    }
    return x;
}

double assignment_agreement(std::span<const int> a, std::span<const int> b) {
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    const double f = static_cast<double>(same) / static_cast<double>(a.size());
    return std::max(f, 1.0 - f);
}

}  // namespace

TEST(Metrics, TwoClassExample) {
    ConfusionMatrix cm(2);
    cm(0, 0) = 9;
    cm(0, 1) = 1;
    cm(1, 0) = 4;
    cm(1, 1) = 6;
    EXPECT_DOUBLE_EQ(accuracy(cm), 0.75);
    EXPECT_DOUBLE_EQ(balanced_accuracy(cm), 0.75);
}

TEST(Metrics, IdentityAndChance) {
    ConfusionMatrix id(7), one(7);
    for (std::size_t c = 0; c < 7; ++c) {
        id(c, c) = 5;
        one(c, 2) = 5;
    }
    EXPECT_DOUBLE_EQ(accuracy(id), 1.0);
    EXPECT_DOUBLE_EQ(balanced_accuracy(id), 1.0);
    EXPECT_DOUBLE_EQ(balanced_accuracy(one), 1.0 / 7.0);
}

TEST(Metrics, EmptyRowRejected) {
    ConfusionMatrix cm(3);
    cm(0, 0) = 1;
    cm(1, 1) = 1;
    EXPECT_THROW(balanced_accuracy(cm), invalid_input);
    EXPECT_DOUBLE_EQ(balanced_accuracy(cm, true), 1.0);
    EXPECT_THROW(accuracy(ConfusionMatrix(3)), invalid_input);
}

TEST(Metrics, BalancedAccuracyInvariantUnderClassDuplication) {
    auto rng = make_rng(3);
    std::vector<int> p, t;
    for (int i = 0; i < 300; ++i) {
        t.push_back(static_cast<int>(uniform_index(rng, 7)));
        p.push_back(uniform_index(rng, 3) == 0 ? static_cast<int>(uniform_index(rng, 7)) : t.back());
    }
    const auto base = confusion(p, t);
    auto p2 = p, t2 = t;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (t[i] == 4) {
            p2.push_back(p[i]);
            t2.push_back(t[i]);
        }
    const auto dup = confusion(p2, t2);
    EXPECT_NEAR(balanced_accuracy(base), balanced_accuracy(dup), 1e-12);
    EXPECT_GT(std::abs(accuracy(base) - accuracy(dup)), 1e-6);
}

TEST(Confusion, RecountOracle) {
    auto rng = make_rng(4);
    std::vector<int> p, t;
    for (int i = 0; i < 1000; ++i) {
        p.push_back(static_cast<int>(uniform_index(rng, 7)));
        t.push_back(static_cast<int>(uniform_index(rng, 7)));
    }
    std::map<std::pair<int, int>, long> tally;
    for (std::size_t i = 0; i < p.size(); ++i) ++tally[{t[i], p[i]}];
    const auto cm = confusion(p, t);
    for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) EXPECT_EQ(cm(a, b), (tally[{a, b}]));
    EXPECT_EQ(cm.total(), 1000);
}

TEST(Confusion, Boundaries) {
    EXPECT_EQ(confusion({}, {}).total(), 0);
    std::vector<int> y{0, 1, 2, 3, 4, 5, 6};
    const auto cm = confusion(y, y);
    EXPECT_EQ(cm.trace(), 7);
    std::vector<int> bad{7};
    std::vector<int> ok{0};
    EXPECT_THROW(confusion(bad, ok), invalid_input);
    EXPECT_THROW(confusion(ok, y), invalid_input);
}

TEST(Spearman, Examples) {
    const std::vector<double> x{1, 2, 3, 4, 5}, up{2, 4, 5, 9, 20}, down{5, 4, 3, 2, 1};
    EXPECT_NEAR(spearman(x, up), 1.0, 1e-12);
    EXPECT_NEAR(spearman(x, down), -1.0, 1e-12);
    const std::vector<double> tied{1, 1, 2, 2};
    const auto r = ranks(tied);
    EXPECT_EQ(r, (std::vector<double>{1.5, 1.5, 3.5, 3.5}));
    const std::vector<double> flat{1, 1, 1, 1, 1};
    EXPECT_THROW(spearman(x, flat), degenerate_input);
}

TEST(SnrCurve, BucketsAndOmissions) {
    const auto grid = snr_grid();
    std::vector<int> p{0, 1, 4, 4, 2}, t{0, 1, 4, 2, 2};
    std::vector<double> s{-20, -20, 0, 0, 30};
    const auto c = per_snr_curve(p, t, s, grid);
    ASSERT_EQ(c.points.size(), 3u);
    EXPECT_EQ(c.total_count(), p.size());
    EXPECT_EQ(c.empty.size(), grid.size() - 3);
    EXPECT_DOUBLE_EQ(c.points[0].balanced_acc, 1.0);
    EXPECT_DOUBLE_EQ(c.points[1].balanced_acc, 0.5);
    std::vector<double> off{-20, -20, 0, 0, 31};
    EXPECT_THROW(per_snr_curve(p, t, off, grid), invalid_input);
}

TEST(SnrCurve, SingleBucketAndPerfect) {
    const auto grid = snr_grid();
    std::vector<int> y;
    std::vector<double> s;
    for (int i = 0; i < 70; ++i) {
        y.push_back(i % 7);
        s.push_back(grid[static_cast<std::size_t>(i) % grid.size()]);
    }
    const auto c = per_snr_curve(y, y, s, grid);
    EXPECT_EQ(c.total_count(), 70u);
    for (const auto& pt : c.points) EXPECT_EQ(pt.balanced_acc, 1.0);
    std::vector<double> one(70, 4.0);
    EXPECT_EQ(per_snr_curve(y, y, one, grid).points.size(), 1u);
}

TEST(SnrCurve, ConfusionSplit) {
    ConfusionMatrix cm(7);
    cm(0, 4) = 3;  // drone -> noise
    cm(4, 6) = 2;  // noise -> drone
    cm(1, 2) = 5;  // drone -> drone
    cm(3, 3) = 9;
    const auto s = split_confusions(cm);
    EXPECT_EQ(s.drone_noise, 5);
    EXPECT_EQ(s.drone_drone, 5);
}

TEST(Tsne, TwoClustersStaySeparated) {
    std::vector<int> labels;
    const auto x = two_clusters(60, 256, 6.0, 1, labels);
    TsneConfig cfg;
    cfg.seed = 2;
    const auto r = tsne_project(x, cfg);
    Points y;
    for (const auto& p : r.points) y.push_back({p[0], p[1]});
    const auto km = kmeans(y, 2, 3);
    EXPECT_GE(assignment_agreement(km.assignment, labels), 0.95);
}

TEST(Tsne, KlDecreasesAfterExaggeration) {
    std::vector<int> labels;
    const auto x = two_clusters(60, 256, 6.0, 1, labels);
    TsneConfig cfg;
    cfg.seed = 2;
    cfg.kl_every = 100;
    const auto r = tsne_project(x, cfg);
    double kl300 = 0, kl1000 = 0;
    for (auto [it, kl] : r.kl_history) {
        if (it == 300) kl300 = kl;
        if (it == 1000) kl1000 = kl;
    }
    ASSERT_GT(kl300, 0.0);
    EXPECT_LT(kl1000, kl300);
}

TEST(Tsne, DeterministicForFixedSeed) {
    std::vector<int> labels;
    const auto x = two_clusters(40, 16, 4.0, 5, labels);
    TsneConfig cfg;
    cfg.iterations = 300;
    cfg.perplexity = 10;
    cfg.seed = 7;
    EXPECT_EQ(tsne_project(x, cfg).points, tsne_project(x, cfg).points);
}

TEST(Tsne, DuplicatePointsRemainMutualNeighbours) {
    std::vector<int> labels;
    auto x = two_clusters(40, 16, 4.0, 6, labels);
    x.push_back(x[5]);
    TsneConfig cfg;
    cfg.perplexity = 10;
    cfg.seed = 1;
    const auto r = tsne_project(x, cfg);
    const std::size_t a = 5, b = x.size() - 1;
    auto nearest = [&](std::size_t i) {
        std::size_t best = i;
        double bd = 1e300;
        for (std::size_t j = 0; j < r.points.size(); ++j) {
            if (j == i) continue;
            const double dx = r.points[i][0] - r.points[j][0], dy = r.points[i][1] - r.points[j][1];
            if (dx * dx + dy * dy < bd) {
                bd = dx * dx + dy * dy;
                best = j;
            }
        }
        return best;
    };
    EXPECT_EQ(nearest(a), b);
    EXPECT_EQ(nearest(b), a);
}

TEST(Tsne, Errors) {
    std::vector<int> labels;
    const auto x = two_clusters(45, 4, 1.0, 1, labels);
    EXPECT_THROW(tsne_project(x), invalid_input);  // 90 <= 3 * 30
    TsneConfig cfg;
    cfg.perplexity = 0;
    EXPECT_THROW(tsne_project(x, cfg), invalid_input);
}

TEST(Tsne, PerplexityCalibration) {
    std::vector<int> labels;
    const auto x = two_clusters(50, 8, 2.0, 9, labels);
    const auto d2 = eval::detail::squared_distances(x);
    const auto p = eval::detail::conditional_affinities(d2, x.size(), 15.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double h = 0, sum = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = p[i * x.size() + j];
            sum += v;
            if (v > 0) h -= v * std::log2(v);
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_NEAR(std::exp2(h), 15.0, 0.15);
    }
}

TEST(Cluster, PurityAndKmeans) {
    const std::vector<int> c{0, 0, 0, 1, 1, 1}, l{2, 2, 3, 3, 3, 3};
    EXPECT_NEAR(cluster_purity(c, l), 5.0 / 6.0, 1e-12);
    Points x{{0, 0}, {0.1, 0}, {10, 10}, {10.1, 10}};
    const auto km = kmeans(x, 2, 1);
    EXPECT_EQ(km.assignment[0], km.assignment[1]);
    EXPECT_NE(km.assignment[0], km.assignment[2]);
    EXPECT_THROW(kmeans(x, 5), invalid_input);
    EXPECT_GT(silhouette(x, std::vector<int>{0, 0, 1, 1}), 0.9);
}

TEST(Embeddings, ShapeAndDuplicates) {
    nn::VggConfig cfg;
    cfg.widths = {4, 8};
    cfg.input_height = cfg.input_width = 16;
    nn::Vgg<float> m(cfg, 1);
    std::vector<LabeledSample> s(3);
    auto rng = make_rng(1);
    for (std::size_t i = 0; i < 3; ++i) {
        s[i].spectrogram = Spectrogram<float>(16, 16);
        for (auto& v : s[i].spectrogram.planes) v = static_cast<float>(std::normal_distribution<double>()(rng));
        s[i].class_id = static_cast<int>(i);
    }
    const std::vector<std::size_t> idx{0, 1, 2, 1};
    const auto e = extract_embeddings(m, std::span<const LabeledSample>(s), idx, PlaneStats{});
    ASSERT_EQ(e.size(), 4u);
    for (const auto& r : e.rows) EXPECT_EQ(r.size(), 256u);
    for (std::size_t k = 0; k < 256; ++k) EXPECT_NEAR(e.rows[1][k], e.rows[3][k], 1e-5 * (1.0 + std::abs(e.rows[1][k])));
    EXPECT_EQ(e.sample_ids, idx);
}

TEST(Reports, CrossFileConsistency) {
    auto rng = make_rng(8);
    const auto grid = snr_grid();
    std::vector<int> p, t;
    std::vector<double> s;
    for (int i = 0; i < 400; ++i) {
        t.push_back(i % 7);
        p.push_back(uniform_index(rng, 2) ? t.back() : static_cast<int>(uniform_index(rng, 7)));
        s.push_back(grid[uniform_index(rng, grid.size())]);
    }
    ReportBundle r;
    r.confusion = confusion(p, t);
    r.curve = per_snr_curve(p, t, s, grid);
    ProjectedEmbeddings pe;
    for (int i = 0; i < 10; ++i) {
        pe.set.rows.push_back({1.0});
        pe.set.labels.push_back(i % 7);
        pe.set.snr_db.push_back(0.0);
        pe.set.sample_ids.push_back(static_cast<std::size_t>(i));
        pe.xy.push_back({0.5 * i, -0.25 * i});
    }
    r.embeddings = pe;
    const auto dir = scratch("reports");
    emit_reports(r, dir);

    const auto cm = read_confusion_csv(dir / "confusion.csv");
    EXPECT_EQ(cm, r.confusion);
    const auto summary = read_summary(dir);
    EXPECT_NEAR(summary.at("balanced_accuracy").get<double>(), balanced_accuracy(cm), 1e-12);
    EXPECT_NEAR(summary.at("chance_level").get<double>(), 1.0 / 7.0, 1e-15);
    EXPECT_EQ(summary.at("num_samples"), 400);

    const auto curve_rows = eval::detail::read_csv(dir / "snr_curve.csv");
    EXPECT_EQ(curve_rows.size(), r.curve->points.size() + 1);
    long sum = 0;
    for (std::size_t i = 1; i < curve_rows.size(); ++i) sum += std::stol(curve_rows[i][2]);
    EXPECT_EQ(sum, 400);
    const auto emb_rows = eval::detail::read_csv(dir / "embeddings.csv");
    EXPECT_EQ(emb_rows.size(), 11u);
    EXPECT_EQ(emb_rows[0], (std::vector<std::string>{"sample_id", "class", "snr_db", "x", "y"}));
    std::filesystem::remove_all(dir);
}

TEST(Reports, GoldenSchemaFixture) {
    const std::filesystem::path dir = std::string(RFDET_TEST_DATA_DIR) + "/golden_report";
    const auto cm = read_confusion_csv(dir / "confusion.csv");
    const auto summary = read_summary(dir);
    EXPECT_EQ(cm.total(), summary.at("num_samples").get<long>());
    EXPECT_NEAR(summary.at("balanced_accuracy").get<double>(), balanced_accuracy(cm, true), 1e-9);
    ReportBundle r;
    r.confusion = cm;
    const auto out = scratch("golden");
    emit_reports(r, out);
    std::ifstream a(dir / "confusion.csv"), b(out / "confusion.csv");
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
    EXPECT_EQ(read_summary(out), summary);
    std::filesystem::remove_all(out);
}

TEST(Reports, SchemaErrors) {
    const auto dir = scratch("schema");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "summary.json") << R"({"schema_version": 9})";
    EXPECT_THROW(read_summary(dir), format_error);
    std::ofstream(dir / "confusion.csv") << "a,b\nx,1\ny,2\nz,3\n";
    EXPECT_THROW(read_confusion_csv(dir / "confusion.csv"), format_error);
    std::filesystem::remove_all(dir);
}
