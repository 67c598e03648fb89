// SPDX-License-Identifier: Apache-2.0
// rfdet: synthesize datasets, train and evaluate classifiers, run the
// streaming detector.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rfdet/rfdet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rfdet;

namespace {

enum exit_code { ok = 0, usage = 2, data = 3, runtime = 4 };

struct Globals {
    std::uint64_t seed = 0;
    std::string profile = "desk";
    std::string out = "rfdet_out";
    std::string precision = "f32";
};

struct SynthArgs {
    long drone_count = -1;
    long noise_count = -1;
    std::string table;
};

struct TrainArgs {
    std::string dataset;
    std::string variant = "vgg11";
    std::size_t folds = 5;
    std::size_t only_fold = 0;
    bool single_fold = false;
    int epochs = 200;
    std::size_t batch_size = 8;
    double lr = 0.005;
    std::vector<std::size_t> widths;
    double val_fraction = 0.2;
    double dropout = 0.5;
    std::string lr_schedule = "constant";
};

struct EvalArgs {
    std::string checkpoint;
    std::string dataset;
    long fold = -1;
};

struct EmbedArgs {
    std::string checkpoint;
    std::string dataset;
    long fold = -1;
    double perplexity = 30.0;
    int iters = 1000;
    double min_snr = -1e9;
    std::size_t max_samples = 0;
};

struct StreamArgs {
    std::string scenario;
    std::string checkpoint;
    double threshold = 0.5;
    bool no_agc = false;
    std::string table;
};

json option_echo(const CLI::App& app) {
    json j = json::object();
    for (const auto* opt : app.get_options()) {
        if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
        const auto& r = opt->results();
        if (r.empty()) continue;
        j[opt->get_name()] = r.size() == 1 ? json(r[0]) : json(r);
    }
    return j;
}

void write_json(const fs::path& path, const json& j) {
    const auto text = j.dump(2) + "\n";
    rfdet::detail::write_file(path, text.data(), text.size());
}

void write_run_config(const Globals& g, const CLI::App& app, const CLI::App& sub) {
    fs::create_directories(g.out);
    write_json(fs::path(g.out) / "run_config.json", {{"tool", "rfdet"},
                                                      {"subcommand", sub.get_name()},
                                                      {"seed", g.seed},
                                                      {"profile", g.profile},
                                                      {"precision", g.precision},
                                                      {"global_options", option_echo(app)},
                                                      {"options", option_echo(sub)}});
}

std::vector<std::size_t> fold_test(const Dataset& ds, std::size_t k, double val_fraction, std::uint64_t seed,
                                   long fold) {
    std::vector<std::size_t> idx;
    if (fold < 0) {
        idx.resize(ds.samples.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        return idx;
    }
    const auto labels = ds.labels();
    const auto plan = stratified_kfold(labels, k, val_fraction, seed);
    if (static_cast<std::size_t>(fold) >= plan.folds.size()) throw config_error("--fold out of range");
    return plan.folds[static_cast<std::size_t>(fold)].test;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const SynthArgs& a) {
    auto cfg = DatasetConfig::desk(g.seed);
    cfg.profile = ScaleProfile::by_name(g.profile);
    cfg.class_counts = g.profile == "paper" ? DatasetConfig::paper_counts() : DatasetConfig::desk_counts();
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (static_cast<int>(c) == noise_class) {
            if (a.noise_count >= 0) cfg.class_counts[c] = static_cast<std::size_t>(a.noise_count);
        } else if (a.drone_count >= 0) {
            cfg.class_counts[c] = static_cast<std::size_t>(a.drone_count);
        }
    }
    if (!a.table.empty()) cfg.transmitters = load_transmitter_table(a.table);
    const auto ds = build_dataset(cfg);
    save_dataset(ds, g.out);
    std::cout << "wrote " << ds.samples.size() << " samples to " << g.out << "\n";
    return ok;
}

template <typename T>
int train_impl(const Globals& g, const TrainArgs& a) {
    const auto ds = load_dataset(a.dataset);
    const auto& man = ds.manifest;
    nn::VggConfig vc;
    vc.variant = nn::vgg_variant_from_string(a.variant);
    vc.widths = !a.widths.empty()           ? a.widths
                : man.profile.name == "paper" ? nn::VggConfig::paper_widths()
                                              : nn::VggConfig::desk_widths();
    vc.input_height = man.segment_length;
    vc.input_width = man.columns;
    vc.dropout = a.dropout;
    vc.validate();

    nn::TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch_size;
    tc.adam.lr = a.lr;
    tc.lr_schedule = nn::lr_schedule_from_string(a.lr_schedule);
    tc.seed = g.seed;
    tc.validate();

    const auto labels = ds.labels();
    const auto plan = stratified_kfold(labels, a.folds, a.val_fraction, g.seed);
    nn::CheckpointMeta meta;
    meta.manifest_hash = manifest_hash(man);
    meta.profile = man.profile.name;
    meta.sample_rate_hz = man.profile.sample_rate_hz;
    meta.frame_length = man.profile.frame_length;
    meta.segment_length = man.segment_length;

    json folds = json::array();
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        if (a.single_fold && f != a.only_fold) continue;
        const auto& fold = plan.folds[f];
        nn::Vgg<T> model(vc, derive_seed(g.seed, {0x6d6f64656cULL, f}));
        std::cerr << "fold " << f << ": " << fold.train.size() << " train, " << fold.val.size() << " val, "
                  << fold.test.size() << " test, " << model.num_parameters() << " parameters\n";
        const auto res = nn::train(model, std::span<const LabeledSample>(ds.samples), fold.train, fold.val, tc, meta,
                                   [&](const nn::EpochRecord& r) {
                                       std::fprintf(stderr, "  epoch %3d  loss %.4f  val_bacc %.4f\n", r.epoch,
                                                    r.train_loss, r.val_balanced_acc);
                                   });
        const fs::path dir = fs::path(g.out) / ("fold" + std::to_string(f));
        nn::save_checkpoint(res.checkpoint, dir);
        nn::write_history_csv(res.history, dir / "history.csv");
        folds.push_back({{"fold", f},
                         {"dir", dir.string()},
                         {"best_epoch", res.checkpoint.meta.epoch},
                         {"val_balanced_acc", res.checkpoint.meta.val_balanced_acc}});
    }
    write_json(fs::path(g.out) / "train_summary.json",
               {{"schema_version", 1}, {"folds", folds}, {"split_seed", g.seed}, {"k", a.folds},
                {"val_fraction", a.val_fraction}});
    return ok;
}

template <typename T>
int eval_impl(const Globals& g, const EvalArgs& a) {
    (void)g;
    const auto ck = nn::load_checkpoint(a.checkpoint);
    const auto ds = load_dataset(a.dataset);
    auto model = nn::instantiate<T>(ck);
    const auto idx = fold_test(ds, 5, 0.2, ck.meta.seed, a.fold);
    const std::span<const LabeledSample> samples(ds.samples);
    const auto pred = nn::predict(model, samples, idx, ck.stats);
    std::vector<int> labels;
    std::vector<double> snr;
    for (auto i : idx) {
        labels.push_back(ds.samples[i].class_id);
        snr.push_back(ds.samples[i].snr_db);
    }
    eval::ReportBundle rb;
    rb.confusion = eval::confusion(pred.classes, labels);
    const auto grid = snr_grid();
    rb.curve = eval::per_snr_curve(pred.classes, labels, snr, grid);
    rb.extra = {{"checkpoint", a.checkpoint}, {"dataset", a.dataset}, {"fold", a.fold},
                {"manifest_hash", manifest_hash(ds.manifest)}};
    eval::emit_reports(rb, g.out);
    std::cout << "balanced accuracy " << eval::balanced_accuracy(rb.confusion, true) << " over " << idx.size()
              << " samples\n";
    return ok;
}

template <typename T>
int embed_impl(const Globals& g, const EmbedArgs& a) {
    const auto ck = nn::load_checkpoint(a.checkpoint);
    const auto ds = load_dataset(a.dataset);
    auto model = nn::instantiate<T>(ck);
    auto idx = fold_test(ds, 5, 0.2, ck.meta.seed, a.fold);
    std::erase_if(idx, [&](std::size_t i) { return ds.samples[i].snr_db < a.min_snr; });
    if (a.max_samples > 0 && idx.size() > a.max_samples) {
        auto rng = make_rng(g.seed, {0x656d626564ULL});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(a.max_samples);
        std::sort(idx.begin(), idx.end());
    }
    eval::ProjectedEmbeddings pe;
    pe.set = eval::extract_embeddings(model, std::span<const LabeledSample>(ds.samples), idx, ck.stats);
    eval::TsneConfig tc;
    tc.perplexity = a.perplexity;
    tc.iterations = a.iters;
    tc.seed = g.seed;
    pe.xy = eval::tsne_project(pe.set.rows, tc).points;

    eval::Points pts;
    for (const auto& p : pe.xy) pts.push_back({p[0], p[1]});
    const auto km = eval::kmeans(pts, num_classes, g.seed);
    const double purity = eval::cluster_purity(km.assignment, pe.set.labels);

    eval::ReportBundle rb;
    rb.confusion = eval::confusion(nn::predict(model, std::span<const LabeledSample>(ds.samples), idx, ck.stats).classes,
                                   pe.set.labels);
    rb.embeddings = pe;
    rb.extra = {{"perplexity", a.perplexity}, {"iterations", a.iters}, {"kmeans_purity", purity},
                {"num_embedded", pe.set.size()}};
    eval::emit_reports(rb, g.out);
    std::cout << "embedded " << pe.set.size() << " samples, k-means purity " << purity << "\n";
    return ok;
}

int cmd_stream(const Globals& g, const StreamArgs& a) {
    auto sc = stream::load_scenario(a.scenario);
    const auto ck = nn::load_checkpoint(a.checkpoint);
    const auto table = a.table.empty() ? default_transmitter_table() : load_transmitter_table(a.table);
    stream::Source src(sc, g.seed, table);
    stream::StreamClassifier clf(ck, sc.profile, {a.threshold, !a.no_agc});
    const auto reports = stream::run_pipeline(src, clf);
    const auto truth = stream::frame_truth(sc, src.bursts(), clf.frames_per_batch(src.batch_length()));
    const auto summary = stream::summarize_run(reports, truth, sc);
    const auto text = stream::reports_jsonl(reports);
    rfdet::detail::write_file(fs::path(g.out) / "reports.jsonl", text.data(), text.size());
    write_json(fs::path(g.out) / "stream_summary.json", stream::summary_json(summary));
    std::cout << reports.size() << " frames, binary balanced accuracy " << summary.binary_balanced_acc
              << ", mean realtime factor " << summary.mean_realtime_factor << "\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rfdet: RF drone-signal dataset synthesis, classification and streaming detection"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--profile", g.profile, "Scale profile")->check(CLI::IsMember({"paper", "desk"}))->capture_default_str();
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--precision", g.precision, "Arithmetic for training/inference")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a labelled spectrogram dataset");
    synth->add_option("--drone-count", sa.drone_count, "Samples per drone class (default: profile counts)");
    synth->add_option("--noise-count", sa.noise_count, "Samples of the Noise class (default: profile counts)");
    synth->add_option("--table", sa.table, "Transmitter table JSON")->check(CLI::ExistingFile);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a VGG-BN classifier with stratified k-fold splits");
    train->add_option("--dataset", ta.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--variant", ta.variant, "Network variant")
        ->check(CLI::IsMember({"vgg11", "vgg13", "vgg16", "vgg19"}))
        ->capture_default_str();
    train->add_option("--folds", ta.folds, "Number of folds")->check(CLI::Range(2, 100))->capture_default_str();
    auto* only = train->add_option("--fold", ta.only_fold, "Train only this fold index");
    train->add_option("--epochs", ta.epochs, "Epochs per fold")->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--batch-size", ta.batch_size, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--lr", ta.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--lr-schedule", ta.lr_schedule, "Learning-rate schedule over the run")
        ->check(CLI::IsMember({"constant", "cosine"}))
        ->capture_default_str();
    train->add_option("--widths", ta.widths, "Stage widths, comma separated (default: by profile)")->delimiter(',');
    train->add_option("--dropout", ta.dropout, "Dropout before the output layer")
        ->check(CLI::Range(0.0, 0.95))
        ->capture_default_str();
    train->add_option("--val-fraction", ta.val_fraction, "Validation share of each training portion")
        ->check(CLI::Range(0.0, 0.9))
        ->capture_default_str();

    EvalArgs ea;
    auto* evalc = app.add_subcommand("eval", "Confusion matrix, per-SNR curve and summary for a checkpoint");
    evalc->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
    evalc->add_option("--dataset", ea.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    evalc->add_option("--fold", ea.fold, "Evaluate the test part of this fold (default: whole dataset)");

    EmbedArgs ba;
    auto* embed = app.add_subcommand("embed", "Hidden-layer embeddings projected with t-SNE");
    embed->add_option("--checkpoint", ba.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
    embed->add_option("--dataset", ba.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    embed->add_option("--fold", ba.fold, "Use the test part of this fold (default: whole dataset)");
    embed->add_option("--perplexity", ba.perplexity, "t-SNE perplexity")->check(CLI::PositiveNumber)->capture_default_str();
    embed->add_option("--iters", ba.iters, "t-SNE iterations")->check(CLI::NonNegativeNumber)->capture_default_str();
    embed->add_option("--min-snr", ba.min_snr, "Drop samples below this SNR (dB)");
    embed->add_option("--max-samples", ba.max_samples, "Random subset size (0 = all)");

    StreamArgs sta;
    auto* streamc = app.add_subcommand("stream", "Run the streaming detector over a scenario");
    streamc->add_option("--scenario", sta.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    streamc->add_option("--checkpoint", sta.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
    streamc->add_option("--threshold", sta.threshold, "Posterior threshold for a Drone frame")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    streamc->add_flag("--no-agc", sta.no_agc, "Disable per-frame carrier-power normalization");
    streamc->add_option("--table", sta.table, "Transmitter table JSON")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }
    ta.single_fold = only->count() > 0;

    try {
        const CLI::App* sub = app.get_subcommands().front();
        write_run_config(g, app, *sub);
        const bool f64 = g.precision == "f64";
        if (sub == synth) return cmd_synth(g, sa);
        if (sub == train) return f64 ? train_impl<double>(g, ta) : train_impl<float>(g, ta);
        if (sub == evalc) return f64 ? eval_impl<double>(g, ea) : eval_impl<float>(g, ea);
        if (sub == embed) return f64 ? embed_impl<double>(g, ba) : embed_impl<float>(g, ba);
        if (sub == streamc) return cmd_stream(g, sta);
    } catch (const config_error& e) {
        std::cerr << "rfdet: configuration error: " << e.what() << "\n";
        return usage;
    } catch (const format_error& e) {
        std::cerr << "rfdet: data error: " << e.what() << "\n";
        return data;
    } catch (const io_error& e) {
        std::cerr << "rfdet: data error: " << e.what() << "\n";
        return data;
    } catch (const invalid_input& e) {
        std::cerr << "rfdet: data error: " << e.what() << "\n";
        return data;
    } catch (const degenerate_input& e) {
        std::cerr << "rfdet: data error: " << e.what() << "\n";
        return data;
    } catch (const std::exception& e) {
        std::cerr << "rfdet: " << e.what() << "\n";
        return runtime;
    }
    return runtime;
}
