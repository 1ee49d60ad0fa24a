// Command-line front end: simulate, train, run, eval, gradcheck, bench.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "mmtrack/classifier.hpp"
#include "mmtrack/harness.hpp"
#include "mmtrack/pipeline.hpp"
#include "mmtrack/simulator.hpp"

using namespace mmtrack;

namespace {

pipeline::PipelineConfig config_or_default(const std::string& path) {
    return path.empty() ? pipeline::PipelineConfig{} : harness::load_config(path);
}

int cmd_simulate(const std::string& scenario_path, const std::string& out, std::int64_t seed_override) {
    sim::Scenario sc = harness::load_scenario(scenario_path);
    if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
    const auto frames = sim::generate(sc);
    harness::write_frames(out, harness::to_records(frames));
    std::cout << "wrote " << frames.size() << " frames to " << out << '\n';
    return 0;
}

struct TrainArgs {
    int subjects = 8;
    double minutes = 10.0;
    int rooms = 1;
    std::string out;
    bool quantize = false;
    classifier::TrainConfig cfg;
};

int cmd_train(TrainArgs a) {
    const auto profiles = sim::default_profiles(a.subjects);
    sim::CorpusOptions opt;
    opt.minutes = a.minutes;
    opt.rooms = a.rooms;
    opt.seed = a.cfg.seed;
    const auto corpus = sim::generate_training_corpus(profiles, opt);
    classifier::Dataset data;
    data.classes = a.subjects;
    for (std::size_t i = 0; i < corpus.size(); ++i) (i % 10 == 9 ? data.validation : data.train).push_back(corpus[i]);
    std::cerr << "corpus: " << data.train.size() << " training and " << data.validation.size()
              << " validation windows\n";
    std::cout << "epoch,train_loss,train_accuracy,validation_loss,validation_accuracy,seconds\n";
    const auto result = classifier::train(data, a.cfg, [](const classifier::EpochStats& e) {
        std::cout << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.validation_loss << ','
                  << e.validation_accuracy << ',' << e.seconds << std::endl;
    });
    classifier::save_model(result.model, a.out, a.quantize);
    std::cerr << "best epoch " << result.best_epoch << ", " << result.model.parameter_count() << " parameters, wrote "
              << a.out << '\n';
    return 0;
}

int cmd_run(const std::string& frames_path, const std::string& model_path, const std::string& config_path,
            const std::string& out, bool no_classifier) {
    auto cfg = config_or_default(config_path);
    if (no_classifier) cfg.classify = false;
    std::optional<classifier::Tcpcn<float>> model;
    if (cfg.classify) {
        if (model_path.empty()) throw Error("run: --model is required unless identification is disabled");
        model = classifier::load_model(model_path);
    }
    const auto records = harness::read_frames(frames_path);
    pipeline::Pipeline p(cfg, model ? &*model : nullptr);
    std::vector<pipeline::FrameReport> reports;
    reports.reserve(records.size());
    for (const auto& r : records) reports.push_back(p.step(r.frame));
    harness::write_reports(out, reports, cfg);
    const auto s = pipeline::summarize(reports);
    std::cout << std::fixed << std::setprecision(3) << "frames " << s.frames << ", distinct tracks "
              << s.distinct_tracks << ", respawns " << s.respawns << "\n"
              << "tracking ms mean " << s.tracking.mean_ms << " p95 " << s.tracking.p95_ms << "\n"
              << "inference ms mean " << s.inference.mean_ms << " p95 " << s.inference.p95_ms << "\n";
    return 0;
}

int cmd_eval(const std::string& report_path, const std::string& frames_path, double radius, bool no_merge,
             const std::string& csv) {
    std::map<std::string, std::string> header;
    const auto reports = harness::read_reports(report_path, &header);
    const auto truth = harness::read_frames(frames_path);
    const auto frames = harness::align(truth, reports);
    const auto raw = harness::evaluate(frames, radius);
    const auto merged_frames = harness::merge_by_identity(frames);
    const auto merged = harness::evaluate(merged_frames, radius);
    const auto& main = no_merge ? raw : merged;
    for (const auto& w : main.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << std::fixed << std::setprecision(3) << "MOTA=" << main.mota << (no_merge ? " (raw tracks)" : " (merged by identity)")
              << "\nMOTA_raw=" << raw.mota << " MOTA_merged=" << merged.mota << "\nmisses=" << main.misses
              << " false_positives=" << main.false_positives << " mismatches=" << main.mismatches
              << " ground_truth=" << main.ground_truth << "\naccuracy=" << main.weighted_accuracy << '\n';
    std::cout << "subject  tracked_frames  accuracy\n";
    for (const auto& [s, acc] : main.subject_accuracy)
        std::cout << std::setw(7) << s << std::setw(16) << main.subject_tracked_frames.at(s) << std::setw(10) << acc
                  << '\n';
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw Error("cannot open " + csv);
        out << "K,rho,mota_raw,mota_merged,accuracy,misses,false_positives,mismatches_raw,mismatches_merged,ground_truth\n";
        out << (header.count("K") ? header["K"] : "") << ',' << (header.count("rho") ? header["rho"] : "") << ','
            << raw.mota << ',' << merged.mota << ',' << main.weighted_accuracy << ',' << raw.misses << ','
            << raw.false_positives << ',' << raw.mismatches << ',' << merged.mismatches << ',' << raw.ground_truth
            << '\n';
    }
    return 0;
}

int cmd_gradcheck(int classes, std::uint64_t seed, int samples, bool batch_stats) {
    const auto profiles = sim::default_profiles(std::max(2, classes));
    sim::CorpusOptions opt;
    opt.minutes = 0.05;
    opt.seed = seed;
    const auto corpus = sim::generate_training_corpus(profiles, opt);
    auto model = classifier::Tcpcn<double>::random(classes, seed);
    std::vector<std::vector<RadarPoint>> clouds;
    for (const auto& s : corpus)
        for (const auto& c : s.steps) clouds.push_back(c);
    model.standardization = classifier::compute_standardization(clouds);
    std::mt19937_64 rng(seed);
    const auto seq = classifier::preprocess(corpus.front().steps, model.standardization, model.n_max, rng);
    const classifier::Mode mode{false, batch_stats};
    const auto r = classifier::grad_check(model, seq, corpus.front().label % classes, mode, samples, 1e-4, seed, 1e-4);
    for (const auto& [name, err] : r.per_tensor) std::cout << name << ' ' << std::scientific << err << '\n';
    std::cout << "checked " << r.checked << " parameters\nmax relative error " << std::scientific
              << std::setprecision(3) << r.max_relative_error << '\n';
    return r.max_relative_error <= 1e-3 ? 0 : 1;
}

int cmd_bench(const std::string& frames_path, const std::string& model_path, const std::string& config_path,
              const std::string& csv) {
    const auto cfg = config_or_default(config_path);
    const auto model = classifier::load_model(model_path);
    const auto records = harness::read_frames(frames_path);
    pipeline::Pipeline p(cfg, cfg.classify ? &model : nullptr);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!csv.empty()) {
        file.open(csv);
        if (!file) throw Error("cannot open " + csv);
        out = &file;
    }
    *out << "k,tracks,classified,tracking_ms,inference_ms,total_ms\n";
    std::vector<pipeline::FrameReport> reports;
    for (const auto& r : records) {
        auto rep = p.step(r.frame);
        int classified = 0;
        for (const auto& t : rep.tracks) classified += t.classified;
        *out << rep.k << ',' << rep.tracks.size() << ',' << classified << ',' << rep.tracking_ms << ','
             << rep.inference_ms << ',' << rep.tracking_ms + rep.inference_ms << '\n';
        reports.push_back(std::move(rep));
    }
    const auto s = pipeline::summarize(reports);
    std::cerr << std::fixed << std::setprecision(3) << "p95 tracking " << s.tracking.p95_ms << " ms, p95 inference "
              << s.inference.p95_ms << " ms, p95 total " << s.total.p95_ms << " ms\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mm-wave radar people tracking and identification"};
    app.require_subcommand(1);

    std::string scenario, frames, model, config, out, report, csv;
    std::int64_t sim_seed = -1;
    auto* simulate = app.add_subcommand("simulate", "Generate a frame file from a scenario file");
    simulate->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("-o,--out", out, "Frame file to write")->required();
    simulate->add_option("--seed", sim_seed, "Override the scenario seed");

    // Desk-scale preset: a larger step and a sampled epoch keep training within minutes.
    TrainArgs ta;
    ta.cfg.learning_rate = 1e-3;
    ta.cfg.windows_per_epoch = 2048;
    ta.cfg.max_epochs = 20;
    auto* train = app.add_subcommand("train", "Train the classifier on a synthetic single-walker corpus");
    train->add_option("-o,--out", ta.out, "Model file to write")->required();
    train->add_option("--subjects", ta.subjects, "Number of default walker profiles (classes)")->check(CLI::Range(2, 8));
    train->add_option("--minutes", ta.minutes, "Simulated minutes per subject");
    train->add_option("--rooms", ta.rooms, "Arena layouts per subject");
    train->add_option("--epochs", ta.cfg.max_epochs, "Maximum epochs");
    train->add_option("--patience", ta.cfg.patience, "Early-stopping patience in epochs");
    train->add_option("--lr", ta.cfg.learning_rate, "Adam learning rate");
    train->add_option("--batch", ta.cfg.batch_size, "Mini-batch size");
    train->add_option("--windows-per-epoch", ta.cfg.windows_per_epoch, "Windows drawn per epoch (0 = all)");
    train->add_option("--seed", ta.cfg.seed, "Seed for corpus, initialization and shuffling");
    train->add_flag("--quantize", ta.quantize, "Store linear weights as 8-bit integers");

    bool no_classifier = false;
    auto* run = app.add_subcommand("run", "Track and identify a frame file");
    run->add_option("frames", frames, "Frame file")->required()->check(CLI::ExistingFile);
    run->add_option("-m,--model", model, "Model file");
    run->add_option("-c,--config", config, "key=value config file (defaults otherwise)");
    run->add_option("-o,--out", out, "Report file to write")->required();
    run->add_flag("--no-classifier", no_classifier, "Disable identification");

    double radius = 1.0;
    bool no_merge = false;
    auto* eval = app.add_subcommand("eval", "Score a report against the ground truth in a frame file");
    eval->add_option("report", report, "Report file")->required()->check(CLI::ExistingFile);
    eval->add_option("frames", frames, "Frame file with ground truth")->required()->check(CLI::ExistingFile);
    eval->add_option("--radius", radius, "Match gate in metres");
    eval->add_flag("--no-merge", no_merge, "Score raw tracks without merging by identity");
    eval->add_option("--csv", csv, "Append-ready CSV summary");

    int gc_classes = 8, gc_samples = 256;
    std::uint64_t gc_seed = 7;
    bool gc_batch = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and numerical gradients of a fresh model");
    gradcheck->add_option("--classes", gc_classes, "Number of classes");
    gradcheck->add_option("--samples", gc_samples, "Parameters to check");
    gradcheck->add_option("--seed", gc_seed, "Seed");
    gradcheck->add_flag("--batch-stats", gc_batch, "Use batch statistics in batch norm");

    auto* bench = app.add_subcommand("bench", "Per-frame latency distribution as CSV");
    bench->add_option("frames", frames, "Frame file")->required()->check(CLI::ExistingFile);
    bench->add_option("-m,--model", model, "Model file")->required()->check(CLI::ExistingFile);
    bench->add_option("-c,--config", config, "key=value config file");
    bench->add_option("--csv", csv, "Write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*simulate) return cmd_simulate(scenario, out, sim_seed);
        if (*train) return cmd_train(ta);
        if (*run) return cmd_run(frames, model, config, out, no_classifier);
        if (*eval) return cmd_eval(report, frames, radius, no_merge, csv);
        if (*gradcheck) return cmd_gradcheck(gc_classes, gc_seed, gc_samples, gc_batch);
        if (*bench) return cmd_bench(frames, model, config, csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
