#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mmtrack/classifier.hpp"

namespace mmtrack::classifier {

namespace {

std::array<double, kPointFeatures> features_of(const RadarPoint& p) { return {p.x, p.y, p.z, p.v, p.power}; }

std::vector<std::vector<CompactCloud<float>>> compact_sequence(const PointCloudSequence& seq) {
    std::vector<std::vector<CompactCloud<float>>> out(1);
    for (std::size_t s = 0; s < seq.steps.size(); ++s)
        if (!seq.missing[s]) out[0].push_back(compact<float>(seq.steps[s]));
    return out;
}

struct Split {
    std::vector<std::vector<CompactCloud<float>>> clouds;
    std::vector<int> labels;
};

Split prepare(const Tcpcn<float>& model, std::span<const LabeledSequence> sequences, std::mt19937_64& rng,
              double noise) {
    Split split;
    for (const auto& s : sequences) {
        const auto seq = preprocess(s.steps, model.standardization, model.n_max, rng, noise);
        auto c = compact_sequence(seq);
        if (c[0].empty()) continue;
        split.clouds.push_back(std::move(c[0]));
        split.labels.push_back(s.label);
    }
    return split;
}

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const Tcpcn<float>& model, const Split& split) {
    Evaluation e;
    if (split.clouds.empty()) return e;
    constexpr std::size_t kChunk = 64;
    double ce = 0.0;
    int correct = 0;
    for (std::size_t b0 = 0; b0 < split.clouds.size(); b0 += kChunk) {
        const std::size_t b1 = std::min(split.clouds.size(), b0 + kChunk);
        std::vector<std::vector<CompactCloud<float>>> batch(split.clouds.begin() + static_cast<std::ptrdiff_t>(b0),
                                                            split.clouds.begin() + static_cast<std::ptrdiff_t>(b1));
        const std::span<const int> labels(split.labels.data() + b0, b1 - b0);
        const auto r = loss_and_gradient<float>(model, batch, labels, 0.0, Mode::eval(), nullptr, nullptr);
        ce += r.cross_entropy * static_cast<double>(b1 - b0);
        correct += r.correct;
    }
    const auto n = static_cast<double>(split.clouds.size());
    e.loss = ce / n;
    e.accuracy = correct / n;
    return e;
}

}  // namespace

Standardization compute_standardization(std::span<const std::vector<RadarPoint>> clouds) {
    std::array<double, kPointFeatures> sum{}, sum_sq{};
    double n = 0;
    for (const auto& cloud : clouds) {
        for (const auto& p : cloud) {
            const auto f = features_of(p);
            for (int i = 0; i < kPointFeatures; ++i) {
                sum[i] += f[i];
                sum_sq[i] += f[i] * f[i];
            }
            n += 1;
        }
    }
    if (n < 2) throw Error("compute_standardization: need at least two points");
    Standardization s;
    for (int i = 0; i < kPointFeatures; ++i) {
        s.mean[i] = sum[i] / n;
        const double var = std::max(sum_sq[i] / n - s.mean[i] * s.mean[i], 0.0);
        s.stddev[i] = var > 1e-18 ? std::sqrt(var) : 1.0;
    }
    return s;
}

StepMatrix preprocess_step(std::span<const RadarPoint> raw, const Standardization& stats, int n_max,
                           std::mt19937_64& rng, double augment_noise) {
    if (n_max < 1) throw Error("preprocess: n_max must be positive");
    if (raw.empty()) throw Error("preprocess: empty point set");
    const auto n = static_cast<int>(raw.size());
    std::vector<int> chosen(static_cast<std::size_t>(n));
    std::iota(chosen.begin(), chosen.end(), 0);
    if (n > n_max) {
        // Partial Fisher-Yates: the first n_max entries are a uniform sample without replacement.
        for (int i = 0; i < n_max; ++i) {
            std::uniform_int_distribution<int> pick(i, n - 1);
            std::swap(chosen[static_cast<std::size_t>(i)], chosen[static_cast<std::size_t>(pick(rng))]);
        }
        chosen.resize(static_cast<std::size_t>(n_max));
    }
    const int kept = static_cast<int>(chosen.size());
    StepMatrix base(kept, kPointFeatures);
    std::uniform_real_distribution<double> jitter(-augment_noise, augment_noise);
    for (int r = 0; r < kept; ++r) {
        const auto f = features_of(raw[static_cast<std::size_t>(chosen[static_cast<std::size_t>(r)])]);
        for (int i = 0; i < kPointFeatures; ++i) {
            double v = (f[i] - stats.mean[i]) / stats.stddev[i];
            if (augment_noise > 0) v += jitter(rng);
            base(r, i) = v;
        }
    }
    StepMatrix out(n_max, kPointFeatures);
    out.topRows(kept) = base;
    std::uniform_int_distribution<int> pad(0, kept - 1);
    for (int r = kept; r < n_max; ++r) out.row(r) = base.row(pad(rng));
    return out;
}

PointCloudSequence preprocess(std::span<const std::vector<RadarPoint>> raw, const Standardization& stats, int n_max,
                              std::mt19937_64& rng, double augment_noise) {
    PointCloudSequence seq;
    seq.n_max = n_max;
    for (const auto& step : raw) {
        if (step.empty()) {
            seq.steps.emplace_back(StepMatrix::Zero(n_max, kPointFeatures));
            seq.missing.push_back(true);
        } else {
            seq.steps.push_back(preprocess_step(step, stats, n_max, rng, augment_noise));
            seq.missing.push_back(false);
        }
    }
    return seq;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (data.classes < 1) throw Error("train: dataset has no classes");
    if (data.train.empty()) throw Error("train: empty training split");
    if (cfg.batch_size < 1 || cfg.max_epochs < 1) throw Error("train: invalid batch size or epoch count");
    for (const auto& s : data.train)
        if (s.label < 0 || s.label >= data.classes) throw Error("train: label out of range");

    std::vector<std::vector<RadarPoint>> all_steps;
    for (const auto& s : data.train)
        for (const auto& step : s.steps) all_steps.push_back(step);

    Tcpcn<float> model = Tcpcn<float>::random(data.classes, cfg.seed);
    model.standardization = compute_standardization(all_steps);
    model.n_max = cfg.n_max;
    model.dropout_rate = cfg.dropout;

    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + 1);
    std::mt19937_64 val_rng(cfg.seed + 12345);
    const Split validation = prepare(model, data.validation, val_rng, 0.0);

    auto params = model.tensors();
    std::vector<std::vector<float>> m1(params.size()), m2(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m1[i].assign(static_cast<std::size_t>(params[i].size()), 0.0f);
        m2[i].assign(static_cast<std::size_t>(params[i].size()), 0.0f);
    }
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-7;
    long step_count = 0;

    TrainResult result;
    Tcpcn<float> best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t used = order.size();
        if (cfg.windows_per_epoch > 0) used = std::min(used, static_cast<std::size_t>(cfg.windows_per_epoch));

        double loss_sum = 0.0;
        int correct = 0, seen = 0;
        for (std::size_t b0 = 0; b0 < used; b0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b1 = std::min(used, b0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::vector<CompactCloud<float>>> batch;
            std::vector<int> labels;
            for (std::size_t b = b0; b < b1; ++b) {
                const auto& s = data.train[order[b]];
                auto c = compact_sequence(preprocess(s.steps, model.standardization, model.n_max, rng,
                                                     cfg.augment_noise));
                if (c[0].empty()) continue;
                batch.push_back(std::move(c[0]));
                labels.push_back(s.label);
            }
            if (batch.empty()) continue;
            Tcpcn<float> grad;
            const auto r = loss_and_gradient<float>(model, batch, labels, cfg.l2, Mode::train(), &rng, &grad);
            if (!std::isfinite(r.loss)) throw Error("train: loss diverged at epoch " + std::to_string(epoch));
            loss_sum += r.cross_entropy * static_cast<double>(batch.size());
            correct += r.correct;
            seen += static_cast<int>(batch.size());

            ++step_count;
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count));
            const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
            auto g = grad.tensors();
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!params[i].trainable) continue;
                auto& a = m1[i];
                auto& v = m2[i];
                for (Eigen::Index e = 0; e < params[i].size(); ++e) {
                    const auto k = static_cast<std::size_t>(e);
                    const double gi = g[i].data[e];
                    a[k] = static_cast<float>(kBeta1 * a[k] + (1 - kBeta1) * gi);
                    v[k] = static_cast<float>(kBeta2 * v[k] + (1 - kBeta2) * gi * gi);
                    params[i].data[e] -= static_cast<float>(lr * a[k] / (std::sqrt(static_cast<double>(v[k])) + kAdamEps));
                }
            }
            for (int l = 0; l < kPcLayers; ++l) {
                auto& bn = model.bn[l];
                const float mom = static_cast<float>(kBatchNormMomentum);
                bn.running_mean = mom * bn.running_mean + (1 - mom) * r.batch_mean[l];
                bn.running_var = mom * bn.running_var + (1 - mom) * r.batch_var[l];
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = seen ? loss_sum / seen : 0.0;
        stats.train_accuracy = seen ? static_cast<double>(correct) / seen : 0.0;
        const Evaluation val = evaluate(model, validation.clouds.empty() ? Split{} : validation);
        stats.validation_loss = validation.clouds.empty() ? stats.train_loss : val.loss;
        stats.validation_accuracy = validation.clouds.empty() ? stats.train_accuracy : val.accuracy;
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(stats.validation_loss)) throw Error("train: validation loss is not finite");
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (stats.validation_loss < best_loss) {
            best_loss = stats.validation_loss;
            best = model;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    result.model = std::move(best);
    return result;
}

double evaluate_accuracy(const Tcpcn<float>& model, std::span<const LabeledSequence> sequences, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Split split = prepare(model, sequences, rng, 0.0);
    return evaluate(model, split).accuracy;
}

}  // namespace mmtrack::classifier
