#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "mmtrack/classifier.hpp"

using namespace mmtrack;
using namespace mmtrack::classifier;

namespace {

std::vector<std::vector<RadarPoint>> random_clouds(std::mt19937_64& rng, int steps, int min_pts, int max_pts) {
    std::uniform_int_distribution<int> count(min_pts, max_pts);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<RadarPoint>> out(static_cast<std::size_t>(steps));
    for (auto& c : out) {
        const int n = count(rng);
        for (int i = 0; i < n; ++i) c.push_back({g(rng), 3 + g(rng), 1 + g(rng), g(rng), 10 + g(rng)});
    }
    return out;
}

PointCloudSequence random_sequence(std::mt19937_64& rng, int steps, int n_max) {
    const auto raw = random_clouds(rng, steps, 5, 2 * n_max);
    return preprocess(raw, Standardization{}, n_max, rng);
}

std::size_t expected_parameters(int classes) {
    // Dense + batch-norm scale and shift per point layer; taps + bias per temporal layer.
    std::size_t n = 0;
    const int pc[] = {5, 96, 96, 96, 192, 192};
    for (int l = 0; l < 5; ++l) n += pc[l] * pc[l + 1] + pc[l + 1] + 2 * pc[l + 1];
    const int tc[] = {192, 32, 64, 128};
    for (int l = 0; l < 3; ++l) n += 3 * tc[l] * tc[l + 1] + tc[l + 1];
    return n + 3 * 128 * classes + classes;
}

}  // namespace

TEST_SUITE("classifier") {

TEST_CASE("parameter count") {
    CHECK(expected_parameters(8) == 128680);
    CHECK(Tcpcn<float>(8).parameter_count() == 128680);
    CHECK(Tcpcn<float>(3).parameter_count() == expected_parameters(3));
}

TEST_CASE("probabilities form a distribution") {
    std::mt19937_64 rng(1);
    const auto model = Tcpcn<double>::random(5, 3);
    const auto out = forward(model, random_sequence(rng, 10, 20));
    CHECK(out.probabilities.size() == 5);
    CHECK(out.probabilities.sum() == doctest::Approx(1.0));
    CHECK((out.probabilities.array() > 0).all());
}

TEST_CASE("gradient check in inference and batch-statistics modes") {
    std::mt19937_64 rng(2);
    auto model = Tcpcn<double>::random(4, 11);
    // Non-trivial running statistics so the eval-mode batch norm is not the identity.
    for (auto& b : model.bn) {
        b.running_mean.setRandom();
        b.running_var = b.running_var.array() + 0.5;
    }
    const auto seq = random_sequence(rng, 8, 12);
    for (Mode mode : {Mode::eval(), Mode{false, true}}) {
        const auto r = grad_check(model, seq, 2, mode, 256, 1e-4, 7, 1e-3);
        CHECK(r.checked >= 200);
        CHECK(r.max_relative_error <= 1e-3);
        std::set<std::string> kinds;
        for (const auto& [name, err] : r.per_tensor) kinds.insert(name.substr(name.find('.') + 1, 3));
        CHECK(kinds.count("wei"));
        CHECK(kinds.count("bn."));
        CHECK(kinds.count("tap"));
    }
    CHECK_THROWS_AS(grad_check(model, seq, 0, Mode::train()), Error);
}

TEST_CASE("output does not depend on point order") {
    std::mt19937_64 rng(3);
    const auto model = Tcpcn<float>::random(8, 5);
    auto seq = random_sequence(rng, 30, 100);
    const auto ref = forward(model, seq).probabilities;
    for (int p = 0; p < 100; ++p) {
        auto shuffled = seq;
        for (auto& step : shuffled.steps) {
            std::vector<int> order(static_cast<std::size_t>(step.rows()));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            StepMatrix s(step.rows(), kPointFeatures);
            for (Eigen::Index i = 0; i < step.rows(); ++i) s.row(i) = step.row(order[static_cast<std::size_t>(i)]);
            step = s;
        }
        const auto out = forward(model, shuffled).probabilities;
        CHECK(std::memcmp(out.data(), ref.data(), sizeof(float) * static_cast<std::size_t>(ref.size())) == 0);
    }
}

TEST_CASE("missing steps are skipped") {
    std::mt19937_64 rng(4);
    const auto model = Tcpcn<double>::random(3, 6);
    auto raw = random_clouds(rng, 6, 5, 30);
    auto with_gap = raw;
    with_gap.insert(with_gap.begin() + 3, std::vector<RadarPoint>{});
    std::mt19937_64 a(9), b(9);
    const auto s1 = preprocess(raw, Standardization{}, 20, a);
    const auto s2 = preprocess(with_gap, Standardization{}, 20, b);
    CHECK(s2.missing[3]);
    CHECK(s2.present_steps() == 6);
    const auto p1 = forward(model, s1).probabilities;
    const auto p2 = forward(model, s2).probabilities;
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("preprocess samples and pads to n_max") {
    std::mt19937_64 rng(5);
    std::vector<RadarPoint> many, few;
    for (int i = 0; i < 250; ++i) many.push_back({double(i), 0, 0, 0, 1});
    for (int i = 0; i < 7; ++i) few.push_back({double(i), 0, 0, 0, 1});
    const auto s = preprocess_step(many, Standardization{}, 100, rng);
    CHECK(s.rows() == 100);
    std::set<double> xs;
    for (Eigen::Index i = 0; i < s.rows(); ++i) xs.insert(s(i, 0));
    CHECK(xs.size() == 100);
    const auto p = preprocess_step(few, Standardization{}, 100, rng);
    CHECK(p.rows() == 100);
    std::set<double> ys;
    for (Eigen::Index i = 0; i < p.rows(); ++i) ys.insert(p(i, 0));
    CHECK(ys.size() == 7);
    // Standardization is applied per feature.
    Standardization st;
    st.mean[0] = 3;
    st.stddev[0] = 2;
    const auto q = preprocess_step(few, st, 7, rng);
    CHECK(q.col(0).minCoeff() == doctest::Approx(-1.5));
    CHECK(q.col(0).maxCoeff() == doctest::Approx(1.5));
}

TEST_CASE("quantization error is within half a step") {
    std::mt19937_64 rng(6);
    std::normal_distribution<float> g(0.0f, 0.3f);
    std::vector<float> w(1000);
    for (auto& v : w) v = g(rng);
    const auto q = quantize_tensor(w);
    const auto back = dequantize_tensor(q);
    float worst = 0;
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(w[i] - back[i]));
    CHECK(worst <= q.scale * 0.5f + 1e-7f);
    const std::vector<float> zeros(4, 0.0f);
    CHECK(quantize_tensor(zeros).scale == 1.0f);
}

TEST_CASE("save and load round trip") {
    const auto model = Tcpcn<float>::random(8, 12);
    const auto dir = std::filesystem::temp_directory_path();
    const auto plain = (dir / "mmtrack_test_model.bin").string();
    const auto small = (dir / "mmtrack_test_model_q.bin").string();
    save_model(model, plain);
    CHECK(parameter_hash(load_model(plain)) == parameter_hash(model));
    save_model(model, small, true);
    CHECK(parameter_hash(load_model(small)) == parameter_hash(quantize(model).dequantized()));
    CHECK(std::filesystem::file_size(small) * 3 < std::filesystem::file_size(plain));
    {
        std::FILE* f = std::fopen(plain.c_str(), "r+b");
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_model(plain), Error);
    CHECK_THROWS_AS(load_model((dir / "does_not_exist.bin").string()), Error);
    std::filesystem::remove(plain);
    std::filesystem::remove(small);
}

TEST_CASE("training separates two easy classes") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 0.2);
    Dataset data;
    data.classes = 2;
    for (int i = 0; i < 80; ++i) {
        LabeledSequence s;
        s.label = i % 2;
        for (int k = 0; k < 6; ++k) {
            std::vector<RadarPoint> c;
            for (int p = 0; p < 12; ++p) c.push_back({g(rng), 3 + g(rng), 1 + g(rng), (s.label ? 1.0 : -1.0) + g(rng), 5});
            s.steps.push_back(c);
        }
        (i < 60 ? data.train : data.validation).push_back(s);
    }
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 15;
    cfg.n_max = 12;
    cfg.batch_size = 8;
    int epochs = 0;
    const auto r = train(data, cfg, [&](const EpochStats&) { ++epochs; });
    CHECK(epochs == static_cast<int>(r.history.size()));
    CHECK(evaluate_accuracy(r.model, data.validation) >= 0.9);
    CHECK(r.history.front().train_loss > r.history.back().train_loss);
}

}
