#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmtrack/types.hpp"

namespace mmtrack::classifier {

inline constexpr int kPointFeatures = 5;  // x, y, z, v, power
inline constexpr int kPcLayers = 5;
inline constexpr std::array<int, kPcLayers + 1> kPcWidths{kPointFeatures, 96, 96, 96, 192, 192};
inline constexpr int kFeatureDim = kPcWidths.back();
inline constexpr int kTcLayers = 3;
inline constexpr std::array<int, kTcLayers + 1> kTcWidths{kFeatureDim, 32, 64, 128};
inline constexpr std::array<int, kTcLayers> kTcDilations{1, 2, 4};
inline constexpr int kKernel = 3;
inline constexpr double kBatchNormEps = 1e-3;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Per-feature mean and standard deviation, computed over the training corpus.
struct Standardization {
    std::array<double, kPointFeatures> mean{0, 0, 0, 0, 0};
    std::array<double, kPointFeatures> stddev{1, 1, 1, 1, 1};
};

Standardization compute_standardization(std::span<const std::vector<RadarPoint>> clouds);

using StepMatrix = Eigen::Matrix<double, Eigen::Dynamic, kPointFeatures, Eigen::RowMajor>;

/// K steps of exactly n_max standardized points each. Steps whose raw point set was empty are
/// flagged missing and skipped by the network.
struct PointCloudSequence {
    int n_max = 100;
    std::vector<StepMatrix> steps;
    std::vector<bool> missing;

    int present_steps() const;
};

/// Standardize, then sample without replacement (size > n_max) or pad by repeating uniformly
/// drawn members (size < n_max). `augment_noise` > 0 adds U(-a, a) to every standardized
/// feature of each original point before padding.
PointCloudSequence preprocess(std::span<const std::vector<RadarPoint>> raw, const Standardization& stats,
                              int n_max, std::mt19937_64& rng, double augment_noise = 0.0);

StepMatrix preprocess_step(std::span<const RadarPoint> raw, const Standardization& stats, int n_max,
                           std::mt19937_64& rng, double augment_noise = 0.0);

/// A step reduced to its distinct rows in lexicographic order, each weighted by its
/// multiplicity / n. Mean pooling over the original rows equals the weighted sum over these,
/// and the canonical order makes every downstream float operation independent of input order.
template <typename Scalar>
struct CompactCloud {
    Mat<Scalar> rows;
    Vec<Scalar> weights;
};

template <typename Scalar>
CompactCloud<Scalar> compact(const StepMatrix& step);

/// Forward behaviour switches. Training uses both; inference uses neither.
struct Mode {
    bool dropout = false;
    bool batch_stats = false;

    static constexpr Mode train() { return {true, true}; }
    static constexpr Mode eval() { return {false, false}; }
};

template <typename Scalar>
struct DenseLayer {
    Mat<Scalar> weight;  // in x out
    RowVec<Scalar> bias;
};

template <typename Scalar>
struct BatchNormLayer {
    RowVec<Scalar> gamma;
    RowVec<Scalar> beta;
    RowVec<Scalar> running_mean;
    RowVec<Scalar> running_var;
};

template <typename Scalar>
struct ConvLayer {
    std::array<Mat<Scalar>, kKernel> taps;  // in x out; taps[kKernel - 1] multiplies the current step
    RowVec<Scalar> bias;
    int dilation = 1;
};

/// Named view of one parameter (or running-statistic) tensor, row-major element order not
/// guaranteed: elements are addressed through Eigen's storage order.
template <typename Scalar>
struct TensorRef {
    std::string name;
    Scalar* data = nullptr;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool trainable = true;
    bool regularized = false;  // L2 applies (linear weights and conv taps)

    Eigen::Index size() const { return rows * cols; }
};

/// Causal dilated convolution over time: out(s) = b + sum_j in(s - dilation (K-1-j)) taps[j],
/// with zero left padding of (K-1) dilation steps. Rows are time, columns channels.
template <typename Scalar>
Mat<Scalar> dilated_causal_conv(const Mat<Scalar>& input, const ConvLayer<Scalar>& layer);

/// Temporal convolution point-cloud network.
template <typename Scalar>
class Tcpcn {
public:
    Tcpcn() = default;
    explicit Tcpcn(int classes);

    /// Glorot-uniform weights, zero biases, unit batch-norm scale.
    static Tcpcn random(int classes, std::uint64_t seed);

    int classes() const { return classes_; }
    std::size_t parameter_count() const;

    std::vector<TensorRef<Scalar>> tensors();
    std::vector<TensorRef<const Scalar>> tensors() const;

    template <typename Other>
    Tcpcn<Other> cast() const;

    /// Copy with every tensor zeroed; used as a gradient accumulator.
    Tcpcn zeros_like() const;

    Standardization standardization;
    int n_max = 100;
    double dropout_rate = 0.5;

    std::array<DenseLayer<Scalar>, kPcLayers> pc;
    std::array<BatchNormLayer<Scalar>, kPcLayers> bn;
    std::array<ConvLayer<Scalar>, kTcLayers> tc;
    ConvLayer<Scalar> head;

private:
    int classes_ = 0;

    template <typename S, typename Self>
    static std::vector<TensorRef<S>> collect(Self& self);
};

/// Per-point MLP and weighted mean pooling (eval-mode batch norm): a kFeatureDim vector.
template <typename Scalar>
Vec<Scalar> pc_block(const Tcpcn<Scalar>& model, const CompactCloud<Scalar>& cloud);

template <typename Scalar>
Vec<Scalar> pc_block(const Tcpcn<Scalar>& model, const StepMatrix& step) {
    return pc_block(model, compact<Scalar>(step));
}

/// Forward result for one sequence.
template <typename Scalar>
struct Output {
    Vec<Scalar> probabilities;
    Vec<Scalar> logits;
    Mat<Scalar> head_activations;  // T x Q, before temporal pooling
};

/// Temporal block on precomputed per-step features (T x kFeatureDim), eval mode.
template <typename Scalar>
Output<Scalar> temporal_block(const Tcpcn<Scalar>& model, const Mat<Scalar>& features);

template <typename Scalar>
Output<Scalar> forward(const Tcpcn<Scalar>& model, const PointCloudSequence& seq, Mode mode = Mode::eval(),
                       std::mt19937_64* rng = nullptr);

/// Batched forward over precompacted sequences. `rng` is required when mode.dropout is set.
template <typename Scalar>
std::vector<Output<Scalar>> forward_batch(const Tcpcn<Scalar>& model,
                                          const std::vector<std::vector<CompactCloud<Scalar>>>& batch, Mode mode,
                                          std::mt19937_64* rng = nullptr);

/// Mean cross-entropy over the batch plus l2 * sum of squared weights, with the analytic
/// gradient accumulated into `grad` (overwritten), and the batch-norm batch statistics when
/// mode.batch_stats is set (for the running-average update).
template <typename Scalar>
struct LossAndGradient {
    double loss = 0.0;
    double cross_entropy = 0.0;
    int correct = 0;
    std::array<RowVec<Scalar>, kPcLayers> batch_mean;
    std::array<RowVec<Scalar>, kPcLayers> batch_var;
};

template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const Tcpcn<Scalar>& model,
                                          const std::vector<std::vector<CompactCloud<Scalar>>>& batch,
                                          std::span<const int> labels, double l2, Mode mode, std::mt19937_64* rng,
                                          Tcpcn<Scalar>* grad);

/// -sum_q y_q log(max(p_q, 1e-12)) + l2 * sum of squared regularized weights.
template <typename Scalar>
double loss(const Vec<Scalar>& probabilities, const Vec<Scalar>& onehot, const Tcpcn<Scalar>& model, double l2);

template <typename Scalar>
double squared_weight_norm(const Tcpcn<Scalar>& model);

struct GradCheckReport {
    double max_relative_error = 0.0;
    int checked = 0;
    std::vector<std::pair<std::string, double>> per_tensor;  // worst relative error per tensor
};

/// Central finite differences (step h) on `samples` parameters, at least a few from every
/// trainable tensor, compared against the analytic gradient. Rejects modes with dropout.
GradCheckReport grad_check(const Tcpcn<double>& model, const PointCloudSequence& seq, int label, Mode mode,
                           int samples = 256, double h = 1e-4, std::uint64_t seed = 7, double l2 = 0.0);

// --- training ------------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-4;
    double dropout = 0.5;
    double l2 = 1e-4;
    int batch_size = 16;
    int patience = 5;
    int max_epochs = 100;
    double augment_noise = 0.1;
    int n_max = 100;
    std::uint64_t seed = 1;
    /// Training windows drawn per epoch; 0 uses the whole training split.
    int windows_per_epoch = 0;
};

struct LabeledSequence {
    std::vector<std::vector<RadarPoint>> steps;
    int label = 0;
};

struct Dataset {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> validation;
    int classes = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    Tcpcn<float> model;
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Accuracy of argmax predictions over `sequences`, eval mode, with preprocessing seeded by `seed`.
double evaluate_accuracy(const Tcpcn<float>& model, std::span<const LabeledSequence> sequences,
                         std::uint64_t seed = 99);

// --- quantization and serialization ---------------------------------------------------------

struct QuantizedTensor {
    std::vector<std::int8_t> values;
    float scale = 1.0f;
};

/// Per-tensor symmetric 8-bit quantization, scale = max|w| / 127 (1 for an all-zero tensor).
QuantizedTensor quantize_tensor(std::span<const float> values);
std::vector<float> dequantize_tensor(const QuantizedTensor& q);

/// Model with 8-bit linear weights and conv taps; biases and batch-norm state stay float.
class QuantizedTcpcn {
public:
    QuantizedTcpcn() = default;
    explicit QuantizedTcpcn(const Tcpcn<float>& model);

    /// Float model with weights reconstructed from the 8-bit values.
    const Tcpcn<float>& dequantized() const { return dequantized_; }
    const std::vector<std::pair<std::string, QuantizedTensor>>& quantized_tensors() const { return quantized_; }

private:
    std::vector<std::pair<std::string, QuantizedTensor>> quantized_;
    Tcpcn<float> dequantized_;
};

QuantizedTcpcn quantize(const Tcpcn<float>& model);

/// Binary container; see docs/model_format.md.
void save_model(const Tcpcn<float>& model, const std::string& path, bool quantized = false);
Tcpcn<float> load_model(const std::string& path);

/// Stable hash over every tensor's bytes, for determinism checks.
std::uint64_t parameter_hash(const Tcpcn<float>& model);

}  // namespace mmtrack::classifier
