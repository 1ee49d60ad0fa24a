#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmtrack/classifier.hpp"

namespace mmtrack::classifier {

int PointCloudSequence::present_steps() const {
    return static_cast<int>(std::count(missing.begin(), missing.end(), false));
}

template <typename Scalar>
CompactCloud<Scalar> compact(const StepMatrix& step) {
    const auto n = step.rows();
    if (n == 0) throw Error("compact: empty step");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](Eigen::Index a, Eigen::Index b) {
        for (int f = 0; f < kPointFeatures; ++f) {
            if (step(a, f) != step(b, f)) return step(a, f) < step(b, f);
        }
        return false;
    };
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return less(a, b) || (!less(b, a) && a < b); });

    std::vector<Eigen::Index> unique;
    std::vector<int> counts;
    for (auto i : order) {
        if (!unique.empty() && !less(unique.back(), i) && !less(i, unique.back())) {
            ++counts.back();
        } else {
            unique.push_back(i);
            counts.push_back(1);
        }
    }
    CompactCloud<Scalar> out;
    out.rows.resize(static_cast<Eigen::Index>(unique.size()), kPointFeatures);
    out.weights.resize(static_cast<Eigen::Index>(unique.size()));
    for (std::size_t u = 0; u < unique.size(); ++u) {
        const auto r = static_cast<Eigen::Index>(u);
        out.rows.row(r) = step.row(unique[u]).template cast<Scalar>();
        out.weights(r) = static_cast<Scalar>(counts[u]) / static_cast<Scalar>(n);
    }
    return out;
}

template <typename Scalar>
Mat<Scalar> dilated_causal_conv(const Mat<Scalar>& input, const ConvLayer<Scalar>& layer) {
    const auto t = input.rows();
    const auto out_ch = layer.bias.cols();
    if (input.cols() != layer.taps[0].rows()) throw Error("dilated_causal_conv: channel mismatch");
    Mat<Scalar> out = layer.bias.replicate(t, 1);
    for (int j = 0; j < kKernel; ++j) {
        const auto offset = static_cast<Eigen::Index>(layer.dilation) * (kKernel - 1 - j);
        if (offset >= t) continue;
        out.bottomRows(t - offset).noalias() += input.topRows(t - offset) * layer.taps[j];
    }
    (void)out_ch;
    return out;
}

namespace {

template <typename Scalar>
void elu_inplace(Mat<Scalar>& m) {
    m = m.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : std::expm1(v); });
}

// dL/dY from dL/dH where H = elu(Y); elu'(y) = 1 for y > 0, elu(y) + 1 otherwise.
template <typename Scalar>
Mat<Scalar> elu_backward(const Mat<Scalar>& grad_out, const Mat<Scalar>& activated) {
    return grad_out.binaryExpr(activated, [](Scalar g, Scalar h) { return h > Scalar(0) ? g : g * (h + Scalar(1)); });
}

template <typename Scalar>
Mat<Scalar> glorot(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Mat<Scalar> m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = static_cast<Scalar>(u(rng));
    return m;
}

template <typename Scalar>
struct PcCache {
    Mat<Scalar> x0;
    Vec<Scalar> w;
    std::vector<Eigen::Index> step_row;  // row offsets, one past the last step at the end
    std::array<Mat<Scalar>, kPcLayers> xhat;
    std::array<Mat<Scalar>, kPcLayers> h;
    std::array<RowVec<Scalar>, kPcLayers> mean;
    std::array<RowVec<Scalar>, kPcLayers> var;
    std::array<RowVec<Scalar>, kPcLayers> inv_std;
    Mat<Scalar> pooled;   // steps x feature
    Mat<Scalar> mask;     // dropout multipliers, empty when dropout is off
    Mat<Scalar> dropped;  // pooled * mask
};

template <typename Scalar>
struct TcCache {
    std::array<Mat<Scalar>, kTcLayers + 1> input;  // inputs to each conv, the head last
    std::array<Mat<Scalar>, kTcLayers> output;     // post-activation outputs
};

template <typename Scalar>
struct BatchCache {
    PcCache<Scalar> pc;
    std::vector<Eigen::Index> seq_step;  // step offsets per sequence
    std::vector<TcCache<Scalar>> tc;
    std::vector<Output<Scalar>> outputs;
};

template <typename Scalar>
void pc_forward(const Tcpcn<Scalar>& model, const std::vector<const CompactCloud<Scalar>*>& clouds, Mode mode,
                std::mt19937_64* rng, PcCache<Scalar>& cache) {
    Eigen::Index rows = 0;
    cache.step_row.assign(1, 0);
    for (const auto* c : clouds) {
        rows += c->rows.rows();
        cache.step_row.push_back(rows);
    }
    cache.x0.resize(rows, kPointFeatures);
    cache.w.resize(rows);
    for (std::size_t s = 0; s < clouds.size(); ++s) {
        const auto r0 = cache.step_row[s];
        const auto n = clouds[s]->rows.rows();
        cache.x0.middleRows(r0, n) = clouds[s]->rows;
        cache.w.segment(r0, n) = clouds[s]->weights;
    }
    const Scalar total_weight = cache.w.sum();

    for (int l = 0; l < kPcLayers; ++l) {
        const Mat<Scalar>& in = l == 0 ? cache.x0 : cache.h[l - 1];
        Mat<Scalar> a = in * model.pc[l].weight;
        a.rowwise() += model.pc[l].bias;
        const auto& norm = model.bn[l];
        if (mode.batch_stats) {
            cache.mean[l] = (cache.w.transpose() * a) / total_weight;
            a.rowwise() -= cache.mean[l];
            cache.var[l] = (cache.w.transpose() * a.array().square().matrix()) / total_weight;
        } else {
            cache.mean[l] = norm.running_mean;
            cache.var[l] = norm.running_var;
            a.rowwise() -= cache.mean[l];
        }
        cache.inv_std[l] = (cache.var[l].array() + Scalar(kBatchNormEps)).rsqrt().matrix();
        a.array().rowwise() *= cache.inv_std[l].array();
        cache.xhat[l] = a;
        Mat<Scalar> y = a.array().rowwise() * norm.gamma.array();
        y.rowwise() += norm.beta;
        elu_inplace(y);
        cache.h[l] = std::move(y);
    }

    const auto steps = static_cast<Eigen::Index>(clouds.size());
    cache.pooled.resize(steps, kFeatureDim);
    for (Eigen::Index s = 0; s < steps; ++s) {
        const auto r0 = cache.step_row[static_cast<std::size_t>(s)];
        const auto n = cache.step_row[static_cast<std::size_t>(s) + 1] - r0;
        cache.pooled.row(s).noalias() = cache.w.segment(r0, n).transpose() * cache.h[kPcLayers - 1].middleRows(r0, n);
    }
    if (mode.dropout && model.dropout_rate > 0) {
        if (rng == nullptr) throw Error("tcpcn: dropout requires an rng");
        const double keep = 1.0 - model.dropout_rate;
        std::bernoulli_distribution draw(keep);
        cache.mask.resize(steps, kFeatureDim);
        for (Eigen::Index c = 0; c < kFeatureDim; ++c)
            for (Eigen::Index s = 0; s < steps; ++s)
                cache.mask(s, c) = draw(*rng) ? static_cast<Scalar>(1.0 / keep) : Scalar(0);
        cache.dropped = cache.pooled.cwiseProduct(cache.mask);
    } else {
        cache.mask.resize(0, 0);
        cache.dropped = cache.pooled;
    }
}

template <typename Scalar>
Output<Scalar> tc_forward(const Tcpcn<Scalar>& model, const Mat<Scalar>& features, TcCache<Scalar>* cache) {
    if (features.rows() == 0) throw Error("tcpcn: sequence has no present steps");
    Mat<Scalar> x = features;
    for (int l = 0; l < kTcLayers; ++l) {
        if (cache) cache->input[l] = x;
        Mat<Scalar> y = dilated_causal_conv(x, model.tc[l]);
        elu_inplace(y);
        if (cache) cache->output[l] = y;
        x = std::move(y);
    }
    if (cache) cache->input[kTcLayers] = x;
    Output<Scalar> out;
    out.head_activations = dilated_causal_conv(x, model.head);
    out.logits = out.head_activations.colwise().mean().transpose();
    const Scalar top = out.logits.maxCoeff();
    Vec<Scalar> e = (out.logits.array() - top).exp().matrix();
    out.probabilities = e / e.sum();
    return out;
}

template <typename Scalar>
std::vector<const CompactCloud<Scalar>*> flatten(const std::vector<std::vector<CompactCloud<Scalar>>>& batch,
                                                 std::vector<Eigen::Index>& seq_step) {
    std::vector<const CompactCloud<Scalar>*> clouds;
    seq_step.assign(1, 0);
    for (const auto& seq : batch) {
        if (seq.empty()) throw Error("tcpcn: sequence has no present steps");
        for (const auto& c : seq) clouds.push_back(&c);
        seq_step.push_back(static_cast<Eigen::Index>(clouds.size()));
    }
    return clouds;
}

template <typename Scalar>
void run_batch(const Tcpcn<Scalar>& model, const std::vector<std::vector<CompactCloud<Scalar>>>& batch, Mode mode,
               std::mt19937_64* rng, BatchCache<Scalar>& cache, bool keep_tc) {
    const auto clouds = flatten(batch, cache.seq_step);
    pc_forward(model, clouds, mode, rng, cache.pc);
    cache.outputs.clear();
    cache.tc.assign(keep_tc ? batch.size() : 0, {});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto s0 = cache.seq_step[b];
        const auto n = cache.seq_step[b + 1] - s0;
        const Mat<Scalar> features = cache.pc.dropped.middleRows(s0, n);
        cache.outputs.push_back(tc_forward(model, features, keep_tc ? &cache.tc[b] : nullptr));
    }
}

// Accumulates the gradient of a causal conv; returns dL/d(input).
template <typename Scalar>
Mat<Scalar> conv_backward(const Mat<Scalar>& input, const Mat<Scalar>& grad_out, const ConvLayer<Scalar>& layer,
                          ConvLayer<Scalar>& grad) {
    const auto t = input.rows();
    Mat<Scalar> grad_in = Mat<Scalar>::Zero(t, input.cols());
    grad.bias += grad_out.colwise().sum();
    for (int j = 0; j < kKernel; ++j) {
        const auto offset = static_cast<Eigen::Index>(layer.dilation) * (kKernel - 1 - j);
        if (offset >= t) continue;
        grad.taps[j].noalias() += input.topRows(t - offset).transpose() * grad_out.bottomRows(t - offset);
        grad_in.topRows(t - offset).noalias() += grad_out.bottomRows(t - offset) * layer.taps[j].transpose();
    }
    return grad_in;
}

}  // namespace

template <typename Scalar>
Tcpcn<Scalar>::Tcpcn(int classes) : classes_(classes) {
    if (classes < 1) throw Error("tcpcn: need at least one class");
    for (int l = 0; l < kPcLayers; ++l) {
        pc[l].weight = Mat<Scalar>::Zero(kPcWidths[l], kPcWidths[l + 1]);
        pc[l].bias = RowVec<Scalar>::Zero(kPcWidths[l + 1]);
        bn[l].gamma = RowVec<Scalar>::Ones(kPcWidths[l + 1]);
        bn[l].beta = RowVec<Scalar>::Zero(kPcWidths[l + 1]);
        bn[l].running_mean = RowVec<Scalar>::Zero(kPcWidths[l + 1]);
        bn[l].running_var = RowVec<Scalar>::Ones(kPcWidths[l + 1]);
    }
    for (int l = 0; l < kTcLayers; ++l) {
        for (auto& tap : tc[l].taps) tap = Mat<Scalar>::Zero(kTcWidths[l], kTcWidths[l + 1]);
        tc[l].bias = RowVec<Scalar>::Zero(kTcWidths[l + 1]);
        tc[l].dilation = kTcDilations[l];
    }
    for (auto& tap : head.taps) tap = Mat<Scalar>::Zero(kTcWidths.back(), classes);
    head.bias = RowVec<Scalar>::Zero(classes);
    head.dilation = 1;
}

template <typename Scalar>
Tcpcn<Scalar> Tcpcn<Scalar>::random(int classes, std::uint64_t seed) {
    Tcpcn m(classes);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < kPcLayers; ++l)
        m.pc[l].weight = glorot<Scalar>(kPcWidths[l], kPcWidths[l + 1], kPcWidths[l], kPcWidths[l + 1], rng);
    auto init_conv = [&](ConvLayer<Scalar>& c) {
        const double fan_in = kKernel * static_cast<double>(c.taps[0].rows());
        const double fan_out = kKernel * static_cast<double>(c.taps[0].cols());
        for (auto& tap : c.taps) tap = glorot<Scalar>(tap.rows(), tap.cols(), fan_in, fan_out, rng);
    };
    for (auto& c : m.tc) init_conv(c);
    init_conv(m.head);
    return m;
}

template <typename Scalar>
template <typename S, typename Self>
std::vector<TensorRef<S>> Tcpcn<Scalar>::collect(Self& self) {
    std::vector<TensorRef<S>> out;
    auto add = [&](std::string name, auto& m, bool trainable, bool regularized) {
        out.push_back({std::move(name), m.data(), m.rows(), m.cols(), trainable, regularized});
    };
    for (int l = 0; l < kPcLayers; ++l) {
        const std::string p = "pc" + std::to_string(l);
        add(p + ".weight", self.pc[l].weight, true, true);
        add(p + ".bias", self.pc[l].bias, true, false);
        add(p + ".bn.gamma", self.bn[l].gamma, true, false);
        add(p + ".bn.beta", self.bn[l].beta, true, false);
        add(p + ".bn.running_mean", self.bn[l].running_mean, false, false);
        add(p + ".bn.running_var", self.bn[l].running_var, false, false);
    }
    auto add_conv = [&](const std::string& p, auto& c) {
        for (int j = 0; j < kKernel; ++j) add(p + ".tap" + std::to_string(j), c.taps[j], true, true);
        add(p + ".bias", c.bias, true, false);
    };
    for (int l = 0; l < kTcLayers; ++l) add_conv("tc" + std::to_string(l), self.tc[l]);
    add_conv("head", self.head);
    return out;
}

template <typename Scalar>
std::vector<TensorRef<Scalar>> Tcpcn<Scalar>::tensors() {
    return collect<Scalar>(*this);
}

template <typename Scalar>
std::vector<TensorRef<const Scalar>> Tcpcn<Scalar>::tensors() const {
    return collect<const Scalar>(*this);
}

template <typename Scalar>
std::size_t Tcpcn<Scalar>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors())
        if (t.trainable) n += static_cast<std::size_t>(t.size());
    return n;
}

template <typename Scalar>
template <typename Other>
Tcpcn<Other> Tcpcn<Scalar>::cast() const {
    Tcpcn<Other> out(classes_);
    out.standardization = standardization;
    out.n_max = n_max;
    out.dropout_rate = dropout_rate;
    auto src = tensors();
    auto dst = out.tensors();
    for (std::size_t i = 0; i < src.size(); ++i)
        for (Eigen::Index e = 0; e < src[i].size(); ++e) dst[i].data[e] = static_cast<Other>(src[i].data[e]);
    return out;
}

template <typename Scalar>
Tcpcn<Scalar> Tcpcn<Scalar>::zeros_like() const {
    Tcpcn out(classes_);
    for (auto& t : out.tensors()) std::fill(t.data, t.data + t.size(), Scalar(0));
    return out;
}

template <typename Scalar>
Vec<Scalar> pc_block(const Tcpcn<Scalar>& model, const CompactCloud<Scalar>& cloud) {
    PcCache<Scalar> cache;
    pc_forward(model, {&cloud}, Mode::eval(), nullptr, cache);
    return cache.pooled.row(0).transpose();
}

template <typename Scalar>
Output<Scalar> temporal_block(const Tcpcn<Scalar>& model, const Mat<Scalar>& features) {
    if (features.cols() != kFeatureDim) throw Error("temporal_block: feature width mismatch");
    return tc_forward<Scalar>(model, features, nullptr);
}

template <typename Scalar>
std::vector<Output<Scalar>> forward_batch(const Tcpcn<Scalar>& model,
                                          const std::vector<std::vector<CompactCloud<Scalar>>>& batch, Mode mode,
                                          std::mt19937_64* rng) {
    BatchCache<Scalar> cache;
    run_batch(model, batch, mode, rng, cache, false);
    return std::move(cache.outputs);
}

template <typename Scalar>
Output<Scalar> forward(const Tcpcn<Scalar>& model, const PointCloudSequence& seq, Mode mode, std::mt19937_64* rng) {
    std::vector<std::vector<CompactCloud<Scalar>>> batch(1);
    for (std::size_t s = 0; s < seq.steps.size(); ++s)
        if (s >= seq.missing.size() || !seq.missing[s]) batch[0].push_back(compact<Scalar>(seq.steps[s]));
    return forward_batch(model, batch, mode, rng).front();
}

template <typename Scalar>
double squared_weight_norm(const Tcpcn<Scalar>& model) {
    double sum = 0.0;
    for (const auto& t : model.tensors()) {
        if (!t.regularized) continue;
        for (Eigen::Index e = 0; e < t.size(); ++e) sum += static_cast<double>(t.data[e]) * static_cast<double>(t.data[e]);
    }
    return sum;
}

template <typename Scalar>
double loss(const Vec<Scalar>& probabilities, const Vec<Scalar>& onehot, const Tcpcn<Scalar>& model, double l2) {
    double ce = 0.0;
    for (Eigen::Index q = 0; q < probabilities.size(); ++q)
        ce -= static_cast<double>(onehot(q)) * std::log(std::max(static_cast<double>(probabilities(q)), 1e-12));
    return ce + l2 * squared_weight_norm(model);
}

template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const Tcpcn<Scalar>& model,
                                          const std::vector<std::vector<CompactCloud<Scalar>>>& batch,
                                          std::span<const int> labels, double l2, Mode mode, std::mt19937_64* rng,
                                          Tcpcn<Scalar>* grad) {
    if (labels.size() != batch.size()) throw Error("loss_and_gradient: label count mismatch");
    if (batch.empty()) throw Error("loss_and_gradient: empty batch");
    BatchCache<Scalar> cache;
    run_batch(model, batch, mode, rng, cache, grad != nullptr);

    LossAndGradient<Scalar> result;
    const auto count = static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& p = cache.outputs[b].probabilities;
        const int label = labels[b];
        if (label < 0 || label >= model.classes()) throw Error("loss_and_gradient: label out of range");
        result.cross_entropy -= std::log(std::max(static_cast<double>(p(label)), 1e-12));
        Eigen::Index arg = 0;
        p.maxCoeff(&arg);
        if (arg == label) ++result.correct;
    }
    result.cross_entropy /= count;
    result.loss = result.cross_entropy + l2 * squared_weight_norm(model);
    if (mode.batch_stats) {
        result.batch_mean = cache.pc.mean;
        result.batch_var = cache.pc.var;
    }
    if (grad == nullptr) return result;

    *grad = model.zeros_like();
    auto& pc = cache.pc;
    Mat<Scalar> d_dropped = Mat<Scalar>::Zero(pc.dropped.rows(), pc.dropped.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& out = cache.outputs[b];
        const auto& tc = cache.tc[b];
        Vec<Scalar> d_logits = out.probabilities;
        d_logits(labels[b]) -= Scalar(1);
        d_logits /= static_cast<Scalar>(count);
        const auto t = out.head_activations.rows();
        const Mat<Scalar> d_head = (d_logits.transpose() / static_cast<Scalar>(t)).replicate(t, 1);
        Mat<Scalar> d = conv_backward(tc.input[kTcLayers], d_head, model.head, grad->head);
        for (int l = kTcLayers - 1; l >= 0; --l) {
            const Mat<Scalar> dy = elu_backward(d, tc.output[l]);
            d = conv_backward(tc.input[l], dy, model.tc[l], grad->tc[l]);
        }
        d_dropped.middleRows(cache.seq_step[b], t) = d;
    }
    const Mat<Scalar> d_pooled = pc.mask.size() ? Mat<Scalar>(d_dropped.cwiseProduct(pc.mask)) : d_dropped;

    const Scalar total_weight = pc.w.sum();
    Mat<Scalar> d_h(pc.x0.rows(), kFeatureDim);
    for (Eigen::Index s = 0; s + 1 < static_cast<Eigen::Index>(pc.step_row.size()); ++s) {
        const auto r0 = pc.step_row[static_cast<std::size_t>(s)];
        const auto n = pc.step_row[static_cast<std::size_t>(s) + 1] - r0;
        d_h.middleRows(r0, n).noalias() = pc.w.segment(r0, n) * d_pooled.row(s);
    }
    for (int l = kPcLayers - 1; l >= 0; --l) {
        const Mat<Scalar> dy = elu_backward(d_h, pc.h[l]);
        grad->bn[l].gamma += dy.cwiseProduct(pc.xhat[l]).colwise().sum();
        grad->bn[l].beta += dy.colwise().sum();
        Mat<Scalar> d_xhat = dy.array().rowwise() * model.bn[l].gamma.array();
        Mat<Scalar> d_a;
        if (mode.batch_stats) {
            // Weighted statistics: each row stands for weight-proportional copies of itself.
            const RowVec<Scalar> sum_g = d_xhat.colwise().sum() / total_weight;
            const RowVec<Scalar> sum_gx = d_xhat.cwiseProduct(pc.xhat[l]).colwise().sum() / total_weight;
            d_a = d_xhat;
            d_a -= pc.w * sum_g;
            d_a.array() -= pc.xhat[l].array().colwise() * pc.w.array() * sum_gx.array().replicate(pc.w.size(), 1);
        } else {
            d_a = d_xhat;
        }
        d_a.array().rowwise() *= pc.inv_std[l].array();
        const Mat<Scalar>& in = l == 0 ? pc.x0 : pc.h[l - 1];
        grad->pc[l].weight.noalias() += in.transpose() * d_a;
        grad->pc[l].bias += d_a.colwise().sum();
        if (l > 0) d_h.noalias() = d_a * model.pc[l].weight.transpose();
    }

    if (l2 > 0) {
        auto src = model.tensors();
        auto dst = grad->tensors();
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (!src[i].regularized) continue;
            for (Eigen::Index e = 0; e < src[i].size(); ++e)
                dst[i].data[e] += static_cast<Scalar>(2.0 * l2) * src[i].data[e];
        }
    }
    return result;
}

GradCheckReport grad_check(const Tcpcn<double>& model, const PointCloudSequence& seq, int label, Mode mode,
                           int samples, double h, std::uint64_t seed, double l2) {
    if (mode.dropout) throw Error("grad_check: dropout makes the loss stochastic; disable it");
    std::vector<std::vector<CompactCloud<double>>> batch(1);
    for (std::size_t s = 0; s < seq.steps.size(); ++s)
        if (s >= seq.missing.size() || !seq.missing[s]) batch[0].push_back(compact<double>(seq.steps[s]));
    const std::vector<int> labels{label};

    Tcpcn<double> grad;
    loss_and_gradient<double>(model, batch, labels, l2, mode, nullptr, &grad);

    Tcpcn<double> probe = model;
    auto probe_tensors = probe.tensors();
    const auto grad_tensors = grad.tensors();
    auto eval_loss = [&]() {
        return loss_and_gradient<double>(probe, batch, labels, l2, mode, nullptr, nullptr).loss;
    };

    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, Eigen::Index>> picks;
    std::vector<std::pair<std::size_t, Eigen::Index>> all;
    for (std::size_t i = 0; i < probe_tensors.size(); ++i) {
        if (!probe_tensors[i].trainable) continue;
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(probe_tensors[i].size()));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t take = std::min<std::size_t>(idx.size(), 4);
        for (std::size_t k = 0; k < idx.size(); ++k) (k < take ? picks : all).emplace_back(i, idx[k]);
    }
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t k = 0; static_cast<int>(picks.size()) < samples && k < all.size(); ++k) picks.push_back(all[k]);

    GradCheckReport report;
    std::vector<double> worst(probe_tensors.size(), 0.0);
    for (const auto& [i, e] : picks) {
        double& param = probe_tensors[i].data[e];
        const double saved = param;
        param = saved + h;
        const double up = eval_loss();
        param = saved - h;
        const double down = eval_loss();
        param = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = grad_tensors[i].data[e];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
        const double rel = std::abs(numeric - analytic) / denom;
        worst[i] = std::max(worst[i], rel);
        report.max_relative_error = std::max(report.max_relative_error, rel);
        ++report.checked;
    }
    for (std::size_t i = 0; i < probe_tensors.size(); ++i)
        if (probe_tensors[i].trainable) report.per_tensor.emplace_back(probe_tensors[i].name, worst[i]);
    return report;
}

#define MMTRACK_INSTANTIATE(S)                                                                                    \
    template class Tcpcn<S>;                                                                                      \
    template CompactCloud<S> compact<S>(const StepMatrix&);                                                       \
    template Mat<S> dilated_causal_conv<S>(const Mat<S>&, const ConvLayer<S>&);                                   \
    template Vec<S> pc_block<S>(const Tcpcn<S>&, const CompactCloud<S>&);                                         \
    template Output<S> temporal_block<S>(const Tcpcn<S>&, const Mat<S>&);                                         \
    template Output<S> forward<S>(const Tcpcn<S>&, const PointCloudSequence&, Mode, std::mt19937_64*);            \
    template std::vector<Output<S>> forward_batch<S>(const Tcpcn<S>&,                                             \
                                                     const std::vector<std::vector<CompactCloud<S>>>&, Mode,      \
                                                     std::mt19937_64*);                                           \
    template LossAndGradient<S> loss_and_gradient<S>(const Tcpcn<S>&,                                             \
                                                     const std::vector<std::vector<CompactCloud<S>>>&,            \
                                                     std::span<const int>, double, Mode, std::mt19937_64*,        \
                                                     Tcpcn<S>*);                                                  \
    template double loss<S>(const Vec<S>&, const Vec<S>&, const Tcpcn<S>&, double);                               \
    template double squared_weight_norm<S>(const Tcpcn<S>&);

MMTRACK_INSTANTIATE(float)
MMTRACK_INSTANTIATE(double)
#undef MMTRACK_INSTANTIATE

template Tcpcn<double> Tcpcn<float>::cast<double>() const;
template Tcpcn<float> Tcpcn<double>::cast<float>() const;
template Tcpcn<float> Tcpcn<float>::cast<float>() const;
template Tcpcn<double> Tcpcn<double>::cast<double>() const;

}  // namespace mmtrack::classifier
