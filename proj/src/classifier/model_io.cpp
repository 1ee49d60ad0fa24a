#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mmtrack/classifier.hpp"

namespace mmtrack::classifier {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'T', 'C', 'P', 'C', 'N', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagQuantized = 1;
constexpr std::uint8_t kFloat32 = 0;
constexpr std::uint8_t kInt8 = 1;

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("save_model: cannot open " + path);
    }
    template <typename T>
    void put(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void finish(const std::string& path) {
        out_.flush();
        if (!out_) throw Error("save_model: write failed for " + path);
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw Error("load_model: cannot open " + path);
    }
    template <typename T>
    T get() {
        T v{};
        bytes(&v, sizeof(T));
        return v;
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw Error("load_model: truncated file " + path_);
    }

private:
    std::ifstream in_;
    std::string path_;
};

// Elements are serialized in row-major order regardless of Eigen storage.
template <typename T>
std::vector<float> row_major(const TensorRef<T>& t) {
    std::vector<float> out(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows; ++r)
        for (Eigen::Index c = 0; c < t.cols; ++c)
            out[static_cast<std::size_t>(r * t.cols + c)] = static_cast<float>(t.data[c * t.rows + r]);
    return out;
}

}  // namespace

QuantizedTensor quantize_tensor(std::span<const float> values) {
    QuantizedTensor q;
    float top = 0.0f;
    for (float v : values) {
        if (!std::isfinite(v)) throw Error("quantize: non-finite weight");
        top = std::max(top, std::abs(v));
    }
    q.scale = top > 0 ? top / 127.0f : 1.0f;
    q.values.reserve(values.size());
    for (float v : values) {
        const float r = std::clamp(std::round(v / q.scale), -127.0f, 127.0f);
        q.values.push_back(static_cast<std::int8_t>(r));
    }
    return q;
}

std::vector<float> dequantize_tensor(const QuantizedTensor& q) {
    std::vector<float> out;
    out.reserve(q.values.size());
    for (auto v : q.values) out.push_back(static_cast<float>(v) * q.scale);
    return out;
}

QuantizedTcpcn::QuantizedTcpcn(const Tcpcn<float>& model) : dequantized_(model) {
    for (auto& t : dequantized_.tensors()) {
        if (!t.regularized) continue;
        auto q = quantize_tensor(std::span<const float>(t.data, static_cast<std::size_t>(t.size())));
        const auto back = dequantize_tensor(q);
        std::copy(back.begin(), back.end(), t.data);
        quantized_.emplace_back(t.name, std::move(q));
    }
}

QuantizedTcpcn quantize(const Tcpcn<float>& model) { return QuantizedTcpcn(model); }

void save_model(const Tcpcn<float>& model, const std::string& path, bool quantized) {
    Writer w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.put(kVersion);
    w.put(static_cast<std::uint32_t>(model.classes()));
    w.put(static_cast<std::uint32_t>(model.n_max));
    w.put(quantized ? kFlagQuantized : std::uint32_t{0});
    for (double v : model.standardization.mean) w.put(v);
    for (double v : model.standardization.stddev) w.put(v);
    const auto tensors = model.tensors();
    w.put(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.put(static_cast<std::uint16_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.put(static_cast<std::uint32_t>(t.rows));
        w.put(static_cast<std::uint32_t>(t.cols));
        const auto values = row_major(t);
        if (quantized && t.regularized) {
            const auto q = quantize_tensor(values);
            w.put(kInt8);
            w.put(q.scale);
            w.bytes(q.values.data(), q.values.size());
        } else {
            w.put(kFloat32);
            w.bytes(values.data(), values.size() * sizeof(float));
        }
    }
    w.finish(path);
}

Tcpcn<float> load_model(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error("load_model: bad magic in " + path);
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw Error("load_model: unsupported version " + std::to_string(version));
    const auto classes = r.get<std::uint32_t>();
    const auto n_max = r.get<std::uint32_t>();
    r.get<std::uint32_t>();  // flags
    if (classes < 1 || classes > 4096) throw Error("load_model: implausible class count");
    Tcpcn<float> model(static_cast<int>(classes));
    model.n_max = static_cast<int>(n_max);
    for (double& v : model.standardization.mean) v = r.get<double>();
    for (double& v : model.standardization.stddev) v = r.get<double>();

    auto tensors = model.tensors();
    const auto count = r.get<std::uint32_t>();
    if (count != tensors.size())
        throw Error("load_model: expected " + std::to_string(tensors.size()) + " tensors, file has " +
                    std::to_string(count));
    for (auto& t : tensors) {
        const auto len = r.get<std::uint16_t>();
        std::string name(len, '\0');
        r.bytes(name.data(), len);
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (name != t.name || rows != t.rows || cols != t.cols)
            throw Error("load_model: tensor '" + name + "' " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not match expected '" + t.name + "' " + std::to_string(t.rows) + "x" +
                        std::to_string(t.cols));
        const auto dtype = r.get<std::uint8_t>();
        std::vector<float> values(static_cast<std::size_t>(t.size()));
        if (dtype == kFloat32) {
            r.bytes(values.data(), values.size() * sizeof(float));
        } else if (dtype == kInt8) {
            QuantizedTensor q;
            q.scale = r.get<float>();
            q.values.resize(values.size());
            r.bytes(q.values.data(), q.values.size());
            values = dequantize_tensor(q);
        } else {
            throw Error("load_model: unknown dtype for tensor " + name);
        }
        for (Eigen::Index row = 0; row < t.rows; ++row)
            for (Eigen::Index col = 0; col < t.cols; ++col)
                t.data[col * t.rows + row] = values[static_cast<std::size_t>(row * t.cols + col)];
    }
    return model;
}

std::uint64_t parameter_hash(const Tcpcn<float>& model) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : model.tensors()) {
        const auto* p = reinterpret_cast<const unsigned char*>(t.data);
        for (std::size_t i = 0; i < static_cast<std::size_t>(t.size()) * sizeof(float); ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace mmtrack::classifier
