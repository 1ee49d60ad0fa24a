#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "mmtrack/harness.hpp"

namespace mmtrack::harness {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& text) {
    double v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error("not a number: '" + text + "'");
    return v;
}

// Accepts plain numbers and "pi/<number>".
double parse_real(const std::string& text) {
    if (text.rfind("pi/", 0) == 0) {
        const double d = parse_number(text.substr(3));
        if (d == 0) throw Error("division by zero in '" + text + "'");
        return kPi / d;
    }
    if (text == "pi") return kPi;
    return parse_number(text);
}

int parse_int(const std::string& text) {
    const double v = parse_number(text);
    if (v != static_cast<double>(static_cast<int>(v))) throw Error("not an integer: '" + text + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error("not a boolean: '" + text + "'");
}

struct Key {
    std::function<void(pipeline::PipelineConfig&, const std::string&)> set;
    std::function<std::string(const pipeline::PipelineConfig&)> get;
};

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

#define REAL_KEY(name, field) \
    {name, {[](pipeline::PipelineConfig& c, const std::string& v) { c.field = parse_real(v); }, \
            [](const pipeline::PipelineConfig& c) { return fmt(c.field); }}}
#define INT_KEY(name, field) \
    {name, {[](pipeline::PipelineConfig& c, const std::string& v) { c.field = parse_int(v); }, \
            [](const pipeline::PipelineConfig& c) { return std::to_string(c.field); }}}

const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table = {
        REAL_KEY("eps", eps),
        INT_KEY("min_points", min_points),
        REAL_KEY("sigma_a", noise.sigma_a),
        REAL_KEY("sigma_length", noise.sigma_length),
        REAL_KEY("sigma_width", noise.sigma_width),
        REAL_KEY("sigma_orientation", noise.sigma_orientation),
        REAL_KEY("sigma_range", noise.sigma_range),
        REAL_KEY("sigma_azimuth", noise.sigma_azimuth),
        REAL_KEY("sigma_obs_length", noise.sigma_obs_length),
        REAL_KEY("sigma_obs_width", noise.sigma_obs_width),
        REAL_KEY("sigma_obs_orientation", noise.sigma_obs_orientation),
        REAL_KEY("beta", beta),
        REAL_KEY("gamma_min", gamma_min),
        INT_KEY("m", lifecycle.m),
        INT_KEY("n", lifecycle.n),
        INT_KEY("n_max", n_max),
        {"K", {[](pipeline::PipelineConfig& c, const std::string& v) { c.window = c.identify.window = parse_int(v); },
               [](const pipeline::PipelineConfig& c) { return std::to_string(c.window); }}},
        REAL_KEY("rho", identify.rho),
        REAL_KEY("gamma", identify.gamma),
        REAL_KEY("p_conf", identify.p_conf),
        {"frame_rate", {[](pipeline::PipelineConfig& c, const std::string& v) {
                            const double r = parse_real(v);
                            if (!(r > 0)) throw Error("frame_rate must be positive");
                            c.dt = 1.0 / r;
                        },
                        [](const pipeline::PipelineConfig& c) { return fmt(1.0 / c.dt); }}},
        INT_KEY("classes", classes),
        {"classify", {[](pipeline::PipelineConfig& c, const std::string& v) { c.classify = parse_bool(v); },
                      [](const pipeline::PipelineConfig& c) { return std::string(c.classify ? "true" : "false"); }}},
    };
    return table;
}

#undef REAL_KEY
#undef INT_KEY

}  // namespace

pipeline::PipelineConfig parse_config(std::istream& in) {
    pipeline::PipelineConfig cfg;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = keys().find(key);
        if (it == keys().end()) throw Error("config line " + std::to_string(number) + ": unknown key '" + key + "'");
        try {
            it->second.set(cfg, value);
        } catch (const Error& e) {
            throw Error("config line " + std::to_string(number) + ": " + key + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

pipeline::PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    try {
        return parse_config(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

std::string format_config(const pipeline::PipelineConfig& config) {
    std::ostringstream out;
    for (const auto& [name, key] : keys()) out << name << " = " << key.get(config) << '\n';
    return out.str();
}

}  // namespace mmtrack::harness
