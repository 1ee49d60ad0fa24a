#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mmtrack/harness.hpp"

namespace mmtrack::harness {

namespace {

using nlohmann::json;

constexpr const char* kFramesFormat = "mmtrack-frames";
constexpr const char* kReportFormat = "mmtrack-report";
constexpr int kVersion = 1;

void check_header(const std::string& line, const char* format) {
    json h;
    try {
        h = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(std::string("line 1: malformed header: ") + e.what());
    }
    if (!h.is_object() || h.value("format", "") != format)
        throw Error(std::string("line 1: expected a '") + format + "' header");
    if (h.value("version", -1) != kVersion)
        throw Error("line 1: unsupported version " + h.value("version", json()).dump());
}

json vec(const Vector7d& v) {
    json a = json::array();
    for (int i = 0; i < 7; ++i) a.push_back(v(i));
    return a;
}

Vector7d vec7(const json& a) {
    if (!a.is_array() || a.size() != 7) throw Error("expected a 7-element array");
    Vector7d v;
    for (int i = 0; i < 7; ++i) v(i) = a[static_cast<std::size_t>(i)].get<double>();
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return in;
}

}  // namespace

void write_frames(std::ostream& out, std::span<const FrameRecord> frames) {
    out << json{{"format", kFramesFormat}, {"version", kVersion}}.dump() << '\n';
    for (const auto& r : frames) {
        json pts = json::array();
        for (const auto& p : r.frame.points) pts.push_back({p.x, p.y, p.z, p.v, p.power});
        json rec{{"k", r.frame.k}, {"points", std::move(pts)}};
        if (!r.truth.empty()) {
            json gt = json::array();
            for (const auto& g : r.truth) gt.push_back({{"subject", g.subject}, {"x", g.x}, {"y", g.y}});
            rec["gt"] = std::move(gt);
        }
        out << rec.dump() << '\n';
    }
    if (!out) throw Error("write_frames: stream error");
}

void write_frames(const std::string& path, std::span<const FrameRecord> frames) {
    auto out = open_out(path);
    write_frames(out, frames);
}

std::vector<FrameRecord> read_frames(std::istream& in) {
    std::vector<FrameRecord> out;
    std::string line;
    if (!std::getline(in, line)) return out;
    check_header(line, kFramesFormat);
    long number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            const json rec = json::parse(line);
            FrameRecord r;
            r.frame.k = rec.at("k").get<std::int64_t>();
            for (const auto& p : rec.at("points")) {
                if (!p.is_array() || p.size() != 5) throw Error("point must have 5 components");
                r.frame.points.push_back(
                    {p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>(), p[4].get<double>()});
            }
            if (rec.contains("gt"))
                for (const auto& g : rec.at("gt"))
                    r.truth.push_back({g.at("subject").get<int>(), g.at("x").get<double>(), g.at("y").get<double>()});
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw Error("line " + std::to_string(number) + ": malformed frame record: " + e.what());
        }
    }
    return out;
}

std::vector<FrameRecord> read_frames(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_frames(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

std::vector<FrameRecord> to_records(const std::vector<sim::SimFrame>& frames) {
    std::vector<FrameRecord> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back({f.frame, f.truth});
    return out;
}

void write_reports(std::ostream& out, std::span<const pipeline::FrameReport> reports,
                   const pipeline::PipelineConfig& config) {
    json cfg = json::object();
    std::istringstream text(format_config(config));
    std::string line;
    while (std::getline(text, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    out << json{{"format", kReportFormat}, {"version", kVersion}, {"config", cfg}}.dump() << '\n';
    for (const auto& r : reports) {
        json tracks = json::array();
        for (const auto& t : r.tracks) {
            tracks.push_back({{"id", t.id},
                              {"identity", t.identity},
                              {"x", vec(t.x)},
                              {"p_diag", vec(t.p_diag)},
                              {"ellipse", {t.x(4), t.x(5), t.x(6)}},
                              {"classified", t.classified}});
        }
        json respawns = json::array();
        for (const auto& s : r.respawns) respawns.push_back({s.old_id, s.new_id, s.label});
        out << json{{"k", r.k},
                    {"tracks", std::move(tracks)},
                    {"t_tracking_ms", r.tracking_ms},
                    {"t_inference_ms", r.inference_ms},
                    {"respawns", std::move(respawns)}}
                   .dump()
            << '\n';
    }
    if (!out) throw Error("write_reports: stream error");
}

void write_reports(const std::string& path, std::span<const pipeline::FrameReport> reports,
                   const pipeline::PipelineConfig& config) {
    auto out = open_out(path);
    write_reports(out, reports, config);
}

std::vector<pipeline::FrameReport> read_reports(std::istream& in, std::map<std::string, std::string>* header_config) {
    std::vector<pipeline::FrameReport> out;
    std::string line;
    if (!std::getline(in, line)) return out;
    check_header(line, kReportFormat);
    if (header_config) {
        const json h = json::parse(line);
        if (h.contains("config") && h["config"].is_object())
            for (const auto& [key, value] : h["config"].items())
                (*header_config)[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    long number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            const json rec = json::parse(line);
            pipeline::FrameReport r;
            r.k = rec.at("k").get<std::int64_t>();
            r.tracking_ms = rec.value("t_tracking_ms", 0.0);
            r.inference_ms = rec.value("t_inference_ms", 0.0);
            for (const auto& t : rec.at("tracks")) {
                pipeline::TrackReport tr;
                tr.id = t.at("id").get<std::int64_t>();
                tr.identity = t.at("identity").get<int>();
                tr.x = vec7(t.at("x"));
                tr.p_diag = vec7(t.at("p_diag"));
                tr.classified = t.value("classified", false);
                r.tracks.push_back(tr);
            }
            if (rec.contains("respawns"))
                for (const auto& s : rec.at("respawns"))
                    r.respawns.push_back({s.at(0).get<std::int64_t>(), s.at(1).get<std::int64_t>(), s.at(2).get<int>()});
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw Error("line " + std::to_string(number) + ": malformed report record: " + e.what());
        }
    }
    return out;
}

std::vector<pipeline::FrameReport> read_reports(const std::string& path,
                                                std::map<std::string, std::string>* header_config) {
    auto in = open_in(path);
    try {
        return read_reports(in, header_config);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

sim::Scenario parse_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("scenario: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("scenario: expected a JSON object");
    static const std::vector<std::string> known = {"profiles", "frames", "seed",     "blockage",    "ghost_rate",
                                                   "dt",       "arena",  "waypoints", "use_frontend"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Error("scenario: unknown key '" + key + "'");
    sim::Scenario sc;
    try {
        const json& p = j.at("profiles");
        if (p.is_number_integer()) {
            sc.profiles = sim::default_profiles(p.get<int>());
        } else if (p.is_array()) {
            const auto defaults = sim::default_profiles(8);
            for (const auto& e : p) {
                if (e.is_number_integer()) {
                    const int idx = e.get<int>();
                    if (idx < 0 || idx >= 8) throw Error("default profile index out of range");
                    sc.profiles.push_back(defaults[static_cast<std::size_t>(idx)]);
                } else {
                    sim::GaitProfile g;
                    g.subject = e.at("subject").get<int>();
                    g.speed = e.value("speed", g.speed);
                    g.stride_frequency = e.value("stride_frequency", g.stride_frequency);
                    g.limb_amplitude = e.value("limb_amplitude", g.limb_amplitude);
                    g.length = e.value("length", g.length);
                    g.width = e.value("width", g.width);
                    g.points_at_1m = e.value("points_at_1m", g.points_at_1m);
                    g.exponent = e.value("exponent", g.exponent);
                    g.height = e.value("height", g.height);
                    sc.profiles.push_back(g);
                }
            }
        } else {
            throw Error("'profiles' must be a count or a list");
        }
        sc.frames = j.value("frames", sc.frames);
        sc.seed = j.value("seed", sc.seed);
        sc.blockage = j.value("blockage", sc.blockage);
        sc.ghost_rate = j.value("ghost_rate", sc.ghost_rate);
        sc.dt = j.value("dt", sc.dt);
        sc.use_frontend = j.value("use_frontend", sc.use_frontend);
        if (j.contains("arena")) {
            const auto a = j.at("arena").get<std::vector<double>>();
            if (a.size() != 4) throw Error("'arena' needs [x_min, x_max, y_min, y_max]");
            sc.arena = {a[0], a[1], a[2], a[3]};
        }
        if (j.contains("waypoints")) {
            for (const auto& path : j.at("waypoints")) {
                std::vector<Vector2d> pts;
                for (const auto& w : path) pts.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
                sc.waypoints.push_back(std::move(pts));
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("scenario: ") + e.what());
    } catch (const Error& e) {
        throw Error(std::string("scenario: ") + e.what());
    }
    sc.validate();
    return sc;
}

sim::Scenario load_scenario(const std::string& path) {
    auto in = open_in(path);
    std::stringstream text;
    text << in.rdbuf();
    try {
        return parse_scenario(text.str());
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

}  // namespace mmtrack::harness
