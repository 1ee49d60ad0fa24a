#include <cmath>
#include <map>
#include <set>

#include "mmtrack/association.hpp"
#include "mmtrack/harness.hpp"

namespace mmtrack::harness {

std::vector<EvalFrame> align(std::span<const FrameRecord> truth, std::span<const pipeline::FrameReport> reports) {
    std::map<std::int64_t, const FrameRecord*> by_k;
    for (const auto& r : truth) by_k[r.frame.k] = &r;
    if (by_k.size() != reports.size())
        throw Error("align: " + std::to_string(reports.size()) + " report frames but " + std::to_string(by_k.size()) +
                    " ground-truth frames");
    std::vector<EvalFrame> out;
    out.reserve(reports.size());
    for (const auto& rep : reports) {
        const auto it = by_k.find(rep.k);
        if (it == by_k.end()) throw Error("align: no ground truth for frame " + std::to_string(rep.k));
        EvalFrame f;
        f.k = rep.k;
        f.truth = it->second->truth;
        for (const auto& t : rep.tracks) f.hypotheses.push_back({t.id, t.identity, t.x(0), t.x(1)});
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<EvalFrame> merge_by_identity(std::span<const EvalFrame> frames) {
    std::map<std::int64_t, std::map<int, long>> votes;
    for (const auto& f : frames)
        for (const auto& h : f.hypotheses)
            if (h.identity != kUnknownIdentity) ++votes[h.id][h.identity];
    std::map<std::int64_t, std::int64_t> merged;
    for (const auto& [id, counts] : votes) {
        int best = kUnknownIdentity;
        long most = 0;
        for (const auto& [label, n] : counts)
            if (n > most) {
                most = n;
                best = label;
            }
        // Raw ids are non-negative, so negative ids are free for identities.
        merged[id] = -static_cast<std::int64_t>(best) - 1;
    }
    std::vector<EvalFrame> out(frames.begin(), frames.end());
    for (auto& f : out)
        for (auto& h : f.hypotheses) {
            const auto it = merged.find(h.id);
            if (it != merged.end()) h.id = it->second;
        }
    return out;
}

EvalResult evaluate(std::span<const EvalFrame> frames, double radius) {
    if (!(radius > 0)) throw Error("evaluate: match radius must be positive");
    EvalResult r;
    std::map<int, std::int64_t> last_id;
    std::map<int, long> correct;
    std::set<int> subjects;
    for (const auto& f : frames) {
        const auto g = static_cast<Eigen::Index>(f.truth.size());
        const auto h = static_cast<Eigen::Index>(f.hypotheses.size());
        r.ground_truth += g;
        for (const auto& t : f.truth) subjects.insert(t.subject);
        // Offsetting by more than any possible total distance makes cardinality dominate.
        const double offset = radius * static_cast<double>(std::min(g, h) + 1);
        Eigen::MatrixXd dist(g, h), score = Eigen::MatrixXd::Zero(g, h);
        for (Eigen::Index i = 0; i < g; ++i)
            for (Eigen::Index j = 0; j < h; ++j) {
                const auto& t = f.truth[static_cast<std::size_t>(i)];
                const auto& y = f.hypotheses[static_cast<std::size_t>(j)];
                dist(i, j) = std::hypot(t.x - y.x, t.y - y.y);
                if (dist(i, j) <= radius) score(i, j) = offset - dist(i, j);
            }
        long matched = 0;
        for (const auto& [i, j] : hungarian(score).matches) {
            if (dist(i, j) > radius) continue;
            ++matched;
            const auto& t = f.truth[static_cast<std::size_t>(i)];
            const auto& y = f.hypotheses[static_cast<std::size_t>(j)];
            const auto prev = last_id.find(t.subject);
            if (prev != last_id.end() && prev->second != y.id) ++r.mismatches;
            last_id[t.subject] = y.id;
            ++r.subject_tracked_frames[t.subject];
            if (y.identity == t.subject) ++correct[t.subject];
        }
        r.misses += g - matched;
        r.false_positives += h - matched;
    }
    if (r.ground_truth == 0) throw Error("evaluate: MOTA is undefined without ground-truth objects");
    r.mota = 1.0 - static_cast<double>(r.misses + r.false_positives + r.mismatches) / static_cast<double>(r.ground_truth);
    for (int s : subjects) {
        const auto it = r.subject_tracked_frames.find(s);
        if (it == r.subject_tracked_frames.end()) {
            r.warnings.push_back("subject " + std::to_string(s) + " was never tracked; excluded from accuracy");
            continue;
        }
        r.subject_accuracy[s] = static_cast<double>(correct[s]) / static_cast<double>(it->second);
    }
    r.weighted_accuracy = weighted_accuracy(r.subject_accuracy, r.subject_tracked_frames);
    return r;
}

double weighted_accuracy(const std::map<int, double>& accuracy, const std::map<int, long>& frames) {
    double num = 0, den = 0;
    for (const auto& [s, a] : accuracy) {
        const auto it = frames.find(s);
        if (it == frames.end()) continue;
        num += a * static_cast<double>(it->second);
        den += static_cast<double>(it->second);
    }
    return den > 0 ? num / den : 0.0;
}

}  // namespace mmtrack::harness
