#include "hsaw/detector.hpp"

#include <algorithm>
#include <stdexcept>

#include "hsaw/gan.hpp"
#include "hsaw/som.hpp"

namespace hsaw::detect {

float pooled_score(const gan::DistanceMap& m, YTildeMode mode) {
    if (mode == YTildeMode::Mean) return static_cast<float>(m.mean_score);
    float best = 0.0f;
    for (int i = 0; i < m.grid.numel(); ++i) best = std::max(best, m.grid[i]);
    return best;
}

std::vector<float> minmax_normalize(const std::vector<float>& raw) {
    std::vector<float> out(raw.size(), 0.0f);
    if (raw.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const float lo = *lo_it, hi = *hi_it;
    if (hi > lo) {
        for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / (hi - lo);
    }
    return out;
}

Verdict route(const hier::Hierarchy& h, const nn::Tensor& frame, const nn::Tensor& flow,
              YTildeMode mode) {
    if (h.levels.empty()) throw std::invalid_argument("route: hierarchy has no levels");
    Verdict v;
    for (const hier::HierarchyLevel& level : h.levels) {
        const gan::DistanceMap dm = gan::distance_map(level.pair, frame, flow);
        v.y_tilde = pooled_score(dm, mode);
        v.per_level_scores.push_back(v.y_tilde);
        const int c = som::bmu(level.som, hier::map_features(dm));
        if (level.normal_mask[static_cast<std::size_t>(c)]) {
            v.is_abnormal = false;
            v.accepted_level = level.level;
            return v;
        }
    }
    v.is_abnormal = v.y_tilde > h.final_threshold;
    if (!v.is_abnormal) v.accepted_level = h.levels.back().level;
    return v;
}

DetectionResult detect_sequence(const hier::Hierarchy& h, const scene::Sequence& seq,
                                YTildeMode mode) {
    if (seq.couples.empty()) throw std::invalid_argument("detect_sequence: empty sequence");
    DetectionResult r;
    r.verdicts.reserve(seq.couples.size());
    r.signal.raw.reserve(seq.couples.size());
    r.signal.frame_indices.reserve(seq.couples.size());
    for (const scene::FrameMotionCouple& couple : seq.couples) {
        r.verdicts.push_back(route(h, couple.frame, couple.flow, mode));
        r.signal.raw.push_back(r.verdicts.back().y_tilde);
        r.signal.frame_indices.push_back(couple.index);
    }

    r.signal.normalized = minmax_normalize(r.signal.raw);
    return r;
}

AbnormalitySignal abnormality_signal(const hier::Hierarchy& h, const scene::Sequence& seq,
                                     YTildeMode mode) {
    return detect_sequence(h, seq, mode).signal;
}

std::string signal_csv(const DetectionResult& r) {
    std::string out = "frame_index,raw_y,normalized_y,accepted_level,verdict\n";
    char row[96];
    for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
        const Verdict& v = r.verdicts[i];
        std::snprintf(row, sizeof(row), "%d,%.9g,%.9g,%d,%s\n", r.signal.frame_indices[i],
                      static_cast<double>(r.signal.raw[i]), static_cast<double>(r.signal.normalized[i]),
                      v.accepted_level ? *v.accepted_level : -1, v.is_abnormal ? "abnormal" : "normal");
        out += row;
    }
    return out;
}

}  // namespace hsaw::detect
