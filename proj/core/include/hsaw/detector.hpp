#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hsaw/hierarchy.hpp"
#include "hsaw/scene.hpp"

// Test-time routing: a sample walks the hierarchy from the base level up; the
// first level whose SOM places its distance map in a normal cluster claims it.
// Only when every level tags it abnormal does the final threshold decide.
namespace hsaw::detect {

enum class YTildeMode {
    Mean,     // y_tilde = mean of the deepest distance map
    MaxPool,  // y_tilde = max entry, opt-in variant for comparison
};

struct Verdict {
    bool is_abnormal = false;
    std::optional<int> accepted_level;   // present iff is_abnormal is false;
                                         // last level when every level tagged
                                         // abnormal but y_tilde stayed <= tau
    float y_tilde = 0.0f;                // from the deepest level evaluated
    std::vector<float> per_level_scores; // y per visited level, in order
};

struct AbnormalitySignal {
    std::vector<float> raw;         // y_tilde per frame
    std::vector<float> normalized;  // sequence min-max; all zero when raw is constant
    std::vector<int> frame_indices;
};

struct DetectionResult {
    std::vector<Verdict> verdicts;
    AbnormalitySignal signal;
};

float pooled_score(const gan::DistanceMap& m, YTildeMode mode);

// sequence min-max; all zero when the input is constant or empty
std::vector<float> minmax_normalize(const std::vector<float>& raw);

Verdict route(const hier::Hierarchy& h, const nn::Tensor& frame, const nn::Tensor& flow,
              YTildeMode mode = YTildeMode::Mean);

DetectionResult detect_sequence(const hier::Hierarchy& h, const scene::Sequence& seq,
                                YTildeMode mode = YTildeMode::Mean);

AbnormalitySignal abnormality_signal(const hier::Hierarchy& h, const scene::Sequence& seq,
                                     YTildeMode mode = YTildeMode::Mean);

// frame_index, raw_y, normalized_y, accepted_level (-1 if abnormal), verdict
std::string signal_csv(const DetectionResult& r);

}  // namespace hsaw::detect
