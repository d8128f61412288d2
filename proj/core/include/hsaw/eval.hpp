#pragma once

#include <string>
#include <vector>

#include "hsaw/detector.hpp"
#include "hsaw/hierarchy.hpp"
#include "hsaw/scene.hpp"

// Frame-level ROC evaluation of abnormality signals, plus the single-GAN vs
// hierarchy comparison experiment.
namespace hsaw::eval {

struct RocPoint {
    float threshold = 0.0f;  // predicted abnormal := score > threshold
    float fpr = 0.0f;
    float tpr = 0.0f;
};

// Points are ordered by descending threshold, so FPR and TPR rise monotonically
// from (0,0) to (1,1). Sentinels at +/-infinity pin both endpoints. auc and eer
// are computed from exact count ratios, not the float-rounded points.
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
    double eer = 0.0;
    float eer_threshold = 0.0f;
};

// scores and labels are per frame, label true = abnormal ground truth.
// Both classes must be present.
RocCurve roc(const std::vector<float>& scores, const std::vector<char>& labels);

// true iff the frame belongs to the scripted anomaly
std::vector<char> abnormal_labels(const scene::Sequence& seq);

std::string roc_csv(const RocCurve& c);
std::string metrics_json(const RocCurve& c);

struct CompareConfig {
    hier::BuildConfig hierarchy;
    detect::YTildeMode mode = detect::YTildeMode::Mean;
};

struct MethodReport {
    RocCurve curve;
    detect::AbnormalitySignal signal;
    // false positives at the EER operating point, split by the regime of the
    // misdetected frame
    int false_positives = 0;
    int curve_false_positives = 0;
};

struct CompareReport {
    MethodReport single_gan;
    MethodReport hierarchy;
    double single_train_seconds = 0.0;
    double hierarchy_train_seconds = 0.0;
};

// Trains one cross-modal pair on every frame of `train` and the full hierarchy
// seeded with the Straight subset, then scores both on `test`.
CompareReport compare_single_vs_hierarchy(const scene::Sequence& train, const scene::Sequence& test,
                                          const CompareConfig& cfg);

std::string compare_metrics_json(const CompareReport& r);

// Self-contained plot of one or two ROC curves with the chance diagonal.
std::string roc_svg(const std::vector<std::pair<std::string, RocCurve>>& curves);

}  // namespace hsaw::eval
