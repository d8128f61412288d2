#include "hsaw/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "hsaw/gan.hpp"
#include "hsaw/rng.hpp"

namespace hsaw::eval {

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RocCurve roc(const std::vector<float>& scores, const std::vector<char>& labels) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("roc: got " + std::to_string(scores.size()) + " scores for " +
                                    std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) throw std::invalid_argument("roc: empty input");
    for (float s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("roc: non-finite score");
    }
    const long pos = std::count_if(labels.begin(), labels.end(), [](char l) { return l != 0; });
    const long neg = static_cast<long>(labels.size()) - pos;
    if (pos == 0 || neg == 0) {
        throw std::invalid_argument("roc: labels are single-class, need both normal and abnormal frames");
    }

    // sweep distinct scores in descending order; predicted abnormal := score > t,
    // so the point for threshold t counts only frames scoring strictly above it
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

    std::vector<float> thr{kInf};
    std::vector<double> fpr{0.0}, tpr{0.0};
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const float s = scores[order[i]];
        thr.push_back(s);
        fpr.push_back(static_cast<double>(fp) / neg);
        tpr.push_back(static_cast<double>(tp) / pos);
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            if (labels[order[i]]) ++tp; else ++fp;
        }
    }
    thr.push_back(-kInf);
    fpr.push_back(1.0);
    tpr.push_back(1.0);

    RocCurve c;
    c.points.reserve(thr.size());
    for (std::size_t k = 0; k < thr.size(); ++k) {
        c.points.push_back({thr[k], static_cast<float>(fpr[k]), static_cast<float>(tpr[k])});
    }
    for (std::size_t k = 1; k < thr.size(); ++k) {
        c.auc += 0.5 * (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]);
    }

    // g = FPR - (1 - TPR) rises monotonically from -1 to +1; EER sits where the
    // polyline crosses g = 0
    auto g = [&](std::size_t k) { return fpr[k] - (1.0 - tpr[k]); };
    std::size_t j = 1;
    while (g(j) < 0.0) ++j;
    if (g(j) == 0.0) {
        c.eer = fpr[j];
        c.eer_threshold = thr[j];
    } else {
        const double g0 = g(j - 1), g1 = g(j);
        const double u = -g0 / (g1 - g0);
        c.eer = fpr[j - 1] + u * (fpr[j] - fpr[j - 1]);
        // report the nearer of the two surrounding grid thresholds, preferring a
        // finite one on ties
        const bool take_lower = std::abs(g0) < std::abs(g1) ||
                                (std::abs(g0) == std::abs(g1) && std::isfinite(thr[j - 1]));
        const float cand = take_lower ? thr[j - 1] : thr[j];
        c.eer_threshold = std::isfinite(cand) ? cand : (take_lower ? thr[j] : thr[j - 1]);
    }
    return c;
}

std::vector<char> abnormal_labels(const scene::Sequence& seq) {
    std::vector<char> out(seq.labels.size(), 0);
    for (std::size_t i = 0; i < seq.labels.size(); ++i) {
        out[i] = seq.labels[i] == scene::ActivityLabel::AbnormalPedestrian ? 1 : 0;
    }
    return out;
}

std::string roc_csv(const RocCurve& c) {
    std::string out = "threshold,fpr,tpr\n";
    char row[80];
    for (const RocPoint& p : c.points) {
        std::snprintf(row, sizeof(row), "%.9g,%.9g,%.9g\n", static_cast<double>(p.threshold),
                      static_cast<double>(p.fpr), static_cast<double>(p.tpr));
        out += row;
    }
    return out;
}

std::string metrics_json(const RocCurve& c) {
    nlohmann::json j;
    j["auc"] = c.auc;
    j["eer"] = c.eer;
    j["eer_threshold"] = c.eer_threshold;
    return j.dump(2) + "\n";
}

namespace {

detect::AbnormalitySignal single_pair_signal(const gan::CrossModalPair& pair,
                                             const scene::Sequence& seq, detect::YTildeMode mode) {
    detect::AbnormalitySignal s;
    s.raw.reserve(seq.couples.size());
    s.frame_indices.reserve(seq.couples.size());
    for (const scene::FrameMotionCouple& couple : seq.couples) {
        s.raw.push_back(detect::pooled_score(gan::distance_map(pair, couple.frame, couple.flow), mode));
        s.frame_indices.push_back(couple.index);
    }
    s.normalized = detect::minmax_normalize(s.raw);
    return s;
}

MethodReport method_report(const detect::AbnormalitySignal& signal, const scene::Sequence& test) {
    const std::vector<char> truth = abnormal_labels(test);
    std::vector<char> aligned(signal.frame_indices.size());
    for (std::size_t i = 0; i < signal.frame_indices.size(); ++i) {
        aligned[i] = truth[static_cast<std::size_t>(signal.frame_indices[i])];
    }
    MethodReport r;
    r.signal = signal;
    r.curve = roc(signal.normalized, aligned);
    for (std::size_t i = 0; i < signal.normalized.size(); ++i) {
        if (aligned[i] || signal.normalized[i] <= r.curve.eer_threshold) continue;
        ++r.false_positives;
        const scene::ActivityLabel regime = test.labels[static_cast<std::size_t>(signal.frame_indices[i])];
        if (regime == scene::ActivityLabel::Curve) ++r.curve_false_positives;
    }
    return r;
}

}  // namespace

CompareReport compare_single_vs_hierarchy(const scene::Sequence& train, const scene::Sequence& test,
                                          const CompareConfig& cfg) {
    cfg.hierarchy.validate();
    CompareReport out;

    std::vector<int> all(static_cast<std::size_t>(train.size()));
    std::iota(all.begin(), all.end(), 0);
    gan::TrainConfig single_cfg = cfg.hierarchy.train;
    single_cfg.seed = nn::mix_seed(cfg.hierarchy.seed, 0x51C1E0);
    auto t0 = std::chrono::steady_clock::now();
    const gan::CrossModalPair single = gan::train_pair(gan::make_couples(train, all), single_cfg);
    out.single_train_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const hier::Hierarchy h = hier::build_hierarchy(
        train, scene::split_subset(train, {scene::ActivityLabel::Straight}), cfg.hierarchy);
    out.hierarchy_train_seconds = seconds_since(t0);

    out.single_gan = method_report(single_pair_signal(single, test, cfg.mode), test);
    out.hierarchy = method_report(detect::abnormality_signal(h, test, cfg.mode), test);
    return out;
}

std::string compare_metrics_json(const CompareReport& r) {
    auto method = [](const MethodReport& m) {
        nlohmann::json j;
        j["auc"] = m.curve.auc;
        j["eer"] = m.curve.eer;
        j["eer_threshold"] = m.curve.eer_threshold;
        j["false_positives"] = m.false_positives;
        j["curve_false_positives"] = m.curve_false_positives;
        return j;
    };
    nlohmann::json j;
    j["single_gan"] = method(r.single_gan);
    j["hierarchy"] = method(r.hierarchy);
    j["single_train_seconds"] = r.single_train_seconds;
    j["hierarchy_train_seconds"] = r.hierarchy_train_seconds;
    return j.dump(2) + "\n";
}

std::string roc_svg(const std::vector<std::pair<std::string, RocCurve>>& curves) {
    constexpr float kL = 60.0f, kT = 20.0f, kW = 420.0f, kH = 330.0f;
    constexpr const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
    auto px = [&](float fpr) { return kL + fpr * kW; };
    auto py = [&](float tpr) { return kT + (1.0f - tpr) * kH; };
    char buf[256];
    std::string s =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 520 410\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect x=\"0\" y=\"0\" width=\"520\" height=\"410\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#888\" "
                  "stroke-dasharray=\"5,4\"/>\n",
                  px(0), py(0), px(1), py(1));
    s += buf;
    for (int k = 0; k <= 4; ++k) {
        const float v = 0.25f * static_cast<float>(k);
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.2f</text>\n", px(v),
                      py(0) + 18.0f, static_cast<double>(v));
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", kL - 8.0f,
                      py(v) + 4.0f, static_cast<double>(v));
        s += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"black\"/>\n",
                  kL, kT, kW, kH);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">false positive rate</text>\n",
                  kL + kW / 2, kT + kH + 38.0f);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
                  "%.1f)\">true positive rate</text>\n",
                  kT + kH / 2, kT + kH / 2);
    s += buf;
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const char* color = kColors[ci % 4];
        std::string pts;
        for (const RocPoint& p : curves[ci].second.points) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(p.fpr), py(p.tpr));
            pts += buf;
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
        const float ly = kT + 16.0f + 18.0f * static_cast<float>(ci);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" "
                      "stroke-width=\"1.5\"/>\n",
                      kL + 14.0f, ly, kL + 42.0f, ly, color);
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\">%s (auc %.3f)</text>\n", kL + 48.0f, ly + 4.0f,
                      curves[ci].first.c_str(), static_cast<double>(curves[ci].second.auc));
        s += buf;
    }
    s += "</svg>\n";
    return s;
}

}  // namespace hsaw::eval
