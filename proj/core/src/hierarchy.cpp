#include "hsaw/hierarchy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "hsaw/rng.hpp"

namespace hsaw::hier {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct ScoredSequence {
    std::vector<gan::DistanceMap> maps;
    std::vector<std::vector<float>> features;
    std::vector<double> scores;
};

ScoredSequence score_all(const gan::CrossModalPair& pair, const scene::Sequence& x) {
    ScoredSequence out;
    out.maps.reserve(x.size());
    out.features.reserve(x.size());
    out.scores.reserve(x.size());
    for (const auto& couple : x.couples) {
        out.maps.push_back(gan::distance_map(pair, couple.frame, couple.flow));
        out.features.push_back(map_features(out.maps.back()));
        out.scores.push_back(out.maps.back().mean_score);
    }
    return out;
}

}  // namespace

void BuildConfig::validate() const {
    if (max_levels < 1) throw std::invalid_argument("hierarchy: max_levels must be >= 1");
    if (!(min_cluster_frac > 0.0f) || min_cluster_frac >= 0.5f) {
        throw std::invalid_argument("hierarchy: min_cluster_frac must be in (0, 0.5)");
    }
    if (theta.mode == ThetaPolicy::Mode::Fixed) {
        if (std::isnan(theta.fixed_theta)) throw std::invalid_argument("hierarchy: fixed theta is NaN");
    } else {
        if (!(theta.k >= 0.0f)) throw std::invalid_argument("hierarchy: auto theta needs k >= 0");
    }
    train.validate();
    som_train.validate();
}

std::vector<float> map_features(const gan::DistanceMap& map) {
    const float* p = map.grid.data();
    return std::vector<float>(p, p + map.grid.numel());
}

std::vector<gan::DistanceMap> level_scores(const HierarchyLevel& level, const scene::Sequence& x) {
    std::vector<gan::DistanceMap> maps;
    maps.reserve(x.size());
    for (const auto& couple : x.couples) {
        maps.push_back(gan::distance_map(level.pair, couple.frame, couple.flow));
    }
    return maps;
}

float compute_theta_auto(const std::vector<double>& scores, float k) {
    if (scores.empty()) throw std::invalid_argument("compute_theta_auto: empty scores");
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    return static_cast<float>(mean + static_cast<double>(k) * std::sqrt(var));
}

Hierarchy build_hierarchy(const scene::Sequence& x, const std::vector<int>& v0, const BuildConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(x.size());
    if (n == 0) throw std::invalid_argument("build_hierarchy: empty sequence");
    if (v0.empty()) throw std::invalid_argument("build_hierarchy: empty base subset");

    std::vector<int> subset = v0;
    std::sort(subset.begin(), subset.end());
    if (std::adjacent_find(subset.begin(), subset.end()) != subset.end()) {
        throw std::invalid_argument("build_hierarchy: duplicate sample in base subset");
    }
    if (subset.front() < 0 || subset.back() >= n) {
        throw std::invalid_argument("build_hierarchy: base subset index out of range");
    }

    const auto t_start = clock_type::now();
    Hierarchy h;
    h.config = cfg;

    // samples placed in an abnormal cluster by every level built so far
    std::vector<char> still_abnormal(static_cast<std::size_t>(n), 1);

    for (int l = 0; l < cfg.max_levels; ++l) {
        LevelReport lr;
        lr.level = l;
        lr.subset_size = static_cast<int>(subset.size());

        gan::TrainConfig tc = cfg.train;
        tc.seed = nn::mix_seed(cfg.seed, 0x11EE00ULL + static_cast<std::uint64_t>(l));
        const auto t_train = clock_type::now();
        HierarchyLevel level;
        level.level = l;
        level.pair = gan::train_pair(gan::make_couples(x, subset), tc);
        lr.train_seconds = seconds_since(t_train);

        const auto t_score = clock_type::now();
        ScoredSequence scored = score_all(level.pair, x);

        if (cfg.theta.mode == ThetaPolicy::Mode::Fixed) {
            level.theta = cfg.theta.fixed_theta;
        } else {
            std::vector<double> own;
            own.reserve(subset.size());
            for (int i : subset) own.push_back(scored.scores[static_cast<std::size_t>(i)]);
            level.theta = compute_theta_auto(own, cfg.theta.k);
        }

        som::SomTrainConfig sc = cfg.som_train;
        sc.seed = nn::mix_seed(cfg.seed, 0x50EE00ULL + static_cast<std::uint64_t>(l));
        level.som = som::train_som(scored.features, sc);

        std::vector<int> assignment(static_cast<std::size_t>(n));
        level.cluster_stats.assign(static_cast<std::size_t>(level.som.size()), ClusterStat{});
        for (int i = 0; i < n; ++i) {
            const int c = som::bmu(level.som, scored.features[static_cast<std::size_t>(i)]);
            assignment[static_cast<std::size_t>(i)] = c;
            level.cluster_stats[static_cast<std::size_t>(c)].mu += scored.scores[static_cast<std::size_t>(i)];
            level.cluster_stats[static_cast<std::size_t>(c)].count += 1;
        }
        level.normal_mask.assign(level.cluster_stats.size(), 0);
        for (std::size_t c = 0; c < level.cluster_stats.size(); ++c) {
            ClusterStat& st = level.cluster_stats[c];
            if (st.count > 0) {
                st.mu /= st.count;
                if (st.mu < static_cast<double>(level.theta)) level.normal_mask[c] = 1;
            }
        }

        level.subset = subset;
        level.subset_fingerprint = level.pair.meta.subset_fingerprint;
        lr.score_seconds = seconds_since(t_score);

        std::vector<char> qualifying(level.cluster_stats.size(), 0);
        bool any_qualifying = false;
        const double min_count = static_cast<double>(cfg.min_cluster_frac) * n;
        for (std::size_t c = 0; c < level.cluster_stats.size(); ++c) {
            const ClusterStat& st = level.cluster_stats[c];
            if (st.count > 0 && !level.normal_mask[c] && static_cast<double>(st.count) >= min_count) {
                qualifying[c] = 1;
                any_qualifying = true;
            }
        }

        std::vector<int> next;
        for (int i = 0; i < n; ++i) {
            if (qualifying[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])] &&
                still_abnormal[static_cast<std::size_t>(i)]) {
                next.push_back(i);
            }
        }
        for (int i = 0; i < n; ++i) {
            if (level.normal_mask[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])]) {
                still_abnormal[static_cast<std::size_t>(i)] = 0;
            }
        }

        h.levels.push_back(std::move(level));

        bool spawn = false;
        if (any_qualifying && l + 1 < cfg.max_levels) {
            if (static_cast<int>(next.size()) >= gan::kMinTrainCouples) {
                spawn = true;
            } else {
                h.report.warnings.push_back(
                    "level " + std::to_string(l) + ": spawned subset of " + std::to_string(next.size()) +
                    " samples is below the " + std::to_string(gan::kMinTrainCouples) +
                    "-sample training minimum; stopping");
            }
        }
        lr.spawned = spawn ? static_cast<int>(next.size()) : 0;
        h.report.levels.push_back(lr);
        if (!spawn) break;
        subset = std::move(next);
    }

    h.final_threshold = h.levels.back().theta;
    h.report.total_seconds = seconds_since(t_start);
    return h;
}

}  // namespace hsaw::hier
