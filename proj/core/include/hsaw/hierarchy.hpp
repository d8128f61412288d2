#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsaw/gan.hpp"
#include "hsaw/scene.hpp"
#include "hsaw/som.hpp"

// Level construction: train a cross-modal pair on the current subset, score
// every sample of the full sequence with fused distance maps, cluster the maps
// with a SOM, and spawn the next level from the clusters whose mean score
// crosses theta. Levels form a linear chain; qualifying clusters at one level
// are merged into a single child subset, further restricted to samples that
// every earlier level also placed in an abnormal cluster.
namespace hsaw::hier {

struct ThetaPolicy {
    enum class Mode { Fixed, Auto };
    Mode mode = Mode::Auto;
    float fixed_theta = 0.0f;  // Mode::Fixed only
    float k = 1.0f;            // Mode::Auto: theta = mean + k*std of subset scores

    static ThetaPolicy fixed_at(float theta) { return {Mode::Fixed, theta, 0.0f}; }
    static ThetaPolicy auto_k(float k = 1.0f) { return {Mode::Auto, 0.0f, k}; }
};

struct BuildConfig {
    ThetaPolicy theta;
    int max_levels = 4;
    float min_cluster_frac = 0.05f;  // cluster must hold this fraction of the full sequence to spawn
    std::uint64_t seed = 1;
    gan::TrainConfig train;        // per-level seeds are derived from `seed`, the field's own seed is ignored
    som::SomTrainConfig som_train;

    void validate() const;
};

struct ClusterStat {
    double mu = 0.0;  // mean of member mean-distance scores; 0 when the cluster is empty
    int count = 0;
};

struct HierarchyLevel {
    int level = 0;
    gan::CrossModalPair pair;
    som::SomGrid som;
    std::vector<ClusterStat> cluster_stats;  // one per SOM neuron, over the full sequence
    std::vector<char> normal_mask;           // 1 iff count > 0 and mu < theta; empty clusters are never normal
    float theta = 0.0f;
    std::uint64_t subset_fingerprint = 0;
    std::vector<int> subset;  // training sample indices into the full sequence, ascending
};

struct LevelReport {
    int level = 0;
    int subset_size = 0;
    double train_seconds = 0.0;
    double score_seconds = 0.0;
    int spawned = 0;  // size of the subset handed to the next level, 0 when the chain stops
};

struct BuildReport {
    std::vector<LevelReport> levels;
    std::vector<std::string> warnings;
    double total_seconds = 0.0;
};

struct Hierarchy {
    std::vector<HierarchyLevel> levels;
    float final_threshold = 0.0f;  // theta of the last level
    BuildConfig config;
    BuildReport report;
};

// flattened distance-map grid, the feature vector handed to the SOM
std::vector<float> map_features(const gan::DistanceMap& map);

// fused distance map per sample of x, order preserved; .mean_score is the
// sample's scalar score
std::vector<gan::DistanceMap> level_scores(const HierarchyLevel& level, const scene::Sequence& x);

// mean + k*std (population) of the scores; scores must be non-empty
float compute_theta_auto(const std::vector<double>& scores, float k);

Hierarchy build_hierarchy(const scene::Sequence& x, const std::vector<int>& v0, const BuildConfig& cfg);

}  // namespace hsaw::hier
