#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "hsaw/hierarchy.hpp"

using namespace hsaw;
using namespace hsaw::hier;

namespace {

scene::Sequence micro_sequence(int side, int laps, std::uint64_t seed) {
    scene::ScenarioConfig cfg;
    cfg.scenario = 1;
    cfg.height = side;
    cfg.width = side;
    cfg.laps = laps;
    cfg.seed = seed;
    return scene::synthesize_scenario(cfg);
}

// micro-scale training regime: a light L1 weight and a gentle learning rate
// keep the tiny 32x32 GANs in their stable basin so the level structure is
// about the data, not about adversarial turbulence
BuildConfig micro_config(int epochs, std::uint64_t seed) {
    BuildConfig cfg;
    cfg.seed = seed;
    cfg.train.epochs = epochs;
    cfg.train.lambda_l1 = 10.0f;
    cfg.train.adam.lr = 1e-4f;
    return cfg;
}

// the one expensive fixture: a straight-subset build on a 32x32 two-regime
// sequence, reused by every case that inspects a trained hierarchy
const scene::Sequence& shared_sequence() {
    static scene::Sequence s = micro_sequence(32, 1, 5);
    return s;
}

const std::vector<int>& shared_v0() {
    static std::vector<int> v0 = scene::split_subset(shared_sequence(), {scene::ActivityLabel::Straight});
    return v0;
}

const Hierarchy& shared_build() {
    static Hierarchy h = build_hierarchy(shared_sequence(), shared_v0(), micro_config(20, 101));
    return h;
}

double mean_of(const std::vector<float>& v) {
    double acc = 0.0;
    for (float x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("theta auto matches mean plus k standard deviations") {
    CHECK(compute_theta_auto({0.7, 0.7, 0.7}, 1.0f) == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(compute_theta_auto({0.0, 1.0}, 1.0f) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(compute_theta_auto({0.2, 0.4, 0.9}, 0.0f) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(compute_theta_auto({1.0, 2.0, 3.0, 4.0}, 2.0f) ==
          doctest::Approx(2.5 + 2.0 * std::sqrt(1.25)).epsilon(1e-6));
    CHECK_THROWS_AS(compute_theta_auto({}, 1.0f), std::invalid_argument);
}

TEST_CASE("map_features flattens the distance grid row-major") {
    gan::DistanceMap m;
    m.grid = nn::Tensor({2, 3}, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f});
    m.mean_score = 0.35;
    const std::vector<float> f = map_features(m);
    REQUIRE(f.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(f[static_cast<std::size_t>(i)] == m.grid[i]);
}

TEST_CASE("build config validation") {
    BuildConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    BuildConfig bad = cfg;
    bad.max_levels = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.min_cluster_frac = 0.0f;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.min_cluster_frac = 0.5f;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.theta = ThetaPolicy::auto_k(-1.0f);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.theta = ThetaPolicy::fixed_at(std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.theta = ThetaPolicy::fixed_at(std::numeric_limits<float>::infinity());
    CHECK_NOTHROW(bad.validate());
}

TEST_CASE("build rejects bad base subsets") {
    const scene::Sequence x = micro_sequence(16, 1, 3);
    const BuildConfig cfg = micro_config(1, 1);
    CHECK_THROWS_AS(build_hierarchy(x, {}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(build_hierarchy(x, {0, 1, 1, 2}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(build_hierarchy(x, {0, static_cast<int>(x.size())}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(build_hierarchy(x, {-1, 0}, cfg), std::invalid_argument);
}

TEST_CASE("infinite fixed theta yields a single level, deterministically") {
    const scene::Sequence x = micro_sequence(16, 1, 3);
    const std::vector<int> v0 = scene::split_subset(x, {scene::ActivityLabel::Straight});
    BuildConfig cfg = micro_config(1, 9);
    cfg.theta = ThetaPolicy::fixed_at(std::numeric_limits<float>::infinity());

    const Hierarchy h1 = build_hierarchy(x, v0, cfg);
    REQUIRE(h1.levels.size() == 1);
    const HierarchyLevel& lv = h1.levels[0];
    CHECK(std::isinf(h1.final_threshold));
    CHECK(lv.subset == v0);
    CHECK(lv.subset_fingerprint == gan::subset_fingerprint(gan::make_couples(x, v0)));
    int members = 0;
    for (std::size_t c = 0; c < lv.cluster_stats.size(); ++c) {
        members += lv.cluster_stats[c].count;
        CHECK(static_cast<bool>(lv.normal_mask[c]) == (lv.cluster_stats[c].count > 0));
    }
    CHECK(members == static_cast<int>(x.size()));
    REQUIRE(h1.report.levels.size() == 1);
    CHECK(h1.report.levels[0].subset_size == static_cast<int>(v0.size()));
    CHECK(h1.report.levels[0].spawned == 0);

    const Hierarchy h2 = build_hierarchy(x, v0, cfg);
    const auto p1 = h1.levels[0].pair.parameters();
    const auto p2 = h2.levels[0].pair.parameters();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        REQUIRE(p1[i]->value().numel() == p2[i]->value().numel());
        CHECK(std::memcmp(p1[i]->value().data(), p2[i]->value().data(),
                          sizeof(float) * static_cast<std::size_t>(p1[i]->value().numel())) == 0);
    }
    CHECK(h1.levels[0].som.prototypes == h2.levels[0].som.prototypes);
    CHECK(h1.levels[0].theta == h2.levels[0].theta);
}

TEST_CASE("minus-infinity fixed theta spawns until max_levels") {
    const scene::Sequence x = micro_sequence(16, 1, 3);
    const std::vector<int> v0 = scene::split_subset(x, {scene::ActivityLabel::Straight});
    BuildConfig cfg = micro_config(1, 9);
    cfg.theta = ThetaPolicy::fixed_at(-std::numeric_limits<float>::infinity());
    cfg.max_levels = 2;

    const Hierarchy h = build_hierarchy(x, v0, cfg);
    REQUIRE(h.levels.size() == 2);
    for (const HierarchyLevel& lv : h.levels) {
        for (char m : lv.normal_mask) CHECK(m == 0);
    }
    const HierarchyLevel& l0 = h.levels[0];
    const double min_count = 0.05 * static_cast<double>(x.size());
    const std::vector<gan::DistanceMap> maps = level_scores(l0, x);
    for (int i : h.levels[1].subset) {
        const int c = som::bmu(l0.som, map_features(maps[static_cast<std::size_t>(i)]));
        CHECK(l0.cluster_stats[static_cast<std::size_t>(c)].count >= min_count);
        CHECK(l0.cluster_stats[static_cast<std::size_t>(c)].mu >= l0.theta);
    }
    CHECK(h.report.levels[0].spawned == static_cast<int>(h.levels[1].subset.size()));
}

TEST_CASE("straight base subset on a two-regime sequence spawns exactly one extra level") {
    const scene::Sequence& x = shared_sequence();
    const Hierarchy& h = shared_build();
    REQUIRE(h.levels.size() == 2);
    CHECK(h.final_threshold == h.levels.back().theta);
    CHECK(h.levels[0].subset == shared_v0());

    int curve = 0;
    for (int i : h.levels[1].subset) {
        if (x.labels[static_cast<std::size_t>(i)] == scene::ActivityLabel::Curve) ++curve;
    }
    CAPTURE(h.levels[1].subset.size());
    CHECK(static_cast<double>(curve) >=
          0.9 * static_cast<double>(h.levels[1].subset.size()));

    // at least one normal cluster everywhere except possibly the last level
    for (std::size_t l = 0; l + 1 < h.levels.size(); ++l) {
        CHECK(std::count(h.levels[l].normal_mask.begin(), h.levels[l].normal_mask.end(), 1) > 0);
    }
}

TEST_CASE("spawned subsets come from qualifying abnormal clusters only") {
    const scene::Sequence& x = shared_sequence();
    const Hierarchy& h = shared_build();
    REQUIRE(h.levels.size() >= 2);

    const HierarchyLevel& l0 = h.levels[0];
    const std::vector<gan::DistanceMap> maps = level_scores(l0, x);
    const double min_count = static_cast<double>(h.config.min_cluster_frac) * static_cast<double>(x.size());
    std::vector<char> in_subset(x.size(), 0);
    for (int i : h.levels[1].subset) in_subset[static_cast<std::size_t>(i)] = 1;

    for (std::size_t i = 0; i < x.size(); ++i) {
        const int c = som::bmu(l0.som, map_features(maps[i]));
        const ClusterStat& st = l0.cluster_stats[static_cast<std::size_t>(c)];
        const bool qualifies = !l0.normal_mask[static_cast<std::size_t>(c)] &&
                               static_cast<double>(st.count) >= min_count;
        CHECK(static_cast<bool>(in_subset[i]) == qualifies);
    }

    // ascending and duplicate-free
    CHECK(std::is_sorted(h.levels[1].subset.begin(), h.levels[1].subset.end()));
    CHECK(std::adjacent_find(h.levels[1].subset.begin(), h.levels[1].subset.end()) ==
          h.levels[1].subset.end());
}

TEST_CASE("level internals are recomputable from public primitives") {
    const scene::Sequence& x = shared_sequence();
    const Hierarchy& h = shared_build();
    const HierarchyLevel& l0 = h.levels[0];

    const std::vector<gan::DistanceMap> maps = level_scores(l0, x);
    REQUIRE(maps.size() == x.size());

    // order preserved and identical to the single-sample primitive
    for (std::size_t i : {std::size_t{0}, std::size_t{37}}) {
        const gan::DistanceMap one = gan::distance_map(l0.pair, x.couples[i].frame, x.couples[i].flow);
        REQUIRE(one.grid.numel() == maps[i].grid.numel());
        CHECK(std::memcmp(one.grid.data(), maps[i].grid.data(),
                          sizeof(float) * static_cast<std::size_t>(one.grid.numel())) == 0);
        CHECK(one.mean_score == maps[i].mean_score);
        CHECK(maps[i].mean_score == doctest::Approx(mean_of(map_features(maps[i]))).epsilon(1e-6));
    }

    // theta was computed over the level's own training subset
    std::vector<double> own;
    for (int i : l0.subset) own.push_back(maps[static_cast<std::size_t>(i)].mean_score);
    CHECK(l0.theta == compute_theta_auto(own, h.config.theta.k));

    // cluster stats cover the full sequence and match a recount
    std::vector<ClusterStat> recount(l0.cluster_stats.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int c = som::bmu(l0.som, map_features(maps[i]));
        recount[static_cast<std::size_t>(c)].mu += maps[i].mean_score;
        recount[static_cast<std::size_t>(c)].count += 1;
    }
    for (std::size_t c = 0; c < recount.size(); ++c) {
        CHECK(recount[c].count == l0.cluster_stats[c].count);
        if (recount[c].count > 0) {
            CHECK(l0.cluster_stats[c].mu ==
                  doctest::Approx(recount[c].mu / recount[c].count).epsilon(1e-9));
        }
        CHECK(static_cast<bool>(l0.normal_mask[c]) ==
              (recount[c].count > 0 && l0.cluster_stats[c].mu < static_cast<double>(l0.theta)));
    }

    // training-subset scores sit below theta on average
    double own_mean = 0.0;
    for (double s : own) own_mean += s;
    own_mean /= static_cast<double>(own.size());
    CHECK(own_mean < static_cast<double>(l0.theta));
}

TEST_CASE("homogeneous single-regime data yields a single level") {
    const scene::Sequence full = micro_sequence(32, 1, 11);
    scene::Sequence straight_only;
    straight_only.config = full.config;
    straight_only.max_flow_speed = full.max_flow_speed;
    straight_only.episode_begin = -1;
    straight_only.episode_end = -1;
    for (std::size_t i = 0; i < full.size(); ++i) {
        if (full.labels[i] == scene::ActivityLabel::Straight) {
            straight_only.couples.push_back(full.couples[i]);
            straight_only.labels.push_back(scene::ActivityLabel::Straight);
        }
    }
    std::vector<int> all(straight_only.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[static_cast<std::size_t>(i)] = static_cast<int>(i);

    const Hierarchy h = build_hierarchy(straight_only, all, micro_config(16, 23));
    CHECK(h.levels.size() == 1);
}
