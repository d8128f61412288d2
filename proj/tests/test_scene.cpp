#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "hsaw/scene.hpp"

using namespace hsaw;
using namespace hsaw::scene;

namespace {

float px(const nn::Tensor& t, int c, int y, int x, int h, int w) {
    return t[(static_cast<std::int64_t>(c) * h + y) * w + x];
}

// bilinear sample of channel-0 of a {1,H,W} tensor; returns false when the
// sample point leaves the image
bool sample(const nn::Tensor& img, int h, int w, double x, double y, float* out) {
    if (x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0) return false;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const double v = (1 - fy) * ((1 - fx) * px(img, 0, y0, x0, h, w) + fx * px(img, 0, y0, x1, h, w)) +
                     fy * ((1 - fx) * px(img, 0, y1, x0, h, w) + fx * px(img, 0, y1, x1, h, w));
    *out = static_cast<float>(v);
    return true;
}

WorldState basic_state() {
    WorldState s;
    s.height = 64;
    s.width = 64;
    s.texture_seed = 7;
    return s;
}

int count_labels(const Sequence& seq, ActivityLabel l) {
    return static_cast<int>(std::count(seq.labels.begin(), seq.labels.end(), l));
}

}  // namespace

TEST_CASE("config validation") {
    ScenarioConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.segments() == 16);
    CHECK(cfg.frames() == 256);

    auto bad = cfg;
    bad.scenario = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.frames_per_segment = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.laps = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.height = 30;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.noise_sigma = -0.1f;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.scenario = 2;
    bad.pedestrian_segment = 3;  // odd = curve segment
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.pedestrian_segment = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.pedestrian_segment = 16;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.pedestrian_segment = 2;
    CHECK_NOTHROW(bad.validate());

    CHECK(forward_speed(cfg) == doctest::Approx(0.125));
}

TEST_CASE("scenario 1 label layout") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    cfg.frames_per_segment = 16;
    Sequence seq = synthesize_scenario(cfg);
    REQUIRE(seq.size() == 128);
    CHECK(count_labels(seq, ActivityLabel::Straight) == 64);
    CHECK(count_labels(seq, ActivityLabel::Curve) == 64);
    for (int t = 0; t < seq.size(); ++t) {
        const auto want = (t / 16) % 2 == 0 ? ActivityLabel::Straight : ActivityLabel::Curve;
        REQUIRE(seq.labels[static_cast<std::size_t>(t)] == want);
    }
    CHECK(seq.episode_begin == 0);
    CHECK(seq.episode_end == 0);
    CHECK(seq.max_flow_speed == 4.0f);
    CHECK(label_name(ActivityLabel::Curve) == std::string("curve"));
    CHECK(!is_anomalous(ActivityLabel::Curve));
    CHECK(is_anomalous(ActivityLabel::AbnormalPedestrian));
}

TEST_CASE("scenario 2 episode layout") {
    ScenarioConfig cfg;
    cfg.scenario = 2;
    cfg.laps = 1;
    cfg.pedestrian_segment = 2;
    Sequence seq = synthesize_scenario(cfg);
    REQUIRE(seq.size() == 128);
    CHECK(seq.episode_begin == 24);
    CHECK(seq.episode_end == 48);
    CHECK(count_labels(seq, ActivityLabel::AbnormalPedestrian) == 24);
    // contiguous block covering half the preceding curve and the whole segment
    for (int t = 0; t < seq.size(); ++t) {
        const bool inside = t >= 24 && t < 48;
        REQUIRE(is_anomalous(seq.labels[static_cast<std::size_t>(t)]) == inside);
    }
    CHECK(seq.labels[23] == ActivityLabel::Curve);
    CHECK(seq.labels[48] == ActivityLabel::Curve);
}

TEST_CASE("synthesis is deterministic") {
    ScenarioConfig cfg;
    cfg.scenario = 2;
    cfg.laps = 1;
    cfg.noise_sigma = 0.02f;
    Sequence a = synthesize_scenario(cfg);
    Sequence b = synthesize_scenario(cfg);
    REQUIRE(a.size() == b.size());
    for (int t = 0; t < a.size(); ++t) {
        const auto& ca = a.couples[static_cast<std::size_t>(t)];
        const auto& cb = b.couples[static_cast<std::size_t>(t)];
        REQUIRE(std::memcmp(ca.frame.data(), cb.frame.data(),
                            sizeof(float) * static_cast<std::size_t>(ca.frame.numel())) == 0);
        REQUIRE(std::memcmp(ca.flow.data(), cb.flow.data(),
                            sizeof(float) * static_cast<std::size_t>(ca.flow.numel())) == 0);
        REQUIRE(ca.index == t);
    }
}

TEST_CASE("texture seed changes pixels, not labels") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    Sequence a = synthesize_scenario(cfg);
    cfg.seed = 99;
    Sequence b = synthesize_scenario(cfg);
    CHECK(a.labels == b.labels);
    double diff = 0.0;
    const auto& fa = a.couples[0].frame;
    const auto& fb = b.couples[0].frame;
    for (std::int64_t i = 0; i < fa.numel(); ++i) diff += std::abs(fa[i] - fb[i]);
    CHECK(diff / static_cast<double>(fa.numel()) > 0.01);
}

TEST_CASE("frames and flows are finite and in range") {
    ScenarioConfig cfg;
    cfg.scenario = 2;
    cfg.laps = 1;
    cfg.noise_sigma = 0.05f;
    Sequence seq = synthesize_scenario(cfg);
    for (const auto& c : seq.couples) {
        REQUIRE(c.frame.all_finite());
        REQUIRE(c.flow.all_finite());
        for (std::int64_t i = 0; i < c.frame.numel(); ++i) {
            REQUIRE(c.frame[i] >= -1.0f);
            REQUIRE(c.frame[i] <= 1.0f);
        }
        for (std::int64_t i = 0; i < c.flow.numel(); ++i) {
            REQUIRE(std::abs(c.flow[i]) <= seq.max_flow_speed);
        }
    }
}

TEST_CASE("flow stays strictly under the cap at the default scale") {
    ScenarioConfig cfg;
    cfg.scenario = 2;
    Sequence seq = synthesize_scenario(cfg);
    float peak = 0.0f;
    for (const auto& c : seq.couples) {
        for (std::int64_t i = 0; i < c.flow.numel(); ++i) {
            peak = std::max(peak, std::abs(c.flow[i]));
        }
    }
    CHECK(peak < 4.0f);  // saturation never engages at 64x64, T=16
    CHECK(peak > 1.0f);  // and the scene actually moves
}

TEST_CASE("zero ego motion gives zero flow") {
    WorldState s = basic_state();
    s.cam_x = 0.3;
    s.cam_z = 5.0;
    s.cam_psi = 0.05;
    nn::Tensor flow = analytic_flow(s, s);
    for (std::int64_t i = 0; i < flow.numel(); ++i) REQUIRE(std::abs(flow[i]) < 1e-4f);
}

TEST_CASE("pure yaw moves every pixel by exactly focal * yaw") {
    WorldState s = basic_state();
    s.cam_z = 2.0;
    WorldState n = s;
    const double dpsi = 0.03;
    n.cam_psi += dpsi;
    nn::Tensor flow = analytic_flow(s, n);
    const double f = focal_px(s.width);
    const auto plane = static_cast<std::int64_t>(s.height) * s.width;
    for (std::int64_t i = 0; i < plane; ++i) {
        REQUIRE(flow[i] == doctest::Approx(-f * dpsi).epsilon(0.0).scale(1.0).epsilon(1e-3));
        REQUIRE(std::abs(flow[plane + i]) < 1e-3f);
    }
}

TEST_CASE("pure forward motion expands from the image center") {
    WorldState s = basic_state();
    WorldState n = s;
    n.cam_z += 0.15;
    nn::Tensor flow = analytic_flow(s, n);
    const int h = s.height, w = s.width;
    // center column: horizontal flow vanishes, vertical flow grows downward
    double prev = -1.0;
    for (int v = h / 2; v < h; ++v) {
        const float du = px(flow, 0, v, w / 2, h, w);
        const float dv = px(flow, 1, v, w / 2, h, w);
        CHECK(std::abs(du) < 0.05f);
        CHECK(dv >= 0.0f);
        if (v > h / 2 + 2) CHECK(dv >= prev - 1e-4);
        prev = dv;
    }
    // left half flows left, right half flows right along the center row
    CHECK(px(flow, 0, h / 2 + 8, 4, h, w) < 0.0f);
    CHECK(px(flow, 0, h / 2 + 8, w - 5, h, w) > 0.0f);
}

TEST_CASE("flow warps the next frame onto the current one") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    Sequence seq = synthesize_scenario(cfg);
    const int h = cfg.height, w = cfg.width;
    for (int t = 3; t < seq.size() - 1; t += 16) {
        const auto& cur = seq.couples[static_cast<std::size_t>(t)];
        const auto& nxt = seq.couples[static_cast<std::size_t>(t + 1)];
        double err = 0.0;
        int n = 0;
        for (int v = 0; v < h; ++v) {
            for (int u = 0; u < w; ++u) {
                const double x = u + px(cur.flow, 0, v, u, h, w);
                const double y = v + px(cur.flow, 1, v, u, h, w);
                float got = 0.0f;
                if (!sample(nxt.frame, h, w, x, y, &got)) continue;
                err += std::abs(got - px(cur.frame, 0, v, u, h, w));
                ++n;
            }
        }
        REQUIRE(n > h * w / 2);
        REQUIRE(err / n < 0.05);
    }
}

TEST_CASE("curves induce much larger horizontal flow than straights") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    Sequence seq = synthesize_scenario(cfg);
    double mean_s = 0.0, mean_c = 0.0;
    std::int64_t n_s = 0, n_c = 0;
    const auto plane = static_cast<std::int64_t>(cfg.height) * cfg.width;
    for (int t = 0; t < seq.size(); ++t) {
        const auto& fl = seq.couples[static_cast<std::size_t>(t)].flow;
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) acc += std::abs(fl[i]);
        if (seq.labels[static_cast<std::size_t>(t)] == ActivityLabel::Straight) {
            mean_s += acc;
            n_s += plane;
        } else {
            mean_c += acc;
            n_c += plane;
        }
    }
    mean_s /= static_cast<double>(n_s);
    mean_c /= static_cast<double>(n_c);
    CHECK(mean_c > 2.5 * mean_s);
}

TEST_CASE("pedestrian doubles in pixel height at half the distance") {
    auto ped_rows = [](double dist) {
        WorldState s = basic_state();
        s.pedestrian = true;
        s.ped_x = 0.0;
        s.ped_z = dist;
        nn::Tensor img = render_frame(s);
        int lo = s.height, hi = -1;
        for (int v = 0; v < s.height; ++v) {
            for (int u = 0; u < s.width; ++u) {
                if (px(img, 0, v, u, s.height, s.width) > 0.6f) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        }
        REQUIRE(hi >= lo);
        return hi - lo + 1;
    };
    const int far = ped_rows(8.0);
    const int near = ped_rows(4.0);
    CHECK(near >= 2 * far - 2);
    CHECK(near <= 2 * far + 2);
}

TEST_CASE("pedestrian appears exactly at the episode begin") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    Sequence plain = synthesize_scenario(cfg);
    cfg.scenario = 2;
    Sequence ped = synthesize_scenario(cfg);
    REQUIRE(plain.size() == ped.size());
    const auto bytes = sizeof(float) * static_cast<std::size_t>(plain.couples[0].frame.numel());
    const auto fbytes = sizeof(float) * static_cast<std::size_t>(plain.couples[0].flow.numel());
    for (int t = 0; t < ped.episode_begin; ++t) {
        const auto& a = plain.couples[static_cast<std::size_t>(t)];
        const auto& b = ped.couples[static_cast<std::size_t>(t)];
        REQUIRE(std::memcmp(a.frame.data(), b.frame.data(), bytes) == 0);
        REQUIRE(std::memcmp(a.flow.data(), b.flow.data(), fbytes) == 0);
    }
    // first episode frame shows the pedestrian: a bright blob scenario 1 lacks
    const auto& fa = plain.couples[static_cast<std::size_t>(ped.episode_begin)].frame;
    const auto& fb = ped.couples[static_cast<std::size_t>(ped.episode_begin)].frame;
    int bright = 0;
    for (std::int64_t i = 0; i < fb.numel(); ++i) {
        if (fb[i] > 0.6f && fa[i] <= 0.6f) ++bright;
    }
    CHECK(bright > 0);
}

TEST_CASE("split_subset filters by label in temporal order") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    Sequence seq = synthesize_scenario(cfg);
    auto straight = split_subset(seq, {ActivityLabel::Straight});
    REQUIRE(straight.size() == 64);
    for (std::size_t i = 0; i < straight.size(); ++i) {
        REQUIRE((straight[i] / 16) % 2 == 0);
        if (i > 0) REQUIRE(straight[i] > straight[i - 1]);
    }
    auto both = split_subset(seq, {ActivityLabel::Straight, ActivityLabel::Curve});
    CHECK(both.size() == 128);
    CHECK_THROWS_AS(split_subset(seq, {ActivityLabel::AbnormalPedestrian}), std::invalid_argument);
    Sequence empty;
    CHECK_THROWS_AS(split_subset(empty, {ActivityLabel::Straight}), std::invalid_argument);
}

TEST_CASE("noise perturbs frames but not flow or labels") {
    ScenarioConfig cfg;
    cfg.laps = 1;
    Sequence clean = synthesize_scenario(cfg);
    cfg.noise_sigma = 0.05f;
    Sequence noisy = synthesize_scenario(cfg);
    CHECK(clean.labels == noisy.labels);
    const auto& c0 = clean.couples[0];
    const auto& n0 = noisy.couples[0];
    CHECK(std::memcmp(c0.flow.data(), n0.flow.data(),
                      sizeof(float) * static_cast<std::size_t>(c0.flow.numel())) == 0);
    double diff = 0.0;
    for (std::int64_t i = 0; i < c0.frame.numel(); ++i) diff += std::abs(c0.frame[i] - n0.frame[i]);
    diff /= static_cast<double>(c0.frame.numel());
    CHECK(diff > 0.01);
    CHECK(diff < 0.2);
}

TEST_CASE("small configs still respect the flow bound") {
    ScenarioConfig cfg;
    cfg.scenario = 2;
    cfg.laps = 1;
    cfg.frames_per_segment = 8;
    cfg.height = 16;
    cfg.width = 16;
    Sequence seq = synthesize_scenario(cfg);
    REQUIRE(seq.size() == 64);
    for (const auto& c : seq.couples) {
        for (std::int64_t i = 0; i < c.flow.numel(); ++i) {
            REQUIRE(std::abs(c.flow[i]) <= 4.0f);
        }
    }
    CHECK(count_labels(seq, ActivityLabel::AbnormalPedestrian) == 12);
}
