#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "hsaw/tensor.hpp"

namespace hsaw::scene {

// Corridor world. The camera rides a patrol vehicle down an infinite straight
// corridor; "curve" segments are full-period slalom sweeps that return both
// the heading and the lateral position to the corridor axis, so rendering and
// analytic flow stay exact everywhere.
// The projection is cylindrical: horizontal pixel position is linear in
// azimuth, vertical position is linear in (height / horizontal range). Under
// that model a pure yaw moves every pixel by exactly focal * yaw, and a
// billboard's pixel height is exactly proportional to 1 / range.

inline constexpr double kFovRadians = 1.6;
inline constexpr double kCorridorHalfWidth = 2.0;
inline constexpr double kCameraHeight = 1.5;
inline constexpr double kWallHeight = 3.0;
inline constexpr double kLaneHalfWidth = 0.8;
inline constexpr double kPedestrianHeight = 1.7;
inline constexpr double kPedestrianHalfWidth = 0.2;
inline constexpr float kMaxFlowSpeed = 4.0f;  // px/frame bound, also the normalizer

inline double focal_px(int width) { return width / kFovRadians; }

enum class ActivityLabel : std::uint8_t { Straight = 0, Curve = 1, AbnormalPedestrian = 2 };

inline bool is_anomalous(ActivityLabel l) { return l == ActivityLabel::AbnormalPedestrian; }
const char* label_name(ActivityLabel l);

struct ScenarioConfig {
    int scenario = 1;
    int frames_per_segment = 16;
    int laps = 2;
    int height = 64;
    int width = 64;
    int pedestrian_segment = 2;  // scenario 2: even (straight) segment index >= 2
    float noise_sigma = 0.0f;
    std::uint64_t seed = 1;

    int segments() const { return laps * 8; }
    int frames() const { return segments() * frames_per_segment; }
    void validate() const;  // throws std::invalid_argument
};

// vehicle speed in world units per frame, scaled so flow stays under the cap
// at any valid resolution
double forward_speed(const ScenarioConfig& cfg);

struct WorldState {
    int height = 64;
    int width = 64;
    std::uint64_t texture_seed = 1;
    double cam_x = 0.0;
    double cam_z = 0.0;
    double cam_psi = 0.0;  // heading, radians; 0 = down the corridor axis
    bool pedestrian = false;  // present and inside draw distance
    double ped_x = 0.0;
    double ped_z = 0.0;
    float noise_sigma = 0.0f;
    std::uint64_t noise_seed = 0;
};

// grayscale frame, shape {1, H, W}, values in [-1, 1]
nn::Tensor render_frame(const WorldState& s);

// pixel motion from s to next, shape {2, H, W}: channel 0 = dx, channel 1 = dy.
// Computed by re-projecting each pixel's world intersection point under the
// next pose; sky pixels move by the pure-rotation limit.
nn::Tensor analytic_flow(const WorldState& s, const WorldState& next);

struct FrameMotionCouple {
    nn::Tensor frame;  // {1, H, W}
    nn::Tensor flow;   // {2, H, W}, pixels/frame, unnormalized
    int index = 0;
};

struct Sequence {
    ScenarioConfig config;
    std::vector<FrameMotionCouple> couples;
    std::vector<ActivityLabel> labels;
    float max_flow_speed = kMaxFlowSpeed;
    int episode_begin = 0;  // [begin, end) anomalous frames; empty for scenario 1
    int episode_end = 0;

    int size() const { return static_cast<int>(couples.size()); }
};

Sequence synthesize_scenario(const ScenarioConfig& cfg);

// indices (temporal order) of frames whose label is in `keep`; empty result
// is an error
std::vector<int> split_subset(const Sequence& seq, std::initializer_list<ActivityLabel> keep);

}  // namespace hsaw::scene
