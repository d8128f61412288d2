#include "hsaw/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hsaw/rng.hpp"

namespace hsaw::scene {

namespace {

constexpr double kStripeLenWall = 1.5;
constexpr double kStripeLenFloor = 1.0;
constexpr double kSkyShade = -0.85;
constexpr double kPedNearLimit = 0.25;   // behind this range the pedestrian is past
constexpr double kPedGap = 1.1;          // lateral clearance while passing
constexpr double kBrakeFactor = 0.6;     // speed multiplier during the maneuver

// deterministic stripe brightness in [0,1); side keys the texture family
double tex_hash(std::uint64_t seed, std::uint64_t side, std::int64_t idx) {
    const std::uint64_t key = side * 0x100000001B3ULL + static_cast<std::uint64_t>(idx + 0x40000);
    return static_cast<double>(nn::mix_seed(seed, key) >> 11) * 0x1.0p-53;
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

enum Surface { kSky = 0, kFloor, kWallLeft, kWallRight, kPed };

struct Hit {
    Surface surface = kSky;
    double range = 0.0;  // horizontal range to the hit
    double wx = 0.0, wy = 0.0, wz = 0.0;
};

// alpha: azimuth relative to heading; r: (camera height - y) / range ratio
Hit raycast(const WorldState& s, double alpha, double r) {
    const double a = alpha + s.cam_psi;
    const double sa = std::sin(a), ca = std::cos(a);
    Hit best;
    double best_range = 1e30;

    if (r > 1e-9) {
        const double range = kCameraHeight / r;
        const double wx = s.cam_x + range * sa;
        if (std::abs(wx) <= kCorridorHalfWidth && range < best_range) {
            best = {kFloor, range, wx, 0.0, s.cam_z + range * ca};
            best_range = range;
        }
    }
    for (int side = 0; side < 2; ++side) {
        const double wall_x = side == 0 ? -kCorridorHalfWidth : kCorridorHalfWidth;
        const double lateral = wall_x - s.cam_x;
        if (std::abs(sa) < 1e-9) continue;
        const double range = lateral / sa;
        if (range <= 0.0 || range >= best_range) continue;
        const double wy = kCameraHeight - range * r;
        if (wy < 0.0 || wy > kWallHeight) continue;
        best = {side == 0 ? kWallLeft : kWallRight, range, wall_x, wy, s.cam_z + range * ca};
        best_range = range;
    }
    if (s.pedestrian) {
        const double dx = s.ped_x - s.cam_x;
        const double dz = s.ped_z - s.cam_z;
        const double rho = std::hypot(dx, dz);
        if (rho > kPedNearLimit && rho < best_range) {
            const double alpha_ped = std::atan2(dx, dz) - s.cam_psi;
            if (std::abs(alpha - alpha_ped) <= kPedestrianHalfWidth / rho) {
                const double wy = kCameraHeight - rho * r;
                if (wy >= 0.0 && wy <= kPedestrianHeight) {
                    best = {kPed, rho, s.cam_x + rho * sa, wy, s.cam_z + rho * ca};
                }
            }
        }
    }
    return best;
}

float shade(const Hit& h, std::uint64_t seed) {
    switch (h.surface) {
        case kSky:
            return static_cast<float>(kSkyShade);
        case kFloor: {
            double v = -0.5 - 0.08 * std::min(1.0, h.range / 14.0);
            const auto idx = static_cast<std::int64_t>(std::floor(h.wz / kStripeLenFloor));
            v += 0.22 * (tex_hash(seed, 2, idx) - 0.5);
            const double lane = std::abs(std::abs(h.wx) - kLaneHalfWidth);
            if (lane < 0.05) {
                v = 0.55;
            } else if (std::abs(h.wx) < 0.035 && h.wz - std::floor(h.wz) < 0.5) {
                v = 0.30;  // dashed center line
            }
            return static_cast<float>(v);
        }
        case kWallLeft:
        case kWallRight: {
            const auto idx = static_cast<std::int64_t>(std::floor(h.wz / kStripeLenWall));
            double v = 0.05 + 0.6 * (tex_hash(seed, h.surface == kWallLeft ? 0 : 1, idx) - 0.5);
            v += 0.18 * (h.wy / kWallHeight);
            return static_cast<float>(v);
        }
        case kPed:
            return static_cast<float>(0.72 + 0.18 * (h.wy / kPedestrianHeight));
    }
    return 0.0f;
}

}  // namespace

const char* label_name(ActivityLabel l) {
    switch (l) {
        case ActivityLabel::Straight: return "straight";
        case ActivityLabel::Curve: return "curve";
        case ActivityLabel::AbnormalPedestrian: return "abnormal_pedestrian";
    }
    return "?";
}

void ScenarioConfig::validate() const {
    if (scenario != 1 && scenario != 2) {
        throw std::invalid_argument("scenario must be 1 or 2, got " + std::to_string(scenario));
    }
    if (frames_per_segment < 8) {
        throw std::invalid_argument("frames_per_segment must be >= 8, got " +
                                    std::to_string(frames_per_segment));
    }
    if (laps < 1) throw std::invalid_argument("laps must be >= 1, got " + std::to_string(laps));
    if (height < 8 || width < 8 || height % 8 != 0 || width % 8 != 0) {
        throw std::invalid_argument("image size must be multiples of 8, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    if (!(noise_sigma >= 0.0f)) throw std::invalid_argument("noise_sigma must be >= 0");
    if (scenario == 2) {
        if (pedestrian_segment < 2 || pedestrian_segment >= segments() || pedestrian_segment % 2 != 0) {
            throw std::invalid_argument(
                "scenario 2: pedestrian_segment must be an even (straight) segment index in [2, " +
                std::to_string(segments()) + "), got " + std::to_string(pedestrian_segment));
        }
    }
}

double forward_speed(const ScenarioConfig& cfg) {
    // scaled with resolution so corner-pixel flow plus a yaw sweep stays
    // under the cap
    return 8.0 / static_cast<double>(std::max(cfg.height, cfg.width));
}

nn::Tensor render_frame(const WorldState& s) {
    nn::Tensor frame({1, s.height, s.width});
    const double f = focal_px(s.width);
    const double cu = 0.5 * s.width, cv = 0.5 * s.height;
    float* px = frame.data();
    for (int v = 0; v < s.height; ++v) {
        const double r = (v + 0.5 - cv) / f;
        for (int u = 0; u < s.width; ++u) {
            const double alpha = (u + 0.5 - cu) / f;
            *px++ = shade(raycast(s, alpha, r), s.texture_seed);
        }
    }
    if (s.noise_sigma > 0.0f) {
        nn::SplitMix64 g(nn::mix_seed(s.noise_seed, 0x0A15EULL));
        for (std::int64_t i = 0; i < frame.numel(); ++i) {
            frame[i] += s.noise_sigma * static_cast<float>(g.next_gaussian());
        }
    }
    for (std::int64_t i = 0; i < frame.numel(); ++i) frame[i] = std::clamp(frame[i], -1.0f, 1.0f);
    return frame;
}

nn::Tensor analytic_flow(const WorldState& s, const WorldState& next) {
    nn::Tensor flow({2, s.height, s.width});
    const double f = focal_px(s.width);
    const double cu = 0.5 * s.width, cv = 0.5 * s.height;
    const std::int64_t plane = static_cast<std::int64_t>(s.height) * s.width;
    float* du = flow.data();
    float* dv = flow.data() + plane;
    for (int v = 0; v < s.height; ++v) {
        const double r = (v + 0.5 - cv) / f;
        for (int u = 0; u < s.width; ++u) {
            const double alpha = (u + 0.5 - cu) / f;
            const Hit h = raycast(s, alpha, r);
            if (h.surface == kSky) {
                // rotation-only limit of an infinitely distant point
                *du++ = static_cast<float>(-f * (next.cam_psi - s.cam_psi));
                *dv++ = 0.0f;
                continue;
            }
            const double dx = h.wx - next.cam_x;
            const double dz = h.wz - next.cam_z;
            const double rho = std::max(std::hypot(dx, dz), 1e-9);
            const double alpha2 = std::atan2(dx, dz) - next.cam_psi;
            const double u2 = cu + f * alpha2;
            const double v2 = cv + f * (kCameraHeight - h.wy) / rho;
            *du++ = static_cast<float>(u2 - (u + 0.5));
            *dv++ = static_cast<float>(v2 - (v + 0.5));
        }
    }
    return flow;
}

Sequence synthesize_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const int T = cfg.frames_per_segment;
    const int n = cfg.frames();
    const double speed = forward_speed(cfg);
    // curve = one full slalom period; the odd symmetry of sin over a period
    // cancels the lateral drift exactly, so every segment starts on the axis.
    // The peak rate is capped so yaw flow alone stays under half the budget.
    const double peak_rate = std::min(3.0 / cfg.width, 0.25 * std::numbers::pi / T);
    const double amplitude = peak_rate * (T - 1) / (2.0 * std::numbers::pi);

    const int s0 = cfg.pedestrian_segment * T;  // scenario 2 only
    const bool ped = cfg.scenario == 2;
    const int episode_begin = ped ? s0 - T / 2 : 0;
    const int episode_end = ped ? s0 + T : 0;
    const double return_rate = 1.28 / cfg.height;  // slow post-episode drift home

    // pose integration: heading from the yaw profile, lateral = drift + crab
    struct Pose {
        double x, z, psi;
    };
    std::vector<Pose> poses(static_cast<std::size_t>(n) + 1);
    double drift = 0.0, z = 0.0, crab = 0.0;
    double ped_x = 0.0, ped_z = 0.0, draw_dist = 0.0;
    double z_at_s0 = 0.0;
    for (int t = 0; t <= n; ++t) {
        const int tc = std::min(t, n - 1);  // pose n extrapolates the last frame's motion
        const int seg = tc / T;
        const int j = tc % T;
        double psi = 0.0;
        if (seg % 2 == 1) {
            const int curve_ordinal = seg / 2;
            const double sign = curve_ordinal % 2 == 0 ? 1.0 : -1.0;
            psi = sign * amplitude * std::sin(2.0 * std::numbers::pi * j / (T - 1));
        }
        double factor = 1.0;
        if (ped && t >= s0 && t < s0 + T) {
            factor = 1.0 - (1.0 - kBrakeFactor) * smoothstep((t - s0) / (0.5 * T));
        } else if (ped && t >= s0 + T && t < s0 + T + T / 4) {
            factor = kBrakeFactor + (1.0 - kBrakeFactor) * (t - s0 - T) / (0.25 * T);
        }
        if (ped) {
            if (t >= s0 && t < s0 + T) {
                crab = -(kPedGap - kLaneHalfWidth) * smoothstep((t - s0) / static_cast<double>(T));
            } else if (t >= s0 + T && crab < 0.0 && (tc / T) % 2 == 0) {
                // drift back to the axis on straights only, so the return
                // never stacks with slalom flow
                crab = std::min(0.0, crab + return_rate);
            }
        }
        poses[static_cast<std::size_t>(t)] = {drift + crab, z, psi};
        if (t == s0) z_at_s0 = z;
        drift += speed * factor * std::sin(psi);
        z += speed * factor * std::cos(psi);
    }
    if (ped) {
        ped_x = kLaneHalfWidth;  // standing on the right lane line
        ped_z = z_at_s0 + 0.65 * T * speed;
        draw_dist = ped_z - poses[static_cast<std::size_t>(episode_begin)].z;
    }

    Sequence seq;
    seq.config = cfg;
    seq.max_flow_speed = kMaxFlowSpeed;
    seq.episode_begin = ped ? episode_begin : 0;
    seq.episode_end = ped ? episode_end : 0;
    seq.couples.reserve(static_cast<std::size_t>(n));
    seq.labels.reserve(static_cast<std::size_t>(n));

    auto state_at = [&](int t) {
        const Pose& p = poses[static_cast<std::size_t>(t)];
        WorldState s;
        s.height = cfg.height;
        s.width = cfg.width;
        s.texture_seed = cfg.seed;
        s.cam_x = p.x;
        s.cam_z = p.z;
        s.cam_psi = p.psi;
        if (ped) {
            const double ahead = ped_z - p.z;
            s.pedestrian = ahead > kPedNearLimit && ahead <= draw_dist;
            s.ped_x = ped_x;
            s.ped_z = ped_z;
        }
        s.noise_sigma = cfg.noise_sigma;
        s.noise_seed = nn::mix_seed(cfg.seed, 0xF0A3ULL + static_cast<std::uint64_t>(t));
        return s;
    };

    for (int t = 0; t < n; ++t) {
        WorldState st = state_at(t);
        WorldState nx = state_at(t + 1);
        FrameMotionCouple c;
        c.index = t;
        c.frame = render_frame(st);
        c.flow = analytic_flow(st, nx);
        for (std::int64_t i = 0; i < c.flow.numel(); ++i) {
            c.flow[i] = std::clamp(c.flow[i], -kMaxFlowSpeed, kMaxFlowSpeed);
        }
        seq.couples.push_back(std::move(c));

        ActivityLabel label = (t / T) % 2 == 0 ? ActivityLabel::Straight : ActivityLabel::Curve;
        if (ped && t >= episode_begin && t < episode_end) label = ActivityLabel::AbnormalPedestrian;
        seq.labels.push_back(label);
    }
    return seq;
}

std::vector<int> split_subset(const Sequence& seq, std::initializer_list<ActivityLabel> keep) {
    if (seq.couples.empty()) throw std::invalid_argument("split_subset: empty sequence");
    std::vector<int> out;
    for (int i = 0; i < seq.size(); ++i) {
        for (ActivityLabel k : keep) {
            if (seq.labels[static_cast<std::size_t>(i)] == k) {
                out.push_back(i);
                break;
            }
        }
    }
    if (out.empty()) throw std::invalid_argument("split_subset: no frames match the requested labels");
    return out;
}

}  // namespace hsaw::scene
