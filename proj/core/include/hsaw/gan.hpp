#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hsaw/adam.hpp"
#include "hsaw/autodiff.hpp"
#include "hsaw/scene.hpp"

namespace hsaw::gan {

// One cross-modal conditional GAN pair: a frame->flow direction and a
// flow->frame direction, each a U-Net-lite generator plus a PatchGAN-lite
// discriminator over the (condition, target) channel concat.
//
// Module boundary convention: frames are [-1,1] grayscale, flows are raw
// pixels/frame. Flow is divided by max_flow_speed at the network boundary
// only; predictions come back in raw units again. score_map is the one
// exception: it takes network-unit inputs directly.

enum class Direction { FrameToFlow, FlowToFrame };

const char* direction_name(Direction d);  // "fo" / "of"

struct ConvLayer {
    std::shared_ptr<nn::Parameter> w, b;
    std::shared_ptr<nn::Parameter> gamma, beta;  // null when the layer has no norm
};

struct GeneratorNet {
    Direction dir = Direction::FrameToFlow;
    int in_ch = 1;
    int out_ch = 2;
    ConvLayer e1, e2, e3;  // stride-2 convs, 16 -> 32 -> 64
    ConvLayer d1, d2, d3;  // stride-2 deconvs with skip concats, tanh head

    // x: {B, in_ch, H, W} with H, W multiples of 8 -> {B, out_ch, H, W}
    nn::Var forward(const nn::Var& x) const;
    std::vector<nn::Parameter*> parameters() const;
};

struct DiscriminatorNet {
    Direction dir = Direction::FrameToFlow;
    int cond_ch = 1;
    int target_ch = 2;
    ConvLayer c1, c2, c3;  // stride-2 convs, 16 -> 32 -> 64
    ConvLayer head;        // 1x1 conv to a single-channel logit map

    // {B, cond_ch, H, W} x {B, target_ch, H, W} -> logits {B, 1, H/8, W/8}
    nn::Var forward_logits(const nn::Var& cond, const nn::Var& target) const;
    std::vector<nn::Parameter*> parameters() const;
};

GeneratorNet make_generator(Direction dir, std::uint64_t seed);
DiscriminatorNet make_discriminator(Direction dir, std::uint64_t seed);

inline constexpr int kMinTrainCouples = 16;

struct TrainConfig {
    int epochs = 30;
    int batch_size = 4;
    float lambda_l1 = 100.0f;
    nn::AdamConfig adam;  // lr 2e-4, beta1 0.5 defaults
    std::uint64_t seed = 1;
    float max_flow_speed = scene::kMaxFlowSpeed;

    void validate() const;  // throws std::invalid_argument
};

struct EpochStats {
    int epoch = 0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_l1 = 0.0;
};

// "epoch,d_loss,g_loss,l1" rows with a header line
std::string epoch_csv(const std::vector<EpochStats>& stats);

struct TrainMeta {
    TrainConfig config;
    std::uint64_t subset_fingerprint = 0;
    int subset_size = 0;
    std::vector<EpochStats> fo_epochs, of_epochs;
};

struct DirectionNets {
    GeneratorNet g;
    DiscriminatorNet d;
};

struct CrossModalPair {
    DirectionNets fo, of;
    TrainMeta meta;

    std::vector<nn::Parameter*> parameters() const;
};

// Non-owning view of one (frame, flow) training couple
struct CoupleRef {
    const nn::Tensor* frame = nullptr;  // {1, H, W}
    const nn::Tensor* flow = nullptr;   // {2, H, W}, raw pixels/frame
};

std::vector<CoupleRef> make_couples(const scene::Sequence& seq, const std::vector<int>& indices);

std::uint64_t subset_fingerprint(const std::vector<CoupleRef>& subset);

// Alternating one-discriminator-step / one-generator-step conditional GAN
// training (adversarial + lambda * L1), run to completion for the frame->flow
// direction and then the flow->frame direction. Deterministic given the seed.
// Throws std::invalid_argument for subsets smaller than 16 couples or
// inconsistent shapes, std::runtime_error when a loss goes non-finite.
CrossModalPair train_pair(const std::vector<CoupleRef>& subset, const TrainConfig& cfg);

struct PredictionCouple {
    nn::Tensor flow;   // p_O: {2, H, W}, raw pixels/frame
    nn::Tensor frame;  // p_F: {1, H, W}, [-1, 1]
};

PredictionCouple predict_couple(const CrossModalPair& pair, const nn::Tensor& frame,
                                const nn::Tensor& flow);

struct ScoreMap {
    nn::Tensor grid;           // {h, w}, entries in (0,1)
    double mean_score = 0.0;
};

struct DistanceMap {
    nn::Tensor grid;           // {h, w}, entries in [0,1]
    double mean_score = 0.0;
};

// sigmoid of the discriminator's logit map; inputs in network units
// (normalized flow), single sample {C, H, W}
ScoreMap score_map(const DiscriminatorNet& d, const nn::Tensor& cond, const nn::Tensor& target);

// elementwise |obs - pred| per direction, then the two directions averaged
DistanceMap fuse_distance(const ScoreMap& obs_fo, const ScoreMap& pred_fo,
                          const ScoreMap& obs_of, const ScoreMap& pred_of);

// Per direction: |score(real cond, real target) - score(real cond, generated
// target)| elementwise; the two directions' maps averaged. Raw-unit inputs.
DistanceMap distance_map(const CrossModalPair& pair, const nn::Tensor& frame,
                         const nn::Tensor& flow);

nn::Tensor normalize_flow(const nn::Tensor& flow, float max_speed);

}  // namespace hsaw::gan
