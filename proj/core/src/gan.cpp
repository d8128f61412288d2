#include "hsaw/gan.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "hsaw/rng.hpp"

namespace hsaw::gan {

namespace {

constexpr float kLeakySlope = 0.2f;

void collect(const ConvLayer& l, std::vector<nn::Parameter*>& out) {
    out.push_back(l.w.get());
    out.push_back(l.b.get());
    if (l.gamma) out.push_back(l.gamma.get());
    if (l.beta) out.push_back(l.beta.get());
}

nn::Var enc_block(const ConvLayer& l, const nn::Var& x, bool norm) {
    nn::Var y = nn::conv2d(x, l.w->var(), l.b->var(), 2, 1);
    if (norm) y = nn::instance_norm(y, l.gamma->var(), l.beta->var());
    return nn::leaky_relu(y, kLeakySlope);
}

nn::Var dec_block(const ConvLayer& l, const nn::Var& x) {
    nn::Var y = nn::deconv2d(x, l.w->var(), l.b->var(), 2, 1);
    y = nn::instance_norm(y, l.gamma->var(), l.beta->var());
    return nn::leaky_relu(y, kLeakySlope);
}

void check_image(const nn::Tensor& t, int channels, const char* who) {
    if (t.ndim() != 3 || t.dim(0) != channels) {
        throw std::invalid_argument(std::string(who) + ": expected {" + std::to_string(channels) +
                                    ",H,W}, got " + t.shape_str());
    }
    const int h = t.dim(1), w = t.dim(2);
    if (h % 8 != 0 || w % 8 != 0 || h < 16 || w < 16) {
        throw std::invalid_argument(std::string(who) +
                                    ": H and W must be multiples of 8, at least 16, got " +
                                    t.shape_str());
    }
}

nn::Tensor batched(const nn::Tensor& chw) {
    std::vector<int> s{1, chw.dim(0), chw.dim(1), chw.dim(2)};
    return nn::Tensor(s, chw.values());
}

nn::Tensor squeeze_batch(const nn::Tensor& nchw) {
    std::vector<int> s{nchw.dim(1), nchw.dim(2), nchw.dim(3)};
    return nn::Tensor(s, nchw.values());
}

double mean64(const nn::Tensor& t) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < t.numel(); ++i) acc += t[i];
    return t.numel() > 0 ? acc / static_cast<double>(t.numel()) : 0.0;
}

}  // namespace

const char* direction_name(Direction d) {
    return d == Direction::FrameToFlow ? "fo" : "of";
}

std::vector<nn::Parameter*> GeneratorNet::parameters() const {
    std::vector<nn::Parameter*> out;
    for (const ConvLayer* l : {&e1, &e2, &e3, &d1, &d2, &d3}) collect(*l, out);
    return out;
}

std::vector<nn::Parameter*> DiscriminatorNet::parameters() const {
    std::vector<nn::Parameter*> out;
    for (const ConvLayer* l : {&c1, &c2, &c3, &head}) collect(*l, out);
    return out;
}

std::vector<nn::Parameter*> CrossModalPair::parameters() const {
    std::vector<nn::Parameter*> out;
    for (const auto* nets : {&fo, &of}) {
        for (nn::Parameter* p : nets->g.parameters()) out.push_back(p);
        for (nn::Parameter* p : nets->d.parameters()) out.push_back(p);
    }
    return out;
}

nn::Var GeneratorNet::forward(const nn::Var& x) const {
    const nn::Tensor& t = x.value();
    if (t.ndim() != 4 || t.dim(1) != in_ch) {
        throw std::invalid_argument("generator: expected {B," + std::to_string(in_ch) +
                                    ",H,W}, got " + t.shape_str());
    }
    nn::Var a1 = enc_block(e1, x, false);
    nn::Var a2 = enc_block(e2, a1, true);
    nn::Var a3 = enc_block(e3, a2, true);
    nn::Var u1 = dec_block(d1, a3);
    nn::Var u2 = dec_block(d2, nn::concat_channels(u1, a2));
    nn::Var y = nn::deconv2d(nn::concat_channels(u2, a1), d3.w->var(), d3.b->var(), 2, 1);
    return nn::tanh_act(y);
}

nn::Var DiscriminatorNet::forward_logits(const nn::Var& cond, const nn::Var& target) const {
    if (cond.value().dim(1) != cond_ch || target.value().dim(1) != target_ch) {
        throw std::invalid_argument(std::string("discriminator ") + direction_name(dir) +
                                    ": channel mismatch, got cond " + cond.value().shape_str() +
                                    " target " + target.value().shape_str());
    }
    nn::Var x = nn::concat_channels(cond, target);
    nn::Var h1 = enc_block(c1, x, false);
    nn::Var h2 = enc_block(c2, h1, false);
    nn::Var h3 = enc_block(c3, h2, false);
    return nn::conv2d(h3, head.w->var(), head.b->var(), 1, 0);
}

namespace {

ConvLayer build_layer(const std::string& prefix, const std::string& name, int dim0, int dim1,
                      int k, int out_ch, bool norm, nn::SplitMix64& rng) {
    ConvLayer l;
    l.w = std::make_shared<nn::Parameter>(prefix + "." + name + ".w",
                                          nn::conv_weight_init(dim0, dim1, k, rng));
    l.b = std::make_shared<nn::Parameter>(prefix + "." + name + ".b", nn::Tensor({out_ch}));
    if (norm) {
        l.gamma = std::make_shared<nn::Parameter>(prefix + "." + name + ".gamma",
                                                  nn::Tensor::full({out_ch}, 1.0f));
        l.beta = std::make_shared<nn::Parameter>(prefix + "." + name + ".beta",
                                                 nn::Tensor({out_ch}));
    }
    return l;
}

}  // namespace

GeneratorNet make_generator(Direction dir, std::uint64_t seed) {
    GeneratorNet g;
    g.dir = dir;
    g.in_ch = dir == Direction::FrameToFlow ? 1 : 2;
    g.out_ch = dir == Direction::FrameToFlow ? 2 : 1;
    const std::string prefix = std::string("g_") + direction_name(dir);
    nn::SplitMix64 rng(nn::mix_seed(seed, nn::fnv1a64(prefix.data(), prefix.size())));
    g.e1 = build_layer(prefix, "e1", 16, g.in_ch, 4, 16, false, rng);
    g.e2 = build_layer(prefix, "e2", 32, 16, 4, 32, true, rng);
    g.e3 = build_layer(prefix, "e3", 64, 32, 4, 64, true, rng);
    // deconv weights are laid out {Cin, Cout, k, k}
    g.d1 = build_layer(prefix, "d1", 64, 32, 4, 32, true, rng);
    g.d2 = build_layer(prefix, "d2", 64, 16, 4, 16, true, rng);
    g.d3 = build_layer(prefix, "d3", 32, g.out_ch, 4, g.out_ch, false, rng);
    return g;
}

DiscriminatorNet make_discriminator(Direction dir, std::uint64_t seed) {
    DiscriminatorNet d;
    d.dir = dir;
    d.cond_ch = dir == Direction::FrameToFlow ? 1 : 2;
    d.target_ch = dir == Direction::FrameToFlow ? 2 : 1;
    const std::string prefix = std::string("d_") + direction_name(dir);
    nn::SplitMix64 rng(nn::mix_seed(seed, nn::fnv1a64(prefix.data(), prefix.size())));
    d.c1 = build_layer(prefix, "c1", 16, d.cond_ch + d.target_ch, 4, 16, false, rng);
    d.c2 = build_layer(prefix, "c2", 32, 16, 4, 32, false, rng);
    d.c3 = build_layer(prefix, "c3", 64, 32, 4, 64, false, rng);
    d.head = build_layer(prefix, "head", 1, 64, 1, 1, false, rng);
    return d;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lambda_l1 >= 0.0f)) throw std::invalid_argument("lambda_l1 must be >= 0");
    if (!(adam.lr > 0.0f)) throw std::invalid_argument("lr must be > 0");
    if (!(max_flow_speed > 0.0f)) throw std::invalid_argument("max_flow_speed must be > 0");
}

std::string epoch_csv(const std::vector<EpochStats>& stats) {
    std::string out = "epoch,d_loss,g_loss,l1\n";
    char line[128];
    for (const EpochStats& e : stats) {
        std::snprintf(line, sizeof(line), "%d,%.6g,%.6g,%.6g\n", e.epoch, e.d_loss, e.g_adv, e.g_l1);
        out += line;
    }
    return out;
}

std::vector<CoupleRef> make_couples(const scene::Sequence& seq, const std::vector<int>& indices) {
    std::vector<CoupleRef> out;
    out.reserve(indices.size());
    for (int i : indices) {
        if (i < 0 || i >= seq.size()) {
            throw std::invalid_argument("make_couples: index " + std::to_string(i) +
                                        " outside sequence of " + std::to_string(seq.size()));
        }
        const auto& c = seq.couples[static_cast<std::size_t>(i)];
        out.push_back({&c.frame, &c.flow});
    }
    return out;
}

std::uint64_t subset_fingerprint(const std::vector<CoupleRef>& subset) {
    const std::uint64_t n = subset.size();
    std::uint64_t h = nn::fnv1a64(&n, sizeof n);
    for (const CoupleRef& c : subset) {
        h = nn::fnv1a64(c.frame->data(), sizeof(float) * static_cast<std::size_t>(c.frame->numel()), h);
        h = nn::fnv1a64(c.flow->data(), sizeof(float) * static_cast<std::size_t>(c.flow->numel()), h);
    }
    return h;
}

nn::Tensor normalize_flow(const nn::Tensor& flow, float max_speed) {
    if (!(max_speed > 0.0f)) throw std::invalid_argument("normalize_flow: max_speed must be > 0");
    nn::Tensor out = flow;
    const float inv = 1.0f / max_speed;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= inv;
    return out;
}

namespace {

struct Batch {
    nn::Tensor cond, target;
};

Batch assemble(const std::vector<CoupleRef>& subset, const std::vector<int>& order, int begin,
               int count, Direction dir, float max_flow) {
    const nn::Tensor& f0 = *subset[0].frame;
    const int h = f0.dim(1), w = f0.dim(2);
    const int cc = dir == Direction::FrameToFlow ? 1 : 2;
    const int tc = dir == Direction::FrameToFlow ? 2 : 1;
    Batch b{nn::Tensor({count, cc, h, w}), nn::Tensor({count, tc, h, w})};
    const float inv = 1.0f / max_flow;
    for (int k = 0; k < count; ++k) {
        const CoupleRef& c = subset[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + k)])];
        const std::int64_t fn = c.frame->numel(), on = c.flow->numel();
        if (dir == Direction::FrameToFlow) {
            std::copy_n(c.frame->data(), fn, b.cond.data() + k * fn);
            float* dst = b.target.data() + k * on;
            for (std::int64_t i = 0; i < on; ++i) dst[i] = (*c.flow)[i] * inv;
        } else {
            float* dst = b.cond.data() + k * on;
            for (std::int64_t i = 0; i < on; ++i) dst[i] = (*c.flow)[i] * inv;
            std::copy_n(c.frame->data(), fn, b.target.data() + k * fn);
        }
    }
    return b;
}

std::vector<EpochStats> train_direction(DirectionNets& nets, const std::vector<CoupleRef>& subset,
                                        const TrainConfig& cfg, Direction dir) {
    nn::Adam opt_g(nets.g.parameters(), cfg.adam);
    nn::Adam opt_d(nets.d.parameters(), cfg.adam);
    const int n = static_cast<int>(subset.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochStats> stats;
    stats.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        nn::SplitMix64 rng(nn::mix_seed(cfg.seed, 0xE70C0000ULL + 2ULL * static_cast<std::uint64_t>(epoch) +
                                                      (dir == Direction::FlowToFrame ? 1 : 0)));
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1))]);
        }
        double d_sum = 0.0, adv_sum = 0.0, l1_sum = 0.0;
        int batches = 0;
        for (int begin = 0; begin < n; begin += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - begin);
            Batch b = assemble(subset, order, begin, count, dir, cfg.max_flow_speed);
            nn::Var cond(std::move(b.cond));
            nn::Var target(std::move(b.target));

            nn::Var fake = nets.g.forward(cond);

            // discriminator step on the detached fake
            nn::Var fake_detached(fake.value());
            nn::Var real_logits = nets.d.forward_logits(cond, target);
            nn::Var fake_logits = nets.d.forward_logits(cond, fake_detached);
            nn::Var ones(nn::Tensor::full(real_logits.value().shape(), 1.0f));
            nn::Var zeros(nn::Tensor(real_logits.value().shape()));
            nn::Var d_loss = nn::scale(nn::add(nn::bce_with_logits_loss(real_logits, ones),
                                               nn::bce_with_logits_loss(fake_logits, zeros)),
                                       0.5f);
            nn::backward(d_loss);
            opt_d.step();

            // generator step reuses the attached fake
            nn::Var fake_logits2 = nets.d.forward_logits(cond, fake);
            nn::Var g_adv = nn::bce_with_logits_loss(fake_logits2, ones);
            nn::Var g_l1 = nn::l1_loss(fake, target);
            nn::Var g_total = nn::add(g_adv, nn::scale(g_l1, cfg.lambda_l1));
            nn::backward(g_total);
            opt_g.step();
            for (nn::Parameter* p : nets.d.parameters()) p->zero_grad();

            const double dl = d_loss.value()[0];
            const double ga = g_adv.value()[0];
            const double l1 = g_l1.value()[0];
            if (!std::isfinite(dl) || !std::isfinite(ga) || !std::isfinite(l1)) {
                throw std::runtime_error(std::string("train_pair diverged: direction ") +
                                         direction_name(dir) + ", epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batches) + ": d_loss=" +
                                         std::to_string(dl) + " g_adv=" + std::to_string(ga) +
                                         " l1=" + std::to_string(l1));
            }
            d_sum += dl;
            adv_sum += ga;
            l1_sum += l1;
            ++batches;
        }
        stats.push_back({epoch, d_sum / batches, adv_sum / batches, l1_sum / batches});
    }
    return stats;
}

}  // namespace

CrossModalPair train_pair(const std::vector<CoupleRef>& subset, const TrainConfig& cfg) {
    cfg.validate();
    if (subset.size() < static_cast<std::size_t>(kMinTrainCouples)) {
        throw std::invalid_argument("train_pair: subset has " + std::to_string(subset.size()) +
                                    " couples, need at least " + std::to_string(kMinTrainCouples));
    }
    const nn::Tensor& f0 = *subset[0].frame;
    check_image(f0, 1, "train_pair frame");
    for (const CoupleRef& c : subset) {
        if (!c.frame || !c.flow) throw std::invalid_argument("train_pair: null couple");
        if (!c.frame->same_shape(f0)) {
            throw std::invalid_argument("train_pair: inconsistent frame shapes " +
                                        c.frame->shape_str() + " vs " + f0.shape_str());
        }
        if (c.flow->ndim() != 3 || c.flow->dim(0) != 2 || c.flow->dim(1) != f0.dim(1) ||
            c.flow->dim(2) != f0.dim(2)) {
            throw std::invalid_argument("train_pair: flow shape " + c.flow->shape_str() +
                                        " does not match frame " + f0.shape_str());
        }
    }

    CrossModalPair pair;
    pair.fo = {make_generator(Direction::FrameToFlow, cfg.seed),
               make_discriminator(Direction::FrameToFlow, cfg.seed)};
    pair.of = {make_generator(Direction::FlowToFrame, cfg.seed),
               make_discriminator(Direction::FlowToFrame, cfg.seed)};
    pair.meta.config = cfg;
    pair.meta.subset_fingerprint = subset_fingerprint(subset);
    pair.meta.subset_size = static_cast<int>(subset.size());
    pair.meta.fo_epochs = train_direction(pair.fo, subset, cfg, Direction::FrameToFlow);
    pair.meta.of_epochs = train_direction(pair.of, subset, cfg, Direction::FlowToFrame);
    return pair;
}

PredictionCouple predict_couple(const CrossModalPair& pair, const nn::Tensor& frame,
                                const nn::Tensor& flow) {
    check_image(frame, 1, "predict_couple frame");
    check_image(flow, 2, "predict_couple flow");
    if (frame.dim(1) != flow.dim(1) || frame.dim(2) != flow.dim(2)) {
        throw std::invalid_argument("predict_couple: frame " + frame.shape_str() +
                                    " and flow " + flow.shape_str() + " disagree");
    }
    const float max_flow = pair.meta.config.max_flow_speed;
    nn::Var frame_v(batched(frame));
    nn::Var flow_v(batched(normalize_flow(flow, max_flow)));
    nn::Tensor p_flow = squeeze_batch(pair.fo.g.forward(frame_v).value());
    for (std::int64_t i = 0; i < p_flow.numel(); ++i) p_flow[i] *= max_flow;
    nn::Tensor p_frame = squeeze_batch(pair.of.g.forward(flow_v).value());
    return {std::move(p_flow), std::move(p_frame)};
}

ScoreMap score_map(const DiscriminatorNet& d, const nn::Tensor& cond, const nn::Tensor& target) {
    check_image(cond, d.cond_ch, "score_map cond");
    check_image(target, d.target_ch, "score_map target");
    nn::Var logits = d.forward_logits(nn::Var(batched(cond)), nn::Var(batched(target)));
    const nn::Tensor& lv = logits.value();
    ScoreMap s;
    s.grid = nn::Tensor({lv.dim(2), lv.dim(3)});
    for (std::int64_t i = 0; i < lv.numel(); ++i) {
        const float x = lv[i];
        s.grid[i] = x >= 0.0f ? 1.0f / (1.0f + std::exp(-x)) : std::exp(x) / (1.0f + std::exp(x));
    }
    s.mean_score = mean64(s.grid);
    return s;
}

DistanceMap fuse_distance(const ScoreMap& obs_fo, const ScoreMap& pred_fo,
                          const ScoreMap& obs_of, const ScoreMap& pred_of) {
    for (const ScoreMap* s : {&pred_fo, &obs_of, &pred_of}) {
        if (!s->grid.same_shape(obs_fo.grid)) {
            throw std::invalid_argument("fuse_distance: score map shapes disagree, " +
                                        s->grid.shape_str() + " vs " + obs_fo.grid.shape_str());
        }
    }
    DistanceMap dm;
    dm.grid = nn::Tensor(obs_fo.grid.shape());
    for (std::int64_t i = 0; i < dm.grid.numel(); ++i) {
        dm.grid[i] = 0.5f * (std::abs(obs_fo.grid[i] - pred_fo.grid[i]) +
                             std::abs(obs_of.grid[i] - pred_of.grid[i]));
    }
    dm.mean_score = mean64(dm.grid);
    return dm;
}

DistanceMap distance_map(const CrossModalPair& pair, const nn::Tensor& frame,
                         const nn::Tensor& flow) {
    const float max_flow = pair.meta.config.max_flow_speed;
    const nn::Tensor flow_n = normalize_flow(flow, max_flow);
    PredictionCouple p = predict_couple(pair, frame, flow);
    const nn::Tensor p_flow_n = normalize_flow(p.flow, max_flow);

    const ScoreMap obs_fo = score_map(pair.fo.d, frame, flow_n);
    const ScoreMap pred_fo = score_map(pair.fo.d, frame, p_flow_n);
    const ScoreMap obs_of = score_map(pair.of.d, flow_n, frame);
    const ScoreMap pred_of = score_map(pair.of.d, flow_n, p.frame);
    return fuse_distance(obs_fo, pred_fo, obs_of, pred_of);
}

}  // namespace hsaw::gan
