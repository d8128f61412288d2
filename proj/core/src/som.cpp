#include "hsaw/som.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hsaw/rng.hpp"

namespace hsaw::som {

namespace {

constexpr float kAlphaFinal = 0.01f;
constexpr float kSigmaFinal = 0.5f;

double sq_dist(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

int nearest(const SomGrid& g, const std::vector<float>& x) {
    int best = 0;
    double best_d = sq_dist(g.prototypes[0], x);
    for (int j = 1; j < g.size(); ++j) {
        const double d = sq_dist(g.prototypes[static_cast<std::size_t>(j)], x);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

// value interpolated from start to end on an exponential schedule hitting the
// end exactly at the last epoch
float decayed(float start, float end, int epoch, int epochs) {
    if (epochs <= 1 || start <= end) return start;
    const double t = static_cast<double>(epoch) / (epochs - 1);
    return static_cast<float>(start * std::pow(end / static_cast<double>(start), t));
}

}  // namespace

void SomTrainConfig::validate() const {
    if (rows < 1 || cols < 1) throw std::invalid_argument("som: grid must be at least 1x1");
    if (epochs < 1) throw std::invalid_argument("som: epochs must be >= 1");
    if (!(alpha0 > 0.0f) || alpha0 > 1.0f) throw std::invalid_argument("som: alpha0 must be in (0,1]");
    if (sigma0 != 0.0f && sigma0 < 0.5f) {
        throw std::invalid_argument("som: sigma0 must be >= 0.5 (or 0 for auto)");
    }
}

SomGrid train_som(const std::vector<std::vector<float>>& features, const SomTrainConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(features.size());
    if (n < cfg.rows * cfg.cols) {
        throw std::invalid_argument("som: " + std::to_string(n) + " samples for " +
                                    std::to_string(cfg.rows * cfg.cols) + " neurons");
    }
    const std::size_t dim = features[0].size();
    if (dim == 0) throw std::invalid_argument("som: zero-dimensional features");
    for (const auto& f : features) {
        if (f.size() != dim) throw std::invalid_argument("som: inconsistent feature dims");
        for (float v : f) {
            if (!std::isfinite(v)) throw std::invalid_argument("som: non-finite feature");
        }
    }

    SomGrid g;
    g.rows = cfg.rows;
    g.cols = cfg.cols;
    g.dim = static_cast<int>(dim);
    g.prototypes.reserve(static_cast<std::size_t>(g.size()));
    nn::SplitMix64 init_rng(nn::mix_seed(cfg.seed, 0x50AAULL));
    for (int j = 0; j < g.size(); ++j) {
        g.prototypes.push_back(features[init_rng.next_below(static_cast<std::uint64_t>(n))]);
    }

    const float sigma0 = cfg.sigma0 > 0.0f ? cfg.sigma0 : 0.5f * static_cast<float>(std::max(g.rows, g.cols));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const float alpha = decayed(cfg.alpha0, kAlphaFinal, epoch, cfg.epochs);
        const float sigma = decayed(sigma0, kSigmaFinal, epoch, cfg.epochs);
        const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
        nn::SplitMix64 rng(nn::mix_seed(cfg.seed, 0x50B0ULL + static_cast<std::uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1))]);
        }
        for (int i : order) {
            const std::vector<float>& x = features[static_cast<std::size_t>(i)];
            const int b = nearest(g, x);
            const int br = b / g.cols, bc = b % g.cols;
            for (int j = 0; j < g.size(); ++j) {
                const int dr = j / g.cols - br, dc = j % g.cols - bc;
                const double h = std::exp(-(dr * dr + dc * dc) * inv_two_sigma2);
                const float pull = alpha * static_cast<float>(h);
                if (pull < 1e-5f) continue;
                std::vector<float>& w = g.prototypes[static_cast<std::size_t>(j)];
                for (std::size_t k = 0; k < dim; ++k) w[k] += pull * (x[k] - w[k]);
            }
        }
    }
    g.trained = true;
    return g;
}

int bmu(const SomGrid& grid, const std::vector<float>& x) {
    if (!grid.trained) throw std::invalid_argument("bmu: grid is not trained");
    if (static_cast<int>(x.size()) != grid.dim) {
        throw std::invalid_argument("bmu: feature dim " + std::to_string(x.size()) +
                                    " does not match grid dim " + std::to_string(grid.dim));
    }
    return nearest(grid, x);
}

double quantization_error(const SomGrid& grid, const std::vector<std::vector<float>>& features) {
    if (features.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& f : features) {
        acc += std::sqrt(sq_dist(grid.prototypes[static_cast<std::size_t>(bmu(grid, f))], f));
    }
    return acc / static_cast<double>(features.size());
}

}  // namespace hsaw::som
