#pragma once

#include <cstdint>
#include <vector>

namespace hsaw::som {

// Online Kohonen map over flattened distance-map features. Each neuron is one
// cluster; the grid is small (4x4 default) and the metric is Euclidean.

struct SomTrainConfig {
    int rows = 4;
    int cols = 4;
    int epochs = 40;
    float alpha0 = 0.5f;   // decays exponentially to 0.01 over the epochs
    float sigma0 = 0.0f;   // 0 = auto: max(rows, cols) / 2; decays to 0.5
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument
};

struct SomGrid {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<std::vector<float>> prototypes;  // rows * cols entries
    bool trained = false;

    int size() const { return rows * cols; }
};

// Classic online SOM: prototypes seeded by sampling the features, then per
// epoch every feature pulls its BMU and the Gaussian neighborhood toward it.
// Deterministic given the seed. Requires at least rows * cols samples.
SomGrid train_som(const std::vector<std::vector<float>>& features, const SomTrainConfig& cfg);

// Nearest prototype by Euclidean distance; ties break to the lowest index.
int bmu(const SomGrid& grid, const std::vector<float>& x);

// Mean Euclidean distance from each feature to its BMU prototype.
double quantization_error(const SomGrid& grid, const std::vector<std::vector<float>>& features);

}  // namespace hsaw::som
