#include "hsaw/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hsaw::nn {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

static void check_dims(const std::vector<int>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("tensor dimensions must be positive, got " +
                                        shape_to_string(shape));
        }
    }
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    check_dims(shape_);
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    check_dims(shape_);
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(float v) {
    for (float& x : data_) x = v;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

}  // namespace hsaw::nn
