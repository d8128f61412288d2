#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsaw::nn {

// Dense row-major float32 tensor. Image batches use N,C,H,W order.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled
    Tensor(std::vector<int> shape, std::vector<float> values);

    static Tensor scalar(float v) { return Tensor({1}, {v}); }
    static Tensor full(std::vector<int> shape, float v);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool defined() const { return !shape_.empty(); }
    bool is_scalar() const { return numel() == 1; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // 4-d accessors (N,C,H,W)
    float& at(int n, int c, int h, int w) { return data_[static_cast<std::size_t>(offset4(n, c, h, w))]; }
    float at(int n, int c, int h, int w) const { return data_[static_cast<std::size_t>(offset4(n, c, h, w))]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(float v);
    std::string shape_str() const;

private:
    std::int64_t offset4(int n, int c, int h, int w) const {
        return ((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    std::vector<int> shape_;
    std::vector<float> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace hsaw::nn
