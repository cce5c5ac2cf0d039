#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mabsa {

// Dense row-major tensor of doubles. Rank is dynamic but everything in this
// project is rank 1 or 2. 64-bit floats throughout so finite-difference
// checks stay sharp.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;  // rank-2 only

    // Flat access.
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    // Rank-2 access.
    double& operator()(std::size_t i, std::size_t j);
    double operator()(std::size_t i, std::size_t j) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    double item() const;  // requires size() == 1
    bool all_finite() const;
    std::string shape_str() const;

    bool requires_grad = false;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

}  // namespace mabsa
