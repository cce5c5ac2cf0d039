#include "mabsa/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mabsa/error.hpp"

namespace mabsa {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows() on tensor of shape " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() on tensor of shape " + shape_str());
    return shape_[1];
}

double& Tensor::operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
}

double Tensor::item() const {
    if (size() != 1) throw UsageError("item() on non-scalar tensor of shape " + shape_str());
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

}  // namespace mabsa
