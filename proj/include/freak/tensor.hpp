#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "freak/error.hpp"

namespace freak {

// Dense row-major tensor. Rank is dynamic but in practice stays <= 4:
// [C,H,W] for single feature maps and [N,C,H,W] inside the tape.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(numel_of(shape_)), T{});
    }

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != numel_of(shape_))
            throw ContractViolation("tensor data size does not match shape");
    }

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Rank-3 accessor [C,H,W].
    T& at(int c, int h, int w) {
        return data_[static_cast<size_t>((static_cast<int64_t>(c) * shape_[1] + h) * shape_[2] + w)];
    }
    const T& at(int c, int h, int w) const {
        return data_[static_cast<size_t>((static_cast<int64_t>(c) * shape_[1] + h) * shape_[2] + w)];
    }

    // Rank-4 accessor [N,C,H,W].
    T& at(int n, int c, int h, int w) {
        return data_[static_cast<size_t>(
            ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at(int n, int c, int h, int w) const {
        return data_[static_cast<size_t>(
            ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    // Same storage, new shape; element count must match.
    Tensor reshaped(std::vector<int> shape) const {
        if (numel_of(shape) != numel())
            throw ContractViolation("reshape changes element count");
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out = Tensor<U>(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

    static int64_t numel_of(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ContractViolation("negative tensor dimension");
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

}  // namespace freak
