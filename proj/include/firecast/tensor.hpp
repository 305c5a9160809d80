#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "firecast/errors.hpp"

namespace firecast {

// Dense row-major n-d array. Shape fixed at construction.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        std::int64_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw ShapeError("tensor extent must be positive");
            n *= d;
        }
        data_.assign(static_cast<std::size_t>(n), T(0));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    const T& at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    T& at(int c, int i, int j) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
    }
    const T& at(int c, int i, int j) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
    }

    T& at(int o, int c, int i, int j) {
        return data_[((static_cast<std::size_t>(o) * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
    }
    const T& at(int o, int c, int i, int j) const {
        return data_[((static_cast<std::size_t>(o) * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    void add_(const Tensor& other) {
        assert(numel() == other.numel());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    }

    void scale_(T s) {
        for (auto& v : data_) v *= s;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

template <typename T>
void fill_normal(Tensor<T>& t, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
}

template <typename T>
void fill_uniform(Tensor<T>& t, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
}

} // namespace firecast
