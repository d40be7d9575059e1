#pragma once

// Dense row-major tensor. Shapes are immutable after construction and every
// op allocates a fresh tensor; images follow the [batch, height, width,
// channels] layout throughout the project.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgin {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
    return DType::f32;
}
template <>
constexpr DType dtype_of<double>() {
    return DType::f64;
}

inline const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

inline std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(checked_numel(shape_), T(0));
    }

    Tensor(std::vector<int> shape, T fill) : shape_(std::move(shape)) {
        data_.assign(checked_numel(shape_), fill);
    }

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_numel(shape_) != static_cast<std::int64_t>(data_.size()))
            throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_to_string(shape_));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor ones(std::vector<int> shape) { return Tensor(std::move(shape), T(1)); }
    static Tensor full(std::vector<int> shape, T v) { return Tensor(std::move(shape), v); }

    static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

    static Tensor identity(int n) {
        Tensor t({n, n});
        for (int i = 0; i < n; ++i) t.data_[static_cast<std::size_t>(i) * n + i] = T(1);
        return t;
    }

    bool empty() const { return data_.empty(); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    DType dtype() const { return dtype_of<T>(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Rank-2 accessor.
    T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    const T& at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    // Rank-3 accessor, [h,w,c].
    T& at(int y, int x, int c) {
        return data_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c];
    }
    const T& at(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c];
    }

    // Rank-4 accessor, [b,h,w,c].
    T& at(int b, int y, int x, int c) {
        return data_[((static_cast<std::size_t>(b) * shape_[1] + y) * shape_[2] + x) * shape_[3] +
                     c];
    }
    const T& at(int b, int y, int x, int c) const {
        return data_[((static_cast<std::size_t>(b) * shape_[1] + y) * shape_[2] + x) * shape_[3] +
                     c];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const { return shape_to_string(shape_); }

    // Copy with a new shape of equal element count.
    Tensor reshaped(std::vector<int> shape) const {
        if (checked_numel(shape) != size())
            throw std::invalid_argument("reshape " + shape_str() + " -> " +
                                        shape_to_string(shape) + ": element count mismatch");
        return Tensor(std::move(shape), data_);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    void add_inplace(const Tensor& o) {
        if (!same_shape(o))
            throw std::invalid_argument("add_inplace shape mismatch " + shape_str() + " vs " +
                                        o.shape_str());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

  private:
    static std::int64_t checked_numel(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d <= 0)
                throw std::invalid_argument("non-positive dimension in shape " +
                                            shape_to_string(shape));
            n *= d;
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

using Tensor64 = Tensor<double>;
using Tensor32 = Tensor<float>;

}  // namespace hgin
