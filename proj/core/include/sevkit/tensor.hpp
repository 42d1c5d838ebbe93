#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sevkit {

/// Dense rank-4 array in (batch, channels, height, width) row-major order.
/// Float is the working precision; the double instantiation exists for
/// oracle cross-checks and the homogeneity auditor.
template <typename T>
class TensorT {
public:
    TensorT() : dims_{0, 0, 0, 0} {}
    TensorT(std::size_t n, std::size_t c, std::size_t h, std::size_t w)
        : dims_{n, c, h, w}, data_(n * c * h * w, T(0)) {}

    static TensorT full(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T value) {
        TensorT t(n, c, h, w);
        for (auto& v : t.data_) v = value;
        return t;
    }
    static TensorT zeros_like(const TensorT& other) {
        return TensorT(other.n(), other.c(), other.h(), other.w());
    }

    std::size_t n() const { return dims_[0]; }
    std::size_t c() const { return dims_[1]; }
    std::size_t h() const { return dims_[2]; }
    std::size_t w() const { return dims_[3]; }
    const std::array<std::size_t, 4>& shape() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t in, std::size_t ic, std::size_t iy, std::size_t ix) {
        return data_[((in * dims_[1] + ic) * dims_[2] + iy) * dims_[3] + ix];
    }
    T at(std::size_t in, std::size_t ic, std::size_t iy, std::size_t ix) const {
        return data_[((in * dims_[1] + ic) * dims_[2] + iy) * dims_[3] + ix];
    }

    bool same_shape(const TensorT& other) const { return dims_ == other.dims_; }

    void fill(T value) {
        for (auto& v : data_) v = value;
    }

    TensorT& operator+=(const TensorT& other);
    TensorT& operator-=(const TensorT& other);
    TensorT& operator*=(T k);

    bool all_finite() const;
    double sum() const;       // accumulated in double
    double l2_norm() const;   // accumulated in double
    T max_abs() const;

private:
    std::array<std::size_t, 4> dims_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& src) {
    TensorT<To> dst(src.n(), src.c(), src.h(), src.w());
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<To>(src[i]);
    return dst;
}

template <typename T>
TensorT<T> operator+(TensorT<T> a, const TensorT<T>& b) {
    a += b;
    return a;
}
template <typename T>
TensorT<T> operator-(TensorT<T> a, const TensorT<T>& b) {
    a -= b;
    return a;
}
template <typename T>
TensorT<T> operator*(TensorT<T> a, T k) {
    a *= k;
    return a;
}
template <typename T>
TensorT<T> operator*(T k, TensorT<T> a) {
    a *= k;
    return a;
}

std::string shape_string(const std::array<std::size_t, 4>& dims);

/// Throws std::invalid_argument naming both shapes when they differ.
template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op);

// Binary serialization: magic "EQT1", four little-endian uint32 dims
// (n, c, h, w), then raw little-endian float32 payload. The double
// instantiation narrows to float32 on disk.
template <typename T>
void save_tensor(const TensorT<T>& t, std::ostream& out);
template <typename T>
TensorT<T> load_tensor_as(std::istream& in);
Tensor load_tensor(std::istream& in);

void save_tensor_file(const Tensor& t, const std::string& path);
Tensor load_tensor_file(const std::string& path);

}  // namespace sevkit
