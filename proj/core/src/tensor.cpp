#include "sevkit/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sevkit {

std::string shape_string(const std::array<std::size_t, 4>& dims) {
    std::ostringstream os;
    os << "(" << dims[0] << "," << dims[1] << "," << dims[2] << "," << dims[3] << ")";
    return os.str();
}

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

template <typename T>
TensorT<T>& TensorT<T>::operator+=(const TensorT& other) {
    require_same_shape(*this, other, "tensor add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

template <typename T>
TensorT<T>& TensorT<T>::operator-=(const TensorT& other) {
    require_same_shape(*this, other, "tensor sub");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

template <typename T>
TensorT<T>& TensorT<T>::operator*=(T k) {
    for (auto& v : data_) v *= k;
    return *this;
}

template <typename T>
bool TensorT<T>::all_finite() const {
    for (const auto& v : data_) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

template <typename T>
double TensorT<T>::sum() const {
    double acc = 0.0;
    for (const auto& v : data_) acc += static_cast<double>(v);
    return acc;
}

template <typename T>
double TensorT<T>::l2_norm() const {
    double acc = 0.0;
    for (const auto& v : data_) acc += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(acc);
}

template <typename T>
T TensorT<T>::max_abs() const {
    T m = T(0);
    for (const auto& v : data_) {
        T a = v < T(0) ? -v : v;
        if (a > m) m = a;
    }
    return m;
}

namespace {

constexpr char kTensorMagic[4] = {'E', 'Q', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("tensor load: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

template <typename T>
void save_tensor(const TensorT<T>& t, std::ostream& out) {
    out.write(kTensorMagic, 4);
    for (std::size_t d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) {
        float f = static_cast<float>(t[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(out, bits);
    }
}

template <typename T>
TensorT<T> load_tensor_as(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kTensorMagic, 4) != 0) {
        throw std::runtime_error("tensor load: bad magic, expected EQT1");
    }
    std::uint32_t n = read_u32(in), c = read_u32(in), h = read_u32(in), w = read_u32(in);
    TensorT<T> t(n, c, h, w);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits = read_u32(in);
        float f;
        std::memcpy(&f, &bits, 4);
        t[i] = static_cast<T>(f);
    }
    if (!in) throw std::runtime_error("tensor load: truncated payload");
    return t;
}

Tensor load_tensor(std::istream& in) { return load_tensor_as<float>(in); }

void save_tensor_file(const Tensor& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    save_tensor(t, out);
}

Tensor load_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return load_tensor(in);
}

template class TensorT<float>;
template class TensorT<double>;
template void require_same_shape<float>(const Tensor&, const Tensor&, const char*);
template void require_same_shape<double>(const TensorD&, const TensorD&, const char*);
template void save_tensor<float>(const Tensor&, std::ostream&);
template void save_tensor<double>(const TensorD&, std::ostream&);
template Tensor load_tensor_as<float>(std::istream&);
template TensorD load_tensor_as<double>(std::istream&);

}  // namespace sevkit
