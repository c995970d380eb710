#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace nie {

/// Dense row-major tensor of doubles. All model math runs in double so the
/// finite-difference gradient checks are not fighting float32 noise; the
/// model file stores float32 (see model.hpp).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(element_count(shape), 0.0);
    }
    Tensor(std::initializer_list<std::size_t> s) : Tensor(std::vector<std::size_t>(s)) {}

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;
using EVecMap = Eigen::Map<Eigen::VectorXd>;
using ECVecMap = Eigen::Map<const Eigen::VectorXd>;

/// 2-D Eigen view (rows x cols per the tensor's own shape).
inline EMap mat(Tensor& t) {
    return EMap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline ECMap mat(const Tensor& t) {
    return ECMap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

/// Flat vector view over all elements.
inline EVecMap vec(Tensor& t) { return EVecMap(t.data.data(), static_cast<Eigen::Index>(t.size())); }
inline ECVecMap vec(const Tensor& t) {
    return ECVecMap(t.data.data(), static_cast<Eigen::Index>(t.size()));
}

inline void check_shape(const Tensor& t, std::initializer_list<std::size_t> expected, const char* what) {
    if (t.shape != std::vector<std::size_t>(expected))
        throw std::invalid_argument(std::string(what) + ": unexpected tensor shape");
}

}  // namespace nie
