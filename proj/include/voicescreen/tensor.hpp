#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "voicescreen/error.hpp"

namespace voicescreen::nn {

class ShapeMismatch : public DataError {
public:
    using DataError::DataError;
};

class NanLoss : public NumericError {
public:
    using NumericError::NumericError;
};

// Row-major dense tensor of 64-bit reals.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (element_count(shape) != data.size())
            throw ShapeMismatch("tensor data does not match shape");
    }

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                               std::multiplies<>());
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        const std::size_t n = element_count(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    std::size_t size() const { return data.size(); }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

// Named view into a flat parameter vector; the serialization manifest entry.
struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0; // in doubles, into the flat parameter blob

    std::size_t size() const { return Tensor::element_count(shape); }
};

} // namespace voicescreen::nn
