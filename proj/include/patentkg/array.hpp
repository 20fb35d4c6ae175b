#pragma once

// Dense row-major 64-bit float arrays: the value type behind all encoder
// and training math.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "patentkg/common.hpp"

namespace patentkg {

struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Array() = default;
    Array(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != element_count(shape))
            throw shape_error("Array: data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_string(shape));
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw shape_error("Array: zero dimension in shape " + shape_string(s));
            n *= d;
        }
        return n;
    }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

    static Array zeros(std::vector<std::size_t> s) {
        std::size_t n = element_count(s);
        return Array(std::move(s), std::vector<double>(n, 0.0));
    }

    static Array vector_of(std::vector<double> d) {
        std::size_t n = d.size();
        return Array({n}, std::move(d));
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const {
        if (rank() != 2) throw shape_error("Array: rows() on rank-" + std::to_string(rank()));
        return shape[0];
    }
    std::size_t cols() const {
        if (rank() != 2) throw shape_error("Array: cols() on rank-" + std::to_string(rank()));
        return shape[1];
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    // Row view of a rank-2 array, copied out.
    std::vector<double> row(std::size_t r) const {
        std::size_t w = cols();
        return std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(r * w),
                                   data.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_finite(const std::string& who) const {
        if (!all_finite()) throw numeric_error(who + ": non-finite value in input");
    }

    bool operator==(const Array& other) const {
        return shape == other.shape && data == other.data;
    }
};

inline void require_same_shape(const Array& a, const Array& b, const std::string& who) {
    if (a.shape != b.shape)
        throw shape_error(who + ": shape mismatch " + Array::shape_string(a.shape) + " vs " +
                          Array::shape_string(b.shape));
}

}  // namespace patentkg
