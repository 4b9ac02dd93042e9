#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace eve {

// Dense row-major tensor of 64-bit floats. Shapes are plain extent lists;
// rank is whatever the caller needs (we use up to rank 3).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)) {
        data.assign(count(shape), fill);
    }

    static Tensor scalar(double v) {
        Tensor t(std::vector<std::size_t>{});
        t.data.assign(1, v);
        return t;
    }

    static Tensor from(std::vector<std::size_t> s, std::vector<double> d) {
        if (count(s) != d.size())
            throw std::invalid_argument("tensor: shape/data size mismatch");
        Tensor t;
        t.shape = std::move(s);
        t.data = std::move(d);
        return t;
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }

    std::size_t size() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1 && shape.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // Scalar access; throws unless the tensor holds exactly one value.
    double item() const {
        if (data.size() != 1) throw std::logic_error("tensor: item() on non-scalar");
        return data[0];
    }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void check_finite(const std::string& what) const {
        if (!finite())
            throw std::runtime_error("non-finite value in " + what);
    }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape;
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace eve
