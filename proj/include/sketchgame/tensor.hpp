#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace sketchgame {

// Dense row-major float64 array with a dynamic shape.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), fill);
    }

    static long count(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor scalar(double v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }

    static Tensor vec(std::vector<double> v) {
        Tensor t;
        t.shape = {static_cast<int>(v.size())};
        t.data = std::move(v);
        return t;
    }

    int size() const { return static_cast<int>(data.size()); }
    double& operator[](int i) { return data[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    double sum() const {
        double s = 0.0;
        for (double v : data) s += v;
        return s;
    }

    bool has_nan() const {
        for (double v : data)
            if (std::isnan(v) || std::isinf(v)) return true;
        return false;
    }
};

}  // namespace sketchgame
