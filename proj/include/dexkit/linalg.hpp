#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dexkit/errors.hpp"

namespace dexkit {

using Vec = std::vector<double>;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
    double n = norm(a);
    return n > 0.0 ? a * (1.0 / n) : Vec3{0.0, 0.0, 0.0};
}

// Row-major 3x3 rotation/basis matrix.
struct Mat3 {
    double a[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    Vec3 operator*(const Vec3& v) const {
        return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
                a[3] * v.x + a[4] * v.y + a[5] * v.z,
                a[6] * v.x + a[7] * v.y + a[8] * v.z};
    }
    static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        Mat3 m;
        m.a[0] = c0.x; m.a[1] = c1.x; m.a[2] = c2.x;
        m.a[3] = c0.y; m.a[4] = c1.y; m.a[5] = c2.y;
        m.a[6] = c0.z; m.a[7] = c1.z; m.a[8] = c2.z;
        return m;
    }
};

// Dense row-major matrix, just enough for network parameters and
// actuator/tendon maps.
struct Mat {
    int rows = 0;
    int cols = 0;
    Vec data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
};

// y = M x
inline void matvec(const Mat& m, std::span<const double> x, std::span<double> y) {
    if (static_cast<int>(x.size()) != m.cols || static_cast<int>(y.size()) != m.rows)
        throw ShapeError("matvec: dimension mismatch");
    for (int r = 0; r < m.rows; ++r) {
        const double* w = m.row(r);
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += w[c] * x[c];
        y[r] = acc;
    }
}

// y = M^T x
inline void matvec_transposed(const Mat& m, std::span<const double> x, std::span<double> y) {
    if (static_cast<int>(x.size()) != m.rows || static_cast<int>(y.size()) != m.cols)
        throw ShapeError("matvec_transposed: dimension mismatch");
    for (int c = 0; c < m.cols; ++c) y[c] = 0.0;
    for (int r = 0; r < m.rows; ++r) {
        const double* w = m.row(r);
        const double xr = x[r];
        for (int c = 0; c < m.cols; ++c) y[c] += w[c] * xr;
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace dexkit
