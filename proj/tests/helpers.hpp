#pragma once

#include <cmath>
#include <random>

#include "snf/energy_net.hpp"

namespace snf::test {

inline Vec vec(std::initializer_list<double> v)
{
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

inline Vec random_vec(int n, std::mt19937_64& rng, double scale = 1.0)
{
    std::uniform_real_distribution<double> d(-scale, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = d(rng);
    }
    return v;
}

inline double max_rel(const Vec& a, const Vec& b, double floor = 1e-8)
{
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

} // namespace snf::test
