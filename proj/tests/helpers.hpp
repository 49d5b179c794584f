#pragma once

#include "unilasso/csv.hpp"
#include "unilasso/data.hpp"

#include <fstream>
#include <string>

#include <cmath>
#include <random>

namespace helpers {

using unilasso::Dataset;
using unilasso::Family;
using unilasso::Index;
using unilasso::Matrix;
using unilasso::Vector;

inline Matrix random_matrix(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(n, p);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) m(i, j) = normal(rng);
    }
    return m;
}

inline Vector random_vector(Index n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

/// y = X b + noise with b_j alternating in sign and decaying.
inline Dataset gaussian_data(Index n, Index p, std::uint64_t seed, double noise = 1.0) {
    Dataset d;
    d.features = random_matrix(n, p, seed);
    Vector b(p);
    for (Index j = 0; j < p; ++j) b(j) = (j % 2 == 0 ? 1.0 : -1.0) * 2.0 / (1.0 + static_cast<double>(j));
    d.response = d.features * b + noise * random_vector(n, seed + 7919);
    d.family = Family::gaussian;
    return d;
}

inline Dataset binomial_data(Index n, Index p, std::uint64_t seed) {
    Dataset d = gaussian_data(n, p, seed, 0.0);
    std::mt19937_64 rng(seed + 104729);
    std::uniform_real_distribution<double> unif;
    for (Index i = 0; i < n; ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-0.7 * d.response(i)));
        d.response(i) = unif(rng) < prob ? 1.0 : 0.0;
    }
    d.family = Family::binomial;
    return d;
}

inline double correlation(const Vector& a, const Vector& b) {
    const double ma = a.mean(), mb = b.mean();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        sab += (a(i) - ma) * (b(i) - mb);
        saa += (a(i) - ma) * (a(i) - ma);
        sbb += (b(i) - mb) * (b(i) - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Per-column simple regression of y on (1, x_j) by explicit loops.
inline std::pair<double, double> simple_ls(const Vector& x, const Vector& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        sx += x(i);
        sy += y(i);
        sxx += x(i) * x(i);
        sxy += x(i) * y(i);
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {(sy - slope * sx) / n, slope};
}

/// Header x1..xp,y then one row per observation.
inline void write_csv(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    for (Index j = 0; j < d.p(); ++j) out << 'x' << j + 1 << ',';
    out << "y\n";
    for (Index i = 0; i < d.n(); ++i) {
        for (Index j = 0; j < d.p(); ++j) out << unilasso::format_double(d.features(i, j)) << ',';
        out << unilasso::format_double(d.response(i)) << '\n';
    }
}

}  // namespace helpers
