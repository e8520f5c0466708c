#pragma once

#include "parametrix/core/philox.hpp"
#include "parametrix/core/quadrature.hpp"
#include "parametrix/core/types.hpp"

#include <cstdint>

namespace parametrix {

/// How integrals over R^d are discretized. `automatic` picks a tensor
/// Gauss-Hermite rule for d <= 2 and Gaussian importance sampling otherwise.
struct SpatialScheme {
    enum class Kind { automatic, tensor, importance_mc };
    Kind kind = Kind::automatic;
    int nodes = 32;                  // Gauss-Hermite nodes per axis
    std::size_t samples = 20000;     // importance samples
    std::uint64_t seed = 0x5EEDu;    // importance-sampling stream
    double tail_tolerance = 1e-4;    // max share of |mass| allowed on the outer node ring
    double tail_floor = 1e-12;       // outer-ring mass below this is ignored

    [[nodiscard]] bool use_tensor(int d) const {
        if (kind == Kind::tensor) return true;
        if (kind == Kind::importance_mc) return false;
        return d <= 2;
    }
};

/// Integral of f over R^d using the Gaussian proposal N(center, scale^2 I).
/// For the tensor rule, throws QuadratureError when the outermost ring of
/// nodes carries more than `tail_tolerance` of the absolute mass, which means
/// the integrand is wider than the proposal.
template <class F>
double integrate_with_gaussian_proposal(F&& f, const Vec& center, double scale, const SpatialScheme& scheme,
                                        std::uint64_t stream = 0) {
    const int d = static_cast<int>(center.size());
    if (!(scale > 0.0)) throw ArgumentError("spatial integral: proposal scale must be positive");
    if (scheme.use_tensor(d)) {
        const QuadratureRule& rule = gauss_hermite(scheme.nodes);
        const int n = scheme.nodes;
        const double jac = std::pow(scale, d);
        double total = 0.0, abs_total = 0.0, abs_tail = 0.0;
        std::vector<int> idx(d, 0);
        Vec u(d);
        while (true) {
            double w = 1.0;
            bool outer = false;
            for (int k = 0; k < d; ++k) {
                u[k] = rule.nodes[idx[k]];
                w *= rule.weights[idx[k]];
                outer = outer || idx[k] == 0 || idx[k] == n - 1;
            }
            const double contrib = w * std::exp(0.5 * u.squaredNorm()) * f(Vec(center + scale * u));
            total += contrib;
            abs_total += std::abs(contrib);
            if (outer) abs_tail += std::abs(contrib);
            int k = 0;
            while (k < d && ++idx[k] == n) idx[k++] = 0;
            if (k == d) break;
        }
        if (!std::isfinite(total)) throw QuadratureError("spatial integral: non-finite integrand");
        if (abs_total > 0.0 && abs_tail > scheme.tail_tolerance * abs_total && jac * abs_tail > scheme.tail_floor)
            throw QuadratureError("spatial integral: tail truncation check failed (outer ring share " +
                                  std::to_string(abs_tail / abs_total) + ")");
        return jac * total;
    }
    NormalStream normals(scheme.seed, stream);
    const double log_norm = 0.5 * d * std::log(2.0 * kPi) + d * std::log(scale);
    double total = 0.0;
    Vec u(d);
    for (std::size_t i = 0; i < scheme.samples; ++i) {
        for (int k = 0; k < d; ++k) u[k] = normals.next();
        const double q = std::exp(-0.5 * u.squaredNorm() - log_norm);
        total += f(Vec(center + scale * u)) / q;
    }
    if (!std::isfinite(total)) throw QuadratureError("spatial integral: non-finite integrand");
    return total / static_cast<double>(scheme.samples);
}

}  // namespace parametrix
