#pragma once

#include "parametrix/core/types.hpp"

#include <map>
#include <mutex>
#include <vector>

namespace parametrix {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

inline QuadratureRule compute_gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

// Golub-Welsch for the probabilists' Hermite weight exp(-u^2/2).
inline QuadratureRule compute_gauss_hermite(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mass = std::sqrt(2.0 * kPi);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = eig.eigenvalues()[i];
        const double v0 = eig.eigenvectors()(0, i);
        rule.weights[i] = mass * v0 * v0;
    }
    // Symmetrize to remove eigen-solver round-off.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

template <class Make>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, int n, Make make) {
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make(n)).first;
    return it->second;
}

}  // namespace detail

/// Gauss-Legendre rule on [-1, 1].
inline const QuadratureRule& gauss_legendre(int n) {
    if (n < 1) throw ArgumentError("gauss_legendre: need at least one node");
    static std::map<int, QuadratureRule> cache;
    return detail::cached_rule(cache, n, detail::compute_gauss_legendre);
}

/// Gauss-Hermite rule for the weight exp(-u^2/2) on the real line
/// (weights sum to sqrt(2 pi)).
inline const QuadratureRule& gauss_hermite(int n) {
    if (n < 1) throw ArgumentError("gauss_hermite: need at least one node");
    static std::map<int, QuadratureRule> cache;
    return detail::cached_rule(cache, n, detail::compute_gauss_hermite);
}

/// Iterates over the tensor product of a 1-d rule in `dim` dimensions.
/// f(point, weight) receives the product node and weight.
template <class F>
void for_each_tensor_node(const QuadratureRule& rule, int dim, F&& f) {
    const int n = static_cast<int>(rule.nodes.size());
    std::vector<int> idx(dim, 0);
    Vec point(dim);
    while (true) {
        double w = 1.0;
        for (int k = 0; k < dim; ++k) {
            point[k] = rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        f(point, w);
        int k = 0;
        while (k < dim && ++idx[k] == n) idx[k++] = 0;
        if (k == dim) break;
    }
}

}  // namespace parametrix
