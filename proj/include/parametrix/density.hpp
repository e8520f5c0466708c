#pragma once

#include "parametrix/core/types.hpp"

#include <functional>
#include <string>

namespace parametrix {

enum class Provenance { frozen, series, oracle, exact };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::frozen: return "frozen";
        case Provenance::series: return "series";
        case Provenance::oracle: return "oracle";
        case Provenance::exact: return "exact";
    }
    return "unknown";
}

/// Any evaluable density-like map (s, x, t, y) -> value. Series fields may be
/// negative in the tails; exact and oracle fields are nonnegative.
struct DensityField {
    using Evaluator = std::function<double(double, const Vec&, double, const Vec&)>;

    Evaluator evaluate;
    Provenance provenance = Provenance::exact;
    std::string label;

    double operator()(double s, const Vec& x, double t, const Vec& y) const { return evaluate(s, x, t, y); }
};

}  // namespace parametrix
