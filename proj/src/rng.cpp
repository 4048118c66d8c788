#include "lowrank/rng.hpp"

#include <cmath>

namespace lowrank {

double sample_normal(SplitMix64& rng) {
    // Box-Muller; u1 bounded away from zero to keep log finite.
    const double u1 = rng.next_double() + 0x1.0p-54;
    const double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

double sample_gamma(SplitMix64& rng, double alpha) {
    if (alpha < 1.0) {
        const double u = rng.next_double() + 0x1.0p-54;
        return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = sample_normal(rng);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.next_double() + 0x1.0p-54;
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

}  // namespace lowrank
