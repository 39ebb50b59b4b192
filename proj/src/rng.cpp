#include "ctopt/rng.hpp"

#include <cmath>

namespace ctopt {

double CounterRng::next_gaussian() {
    // Box-Muller; u1 in (0, 1] so the log stays finite.
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

long sample_poisson(double mean, CounterRng& rng) {
    if (mean <= 0.0) {
        return 0;
    }
    if (mean < 30.0) {
        const double limit = std::exp(-mean);
        long count = -1;
        double product = 1.0;
        do {
            product *= rng.next_double();
            ++count;
        } while (product > limit);
        return count;
    }
    // Gaussian approximation; unbiased in the mean, which is all the noise
    // model promises at large photon counts.
    const double value = mean + std::sqrt(mean) * rng.next_gaussian();
    return value <= 0.0 ? 0 : static_cast<long>(std::llround(value));
}

} // namespace ctopt
