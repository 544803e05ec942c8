#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace gasc {

// Seeded RNG with hand-rolled distributions so that identical seeds give
// identical streams regardless of the standard library in use.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Gamma(shape, rate) via Marsaglia-Tsang
    double gamma(double shape, double rate) {
        if (shape <= 0.0 || rate <= 0.0)
            throw std::invalid_argument("gamma: shape and rate must be positive");
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v / rate;
        }
    }

    // index draw from normalized probabilities
    int categorical(std::span<const double> probs) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        return static_cast<int>(uniform() * n) % n;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace gasc
