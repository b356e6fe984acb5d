#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dra2rm {

// Seeded generator used everywhere randomness is needed. All draws go through
// the helpers below so that a seed pins down the full sample sequence.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // uniform in [0,1)
    double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    int below(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // standard normal via Box-Muller; second value cached
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * u01() - 1.0;
            v = 2.0 * u01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // index drawn according to the (normalized) weights
    int discrete(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double r = u01() * total;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            r -= w[i];
            if (r < 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace dra2rm
