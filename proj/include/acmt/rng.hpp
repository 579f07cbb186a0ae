#ifndef ACMT_RNG_HPP
#define ACMT_RNG_HPP

#include <cstdint>
#include <random>
#include <string>

namespace acmt {

// Deterministic random source. All randomness in the project flows through
// explicitly seeded instances; nothing consults global state. normal() uses
// a cacheless Box-Muller so the draw sequence is pinned by the engine alone
// (std::normal_distribution keeps hidden state and is not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Standard normal draw; consumes exactly two engine values.
    double normal();

    // Uniform integer in [0, n), unbiased via rejection.
    int uniform_int(int n);

    // Uniform real on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::string state() const;
    void restore(const std::string& s);

private:
    std::mt19937_64 eng_;
};

// SplitMix64 step; used to derive per-subsystem seeds from one root seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace acmt

#endif
