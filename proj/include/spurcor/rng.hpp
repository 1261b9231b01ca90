#ifndef SPURCOR_RNG_HPP
#define SPURCOR_RNG_HPP

#include <cstdint>
#include <string_view>

namespace spurcor {

// splitmix64, used for seeding and for deriving labeled sub-streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a child seed from (base seed, label, index). All module seeds in a
// run come from this scheme so one run seed reproduces everything.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

// xoshiro256++ -- small, fast, deterministic across platforms.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform on (0,1), 53-bit resolution, never exactly 0 or 1
    double next_uniform();

    // standard normal via the inverse CDF
    double next_normal();

private:
    std::uint64_t s_[4];
};

// Standard normal distribution function and its inverse (Wichura AS241,
// accurate to double precision).
double normal_cdf(double x);
double normal_tail(double x);     // 1 - Phi(x), accurate far in the tail
double normal_quantile(double p); // Phi^{-1}(p)

// Upper tail pr(T > t) of Student's t with df degrees of freedom, accurate
// far in the tail (regularized incomplete beta).
double student_t_tail(double t, double df);

} // namespace spurcor

#endif
