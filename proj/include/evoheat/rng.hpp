#pragma once

#include <cstdint>
#include <random>

namespace evoheat {

/// Independent normal stream for one path, fixed by (master seed, path index)
/// so results never depend on how paths are distributed over workers.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          0x9e3779b9u};
        engine_.seed(seq);
    }

    double normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace evoheat
