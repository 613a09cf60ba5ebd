#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace speedcp {

// Error taxonomy shared by the library and the CLI exit codes.
struct InvalidInputError : std::runtime_error {
    explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PathStallError : std::runtime_error {
    explicit PathStallError(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64, used to derive independent sub-seeds from one root seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return mix_seed(root ^ mix_seed(stream + 0x5851f42d4c957f2dULL));
}

// Deterministic parallel map: items are chunked by index, each worker writes
// only its own slots, so results do not depend on scheduling.
void parallel_for(int n_items, int jobs, const std::function<void(int)>& fn);

}  // namespace speedcp
