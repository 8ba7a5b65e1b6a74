#pragma once

#include <cstdint>
#include <functional>

namespace idem {

// splitmix64; used to derive independent sub-seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Runs fn(0..n-1) on up to `threads` worker threads. Tasks must be
// independent; the first exception thrown by any task is rethrown on the
// caller after all workers join.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

} // namespace idem
