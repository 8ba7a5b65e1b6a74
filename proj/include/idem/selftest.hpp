#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace idem {

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Statistical and numerical invariant checks: finite-difference gradient
// agreement, chi-square fit of weighted sampling, slip frequencies,
// transition-model normalization, and the closed-form weight / learning-rate
// identities. Deterministic for a fixed seed.
std::vector<SelftestResult> run_selftests(std::uint64_t seed = 20240101);

bool all_passed(const std::vector<SelftestResult>& results);

} // namespace idem
