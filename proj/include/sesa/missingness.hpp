#pragma once

#include "sesa/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sesa {

/// MCAR masking plan. An empty scope means every column.
struct MaskPlan {
    double rate = 0.3;
    std::uint64_t seed = 0;
    std::vector<std::string> scope;
};

struct MaskedData {
    Dataset masked;
    Dataset truth;
    /// true where a cell was removed by this plan.
    Mask removed;
};

/// Removes exactly round(rate * N) in-scope cells, chosen uniformly without
/// replacement by a partial Fisher-Yates shuffle driven by CounterRng(seed).
/// Cells are enumerated row-major over in-scope columns, so the selection is
/// a pure function of (shape, scope, rate, seed).
MaskedData apply_mcar(const Dataset& ds, const MaskPlan& plan);

/// Just the selection, for callers that do not hold a Dataset.
Mask mcar_selection(Eigen::Index rows, Eigen::Index cols, const std::vector<Eigen::Index>& columns,
                    double rate, std::uint64_t seed);

}  // namespace sesa
