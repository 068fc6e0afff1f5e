#include "sesa/missingness.hpp"

#include "sesa/error.hpp"
#include "sesa/random.hpp"

#include <cmath>
#include <numeric>

namespace sesa {

Mask mcar_selection(Eigen::Index rows, Eigen::Index cols, const std::vector<Eigen::Index>& columns,
                    double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw InputError("missing rate must lie in [0, 1), got " + std::to_string(rate));
    }
    const auto width = static_cast<std::uint64_t>(columns.size());
    const std::uint64_t total = static_cast<std::uint64_t>(rows) * width;
    const auto pick = static_cast<std::uint64_t>(std::llround(rate * static_cast<double>(total)));

    std::vector<std::uint64_t> cells(total);
    std::iota(cells.begin(), cells.end(), std::uint64_t{0});
    CounterRng rng(seed);
    for (std::uint64_t k = 0; k < pick; ++k) {
        const std::uint64_t j = k + rng.below(total - k);
        std::swap(cells[k], cells[j]);
    }

    Mask removed = Mask::Constant(rows, cols, false);
    for (std::uint64_t k = 0; k < pick; ++k) {
        const auto row = static_cast<Eigen::Index>(cells[k] / width);
        const auto col = columns[static_cast<std::size_t>(cells[k] % width)];
        removed(row, col) = true;
    }
    return removed;
}

MaskedData apply_mcar(const Dataset& ds, const MaskPlan& plan) {
    std::vector<Eigen::Index> columns;
    if (plan.scope.empty()) {
        columns.resize(static_cast<std::size_t>(ds.cols()));
        std::iota(columns.begin(), columns.end(), Eigen::Index{0});
    } else {
        std::vector<bool> seen(static_cast<std::size_t>(ds.cols()), false);
        for (const auto& name : plan.scope) {
            auto j = ds.find_column(name);
            if (!j) throw InputError("mask scope names unknown column '" + name + "'");
            seen[static_cast<std::size_t>(*j)] = true;
        }
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            if (seen[static_cast<std::size_t>(j)]) columns.push_back(j);
        }
    }
    for (auto j : columns) {
        if (ds.mask().col(j).count() != ds.rows()) {
            throw InputError("apply_mcar expects complete data, column '" + ds.spec(j).name +
                             "' already has missing cells");
        }
    }
    Mask removed = mcar_selection(ds.rows(), ds.cols(), columns, plan.rate, plan.seed);
    Mask mask = ds.mask();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (removed(i, j)) mask(i, j) = false;
        }
    }
    return {ds.with_mask(mask), ds, std::move(removed)};
}

}  // namespace sesa
