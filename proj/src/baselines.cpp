#include "sesa/baselines.hpp"

#include "sesa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace sesa {

namespace {

std::vector<double> observed_column(const Dataset& ds, Eigen::Index j) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        if (ds.observed(i, j)) out.push_back(ds.value(i, j));
    }
    return out;
}

void require_observed(const Dataset& ds, Eigen::Index j, const std::vector<double>& values) {
    if (values.empty() && ds.mask().col(j).count() != ds.rows()) {
        throw InputError("column '" + ds.spec(j).name + "' is fully missing; cannot impute it");
    }
}

template <typename Fill>
Imputed fill_columns(const Dataset& ds, Fill fill) {
    Matrix candidate = Matrix::Zero(ds.rows(), ds.cols());
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        if (ds.mask().col(j).count() == ds.rows()) continue;
        std::vector<double> values = observed_column(ds, j);
        require_observed(ds, j, values);
        candidate.col(j).setConstant(fill(j, values));
    }
    return merge_observed(ds, candidate);
}

/// Summed in sorted order so the result does not depend on row order.
double column_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

Imputed mean_impute(const Dataset& ds) {
    return fill_columns(ds, [](Eigen::Index, const std::vector<double>& values) { return column_mean(values); });
}

Imputed median_impute(const Dataset& ds) {
    return fill_columns(ds, [&ds](Eigen::Index j, std::vector<double> values) {
        std::sort(values.begin(), values.end());
        const std::size_t m = values.size();
        if (m % 2 == 1) return values[m / 2];
        if (ds.spec(j).is_ordinal()) return values[m / 2 - 1];
        return 0.5 * (values[m / 2 - 1] + values[m / 2]);
    });
}

Imputed knn_impute(const Dataset& ds, int k) {
    if (k <= 0) throw InputError("knn_impute: k must be >= 1");
    const Eigen::Index n = ds.rows();
    const Eigen::Index d = ds.cols();

    std::vector<double> lo(static_cast<std::size_t>(d));
    std::vector<double> span(static_cast<std::size_t>(d));
    std::vector<double> means(static_cast<std::size_t>(d), 0.0);
    for (Eigen::Index j = 0; j < d; ++j) {
        auto values = observed_column(ds, j);
        require_observed(ds, j, values);
        if (values.empty()) continue;
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        lo[static_cast<std::size_t>(j)] = *mn;
        span[static_cast<std::size_t>(j)] = *mx > *mn ? *mx - *mn : 1.0;
        means[static_cast<std::size_t>(j)] = column_mean(values);
    }
    auto scaled = [&](Eigen::Index i, Eigen::Index j) {
        return (ds.value(i, j) - lo[static_cast<std::size_t>(j)]) / span[static_cast<std::size_t>(j)];
    };

    Matrix candidate = Matrix::Zero(n, d);
    std::vector<std::pair<double, Eigen::Index>> dist;
    for (Eigen::Index target = 0; target < n; ++target) {
        if (ds.mask().row(target).count() == d) continue;
        dist.clear();
        for (Eigen::Index other = 0; other < n; ++other) {
            if (other == target) continue;
            double ss = 0.0;
            int shared = 0;
            for (Eigen::Index j = 0; j < d; ++j) {
                if (!ds.observed(target, j) || !ds.observed(other, j)) continue;
                const double diff = scaled(target, j) - scaled(other, j);
                ss += diff * diff;
                ++shared;
            }
            if (shared == 0) continue;
            dist.emplace_back(std::sqrt(ss * static_cast<double>(d) / shared), other);
        }
        std::sort(dist.begin(), dist.end());
        for (Eigen::Index j = 0; j < d; ++j) {
            if (ds.observed(target, j)) continue;
            double sum = 0.0;
            int used = 0;
            for (const auto& [dv, other] : dist) {
                if (used == k) break;
                if (!ds.observed(other, j)) continue;
                sum += ds.value(other, j);
                ++used;
            }
            candidate(target, j) = used > 0 ? sum / used : means[static_cast<std::size_t>(j)];
        }
    }
    return merge_observed(ds, candidate);
}

}  // namespace sesa
