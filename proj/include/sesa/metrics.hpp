#pragma once

#include "sesa/dataset.hpp"

#include <json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sesa {

double rmse(std::span<const double> pred, std::span<const double> truth);

struct MapeResult {
    double percent = 0.0;
    /// Pairs dropped because |truth| < 1e-12.
    std::size_t skipped = 0;
};

MapeResult mape(std::span<const double> pred, std::span<const double> truth);

/// 1 - SS_res / SS_tot; throws when truth has zero variance.
double r2(std::span<const double> pred, std::span<const double> truth);

/// Order-1 Wasserstein distance between two empirical distributions,
/// integrated exactly as the area between their CDFs.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

enum class EffectSize {
    /// W / sqrt(sample size): the convention behind published tables.
    statistic_over_sqrt_n,
    /// |z| / sqrt(number of non-zero pairs).
    z_over_sqrt_pairs,
};

struct WilcoxonResult {
    double statistic = 0.0;  // sum of ranks of positive differences
    double p_value = 1.0;
    double effect_size = 0.0;
    double ci_lower = 0.0;  // 95% t interval for the mean of pred
    double ci_upper = 0.0;
    std::size_t n_pairs = 0;
    std::size_t zeros_dropped = 0;
    bool exact = false;
    /// Every difference was zero; p_value is 1 by definition.
    bool degenerate = false;
};

/// Signed-rank test on pred - truth. Zero differences are dropped, ties get
/// midranks. Up to 25 pairs the two-sided p-value is exact over all 2^n
/// sign assignments; beyond that a tie-corrected normal approximation with
/// continuity correction is used. `sample_size` = 0 means pred.size().
WilcoxonResult wilcoxon_signed_rank(std::span<const double> pred, std::span<const double> truth,
                                    std::size_t sample_size = 0,
                                    EffectSize effect = EffectSize::statistic_over_sqrt_n);

/// Midranks of |values| (1-based).
std::vector<double> midranks(std::span<const double> abs_values);

/// Exact two-sided p for rank-sum `statistic` over all sign assignments of
/// `ranks` (ranks must be multiples of 0.5).
double wilcoxon_exact_p(std::span<const double> ranks, double statistic);

/// Normal approximation with tie correction and continuity correction.
double wilcoxon_normal_p(std::span<const double> ranks, double statistic);

double wilcoxon_effect_size(double statistic, std::size_t sample_size);

struct VariableMetrics {
    std::string name;
    std::size_t cells = 0;
    double rmse = 0.0;
    double mape_pct = 0.0;
    std::size_t mape_skipped = 0;
    double r2 = 0.0;
    double wasserstein = 0.0;
    WilcoxonResult wilcoxon;
};

struct AggregateMetrics {
    double rmse = 0.0;
    double mape_pct = 0.0;
    double r2 = 0.0;
    double wasserstein = 0.0;
};

struct EvaluationReport {
    std::vector<VariableMetrics> per_variable;
    AggregateMetrics aggregate;
    std::vector<std::string> excluded;
    std::vector<std::string> warnings;
    nlohmann::json metadata = nlohmann::json::object();
};

struct EvaluateOptions {
    EffectSize effect = EffectSize::statistic_over_sqrt_n;
    /// Run the Wilcoxon test on the whole column instead of imputed cells only.
    bool wilcoxon_whole_column = false;
};

/// Metrics per variable over the cells flagged in `mask`; the aggregate is
/// the unweighted mean over evaluated variables. Metrics that are undefined
/// for a variable (zero-variance truth, all-zero truth for MAPE) are NaN.
EvaluationReport evaluate(const Dataset& imputed, const Dataset& truth, const Mask& mask, std::size_t sample_size,
                          const EvaluateOptions& options = {});

/// Mean of each aggregate and per-variable metric across trials.
EvaluationReport mean_of_reports(const std::vector<EvaluationReport>& reports);

nlohmann::json report_to_json(const EvaluationReport& report);
std::string report_to_csv(const EvaluationReport& report);

}  // namespace sesa
