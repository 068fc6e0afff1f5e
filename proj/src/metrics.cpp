#include "sesa/metrics.hpp"

#include "sesa/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace sesa {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth, const char* what) {
    if (pred.size() != truth.size()) throw InputError(std::string(what) + ": inputs differ in length");
    if (pred.empty()) throw InputError(std::string(what) + ": empty input");
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string number(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "rmse");
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(ss / static_cast<double>(pred.size()));
}

MapeResult mape(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "mape");
    MapeResult r;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (std::abs(truth[i]) < 1e-12) {
            ++r.skipped;
            continue;
        }
        sum += std::abs(pred[i] - truth[i]) / std::abs(truth[i]);
        ++used;
    }
    if (used == 0) throw InputError("mape: every truth value is zero");
    r.percent = 100.0 * sum / static_cast<double>(used);
    return r;
}

double r2(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "r2");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (!(ss_tot > 0.0)) throw InputError("r2: truth has zero variance");
    return 1.0 - ss_res / ss_tot;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InputError("wasserstein_1d: empty input");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size());
    const double nb = static_cast<double>(y.size());
    // Sweep the merged support; between breakpoints both CDFs are constant.
    std::size_t i = 0;
    std::size_t j = 0;
    double total = 0.0;
    double prev = std::min(x.front(), y.front());
    while (i < x.size() || j < y.size()) {
        const double next = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
        const double fa = static_cast<double>(i) / na;
        const double fb = static_cast<double>(j) / nb;
        total += std::abs(fa - fb) * (next - prev);
        while (i < x.size() && x[i] == next) ++i;
        while (j < y.size() && y[j] == next) ++j;
        prev = next;
    }
    return total;
}

std::vector<double> midranks(std::span<const double> abs_values) {
    const std::size_t n = abs_values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return abs_values[l] < abs_values[r]; });
    std::vector<double> ranks(n);
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start;
        while (end + 1 < n && abs_values[order[end + 1]] == abs_values[order[start]]) ++end;
        const double rank = 0.5 * static_cast<double>(start + end) + 1.0;
        for (std::size_t k = start; k <= end; ++k) ranks[order[k]] = rank;
        start = end + 1;
    }
    return ranks;
}

double wilcoxon_exact_p(std::span<const double> ranks, double statistic) {
    const std::size_t n = ranks.size();
    if (n == 0) return 1.0;
    if (n > 62) throw InputError("wilcoxon_exact_p: too many pairs for exact enumeration");
    // Doubled ranks are integers, so the rank-sum distribution is a count table.
    std::vector<std::int64_t> doubled(n);
    std::int64_t top = 0;
    for (std::size_t k = 0; k < n; ++k) {
        doubled[k] = std::llround(2.0 * ranks[k]);
        top += doubled[k];
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(top) + 1, 0);
    counts[0] = 1;
    std::int64_t reach = 0;
    for (auto r : doubled) {
        for (std::int64_t s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        reach += r;
    }
    const std::int64_t w = std::llround(2.0 * statistic);
    std::uint64_t le = 0;
    std::uint64_t ge = 0;
    for (std::int64_t s = 0; s <= top; ++s) {
        if (s <= w) le += counts[static_cast<std::size_t>(s)];
        if (s >= w) ge += counts[static_cast<std::size_t>(s)];
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / total);
}

double wilcoxon_normal_p(std::span<const double> ranks, double statistic) {
    const double n = static_cast<double>(ranks.size());
    if (ranks.empty()) return 1.0;
    const double mean = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    std::vector<double> sorted(ranks.begin(), ranks.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t s = 0; s < sorted.size();) {
        std::size_t e = s;
        while (e < sorted.size() && sorted[e] == sorted[s]) ++e;
        const double t = static_cast<double>(e - s);
        var -= (t * t * t - t) / 48.0;
        s = e;
    }
    if (!(var > 0.0)) return 1.0;
    const double z = std::max(std::abs(statistic - mean) - 0.5, 0.0) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double wilcoxon_effect_size(double statistic, std::size_t sample_size) {
    if (sample_size == 0) throw InputError("wilcoxon effect size: sample size must be positive");
    return statistic / std::sqrt(static_cast<double>(sample_size));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> pred, std::span<const double> truth,
                                    std::size_t sample_size, EffectSize effect) {
    check_pair(pred, truth, "wilcoxon_signed_rank");
    WilcoxonResult r;
    std::vector<double> diffs;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        if (d == 0.0) {
            ++r.zeros_dropped;
        } else {
            diffs.push_back(d);
        }
    }
    r.n_pairs = diffs.size();

    const double m = static_cast<double>(pred.size());
    const double mean = std::accumulate(pred.begin(), pred.end(), 0.0) / m;
    if (pred.size() >= 2) {
        double ss = 0.0;
        for (double v : pred) ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
        const boost::math::students_t dist(m - 1.0);
        const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
        r.ci_lower = mean - t * se;
        r.ci_upper = mean + t * se;
    } else {
        r.ci_lower = r.ci_upper = mean;
    }

    if (diffs.empty()) {
        r.degenerate = true;
        r.p_value = 1.0;
        r.exact = true;
        return r;
    }
    std::vector<double> abs_diffs(diffs.size());
    std::transform(diffs.begin(), diffs.end(), abs_diffs.begin(), [](double v) { return std::abs(v); });
    const std::vector<double> ranks = midranks(abs_diffs);
    for (std::size_t k = 0; k < diffs.size(); ++k) {
        if (diffs[k] > 0.0) r.statistic += ranks[k];
    }
    r.exact = diffs.size() <= 25;
    r.p_value = r.exact ? wilcoxon_exact_p(ranks, r.statistic) : wilcoxon_normal_p(ranks, r.statistic);

    if (effect == EffectSize::statistic_over_sqrt_n) {
        r.effect_size = wilcoxon_effect_size(r.statistic, sample_size == 0 ? pred.size() : sample_size);
    } else {
        const double n = static_cast<double>(diffs.size());
        const double mu = n * (n + 1.0) / 4.0;
        const double sd = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0);
        r.effect_size = std::abs(r.statistic - mu) / sd / std::sqrt(n);
    }
    return r;
}

EvaluationReport evaluate(const Dataset& imputed, const Dataset& truth, const Mask& mask, std::size_t sample_size,
                          const EvaluateOptions& options) {
    if (imputed.rows() != truth.rows() || imputed.cols() != truth.cols() || mask.rows() != truth.rows() ||
        mask.cols() != truth.cols()) {
        throw InputError("evaluate: imputed, truth and mask must share a shape");
    }
    EvaluationReport report;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        std::vector<double> pred;
        std::vector<double> ref;
        for (Eigen::Index i = 0; i < truth.rows(); ++i) {
            if (!mask(i, j)) continue;
            if (!imputed.observed(i, j) || !truth.observed(i, j)) {
                throw InputError("evaluate: evaluated cell is missing in imputed or truth data (column '" +
                                 truth.spec(j).name + "')");
            }
            pred.push_back(imputed.value(i, j));
            ref.push_back(truth.value(i, j));
        }
        const std::string& name = truth.spec(j).name;
        if (pred.empty()) {
            report.excluded.push_back(name);
            continue;
        }
        VariableMetrics vm;
        vm.name = name;
        vm.cells = pred.size();
        vm.rmse = rmse(pred, ref);
        try {
            const auto m = mape(pred, ref);
            vm.mape_pct = m.percent;
            vm.mape_skipped = m.skipped;
        } catch (const InputError&) {
            vm.mape_pct = nan();
            vm.mape_skipped = pred.size();
            report.warnings.push_back("MAPE undefined for '" + name + "' (all truth values zero)");
        }
        try {
            vm.r2 = r2(pred, ref);
        } catch (const InputError&) {
            vm.r2 = nan();
            report.warnings.push_back("R2 undefined for '" + name + "' (truth has zero variance)");
        }
        vm.wasserstein = wasserstein_1d(pred, ref);
        if (options.wilcoxon_whole_column) {
            std::vector<double> col_pred(static_cast<std::size_t>(truth.rows()));
            std::vector<double> col_ref(static_cast<std::size_t>(truth.rows()));
            for (Eigen::Index i = 0; i < truth.rows(); ++i) {
                col_pred[static_cast<std::size_t>(i)] = imputed.value(i, j);
                col_ref[static_cast<std::size_t>(i)] = truth.value(i, j);
            }
            vm.wilcoxon = wilcoxon_signed_rank(col_pred, col_ref, sample_size, options.effect);
        } else {
            vm.wilcoxon = wilcoxon_signed_rank(pred, ref, sample_size, options.effect);
        }
        report.per_variable.push_back(std::move(vm));
    }
    if (!report.per_variable.empty()) {
        const double k = static_cast<double>(report.per_variable.size());
        for (const auto& vm : report.per_variable) {
            report.aggregate.rmse += vm.rmse;
            report.aggregate.mape_pct += vm.mape_pct;
            report.aggregate.r2 += vm.r2;
            report.aggregate.wasserstein += vm.wasserstein;
        }
        report.aggregate.rmse /= k;
        report.aggregate.mape_pct /= k;
        report.aggregate.r2 /= k;
        report.aggregate.wasserstein /= k;
    }
    report.metadata["sample_size"] = sample_size;
    report.metadata["excluded_variables"] = report.excluded;
    return report;
}

EvaluationReport mean_of_reports(const std::vector<EvaluationReport>& reports) {
    if (reports.empty()) throw InputError("mean_of_reports: no reports");
    EvaluationReport out = reports.front();
    const double k = static_cast<double>(reports.size());
    auto average = [&](auto getter) {
        double sum = 0.0;
        for (const auto& r : reports) sum += getter(r);
        return sum / k;
    };
    out.aggregate.rmse = average([](const EvaluationReport& r) { return r.aggregate.rmse; });
    out.aggregate.mape_pct = average([](const EvaluationReport& r) { return r.aggregate.mape_pct; });
    out.aggregate.r2 = average([](const EvaluationReport& r) { return r.aggregate.r2; });
    out.aggregate.wasserstein = average([](const EvaluationReport& r) { return r.aggregate.wasserstein; });
    for (std::size_t v = 0; v < out.per_variable.size(); ++v) {
        auto& vm = out.per_variable[v];
        auto field = [&](auto member) {
            double sum = 0.0;
            for (const auto& r : reports) {
                if (v >= r.per_variable.size() || r.per_variable[v].name != vm.name) {
                    throw InputError("mean_of_reports: trials evaluated different variables");
                }
                sum += member(r.per_variable[v]);
            }
            return sum / k;
        };
        vm.rmse = field([](const VariableMetrics& m) { return m.rmse; });
        vm.mape_pct = field([](const VariableMetrics& m) { return m.mape_pct; });
        vm.r2 = field([](const VariableMetrics& m) { return m.r2; });
        vm.wasserstein = field([](const VariableMetrics& m) { return m.wasserstein; });
        vm.wilcoxon.statistic = field([](const VariableMetrics& m) { return m.wilcoxon.statistic; });
        vm.wilcoxon.p_value = field([](const VariableMetrics& m) { return m.wilcoxon.p_value; });
        vm.wilcoxon.effect_size = field([](const VariableMetrics& m) { return m.wilcoxon.effect_size; });
        vm.wilcoxon.ci_lower = field([](const VariableMetrics& m) { return m.wilcoxon.ci_lower; });
        vm.wilcoxon.ci_upper = field([](const VariableMetrics& m) { return m.wilcoxon.ci_upper; });
    }
    out.warnings.clear();
    for (const auto& r : reports) out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
    return out;
}

nlohmann::json report_to_json(const EvaluationReport& report) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& vm : report.per_variable) {
        const auto& w = vm.wilcoxon;
        vars.push_back({{"name", vm.name},
                        {"cells", vm.cells},
                        {"rmse", vm.rmse},
                        {"mape_pct", vm.mape_pct},
                        {"mape_skipped", vm.mape_skipped},
                        {"r2", vm.r2},
                        {"wasserstein", vm.wasserstein},
                        {"wilcoxon",
                         {{"statistic", w.statistic},
                          {"p_value", w.p_value},
                          {"effect_size", w.effect_size},
                          {"ci_lower", w.ci_lower},
                          {"ci_upper", w.ci_upper},
                          {"n_pairs", w.n_pairs},
                          {"zeros_dropped", w.zeros_dropped},
                          {"exact", w.exact},
                          {"degenerate", w.degenerate}}}});
    }
    return {{"per_variable", vars},
            {"aggregate",
             {{"rmse", report.aggregate.rmse},
              {"mape_pct", report.aggregate.mape_pct},
              {"r2", report.aggregate.r2},
              {"wasserstein", report.aggregate.wasserstein}}},
            {"excluded", report.excluded},
            {"warnings", report.warnings},
            {"metadata", report.metadata}};
}

std::string report_to_csv(const EvaluationReport& report) {
    std::string out =
        "variable,cells,rmse,mape_pct,r2,wasserstein,wilcoxon_statistic,p_value,effect_size,ci_lower,ci_upper,"
        "n_pairs,zeros_dropped\n";
    for (const auto& vm : report.per_variable) {
        const auto& w = vm.wilcoxon;
        out += vm.name + "," + std::to_string(vm.cells) + "," + number(vm.rmse) + "," + number(vm.mape_pct) + "," +
               number(vm.r2) + "," + number(vm.wasserstein) + "," + number(w.statistic) + "," + number(w.p_value) +
               "," + number(w.effect_size) + "," + number(w.ci_lower) + "," + number(w.ci_upper) + "," +
               std::to_string(w.n_pairs) + "," + std::to_string(w.zeros_dropped) + "\n";
    }
    out += "aggregate,," + number(report.aggregate.rmse) + "," + number(report.aggregate.mape_pct) + "," +
           number(report.aggregate.r2) + "," + number(report.aggregate.wasserstein) + ",,,,,,,\n";
    return out;
}

}  // namespace sesa
