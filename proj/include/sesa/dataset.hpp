#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sesa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class VariableKind { continuous, ordinal };

struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    std::vector<std::string> levels;  // ordinal only, in order
    double observed_min = 0.0;        // continuous only, filled by load_csv
    double observed_max = 0.0;

    static VariableSpec continuous(std::string name);
    static VariableSpec ordinal(std::string name, std::vector<std::string> levels);

    bool is_ordinal() const { return kind == VariableKind::ordinal; }
    void validate() const;
};

/// Parses a JSON array of {name, kind, levels?}.
std::vector<VariableSpec> parse_variable_specs(const std::string& json_text);
std::vector<VariableSpec> load_variable_specs(const std::string& path);
std::string variable_specs_to_json(const std::vector<VariableSpec>& specs);

/// Min-max range applied to one column by normalize().
struct ColumnRange {
    double lo = 0.0;
    double hi = 1.0;
};

/// n x d table with an explicit observation mask (true = observed).
///
/// Cells whose mask is false hold a NaN sentinel that numerical code must
/// never read. Ordinal columns loaded from CSV keep their raw tokens until
/// encode_ordinal() resolves them to 0-based level indices.
class Dataset {
public:
    Dataset() = default;
    Dataset(Matrix values, Mask mask, std::vector<VariableSpec> specs);

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }

    const Matrix& values() const { return values_; }
    const Mask& mask() const { return mask_; }
    const std::vector<VariableSpec>& specs() const { return specs_; }
    const VariableSpec& spec(Eigen::Index j) const { return specs_[static_cast<std::size_t>(j)]; }
    const std::optional<std::vector<ColumnRange>>& normalization() const { return normalization_; }

    bool observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j); }
    double value(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

    std::vector<std::string> names() const;
    /// Throws InputError when the column does not exist.
    Eigen::Index column_index(const std::string& name) const;
    std::optional<Eigen::Index> find_column(const std::string& name) const;

    std::size_t missing_count() const;
    std::vector<std::size_t> missing_counts() const;
    bool complete() const { return missing_count() == 0; }

    /// Raw ordinal tokens awaiting encode_ordinal(); empty once encoded.
    bool encoded() const { return raw_tokens_.empty(); }
    const std::vector<std::string>& raw_tokens() const { return raw_tokens_; }

    /// Copy with replaced values for every cell (mask kept).
    Dataset with_values(Matrix values) const;
    /// Copy with a new mask; cells turning unobserved get the sentinel.
    Dataset with_mask(const Mask& mask) const;
    Dataset with_normalization(std::optional<std::vector<ColumnRange>> ranges) const;
    Dataset with_raw_tokens(std::vector<std::string> tokens) const;

    /// Complete copy of the values for consumers that have filled every cell.
    Matrix observed_or(double fill) const;

private:
    Matrix values_;
    Mask mask_;
    std::vector<VariableSpec> specs_;
    std::optional<std::vector<ColumnRange>> normalization_;
    std::vector<std::string> raw_tokens_;
};

double missing_sentinel();

struct LoadOptions {
    std::set<std::string> missing_tokens{"", "NA", "NaN"};
    /// Unparseable continuous cells become missing instead of erroring.
    bool lenient_continuous = false;
    /// Unknown ordinal labels become missing instead of erroring.
    bool lenient_ordinal = false;
};

/// Reads a header-first RFC-4180 CSV. Columns are reordered to spec order;
/// header names must match spec names as a set. Ordinal cells are encoded
/// immediately, so the returned dataset is numeric.
Dataset load_csv(const std::string& path, const std::vector<VariableSpec>& specs,
                 const LoadOptions& options = {});
Dataset read_csv(std::istream& in, const std::vector<VariableSpec>& specs,
                 const LoadOptions& options = {});
/// Same as read_csv but leaves ordinal tokens raw for encode_ordinal().
Dataset read_csv_raw(std::istream& in, const std::vector<VariableSpec>& specs,
                     const LoadOptions& options = {});

/// Splits CSV text into records; handles quotes, doubled quotes, CRLF.
std::vector<std::vector<std::string>> parse_csv_records(std::istream& in);

/// Resolves raw ordinal tokens (labels or integer indices) to level indices.
Dataset encode_ordinal(const Dataset& ds, bool lenient = false);

struct CsvWriteOptions {
    std::string missing_token = "NA";
    /// Write ordinal cells as their level labels instead of indices.
    bool ordinal_labels = true;
};
void write_csv(std::ostream& out, const Dataset& ds, const CsvWriteOptions& options = {});
void write_csv(const std::string& path, const Dataset& ds, const CsvWriteOptions& options = {});
void write_mask_csv(std::ostream& out, const Mask& mask, const std::vector<std::string>& names);
void write_mask_csv(const std::string& path, const Mask& mask, const std::vector<std::string>& names);

Dataset normalize(const Dataset& ds);
Dataset denormalize(const Dataset& ds);
/// Min-max maps observed cells with ranges computed elsewhere (e.g. truth
/// data mapped with the ranges of its masked copy).
Dataset normalize_with(const Dataset& ds, const std::vector<ColumnRange>& ranges);

/// Rounds ordinal cells to the nearest valid level (ties go down, out of
/// range clamps). Continuous columns are untouched.
Dataset snap_ordinal(const Dataset& ds);
double snap_level(double value, std::size_t level_count);

struct Moments {
    Vector mean;
    Matrix cov;
    std::vector<std::string> warnings;
};

/// Pairwise-complete ML moments (denominator = number of jointly observed rows).
Moments pairwise_stats(const Dataset& ds);

/// Complete-data ML mean and covariance of a full matrix (denominator n).
Moments matrix_moments(const Matrix& x);

/// A completely filled matrix plus which cells were filled in (true =
/// imputed). Produced by every imputer; the source dataset keeps its mask.
struct Imputed {
    Matrix values;
    Mask provenance;
};

/// Observed cells from `ds`, missing cells from `candidate`.
Imputed merge_observed(const Dataset& ds, const Matrix& candidate);

/// Dataset view of an imputation: every cell observed, specs and
/// normalization carried over from `ds`.
Dataset as_complete(const Dataset& ds, const Imputed& filled);

/// True when observed cells agree exactly (bitwise on values) and masks match.
bool same_observed(const Dataset& a, const Dataset& b);

}  // namespace sesa
