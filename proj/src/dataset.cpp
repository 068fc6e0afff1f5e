#include "sesa/dataset.hpp"

#include "sesa/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_set>

namespace sesa {

namespace {

std::string location(Eigen::Index row, const std::string& column) {
    // Row numbers are 1-based data rows (header excluded).
    return "row " + std::to_string(row + 1) + ", column '" + column + "'";
}

std::optional<double> parse_double(const std::string& token) {
    std::size_t b = 0;
    std::size_t e = token.size();
    while (b < e && std::isspace(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(token[e - 1]))) --e;
    if (b == e) return std::nullopt;
    const char* first = token.data() + b;
    const char* last = token.data() + e;
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_number(double v) {
    // Shortest representation that round-trips.
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// VariableSpec

VariableSpec VariableSpec::continuous(std::string name) {
    VariableSpec s;
    s.name = std::move(name);
    s.kind = VariableKind::continuous;
    return s;
}

VariableSpec VariableSpec::ordinal(std::string name, std::vector<std::string> levels) {
    VariableSpec s;
    s.name = std::move(name);
    s.kind = VariableKind::ordinal;
    s.levels = std::move(levels);
    return s;
}

void VariableSpec::validate() const {
    if (name.empty()) throw InputError("variable spec with empty name");
    if (is_ordinal()) {
        if (levels.empty()) throw InputError("ordinal variable '" + name + "' has no levels");
        std::unordered_set<std::string> seen;
        for (const auto& l : levels) {
            if (!seen.insert(l).second) {
                throw InputError("ordinal variable '" + name + "' repeats level '" + l + "'");
            }
        }
    } else if (observed_min > observed_max) {
        throw InputError("continuous variable '" + name + "' has observed_min > observed_max");
    }
}

std::vector<VariableSpec> parse_variable_specs(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("variable spec JSON: ") + e.what());
    }
    if (!doc.is_array()) throw InputError("variable spec JSON must be an array");
    std::vector<VariableSpec> specs;
    std::unordered_set<std::string> names;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("name") || !item["name"].is_string()) {
            throw InputError("variable spec entry needs a string 'name'");
        }
        VariableSpec s;
        s.name = item["name"].get<std::string>();
        const std::string kind = item.value("kind", std::string("continuous"));
        if (kind == "continuous") {
            s.kind = VariableKind::continuous;
        } else if (kind == "ordinal") {
            s.kind = VariableKind::ordinal;
            if (!item.contains("levels") || !item["levels"].is_array()) {
                throw InputError("ordinal variable '" + s.name + "' needs a 'levels' array");
            }
            for (const auto& l : item["levels"]) {
                if (l.is_string()) {
                    s.levels.push_back(l.get<std::string>());
                } else if (l.is_number()) {
                    s.levels.push_back(l.dump());
                } else {
                    throw InputError("ordinal variable '" + s.name + "' has a non-scalar level");
                }
            }
        } else {
            throw InputError("variable '" + s.name + "' has unknown kind '" + kind + "'");
        }
        s.validate();
        if (!names.insert(s.name).second) throw InputError("duplicate variable '" + s.name + "'");
        specs.push_back(std::move(s));
    }
    return specs;
}

std::vector<VariableSpec> load_variable_specs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open variable spec file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_variable_specs(buf.str());
}

std::string variable_specs_to_json(const std::vector<VariableSpec>& specs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json item{{"name", s.name}, {"kind", s.is_ordinal() ? "ordinal" : "continuous"}};
        if (s.is_ordinal()) item["levels"] = s.levels;
        out.push_back(std::move(item));
    }
    return out.dump(2);
}

// ---------------------------------------------------------------------------
// Dataset

double missing_sentinel() { return std::numeric_limits<double>::quiet_NaN(); }

Dataset::Dataset(Matrix values, Mask mask, std::vector<VariableSpec> specs)
    : values_(std::move(values)), mask_(std::move(mask)), specs_(std::move(specs)) {
    if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols()) {
        throw InputError("dataset values and mask differ in shape");
    }
    if (static_cast<std::size_t>(values_.cols()) != specs_.size()) {
        throw InputError("dataset has " + std::to_string(values_.cols()) + " columns but " +
                         std::to_string(specs_.size()) + " variable specs");
    }
    for (const auto& s : specs_) s.validate();
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            if (!mask_(i, j)) values_(i, j) = missing_sentinel();
        }
    }
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    out.reserve(specs_.size());
    for (const auto& s : specs_) out.push_back(s.name);
    return out;
}

std::optional<Eigen::Index> Dataset::find_column(const std::string& name) const {
    for (std::size_t j = 0; j < specs_.size(); ++j) {
        if (specs_[j].name == name) return static_cast<Eigen::Index>(j);
    }
    return std::nullopt;
}

Eigen::Index Dataset::column_index(const std::string& name) const {
    auto j = find_column(name);
    if (!j) throw InputError("unknown column '" + name + "'");
    return *j;
}

std::size_t Dataset::missing_count() const {
    return static_cast<std::size_t>(mask_.size() - mask_.count());
}

std::vector<std::size_t> Dataset::missing_counts() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(cols()), 0);
    for (Eigen::Index j = 0; j < cols(); ++j) {
        out[static_cast<std::size_t>(j)] = static_cast<std::size_t>(rows() - mask_.col(j).count());
    }
    return out;
}

Dataset Dataset::with_values(Matrix values) const {
    if (values.rows() != rows() || values.cols() != cols()) {
        throw InputError("with_values: shape mismatch");
    }
    Dataset out = *this;
    out.values_ = std::move(values);
    for (Eigen::Index j = 0; j < cols(); ++j) {
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (!mask_(i, j)) out.values_(i, j) = missing_sentinel();
        }
    }
    return out;
}

Dataset Dataset::with_mask(const Mask& mask) const {
    if (mask.rows() != rows() || mask.cols() != cols()) throw InputError("with_mask: shape mismatch");
    Dataset out = *this;
    out.mask_ = mask;
    for (Eigen::Index j = 0; j < cols(); ++j) {
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (!mask(i, j)) out.values_(i, j) = missing_sentinel();
        }
    }
    return out;
}

Dataset Dataset::with_normalization(std::optional<std::vector<ColumnRange>> ranges) const {
    Dataset out = *this;
    out.normalization_ = std::move(ranges);
    return out;
}

Dataset Dataset::with_raw_tokens(std::vector<std::string> tokens) const {
    Dataset out = *this;
    out.raw_tokens_ = std::move(tokens);
    return out;
}

Matrix Dataset::observed_or(double fill) const {
    Matrix out = values_;
    for (Eigen::Index j = 0; j < cols(); ++j) {
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (!mask_(i, j)) out(i, j) = fill;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> parse_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    char c = 0;
    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(record));
        record.clear();
        field_started = false;
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            end_record();
        } else if (c == '\n') {
            end_record();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw InputError("CSV: unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    return records;
}

namespace {

Dataset read_table(std::istream& in, const std::vector<VariableSpec>& specs,
                   const LoadOptions& options) {
    for (const auto& s : specs) s.validate();
    auto records = parse_csv_records(in);
    if (records.empty()) throw InputError("CSV has no header row");
    const auto& header = records.front();

    std::map<std::string, std::size_t> header_pos;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (!header_pos.emplace(name, c).second) {
            throw InputError("CSV header repeats column '" + name + "'");
        }
    }
    std::vector<std::size_t> source(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j) {
        auto it = header_pos.find(specs[j].name);
        if (it == header_pos.end()) {
            throw InputError("header/spec mismatch: spec variable '" + specs[j].name +
                             "' not found in CSV header");
        }
        source[j] = it->second;
    }
    if (header_pos.size() != specs.size()) {
        for (const auto& [name, pos] : header_pos) {
            bool known = std::any_of(specs.begin(), specs.end(),
                                     [&](const VariableSpec& s) { return s.name == name; });
            if (!known) {
                throw InputError("header/spec mismatch: CSV column '" + name +
                                 "' has no variable spec");
            }
        }
    }

    // Blank lines are data rows of a single-column file, otherwise skipped.
    std::vector<const std::vector<std::string>*> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() == 1 && rec[0].empty() && header.size() > 1) continue;
        if (rec.size() != header.size()) {
            throw InputError("CSV row " + std::to_string(r) + " has " +
                             std::to_string(rec.size()) + " fields, header has " +
                             std::to_string(header.size()));
        }
        rows.push_back(&rec);
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(specs.size());
    Matrix values = Matrix::Constant(n, d, missing_sentinel());
    Mask mask = Mask::Constant(n, d, false);
    std::vector<std::string> raw(static_cast<std::size_t>(n * d));
    bool any_ordinal = false;
    std::vector<VariableSpec> out_specs = specs;

    for (Eigen::Index j = 0; j < d; ++j) {
        const auto& spec = specs[static_cast<std::size_t>(j)];
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::string& token = (*rows[static_cast<std::size_t>(i)])[source[static_cast<std::size_t>(j)]];
            if (options.missing_tokens.count(token) || options.missing_tokens.count(trim(token))) continue;
            if (spec.is_ordinal()) {
                any_ordinal = true;
                raw[static_cast<std::size_t>(i * d + j)] = trim(token);
                mask(i, j) = true;
                values(i, j) = 0.0;
                continue;
            }
            auto v = parse_double(token);
            if (!v) {
                if (options.lenient_continuous) continue;
                throw InputError("parse error at " + location(i, spec.name) + ": '" + token +
                                 "' is not a number");
            }
            values(i, j) = *v;
            mask(i, j) = true;
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
        if (!spec.is_ordinal() && lo <= hi) {
            out_specs[static_cast<std::size_t>(j)].observed_min = lo;
            out_specs[static_cast<std::size_t>(j)].observed_max = hi;
        }
    }
    Dataset ds(std::move(values), std::move(mask), std::move(out_specs));
    if (any_ordinal) ds = ds.with_raw_tokens(std::move(raw));
    return ds;
}

}  // namespace

Dataset read_csv_raw(std::istream& in, const std::vector<VariableSpec>& specs,
                     const LoadOptions& options) {
    return read_table(in, specs, options);
}

Dataset read_csv(std::istream& in, const std::vector<VariableSpec>& specs,
                 const LoadOptions& options) {
    return encode_ordinal(read_table(in, specs, options), options.lenient_ordinal);
}

Dataset load_csv(const std::string& path, const std::vector<VariableSpec>& specs,
                 const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("file not found: " + path);
    return read_csv(in, specs, options);
}

Dataset encode_ordinal(const Dataset& ds, bool lenient) {
    if (ds.encoded()) return ds;
    const auto& raw = ds.raw_tokens();
    const Eigen::Index d = ds.cols();
    Matrix values = ds.values();
    Mask mask = ds.mask();
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto& spec = ds.spec(j);
        if (!spec.is_ordinal()) continue;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (!mask(i, j)) continue;
            const std::string& token = raw[static_cast<std::size_t>(i * d + j)];
            auto it = std::find(spec.levels.begin(), spec.levels.end(), token);
            if (it != spec.levels.end()) {
                values(i, j) = static_cast<double>(it - spec.levels.begin());
                continue;
            }
            // Integer level indices are accepted as well as labels.
            auto v = parse_double(token);
            if (v && *v == std::floor(*v) && *v >= 0 &&
                *v < static_cast<double>(spec.levels.size())) {
                values(i, j) = *v;
                continue;
            }
            if (lenient) {
                mask(i, j) = false;
                continue;
            }
            throw InputError("encoding error at " + location(i, spec.name) + ": '" + token +
                             "' is not a level of this variable");
        }
    }
    Dataset out(std::move(values), std::move(mask), ds.specs());
    return out.with_normalization(ds.normalization());
}

void write_csv(std::ostream& out, const Dataset& ds, const CsvWriteOptions& options) {
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        if (j) out << ',';
        out << csv_escape(ds.spec(j).name);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            if (j) out << ',';
            if (!ds.observed(i, j)) {
                out << csv_escape(options.missing_token);
                continue;
            }
            const auto& spec = ds.spec(j);
            const double v = ds.value(i, j);
            if (spec.is_ordinal() && options.ordinal_labels) {
                const double level = snap_level(v, spec.levels.size());
                out << csv_escape(spec.levels[static_cast<std::size_t>(level)]);
            } else {
                out << format_number(v);
            }
        }
        out << '\n';
    }
}

void write_csv(const std::string& path, const Dataset& ds, const CsvWriteOptions& options) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    write_csv(out, ds, options);
}

void write_mask_csv(std::ostream& out, const Mask& mask, const std::vector<std::string>& names) {
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j) out << ',';
        out << csv_escape(names[j]);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            if (j) out << ',';
            out << (mask(i, j) ? '1' : '0');
        }
        out << '\n';
    }
}

void write_mask_csv(const std::string& path, const Mask& mask, const std::vector<std::string>& names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    write_mask_csv(out, mask, names);
}

// ---------------------------------------------------------------------------
// Normalization

Dataset normalize(const Dataset& ds) {
    std::vector<ColumnRange> ranges(static_cast<std::size_t>(ds.cols()));
    Matrix values = ds.values();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (!ds.observed(i, j)) continue;
            lo = std::min(lo, ds.value(i, j));
            hi = std::max(hi, ds.value(i, j));
        }
        if (!(lo <= hi)) {
            throw InputError("normalization error: column '" + ds.spec(j).name +
                             "' has no observed cells");
        }
        ranges[static_cast<std::size_t>(j)] = {lo, hi};
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (!ds.observed(i, j)) continue;
            values(i, j) = hi > lo ? (ds.value(i, j) - lo) / (hi - lo) : 0.5;
        }
    }
    return ds.with_values(std::move(values)).with_normalization(std::move(ranges));
}

Dataset normalize_with(const Dataset& ds, const std::vector<ColumnRange>& ranges) {
    if (ranges.size() != static_cast<std::size_t>(ds.cols())) {
        throw InputError("normalize_with: range count does not match column count");
    }
    Matrix values = ds.values();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        const auto r = ranges[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (!ds.observed(i, j)) continue;
            values(i, j) = r.hi > r.lo ? (ds.value(i, j) - r.lo) / (r.hi - r.lo) : 0.5;
        }
    }
    return ds.with_values(std::move(values)).with_normalization(ranges);
}

Dataset denormalize(const Dataset& ds) {
    if (!ds.normalization()) throw InputError("denormalize: dataset carries no normalization state");
    const auto& ranges = *ds.normalization();
    Matrix values = ds.values();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        const auto r = ranges[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (!ds.observed(i, j)) continue;
            values(i, j) = r.hi > r.lo ? r.lo + ds.value(i, j) * (r.hi - r.lo) : r.lo;
        }
    }
    return ds.with_values(std::move(values)).with_normalization(std::nullopt);
}

double snap_level(double value, std::size_t level_count) {
    const double top = static_cast<double>(level_count) - 1.0;
    // Nearest integer with ties toward the lower level.
    double level = std::ceil(value - 0.5);
    if (!(level >= 0.0)) level = 0.0;
    return std::min(level, top);
}

Dataset snap_ordinal(const Dataset& ds) {
    Matrix values = ds.values();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        const auto& spec = ds.spec(j);
        if (!spec.is_ordinal()) continue;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (ds.observed(i, j)) values(i, j) = snap_level(values(i, j), spec.levels.size());
        }
    }
    return ds.with_values(std::move(values));
}

// ---------------------------------------------------------------------------
// Moments

Moments pairwise_stats(const Dataset& ds) {
    const Eigen::Index n = ds.rows();
    const Eigen::Index d = ds.cols();
    Moments m;
    m.mean = Vector::Zero(d);
    m.cov = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double sum = 0.0;
        Eigen::Index count = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (ds.observed(i, j)) {
                sum += ds.value(i, j);
                ++count;
            }
        }
        if (count == 0) {
            throw InputError("pairwise_stats: column '" + ds.spec(j).name + "' has no observed cells");
        }
        m.mean(j) = sum / static_cast<double>(count);
    }
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = a; b < d; ++b) {
            // Pairwise means so the estimate is the ML covariance of the pair.
            double sa = 0.0;
            double sb = 0.0;
            Eigen::Index count = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (ds.observed(i, a) && ds.observed(i, b)) {
                    sa += ds.value(i, a);
                    sb += ds.value(i, b);
                    ++count;
                }
            }
            if (count < 2) {
                if (a == b) {
                    m.cov(a, a) = 1e-6;
                    m.warnings.push_back("column '" + ds.spec(a).name +
                                         "' has fewer than 2 observed cells; variance set to 1e-6");
                } else {
                    m.warnings.push_back("columns '" + ds.spec(a).name + "' and '" +
                                         ds.spec(b).name +
                                         "' share fewer than 2 observed rows; covariance set to 0");
                }
                continue;
            }
            const double ma = sa / static_cast<double>(count);
            const double mb = sb / static_cast<double>(count);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (ds.observed(i, a) && ds.observed(i, b)) {
                    acc += (ds.value(i, a) - ma) * (ds.value(i, b) - mb);
                }
            }
            double c = acc / static_cast<double>(count);
            if (a == b && c <= 0.0) {
                c = 1e-6;
                m.warnings.push_back("column '" + ds.spec(a).name + "' is constant; variance set to 1e-6");
            }
            m.cov(a, b) = c;
            m.cov(b, a) = c;
        }
    }
    return m;
}

Moments matrix_moments(const Matrix& x) {
    Moments m;
    const double n = static_cast<double>(x.rows());
    m.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - m.mean.transpose();
    m.cov = (centered.transpose() * centered) / n;
    m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
    return m;
}

Imputed merge_observed(const Dataset& ds, const Matrix& candidate) {
    if (candidate.rows() != ds.rows() || candidate.cols() != ds.cols()) {
        throw InputError("merge_observed: shape mismatch");
    }
    Imputed out{ds.values(), Mask::Constant(ds.rows(), ds.cols(), false)};
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (ds.observed(i, j)) continue;
            out.values(i, j) = candidate(i, j);
            out.provenance(i, j) = true;
        }
    }
    return out;
}

Dataset as_complete(const Dataset& ds, const Imputed& filled) {
    Dataset out(filled.values, Mask::Constant(ds.rows(), ds.cols(), true), ds.specs());
    return out.with_normalization(ds.normalization());
}

bool same_observed(const Dataset& a, const Dataset& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (a.mask() != b.mask()) return false;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (!a.observed(i, j)) continue;
            const double x = a.value(i, j);
            const double y = b.value(i, j);
            if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
        }
    }
    return true;
}

}  // namespace sesa
