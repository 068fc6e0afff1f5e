#include "sesa/app.hpp"

#include "sesa/baselines.hpp"
#include "sesa/dataset.hpp"
#include "sesa/error.hpp"
#include "sesa/fiml.hpp"
#include "sesa/metrics.hpp"
#include "sesa/missingness.hpp"
#include "sesa/notears.hpp"
#include "sesa/random.hpp"
#include "sesa/sem.hpp"
#include "sesa/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace sesa {

namespace fs = std::filesystem;

namespace {

struct Field {
    std::string key;
    std::string flag;
    std::string help;
    std::function<nlohmann::json(const RunConfig&)> get;
    std::function<void(RunConfig&, const nlohmann::json&)> set;
    std::function<CLI::Option*(CLI::App&, RunConfig&)> add;
    std::function<void(RunConfig&, const RunConfig&)> copy;
};

template <class T>
Field make_field(const std::string& key, T RunConfig::*member, const std::string& help) {
    Field f;
    f.key = key;
    f.flag = "--" + key;
    std::replace(f.flag.begin(), f.flag.end(), '_', '-');
    f.help = help;
    f.get = [member](const RunConfig& c) { return nlohmann::json(c.*member); };
    f.set = [member, key](RunConfig& c, const nlohmann::json& j) {
        try {
            c.*member = j.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw InputError("config: key '" + key + "' has the wrong type");
        }
    };
    f.add = [member, flag = f.flag, help](CLI::App& app, RunConfig& c) {
        if constexpr (std::is_same_v<T, bool>) {
            return app.add_flag(flag, c.*member, help);
        } else {
            return app.add_option(flag, c.*member, help);
        }
    };
    f.copy = [member](RunConfig& dst, const RunConfig& src) { dst.*member = src.*member; };
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> t;
        t.push_back(make_field("command", &RunConfig::command, "command"));
        t.push_back(make_field("input", &RunConfig::input, "input CSV"));
        t.push_back(make_field("output", &RunConfig::output, "output directory"));
        t.push_back(make_field("variables", &RunConfig::variables, "variable spec JSON"));
        t.push_back(make_field("spec", &RunConfig::spec, "SEM spec file"));
        t.push_back(make_field("seed", &RunConfig::seed, "random seed"));
        t.push_back(make_field("missing_rate", &RunConfig::missing_rate, "MCAR removal rate"));
        t.push_back(make_field("columns", &RunConfig::columns, "columns eligible for masking"));
        t.push_back(make_field("trials", &RunConfig::trials, "number of masking trials"));
        t.push_back(make_field("method", &RunConfig::method, "sesa, mean, median, knn or external:<path>"));
        t.push_back(make_field("knn_k", &RunConfig::knn_k, "neighbours for knn"));
        t.push_back(make_field("format", &RunConfig::format, "report format: json or csv"));
        t.push_back(make_field("effect_size", &RunConfig::effect_size, "statistic or z"));
        t.push_back(make_field("wilcoxon_scope", &RunConfig::wilcoxon_scope, "imputed or column"));
        t.push_back(make_field("em_max_iter", &RunConfig::em_max_iter, "EM iteration cap"));
        t.push_back(make_field("em_tol", &RunConfig::em_tol, "EM relative log-likelihood tolerance"));
        t.push_back(make_field("ridge", &RunConfig::ridge, "ridge added on Cholesky failure"));
        t.push_back(make_field("moments", &RunConfig::moments, "implied or saturated"));
        t.push_back(make_field("alpha", &RunConfig::alpha, "MSE weight"));
        t.push_back(make_field("beta", &RunConfig::beta, "covariance weight"));
        t.push_back(make_field("gamma", &RunConfig::gamma, "L1 weight"));
        t.push_back(make_field("lr", &RunConfig::lr, "Adam learning rate"));
        t.push_back(make_field("epochs", &RunConfig::epochs, "maximum training epochs"));
        t.push_back(make_field("tol", &RunConfig::tol, "training relative tolerance"));
        t.push_back(make_field("self_mask_rate", &RunConfig::self_mask_rate, "cells hidden per epoch"));
        t.push_back(make_field("mode", &RunConfig::mode, "self-supervised or benchmark"));
        t.push_back(make_field("dk", &RunConfig::dk, "query/key width (0 = d)"));
        t.push_back(make_field("lambda1", &RunConfig::lambda1, "NOTEARS L1 weight"));
        t.push_back(make_field("threshold", &RunConfig::threshold, "edge threshold"));
        t.push_back(make_field("notears_inner_steps", &RunConfig::notears_inner_steps, "inner solver steps"));
        t.push_back(make_field("notears_max_outer", &RunConfig::notears_max_outer, "outer iterations"));
        t.push_back(make_field("suggest_outcome", &RunConfig::suggest_outcome, "write a SEM spec for this outcome"));
        t.push_back(make_field("suggest", &RunConfig::suggest, "write a SEM spec for the whole graph"));
        t.push_back(make_field("discover_input", &RunConfig::discover_input, "complete-case or fiml"));
        t.push_back(make_field("lenient", &RunConfig::lenient, "unparseable cells become missing"));
        return t;
    }();
    return table;
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
    return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw InputError(what + " path is required");
    if (!fs::is_regular_file(path)) throw InputError(what + " not found: " + path);
}

std::string external_path(const RunConfig& cfg) {
    return cfg.method.rfind("external:", 0) == 0 ? cfg.method.substr(9) : std::string();
}

std::vector<std::string> csv_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::istringstream head(line);
    auto records = parse_csv_records(head);
    if (records.empty()) throw InputError("empty CSV: " + path);
    return records.front();
}

std::vector<VariableSpec> resolve_specs(const RunConfig& cfg, const std::string& csv_path) {
    if (!cfg.variables.empty()) return load_variable_specs(cfg.variables);
    std::vector<VariableSpec> specs;
    for (const auto& name : csv_header(csv_path)) specs.push_back(VariableSpec::continuous(name));
    return specs;
}

Dataset load_input(const RunConfig& cfg, const std::string& path, const std::vector<VariableSpec>& specs) {
    LoadOptions opts;
    opts.lenient_continuous = cfg.lenient;
    opts.lenient_ordinal = cfg.lenient;
    return load_csv(path, specs, opts);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("write failed: " + path.string());
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + cfg.output + ": " + ec.message());
    return dir;
}

nlohmann::json run_header(const RunConfig& cfg) {
    return {{"tool", kToolName}, {"version", kVersion}, {"seed", cfg.seed}, {"config", config_to_json(cfg)}};
}

ImputeOptions impute_options(const RunConfig& cfg, std::uint64_t seed) {
    ImputeOptions o;
    o.train.lr = cfg.lr;
    o.train.max_epochs = cfg.epochs;
    o.train.rel_tol = cfg.tol;
    o.train.self_mask_rate = cfg.self_mask_rate;
    o.train.seed = seed;
    o.train.mode = cfg.mode == "benchmark" ? TrainMode::benchmark : TrainMode::self_supervised;
    o.train.dk = cfg.dk;
    o.weights = {cfg.alpha, cfg.beta, cfg.gamma};
    o.em.max_iter = cfg.em_max_iter;
    o.em.tol = cfg.em_tol;
    o.em.ridge = cfg.ridge;
    o.init_moments = cfg.moments == "saturated" ? InitMoments::saturated : InitMoments::implied;
    return o;
}

std::optional<SemSpec> load_sem(const RunConfig& cfg) {
    if (cfg.spec.empty()) return std::nullopt;
    return load_spec(cfg.spec);
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json impute_report_json(const ImputeReport& r) {
    nlohmann::json j{{"imputed_cells", r.imputed_cells},
                     {"em_iterations", r.em_iterations},
                     {"em_loglik", number_or_null(r.em_loglik)},
                     {"epochs", r.history.size()},
                     {"converged", r.converged},
                     {"warnings", r.warnings}};
    if (!r.history.empty()) {
        const auto& last = r.history.back().loss;
        j["final_loss"] = {{"total", last.total}, {"mse", last.mse}, {"cov", last.cov}, {"l1", last.l1}};
    }
    if (r.sem_fit) {
        j["sem_fit"] = {{"cfi", number_or_null(r.sem_fit->cfi)},
                        {"rmsea", number_or_null(r.sem_fit->rmsea)},
                        {"chi2_model", r.sem_fit->chi2_model},
                        {"chi2_baseline", r.sem_fit->chi2_baseline}};
    }
    return j;
}

std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::uint64_t trial_seed(const RunConfig& cfg, int trial) {
    return cfg.trials == 1 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
}

struct TrialOutcome {
    std::uint64_t seed = 0;
    EvaluationReport report;
    nlohmann::json method_report = nlohmann::json::object();
};

TrialOutcome run_trial(const RunConfig& cfg, const Dataset& truth, const std::optional<SemSpec>& sem, int trial) {
    TrialOutcome out;
    out.seed = trial_seed(cfg, trial);
    const MaskedData md = apply_mcar(truth, MaskPlan{cfg.missing_rate, out.seed, cfg.columns});

    Dataset imputed;
    const std::string ext = external_path(cfg);
    if (!ext.empty()) {
        LoadOptions opts;
        imputed = load_csv(ext, truth.specs(), opts);
        if (imputed.rows() != truth.rows()) throw InputError("external imputation has a different row count");
        if (!imputed.complete()) throw InputError("external imputation still has missing cells");
    } else if (cfg.method == "sesa") {
        const Dataset* bench_truth = cfg.mode == "benchmark" ? &md.truth : nullptr;
        ImputeResult r = impute(md.masked, sem, impute_options(cfg, out.seed), bench_truth);
        out.method_report = impute_report_json(r.report);
        imputed = std::move(r.data);
    } else {
        Imputed filled;
        if (cfg.method == "mean") {
            filled = mean_impute(md.masked);
        } else if (cfg.method == "median") {
            filled = median_impute(md.masked);
        } else {
            filled = knn_impute(md.masked, cfg.knn_k);
        }
        imputed = snap_ordinal(as_complete(md.masked, filled));
    }

    EvaluateOptions eo;
    eo.effect = cfg.effect_size == "z" ? EffectSize::z_over_sqrt_pairs : EffectSize::statistic_over_sqrt_n;
    eo.wilcoxon_whole_column = cfg.wilcoxon_scope == "column";
    out.report = evaluate(imputed, md.truth, md.removed, static_cast<std::size_t>(truth.rows()), eo);
    out.report.metadata["seed"] = out.seed;
    out.report.metadata["rate"] = cfg.missing_rate;
    out.report.metadata["method"] = cfg.method;
    return out;
}

std::vector<TrialOutcome> run_trials(const RunConfig& cfg, const Dataset& truth, const std::optional<SemSpec>& sem) {
    const auto n = static_cast<std::size_t>(cfg.trials);
    std::vector<TrialOutcome> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < n; t = next++) {
            try {
                results[t] = run_trial(cfg, truth, sem, static_cast<int>(t));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(cfg.threads, 1)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::string prefix_lines(const std::string& csv, const std::string& first, bool keep_header) {
    std::istringstream in(csv);
    std::string line;
    std::string out;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            if (keep_header) out += "trial,seed," + line + "\n";
            continue;
        }
        out += first + line + "\n";
    }
    return out;
}

template <class F>
int guarded(const char* command, F&& body) {
    try {
        body();
        return exit_ok;
    } catch (const InputError& e) {
        std::cerr << kToolName << " " << command << ": " << e.what() << "\n";
        return exit_input;
    } catch (const NumericalError& e) {
        std::cerr << kToolName << " " << command << ": numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << kToolName << " " << command << ": internal error: " << e.what() << "\n";
        return exit_internal;
    }
}

}  // namespace

void RunConfig::validate() const {
    if (!one_of(command, {"impute", "evaluate", "discover", "simulate"})) {
        throw InputError("unknown command '" + command + "'");
    }
    require_file(input, "input");
    if (!variables.empty()) require_file(variables, "variable spec");
    if (!spec.empty()) require_file(spec, "SEM spec");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw InputError("--missing-rate must be in [0, 1)");
    if (trials < 1) throw InputError("--trials must be at least 1");
    if (threads < 1) throw InputError("--threads must be at least 1");
    const std::string ext = external_path(*this);
    if (method.rfind("external:", 0) == 0) {
        require_file(ext, "external imputation");
        if (trials != 1) throw InputError("external method evaluates one masking; use --trials 1");
    } else if (!one_of(method, {"sesa", "mean", "median", "knn"})) {
        throw InputError("unknown method '" + method + "'");
    }
    if (knn_k < 1) throw InputError("--knn-k must be positive");
    if (!one_of(format, {"json", "csv"})) throw InputError("--format must be json or csv");
    if (!one_of(effect_size, {"statistic", "z"})) throw InputError("--effect-size must be statistic or z");
    if (!one_of(wilcoxon_scope, {"imputed", "column"})) throw InputError("--wilcoxon-scope must be imputed or column");
    if (!one_of(moments, {"implied", "saturated"})) throw InputError("--moments must be implied or saturated");
    if (!one_of(mode, {"self-supervised", "benchmark"})) throw InputError("--mode must be self-supervised or benchmark");
    if (!one_of(discover_input, {"complete-case", "fiml"})) {
        throw InputError("--discover-input must be complete-case or fiml");
    }
    if (mode == "benchmark" && command == "impute") {
        throw InputError("benchmark mode needs ground truth; use it with evaluate");
    }
    if (em_max_iter < 1 || epochs < 0 || dk < 0) throw InputError("iteration counts must be non-negative");
    if (!(threshold >= 0.0)) throw InputError("--threshold must be non-negative");
    if (notears_inner_steps < 1 || notears_max_outer < 1) throw InputError("NOTEARS iteration counts must be positive");
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : fields()) j[f.key] = f.get(cfg);
    return j;
}

RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base) {
    if (!j.is_object()) throw InputError("config must be a JSON object");
    RunConfig cfg = base;
    for (const auto& [key, value] : j.items()) {
        const auto& table = fields();
        auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
        if (it == table.end()) throw InputError("config: unknown key '" + key + "'");
        it->set(cfg, value);
    }
    return cfg;
}

int default_threads() {
    const char* env = std::getenv("SESA_THREADS");
    if (env == nullptr) return 1;
    try {
        const int n = std::stoi(env);
        return n >= 1 ? n : 1;
    } catch (const std::exception&) {
        return 1;
    }
}

int cmd_impute(const RunConfig& cfg) {
    return guarded("impute", [&] {
        cfg.validate();
        const auto specs = resolve_specs(cfg, cfg.input);
        const Dataset ds = load_input(cfg, cfg.input, specs);
        const auto sem = load_sem(cfg);
        const ImputeResult r = impute(ds, sem, impute_options(cfg, cfg.seed));
        if (!same_observed(encode_ordinal(ds), r.data.with_mask(ds.mask()))) {
            throw InvariantError("observed cells changed during imputation");
        }
        const fs::path dir = output_dir(cfg);
        write_csv((dir / "imputed.csv").string(), r.data);
        write_mask_csv((dir / "provenance.csv").string(), r.report.provenance, r.data.names());
        nlohmann::json report = run_header(cfg);
        report["result"] = impute_report_json(r.report);
        write_text(dir / "report.json", report.dump(2) + "\n");
        for (const auto& w : r.report.warnings) std::cerr << "warning: " << w << "\n";
    });
}

int cmd_evaluate(const RunConfig& cfg) {
    return guarded("evaluate", [&] {
        cfg.validate();
        const auto specs = resolve_specs(cfg, cfg.input);
        const Dataset truth = load_input(cfg, cfg.input, specs);
        if (!truth.complete()) throw InputError("evaluate needs a complete truth file");
        const auto sem = load_sem(cfg);
        const auto trials = run_trials(cfg, truth, sem);

        std::vector<EvaluationReport> reports;
        for (const auto& t : trials) reports.push_back(t.report);
        EvaluationReport mean = mean_of_reports(reports);
        mean.metadata["seed"] = cfg.seed;
        mean.metadata["trials"] = cfg.trials;
        const fs::path dir = output_dir(cfg);
        nlohmann::json header = run_header(cfg);
        if (cfg.format == "json") {
            nlohmann::json per_trial = nlohmann::json::array();
            for (std::size_t t = 0; t < trials.size(); ++t) {
                per_trial.push_back({{"trial", t},
                                     {"seed", trials[t].seed},
                                     {"method", trials[t].method_report},
                                     {"metrics", report_to_json(trials[t].report)}});
            }
            header["trials"] = per_trial;
            header["mean"] = report_to_json(mean);
            write_text(dir / "report.json", header.dump(2) + "\n");
        } else {
            std::string csv;
            for (std::size_t t = 0; t < trials.size(); ++t) {
                csv += prefix_lines(report_to_csv(trials[t].report),
                                    std::to_string(t) + "," + std::to_string(trials[t].seed) + ",", t == 0);
            }
            csv += prefix_lines(report_to_csv(mean), "mean,,", false);
            write_text(dir / "report.csv", csv);
            write_text(dir / "run.json", header.dump(2) + "\n");
        }
    });
}

int cmd_discover(const RunConfig& cfg) {
    return guarded("discover", [&] {
        cfg.validate();
        const auto specs = resolve_specs(cfg, cfg.input);
        const Dataset ds = load_input(cfg, cfg.input, specs);
        Dataset complete;
        std::string source;
        if (ds.complete()) {
            complete = ds;
            source = "complete";
        } else if (cfg.discover_input == "fiml") {
            EmConfig em;
            em.max_iter = cfg.em_max_iter;
            em.tol = cfg.em_tol;
            em.ridge = cfg.ridge;
            const EmResult fit = em_fit(ds, em);
            complete = as_complete(ds, conditional_impute(fit.params, ds, cfg.ridge));
            source = "fiml-imputed";
        } else {
            std::vector<Eigen::Index> keep;
            for (Eigen::Index i = 0; i < ds.rows(); ++i) {
                if (ds.mask().row(i).all()) keep.push_back(i);
            }
            if (keep.size() < 2) throw InputError("fewer than two complete rows; try --discover-input fiml");
            Matrix x(static_cast<Eigen::Index>(keep.size()), ds.cols());
            for (std::size_t r = 0; r < keep.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = ds.values().row(keep[r]);
            complete = Dataset(x, Mask::Constant(x.rows(), x.cols(), true), ds.specs());
            source = "complete-case";
        }

        NotearsConfig nc;
        nc.lambda1 = cfg.lambda1;
        nc.threshold = cfg.threshold;
        nc.inner_steps = cfg.notears_inner_steps;
        nc.max_outer = cfg.notears_max_outer;
        const WeightedGraph raw = notears_fit(complete, nc);
        const WeightedGraph g = threshold_dag(raw, cfg.threshold);

        const fs::path dir = output_dir(cfg);
        nlohmann::json graph = nlohmann::json::parse(graph_to_json(g, cfg.threshold, source));
        graph["rows_used"] = complete.rows();
        graph["run"] = run_header(cfg);
        write_text(dir / "graph.json", graph.dump(2) + "\n");
        write_text(dir / "graph.dot", "// " + std::string(kToolName) + " " + kVersion + " seed " +
                                          std::to_string(cfg.seed) + " config " + config_to_json(cfg).dump() +
                                          "\n" + graph_to_dot(g));
        if (!g.converged) std::cerr << "warning: NOTEARS did not reach the acyclicity tolerance\n";
        if (cfg.suggest || !cfg.suggest_outcome.empty()) {
            const std::optional<std::string> outcome =
                cfg.suggest_outcome.empty() ? std::nullopt : std::optional<std::string>(cfg.suggest_outcome);
            const SemSpec s = suggest_spec(g, outcome);
            write_text(dir / "suggested.sem", "# " + std::string(kToolName) + " " + kVersion + " seed " +
                                                  std::to_string(cfg.seed) + " config " +
                                                  config_to_json(cfg).dump() + "\n" + s.to_text());
        }
    });
}

int cmd_simulate(const RunConfig& cfg) {
    return guarded("simulate", [&] {
        cfg.validate();
        const auto specs = resolve_specs(cfg, cfg.input);
        // Validates types and completeness; the masked file keeps the original tokens.
        const Dataset ds = load_input(cfg, cfg.input, specs);
        if (!ds.complete()) throw InputError("simulate needs a complete input file");

        std::vector<Eigen::Index> scope;
        if (cfg.columns.empty()) {
            for (Eigen::Index j = 0; j < ds.cols(); ++j) scope.push_back(j);
        } else {
            for (const auto& c : cfg.columns) scope.push_back(ds.column_index(c));
            std::sort(scope.begin(), scope.end());
            scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
        }
        const Mask removed = mcar_selection(ds.rows(), ds.cols(), scope, cfg.missing_rate, cfg.seed);

        std::ifstream in(cfg.input, std::ios::binary);
        auto records = parse_csv_records(in);
        while (!records.empty() && records.back().size() == 1 && records.back()[0].empty() && ds.cols() > 1) {
            records.pop_back();
        }
        const auto& header = records.front();
        std::vector<std::size_t> file_col(static_cast<std::size_t>(ds.cols()));
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            auto it = std::find(header.begin(), header.end(), ds.spec(j).name);
            file_col[static_cast<std::size_t>(j)] = static_cast<std::size_t>(it - header.begin());
        }
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            for (Eigen::Index j = 0; j < ds.cols(); ++j) {
                if (removed(i, j)) records[static_cast<std::size_t>(i) + 1][file_col[static_cast<std::size_t>(j)]] = "NA";
            }
        }
        std::string text;
        for (const auto& rec : records) {
            for (std::size_t k = 0; k < rec.size(); ++k) {
                if (k > 0) text += ',';
                text += quote_field(rec[k]);
            }
            text += '\n';
        }
        const fs::path dir = output_dir(cfg);
        write_text(dir / "masked.csv", text);
        write_mask_csv((dir / "mask.csv").string(), removed, ds.names());
        nlohmann::json report = run_header(cfg);
        report["removed_cells"] = removed.count();
        write_text(dir / "run.json", report.dump(2) + "\n");
    });
}

int run(const RunConfig& cfg) {
    if (cfg.command == "impute") return cmd_impute(cfg);
    if (cfg.command == "evaluate") return cmd_evaluate(cfg);
    if (cfg.command == "discover") return cmd_discover(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    std::cerr << kToolName << ": unknown command '" << cfg.command << "'\n";
    return exit_input;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Attention-refined SEM imputation, evaluation and causal discovery"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    RunConfig flags;
    flags.threads = default_threads();
    std::string config_path;
    struct Bound {
        CLI::App* sub;
        std::vector<std::pair<CLI::Option*, const Field*>> options;
    };
    std::vector<Bound> bound;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"impute", "impute missing cells of a CSV"},
        {"evaluate", "mask a complete CSV, impute it and score the result"},
        {"discover", "learn a DAG with NOTEARS"},
        {"simulate", "write an MCAR-masked copy of a complete CSV"}};
    for (const auto& [name, help] : commands) {
        Bound b;
        b.sub = app.add_subcommand(name, help);
        b.sub->add_option("--config", config_path, "JSON config; flags override it");
        b.sub->add_option("--threads", flags.threads, "worker threads for --trials (default SESA_THREADS)");
        for (const auto& f : fields()) {
            if (f.key == "command") continue;
            CLI::Option* opt = f.add(*b.sub, flags);
            b.options.emplace_back(opt, &f);
        }
        bound.push_back(std::move(b));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_input;
    }

    for (const auto& b : bound) {
        if (!b.sub->parsed()) continue;
        RunConfig cfg;
        cfg.threads = flags.threads;
        const int code = guarded(b.sub->get_name().c_str(), [&] {
            if (!config_path.empty()) {
                require_file(config_path, "config");
                std::ifstream in(config_path, std::ios::binary);
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(in);
                } catch (const nlohmann::json::exception& e) {
                    throw InputError("config " + config_path + ": " + e.what());
                }
                cfg = config_from_json(j, cfg);
            }
            for (const auto& [opt, field] : b.options) {
                if (opt->count() > 0) field->copy(cfg, flags);
            }
            cfg.command = b.sub->get_name();
        });
        return code == exit_ok ? run(cfg) : code;
    }
    return exit_input;
}

}  // namespace sesa
