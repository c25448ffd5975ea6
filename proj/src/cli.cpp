#include "flr/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flr/adaptive.hpp"
#include "flr/error.hpp"
#include "flr/harness.hpp"
#include "flr/oracle.hpp"
#include "flr/simulate.hpp"

namespace flr {

namespace {

using nlohmann::json;

class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string reason, const std::string& detail)
        : InvalidArgument(detail), reason_(std::move(reason)) {}
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

class PropertyViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json load_config(const std::optional<std::string>& path) {
    if (!path) return json::object();
    std::ifstream in(*path);
    if (!in) throw ConfigError("config not found", *path);
    try {
        json cfg = json::parse(in);
        if (!cfg.is_object()) throw ConfigError("config invalid", "top level must be an object");
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config invalid", e.what());
    }
}

template <class T>
T config_value(const json& cfg, const char* section, const char* key, T fallback) {
    if (!cfg.contains(section)) return fallback;
    const json& sec = cfg.at(section);
    if (!sec.is_object() || !sec.contains(key)) return fallback;
    try {
        return sec.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config invalid", std::string(section) + "." + key + ": " + e.what());
    }
}

struct ModelFlags {
    std::optional<std::string> regime;
    std::optional<double> p, a, r, d;

    void attach(CLI::App* app) {
        app->add_option("--regime", regime, "pp, pe or ep");
        app->add_option("--p", p, "slope regularity exponent");
        app->add_option("--a", a, "eigenvalue decay exponent");
        app->add_option("--r", r, "ellipsoid radius");
        app->add_option("--d", d, "operator class constant");
    }

    SequenceModel resolve(const json& cfg) const {
        SequenceModel m;
        m.regime = parse_regime(regime.value_or(config_value<std::string>(cfg, "model", "regime", "pp")));
        m.p = p.value_or(config_value<double>(cfg, "model", "p", 1.0));
        m.a = a.value_or(config_value<double>(cfg, "model", "a", 1.0));
        m.r = r.value_or(config_value<double>(cfg, "model", "r", 1.0));
        m.d = d.value_or(config_value<double>(cfg, "model", "d", 1.0));
        m.validate();
        return m;
    }
};

std::optional<FunctionalSpec> resolve_functional(const std::optional<std::string>& flag, const json& cfg) {
    if (flag) return parse_functional(*flag);
    if (cfg.contains("functional")) {
        if (!cfg.at("functional").is_string()) throw ConfigError("config invalid", "functional must be a string");
        return parse_functional(cfg.at("functional").get<std::string>());
    }
    return std::nullopt;
}

FunctionalSpec require_functional(const std::optional<std::string>& flag, const json& cfg) {
    auto spec = resolve_functional(flag, cfg);
    if (!spec) throw InvalidArgument("a functional is required (--functional or config key 'functional')");
    return *spec;
}

std::vector<std::int64_t> parse_grid(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument("invalid n_grid entry '" + item + "'");
        }
    }
    return out;
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("FLR_SEED");
    if (!raw || !*raw) return std::nullopt;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(raw, &used);
        if (used != std::string(raw).size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument(std::string("FLR_SEED is not an unsigned integer: ") + raw);
    }
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << content;
    if (!out) throw InvalidArgument("cannot write " + path);
}

void report_error(std::ostream& err, int code, const std::string& reason, const std::string& detail) {
    err << json{{"error", {{"code", code}, {"reason", reason}, {"detail", detail}}}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive estimation of linear functionals in functional linear regression", "flr"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "JSON config with sections model, functional, simulate, study");

    ModelFlags model_flags;
    std::optional<std::string> functional;

    // simulate
    auto* sim = app.add_subcommand("simulate", "draw a dataset and write it as CSV");
    model_flags.attach(sim);
    std::optional<std::int64_t> sim_n, sim_J;
    std::optional<double> sim_sigma, sim_scale, sim_rotation;
    std::optional<std::uint64_t> sim_seed;
    std::optional<std::string> sim_out;
    sim->add_option("--n", sim_n, "sample size");
    sim->add_option("--J", sim_J, "truncation dimension (0: default)");
    sim->add_option("--sigma", sim_sigma, "noise level");
    sim->add_option("--seed", sim_seed, "seed");
    sim->add_option("--slope-scale", sim_scale, "sum beta_j phi_j^2 as a fraction of r");
    sim->add_option("--rotation", sim_rotation, "Givens angle for the covariance");
    sim->add_option("--out", sim_out, "output CSV path");
    sim->add_option("--functional", functional, "functional for the reported true value");

    // estimate
    auto* est = app.add_subcommand("estimate", "adaptive estimate from a dataset CSV");
    std::optional<std::string> est_data;
    std::optional<double> est_constant;
    est->add_option("--data", est_data, "dataset CSV")->required();
    est->add_option("--functional", functional, "point:T0 | deriv:T0:Q | avg:B | custom:c1,c2,...");
    est->add_option("--penalty-constant", est_constant, "penalty constant");

    // mc-study
    auto* study = app.add_subcommand("mc-study", "Monte Carlo risk study");
    model_flags.attach(study);
    std::optional<std::string> st_grid, st_report, st_curves, st_records;
    std::optional<std::int64_t> st_reps;
    std::optional<std::uint64_t> st_seed;
    std::optional<double> st_sigma, st_constant, st_scale, st_rotation;
    std::optional<unsigned> st_threads;
    study->add_option("--functional", functional, "functional");
    study->add_option("--n-grid", st_grid, "comma separated sample sizes");
    study->add_option("--replicates", st_reps, "replicates per sample size");
    study->add_option("--seed", st_seed, "base seed");
    study->add_option("--sigma", st_sigma, "noise level");
    study->add_option("--penalty-constant", st_constant, "penalty constant");
    study->add_option("--slope-scale", st_scale, "sum beta_j phi_j^2 as a fraction of r");
    study->add_option("--rotation", st_rotation, "Givens angle for the covariance");
    study->add_option("--threads", st_threads, "worker threads (0: all cores)");
    study->add_option("--report", st_report, "report JSON path");
    study->add_option("--curves", st_curves, "rate curve CSV path");
    study->add_option("--records", st_records, "per-replicate CSV path");

    // rates
    auto* rates = app.add_subcommand("rates", "oracle dimension, risk curve and rate exponents");
    model_flags.attach(rates);
    std::optional<std::int64_t> rt_n, rt_search;
    rates->add_option("--functional", functional, "functional");
    rates->add_option("--n", rt_n, "sample size")->required();
    rates->add_option("--m-max", rt_search, "search range for m (default depends on regime)");

    // check-lemma
    auto* lemma = app.add_subcommand("check-lemma", "randomized deterministic oracle-inequality suite");
    std::int64_t lm_instances = 10000, lm_max_m = 20;
    std::uint64_t lm_seed = 7;
    lemma->add_option("--instances", lm_instances, "number of instances")->capture_default_str();
    lemma->add_option("--seed", lm_seed, "seed")->capture_default_str();
    lemma->add_option("--max-m", lm_max_m, "largest M")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(err, 1, "usage", e.what());
        return 1;
    }

    try {
        const json cfg = load_config(config_path);

        if (*sim) {
            SimConfig sc;
            sc.model = model_flags.resolve(cfg);
            sc.n = sim_n.value_or(config_value<std::int64_t>(cfg, "simulate", "n", 1000));
            sc.J = sim_J.value_or(config_value<std::int64_t>(cfg, "simulate", "J", 0));
            sc.sigma = sim_sigma.value_or(config_value<double>(cfg, "simulate", "sigma", 1.0));
            sc.seed = sim_seed.value_or(config_value<std::uint64_t>(cfg, "simulate", "seed", 1));
            if (auto s = env_seed()) sc.seed = *s;
            if (sim_seed) sc.seed = *sim_seed;
            sc.slope_scale = sim_scale.value_or(config_value<double>(cfg, "simulate", "slope_scale", 0.9));
            sc.rotation = sim_rotation.value_or(config_value<double>(cfg, "simulate", "rotation", 0.0));
            const std::string path = sim_out.value_or(config_value<std::string>(cfg, "simulate", "out", ""));
            if (path.empty()) throw InvalidArgument("simulate needs an output path (--out or simulate.out)");
            sc.validate();
            const auto slope = make_slope(sc.model, sc.truncation(), sc.slope_scale);
            const auto data = draw_dataset(sc, slope);
            std::ostringstream csv;
            write_dataset_csv(csv, data);
            write_file(path, csv.str());
            json summary{{"out", path}, {"n", sc.n}, {"J", sc.truncation()}, {"seed", sc.seed}};
            if (auto spec = resolve_functional(functional, cfg)) {
                const auto tv = true_value(*spec, slope, sc.model);
                summary["functional"] = to_string(*spec);
                summary["truth"] = tv.value;
                summary["truth_tail_bound"] = std::isfinite(tv.tail_bound) ? json(tv.tail_bound) : json(nullptr);
            }
            out << summary.dump(2) << '\n';
            return 0;
        }

        if (*est) {
            const auto spec = require_functional(functional, cfg);
            std::ifstream in(*est_data);
            if (!in) throw ConfigError("data not found", *est_data);
            const auto data = read_dataset_csv(in);
            AdaptiveOptions opts;
            opts.penalty_constant =
                est_constant.value_or(config_value<double>(cfg, "study", "penalty_constant", kDefaultPenaltyConstant));
            if (!(opts.penalty_constant > 0.0)) throw InvalidArgument("penalty constant must be positive");
            try {
                out << to_json(adaptive_estimate(data, spec, opts)).dump(2) << '\n';
            } catch (const AdaptiveError& e) {
                out << to_json(e.partial()).dump(2) << '\n';
                throw;
            }
            return 0;
        }

        if (*study) {
            StudyConfig sc;
            sc.model = model_flags.resolve(cfg);
            sc.spec = require_functional(functional, cfg);
            sc.sigma = st_sigma.value_or(config_value<double>(cfg, "study", "sigma", 1.0));
            sc.n_grid = st_grid ? parse_grid(*st_grid)
                                : config_value<std::vector<std::int64_t>>(cfg, "study", "n_grid",
                                                                          {500, 1000, 2000, 4000, 8000});
            sc.replicates = st_reps.value_or(config_value<std::int64_t>(cfg, "study", "replicates", 200));
            sc.base_seed = config_value<std::uint64_t>(cfg, "study", "base_seed", 1);
            if (auto s = env_seed()) sc.base_seed = *s;
            if (st_seed) sc.base_seed = *st_seed;
            sc.penalty_constant =
                st_constant.value_or(config_value<double>(cfg, "study", "penalty_constant", kDefaultPenaltyConstant));
            sc.slope_scale = st_scale.value_or(config_value<double>(cfg, "study", "slope_scale", 0.9));
            sc.rotation = st_rotation.value_or(config_value<double>(cfg, "study", "rotation", 0.0));
            sc.threads = st_threads.value_or(config_value<unsigned>(cfg, "study", "threads", 0u));
            const std::string report_path =
                st_report.value_or(config_value<std::string>(cfg, "study", "report", "study_report.json"));
            const std::string curves_path =
                st_curves.value_or(config_value<std::string>(cfg, "study", "curves", "rate_curves.csv"));
            const std::string records_path =
                st_records.value_or(config_value<std::string>(cfg, "study", "records", "records.csv"));
            sc.validate();

            const auto rep = run_study(sc);
            write_file(report_path, to_json(rep).dump(2) + "\n");
            std::ostringstream curves, records;
            write_rate_curves_csv(curves, rep);
            write_records_csv(records, rep);
            write_file(curves_path, curves.str());
            write_file(records_path, records.str());
            json summary{{"report", report_path}, {"curves", curves_path}, {"records", records_path}};
            summary["fits"] = to_json(rep)["fits"];
            out << summary.dump(2) << '\n';
            return 0;
        }

        if (*rates) {
            const auto model = model_flags.resolve(cfg);
            const auto spec = require_functional(functional, cfg);
            const std::int64_t n = *rt_n;
            if (n < 2) throw InvalidArgument("--n must be >= 2");
            const std::int64_t search = rt_search.value_or(default_search_range(model, n));
            if (search < 1) throw InvalidArgument("--m-max must be >= 1");
            const double nd = static_cast<double>(n);
            const auto mm = minimax_dimension(model, spec, 1.0 / nd, search);
            const auto ad = minimax_dimension(model, spec, (1.0 + std::log(nd)) / nd, search);
            json j{{"n", n},
                   {"functional", to_string(spec)},
                   {"regime", std::string(to_string(model.regime))},
                   {"m_star", mm.m_star},
                   {"r_star_minimax", mm.r_star},
                   {"m_diamond", ad.m_star},
                   {"r_star_adaptive", ad.r_star},
                   {"at_boundary", mm.at_boundary || ad.at_boundary},
                   {"curve_minimax", mm.values},
                   {"curve_adaptive", ad.values}};
            try {
                j["minimax_rate"] = to_json(rate_exponent(model, spec, RateMode::Minimax));
                j["adaptive_rate"] = to_json(rate_exponent(model, spec, RateMode::Adaptive));
            } catch (const InvalidArgument& e) {
                j["minimax_rate"] = nullptr;
                j["adaptive_rate"] = nullptr;
                j["rate_note"] = e.what();
            }
            out << j.dump(2) << '\n';
            return 0;
        }

        if (*lemma) {
            if (lm_max_m < 1) throw InvalidArgument("--max-m must be >= 1");
            const auto rep = lemma_suite(lm_instances, lm_seed, lm_max_m);
            json j{{"instances", rep.instances},
                   {"violations", rep.violations},
                   {"seed", lm_seed},
                   {"first_violation", rep.first_violation ? json(*rep.first_violation) : json(nullptr)}};
            out << j.dump(2) << '\n';
            if (rep.violations > 0)
                throw PropertyViolation(std::to_string(rep.violations) + " lemma violations");
            return 0;
        }
    } catch (const ConfigError& e) {
        report_error(err, 1, e.reason(), e.what());
        return 1;
    } catch (const InvalidArgument& e) {
        report_error(err, 1, "invalid argument", e.what());
        return 1;
    } catch (const PropertyViolation& e) {
        report_error(err, 3, "property violation", e.what());
        return 3;
    } catch (const SaturationError& e) {
        report_error(err, 2, "saturation", e.what());
        return 2;
    } catch (const NumericalError& e) {
        report_error(err, 2, "numerical failure", e.what());
        return 2;
    } catch (const std::exception& e) {
        report_error(err, 2, "failure", e.what());
        return 2;
    }
    report_error(err, 1, "usage", "no subcommand");
    return 1;
}

}  // namespace flr
