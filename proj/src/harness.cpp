#include "flr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "flr/error.hpp"
#include "flr/estimator.hpp"
#include "flr/oracle.hpp"
#include "flr/simulate.hpp"

namespace flr {

namespace {

double log_factor(std::int64_t n) { return 1.0 + std::log(static_cast<double>(n)); }

// Per-n quantities shared read-only by all replicates.
struct GridContext {
    std::int64_t n = 0;
    SimConfig sim;
    SlopeSpec slope;
    double truth = 0.0;
    double truth_tail_bound = 0.0;
    std::int64_t m_ell = 0;
    std::int64_t m_fixed = 0;  // m* clipped to the truncation
    std::int64_t sandwich_upper = 0;
    double class_d = 1.0;
    std::vector<TheoreticalPenalty> population;  // m = 1..m_ell
    OracleRisk minimax;
    OracleRisk adaptive;
    std::int64_t moment_dim = 0;
};

GridContext make_context(const StudyConfig& cfg, std::int64_t n) {
    GridContext ctx;
    ctx.n = n;
    ctx.sim.n = n;
    ctx.sim.sigma = cfg.sigma;
    ctx.sim.model = cfg.model;
    ctx.sim.slope_scale = cfg.slope_scale;
    ctx.sim.rotation = cfg.rotation;
    const std::int64_t J = ctx.sim.truncation();
    ctx.slope = make_slope(cfg.model, J, cfg.slope_scale);
    const auto truth = true_value(cfg.spec, ctx.slope, cfg.model);
    ctx.truth = truth.value;
    ctx.truth_tail_bound = truth.tail_bound;
    ctx.m_ell = cap_m_ell(cfg.spec, n).value;

    const std::int64_t search = default_search_range(cfg.model, n);
    const double nd = static_cast<double>(n);
    ctx.minimax = minimax_dimension(cfg.model, cfg.spec, 1.0 / nd, search);
    ctx.adaptive = minimax_dimension(cfg.model, cfg.spec, log_factor(n) / nd, search);
    ctx.m_fixed = std::min(ctx.minimax.m_star, J);
    ctx.moment_dim = std::max(ctx.m_ell, ctx.m_fixed);

    ctx.class_d = class_constant_d(cfg.model, J, cfg.rotation);
    ctx.population = theoretical_penalties(cfg.model, cfg.spec, ctx.slope, cfg.sigma, n, ctx.m_ell, cfg.rotation);

    // Deterministic upper bound on M^_n: the stopping rule with ||[Gamma^]_m^{-1}|| replaced by (4 d gamma_m)^{-1}.
    const double threshold = nd / log_factor(n);
    ctx.sandwich_upper = ctx.m_ell;
    double g = 0.0;
    for (std::int64_t m = 1; m <= ctx.m_ell; ++m) {
        const double c = coefficient(cfg.spec, m);
        g += c * c;
        if (m < 2) continue;
        const double lower_inv_norm = 1.0 / (4.0 * ctx.class_d * gamma(cfg.model, m).value);
        if (lower_inv_norm * g > threshold) {
            ctx.sandwich_upper = m - 1;
            break;
        }
    }
    return ctx;
}

ReplicateRecord run_replicate(const StudyConfig& cfg, const GridContext& ctx, std::int64_t r) {
    ReplicateRecord rec;
    rec.n = ctx.n;
    rec.replicate = r;
    rec.seed = replicate_seed(cfg.base_seed, ctx.n, r);
    try {
        SimConfig sim = ctx.sim;
        sim.seed = rec.seed;
        const Dataset data = draw_dataset(sim, ctx.slope);
        const Moments mom = empirical_moments(data, ctx.moment_dim);
        const auto res = adaptive_estimate(mom, cfg.spec, AdaptiveOptions{cfg.penalty_constant});
        rec.m_ell_cap = res.m_ell_cap;
        rec.m_hat_cap = res.m_hat_cap;
        rec.selected = res.selected;
        rec.value = res.value;
        const double err = res.value - ctx.truth;
        rec.sq_err_adaptive = err * err;

        rec.sq_err_oracle = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < res.estimates.size(); ++m) {
            const double e = res.estimates[m] - ctx.truth;
            rec.sq_err_by_m.push_back(e * e);
            if (e * e < rec.sq_err_oracle) {
                rec.sq_err_oracle = e * e;
                rec.oracle_m = static_cast<std::int64_t>(m) + 1;
            }
        }

        const double fixed = plug_in(cfg.spec, galerkin_estimate(mom, ctx.m_fixed));
        rec.sq_err_fixed = (fixed - ctx.truth) * (fixed - ctx.truth);

        const std::int64_t range = std::min(res.m_hat_cap, ctx.sandwich_upper);
        rec.sandwich = true;
        for (std::int64_t m = 1; m <= range; ++m) {
            const double p = ctx.population[m - 1].p_m;
            const double ph = res.penalties[m - 1];
            if (!(p <= ph && ph <= 24.0 * p)) {
                rec.sandwich = false;
                break;
            }
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

unsigned worker_count(unsigned requested, std::size_t tasks) {
    unsigned t = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(tasks, 1)));
}

// Runs replicates 0..R-1 for every context; output is in (context, replicate) order.
std::vector<ReplicateRecord> run_all(const StudyConfig& cfg, const std::vector<GridContext>& contexts) {
    const std::size_t R = static_cast<std::size_t>(cfg.replicates);
    const std::size_t total = contexts.size() * R;
    std::vector<ReplicateRecord> records(total);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < total; i = next++)
            records[i] = run_replicate(cfg, contexts[i / R], static_cast<std::int64_t>(i % R));
    };
    const unsigned threads = worker_count(cfg.threads, total);
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return records;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe out;
    if (v.empty()) return out;
    double s = 0.0;
    for (double x : v) s += x;
    out.mean = s / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return out;
}

GridPoint aggregate(const GridContext& ctx, const ReplicateRecord* recs, std::size_t R,
                    const SequenceModel& model, const FunctionalSpec& spec) {
    GridPoint pt;
    pt.n = ctx.n;
    pt.truncation = ctx.slope.coeffs.size();
    pt.truth = ctx.truth;
    pt.truth_tail_bound = ctx.truth_tail_bound;
    pt.m_ell_cap = ctx.m_ell;
    pt.m_star = ctx.minimax.m_star;
    pt.m_diamond = ctx.adaptive.m_star;
    pt.r_star_minimax = ctx.minimax.r_star;
    pt.r_star_adaptive = ctx.adaptive.r_star;
    pt.sandwich_upper = ctx.sandwich_upper;
    pt.class_d = ctx.class_d;
    pt.side_condition_ratio =
        gram(spec, ctx.adaptive.m_star) / gamma(model, ctx.adaptive.m_star).value * log_factor(ctx.n) /
        static_cast<double>(ctx.n);

    pt.selected_histogram.assign(static_cast<std::size_t>(ctx.m_ell) + 1, 0);
    std::vector<double> ad, orc, fix;
    std::int64_t sandwich_hits = 0;
    pt.mse_by_m.assign(static_cast<std::size_t>(ctx.m_ell), 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        const auto& rec = recs[r];
        if (!rec.ok) {
            ++pt.failures;
            continue;
        }
        ++pt.completed;
        ad.push_back(rec.sq_err_adaptive);
        orc.push_back(rec.sq_err_oracle);
        fix.push_back(rec.sq_err_fixed);
        ++pt.selected_histogram[static_cast<std::size_t>(rec.selected)];
        if (rec.sandwich) ++sandwich_hits;
        for (std::size_t m = 0; m < rec.sq_err_by_m.size() && m < pt.mse_by_m.size(); ++m)
            pt.mse_by_m[m] += rec.sq_err_by_m[m];
    }
    if (pt.completed > 0) {
        for (auto& v : pt.mse_by_m) v /= static_cast<double>(pt.completed);
        const auto best = std::min_element(pt.mse_by_m.begin(), pt.mse_by_m.end());
        pt.best_fixed_m = static_cast<std::int64_t>(best - pt.mse_by_m.begin()) + 1;
        pt.mse_best_fixed = *best;
    }
    const auto a = mean_se(ad), o = mean_se(orc), f = mean_se(fix);
    pt.mse_adaptive = a.mean;
    pt.se_adaptive = a.se;
    pt.mse_oracle = o.mean;
    pt.se_oracle = o.se;
    pt.mse_fixed = f.mean;
    pt.se_fixed = f.se;
    pt.sandwich_frequency =
        pt.completed > 0 ? static_cast<double>(sandwich_hits) / static_cast<double>(pt.completed) : 0.0;
    return pt;
}

std::optional<RateFit> try_fit(const StudyReport& rep, double GridPoint::*field, Abscissa abscissa,
                               const std::string& label, std::vector<std::string>& notes) {
    std::vector<std::int64_t> ns;
    std::vector<double> risks;
    for (const auto& pt : rep.points) {
        ns.push_back(pt.n);
        risks.push_back(pt.*field);
    }
    try {
        return fit_rate(ns, risks, abscissa);
    } catch (const InvalidArgument& e) {
        notes.push_back(label + " fit skipped: " + e.what());
        return std::nullopt;
    }
}

nlohmann::json fit_json(const std::optional<RateFit>& fit) {
    if (!fit) return nullptr;
    return {{"slope", fit->slope}, {"stderr", fit->stderr_}};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace

void StudyConfig::validate() const {
    model.validate();
    flr::validate(spec);
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be finite and >= 0");
    if (replicates < 2) throw InvalidArgument("replicates must be >= 2");
    if (n_grid.empty()) throw InvalidArgument("n_grid must not be empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 16) throw InvalidArgument("every n in n_grid must be >= 16");
        if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw InvalidArgument("n_grid must be strictly increasing");
    }
    if (!(penalty_constant > 0.0) || !std::isfinite(penalty_constant))
        throw InvalidArgument("penalty_constant must be positive");
    if (!(slope_scale >= 0.0 && slope_scale <= 1.0)) throw InvalidArgument("slope_scale must lie in [0, 1]");
    if (!std::isfinite(rotation)) throw InvalidArgument("rotation must be finite");
}

std::uint64_t replicate_seed(std::uint64_t base_seed, std::int64_t n, std::int64_t replicate) {
    return (base_seed + static_cast<std::uint64_t>(replicate)) ^ mix_seed(static_cast<std::uint64_t>(n));
}

RateFit fit_rate(const std::vector<std::int64_t>& n_values, const std::vector<double>& risks, Abscissa abscissa) {
    if (n_values.size() != risks.size()) throw InvalidArgument("fit_rate: length mismatch");
    if (n_values.size() < 3) throw InvalidArgument("fit_rate needs at least 3 grid points");
    const std::size_t k = n_values.size();
    std::vector<double> x(k), y(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(risks[i] > 0.0) || !std::isfinite(risks[i]))
            throw InvalidArgument("fit_rate: risk at n = " + std::to_string(n_values[i]) + " is not positive");
        const double n = static_cast<double>(n_values[i]);
        if (n <= 1.0) throw InvalidArgument("fit_rate: n must exceed 1");
        x[i] = abscissa == Abscissa::N ? std::log(n) : std::log(n / std::log(n));
        y[i] = std::log(risks[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument("fit_rate: abscissae are not distinct");
    RateFit fit;
    fit.slope = sxy / sxx;
    const double intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double res = y[i] - intercept - fit.slope * x[i];
        ssr += res * res;
    }
    fit.stderr_ = std::sqrt(ssr / static_cast<double>(k - 2) / sxx);
    return fit;
}

StudyReport run_study(const StudyConfig& cfg) {
    cfg.validate();
    StudyReport rep;
    rep.config = cfg;

    std::vector<GridContext> contexts;
    contexts.reserve(cfg.n_grid.size());
    for (std::int64_t n : cfg.n_grid) contexts.push_back(make_context(cfg, n));

    rep.records = run_all(cfg, contexts);
    const std::size_t R = static_cast<std::size_t>(cfg.replicates);
    std::int64_t failures = 0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        rep.points.push_back(aggregate(contexts[i], rep.records.data() + i * R, R, cfg.model, cfg.spec));
        failures += rep.points.back().failures;
        if (contexts[i].minimax.at_boundary)
            rep.notes.push_back("m* at n = " + std::to_string(contexts[i].n) + " sits on the search limit");
        if (!std::isfinite(contexts[i].truth_tail_bound))
            rep.notes.push_back("truncation tail bound at n = " + std::to_string(contexts[i].n) + " is infinite");
    }
    const auto total = static_cast<std::int64_t>(rep.records.size());
    if (failures * 100 > total) {
        std::string first;
        for (const auto& rec : rep.records)
            if (!rec.ok) {
                first = rec.error;
                break;
            }
        throw NumericalError("study failed: " + std::to_string(failures) + " of " + std::to_string(total) +
                             " replicates errored (first: " + first + ")");
    }
    if (failures > 0) rep.notes.push_back(std::to_string(failures) + " replicates errored and were excluded");

    rep.adaptive_vs_n_over_log_n =
        try_fit(rep, &GridPoint::mse_adaptive, Abscissa::NOverLogN, "adaptive vs n/log n", rep.notes);
    rep.adaptive_vs_n = try_fit(rep, &GridPoint::mse_adaptive, Abscissa::N, "adaptive vs n", rep.notes);
    rep.oracle_vs_n = try_fit(rep, &GridPoint::mse_oracle, Abscissa::N, "oracle vs n", rep.notes);
    rep.fixed_vs_n = try_fit(rep, &GridPoint::mse_fixed, Abscissa::N, "fixed m* vs n", rep.notes);

    try {
        rep.minimax_rate = rate_exponent(cfg.model, cfg.spec, RateMode::Minimax);
        rep.adaptive_rate = rate_exponent(cfg.model, cfg.spec, RateMode::Adaptive);
    } catch (const InvalidArgument& e) {
        rep.notes.push_back(std::string("no closed-form rate: ") + e.what());
    }
    rep.notes.push_back(
        "risk is measured at one slope/covariance pair and is a lower bound on the maximal risk over the classes");
    return rep;
}

double sandwich_frequency(const StudyConfig& cfg, std::int64_t n) {
    StudyConfig one = cfg;
    one.n_grid = {n};
    one.validate();
    const std::vector<GridContext> contexts{make_context(one, n)};
    const auto records = run_all(one, contexts);
    return aggregate(contexts[0], records.data(), records.size(), one.model, one.spec).sandwich_frequency;
}

nlohmann::json to_json(const StudyConfig& cfg) {
    nlohmann::json j;
    j["model"] = {{"regime", std::string(to_string(cfg.model.regime))},
                  {"p", cfg.model.p},
                  {"a", cfg.model.a},
                  {"r", cfg.model.r},
                  {"d", cfg.model.d}};
    j["functional"] = to_string(cfg.spec);
    j["sigma"] = cfg.sigma;
    j["n_grid"] = cfg.n_grid;
    j["replicates"] = cfg.replicates;
    j["base_seed"] = cfg.base_seed;
    j["penalty_constant"] = cfg.penalty_constant;
    j["slope_scale"] = cfg.slope_scale;
    j["rotation"] = cfg.rotation;
    return j;
}

nlohmann::json to_json(const StudyReport& rep) {
    nlohmann::json j;
    j["config"] = to_json(rep.config);
    auto& pts = j["points"] = nlohmann::json::array();
    for (const auto& pt : rep.points) {
        pts.push_back({{"n", pt.n},
                       {"truncation", pt.truncation},
                       {"truth", pt.truth},
                       {"truth_tail_bound", std::isfinite(pt.truth_tail_bound) ? nlohmann::json(pt.truth_tail_bound)
                                                                              : nlohmann::json(nullptr)},
                       {"m_ell_cap", pt.m_ell_cap},
                       {"m_star", pt.m_star},
                       {"m_diamond", pt.m_diamond},
                       {"r_star_minimax", pt.r_star_minimax},
                       {"r_star_adaptive", pt.r_star_adaptive},
                       {"side_condition_ratio", pt.side_condition_ratio},
                       {"sandwich_upper", pt.sandwich_upper},
                       {"class_d", pt.class_d},
                       {"completed", pt.completed},
                       {"failures", pt.failures},
                       {"mse_adaptive", pt.mse_adaptive},
                       {"se_adaptive", pt.se_adaptive},
                       {"mse_oracle", pt.mse_oracle},
                       {"se_oracle", pt.se_oracle},
                       {"mse_fixed", pt.mse_fixed},
                       {"se_fixed", pt.se_fixed},
                       {"adaptive_to_oracle", pt.mse_oracle > 0.0 ? nlohmann::json(pt.mse_adaptive / pt.mse_oracle)
                                                                  : nlohmann::json(nullptr)},
                       {"mse_by_m", pt.mse_by_m},
                       {"best_fixed_m", pt.best_fixed_m},
                       {"mse_best_fixed", pt.mse_best_fixed},
                       {"adaptive_to_best_fixed", pt.mse_best_fixed > 0.0
                                                      ? nlohmann::json(pt.mse_adaptive / pt.mse_best_fixed)
                                                      : nlohmann::json(nullptr)},
                       {"selected_histogram", pt.selected_histogram},
                       {"sandwich_frequency", pt.sandwich_frequency}});
    }
    j["fits"] = {{"adaptive_vs_n_over_log_n", fit_json(rep.adaptive_vs_n_over_log_n)},
                 {"adaptive_vs_n", fit_json(rep.adaptive_vs_n)},
                 {"oracle_vs_n", fit_json(rep.oracle_vs_n)},
                 {"fixed_vs_n", fit_json(rep.fixed_vs_n)}};
    j["rates"] = {{"minimax", rep.minimax_rate ? to_json(*rep.minimax_rate) : nlohmann::json(nullptr)},
                  {"adaptive", rep.adaptive_rate ? to_json(*rep.adaptive_rate) : nlohmann::json(nullptr)}};
    j["notes"] = rep.notes;
    return j;
}

void write_rate_curves_csv(std::ostream& out, const StudyReport& rep) {
    out << "n,risk_adaptive,se,risk_oracle,rate_theoretical_minimax,rate_theoretical_adaptive\n";
    for (const auto& pt : rep.points) {
        out << pt.n << ',' << format_double(pt.mse_adaptive) << ',' << format_double(pt.se_adaptive) << ','
            << format_double(pt.mse_oracle) << ',' << format_double(pt.r_star_minimax) << ','
            << format_double(pt.r_star_adaptive) << '\n';
    }
}

void write_records_csv(std::ostream& out, const StudyReport& rep) {
    out << "n,replicate,seed,ok,m_ell_cap,m_hat_cap,selected,value,sq_err_adaptive,sq_err_oracle,oracle_m,"
           "sq_err_fixed,sandwich,error\n";
    for (const auto& r : rep.records) {
        out << r.n << ',' << r.replicate << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',' << r.m_ell_cap << ','
            << r.m_hat_cap << ',' << r.selected << ',' << format_double(r.value) << ','
            << format_double(r.sq_err_adaptive) << ',' << format_double(r.sq_err_oracle) << ',' << r.oracle_m << ','
            << format_double(r.sq_err_fixed) << ',' << (r.sandwich ? 1 : 0) << ',' << csv_field(r.error) << '\n';
    }
}

}  // namespace flr
