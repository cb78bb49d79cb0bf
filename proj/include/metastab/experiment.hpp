#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metastab/chain_io.hpp"
#include "metastab/meta.hpp"
#include "metastab/models/birth_death.hpp"
#include "metastab/models/zero_range.hpp"
#include "metastab/montecarlo.hpp"

namespace metastab {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    std::string model = "zr";  // zr | bd | chain
    int kappa = 2;
    double alpha = 3.0;
    std::vector<int> n_grid{20, 40, 80};
    std::optional<int> ell;
    std::optional<double> beta;
    double horizon = 50.0;
    std::size_t replicas = 20;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t max_states = linalg::kMaxStates;
    bool simulate = true;
    std::optional<std::size_t> jump_budget;  // per replica, replaces the horizon when set
    // birth-death
    double a = 0.0;
    double b = 1.0;
    std::vector<double> zeros{0.0, 1.0};
    std::vector<double> exponents;
    nlohmann::json lambda = 1.0;  // constant or [[x, value], ...] table
    // explicit chain
    std::string chain_file;
    std::vector<std::vector<std::string>> wells;
    // diagnostics
    bool c1 = true;
    bool c2 = true;
    bool c3 = true;
    bool h2h3 = true;

    /// Canonical JSON form used for hashing and provenance.
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["model"] = model;
        j["kappa"] = kappa;
        j["alpha"] = alpha;
        j["n_grid"] = n_grid;
        j["ell"] = ell ? nlohmann::json(*ell) : nlohmann::json(nullptr);
        j["beta"] = beta ? nlohmann::json(*beta) : nlohmann::json(nullptr);
        j["horizon"] = horizon;
        j["replicas"] = replicas;
        j["seed"] = seed;
        j["max_states"] = max_states;
        j["simulate"] = simulate;
        j["jump_budget"] = jump_budget ? nlohmann::json(*jump_budget) : nlohmann::json(nullptr);
        if (model == "bd") {
            j["interval"] = {a, b};
            j["zeros"] = zeros;
            j["exponents"] = exponents;
            j["lambda"] = lambda;
        }
        if (model == "chain") {
            j["chain_file"] = chain_file;
            j["wells"] = wells;
        }
        j["diagnostics"] = {{"c1", c1}, {"c2", c2}, {"c3", c3}, {"h2h3", h2h3}};
        return j;
    }
};

inline void config_error(const std::string& message) { throw Error(Errc::ConfigInvalid, message); }

/// Parses and validates a configuration object; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) config_error("configuration must be a JSON object");
    static const std::vector<std::string> known = {
        "model", "kappa",       "alpha",    "n_grid", "ell",       "beta",  "horizon", "replicas", "seed",
        "out",   "max_states",  "simulate", "jump_budget", "interval", "zeros", "exponents", "lambda",
        "chain_file", "wells", "diagnostics", "N"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) config_error("unknown configuration key '" + key + "'");
    }
    ExperimentConfig c;
    try {
        c.model = j.value("model", c.model);
        c.kappa = j.value("kappa", c.kappa);
        c.alpha = j.value("alpha", c.alpha);
        if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<int>>();
        if (j.contains("N")) c.n_grid = {j.at("N").get<int>()};
        if (j.contains("ell") && !j.at("ell").is_null()) c.ell = j.at("ell").get<int>();
        if (j.contains("beta") && !j.at("beta").is_null()) c.beta = j.at("beta").get<double>();
        c.horizon = j.value("horizon", c.horizon);
        if (j.contains("replicas")) {
            const auto r = j.at("replicas").get<long long>();
            if (r < 1) config_error("replicas must be at least 1");
            c.replicas = static_cast<std::size_t>(r);
        }
        c.seed = j.value("seed", c.seed);
        c.out = j.value("out", c.out);
        if (j.contains("max_states")) {
            const auto m = j.at("max_states").get<long long>();
            if (m < 2) config_error("max_states must be at least 2");
            c.max_states = static_cast<std::size_t>(m);
        }
        c.simulate = j.value("simulate", c.simulate);
        if (j.contains("jump_budget") && !j.at("jump_budget").is_null()) {
            const auto b = j.at("jump_budget").get<long long>();
            if (b < 1) config_error("jump_budget must be at least 1");
            c.jump_budget = static_cast<std::size_t>(b);
        }
        if (j.contains("interval")) {
            const auto iv = j.at("interval").get<std::vector<double>>();
            if (iv.size() != 2) config_error("interval must be [a, b]");
            c.a = iv[0];
            c.b = iv[1];
        }
        if (j.contains("zeros")) c.zeros = j.at("zeros").get<std::vector<double>>();
        if (j.contains("exponents")) c.exponents = j.at("exponents").get<std::vector<double>>();
        if (j.contains("lambda")) c.lambda = j.at("lambda");
        c.chain_file = j.value("chain_file", c.chain_file);
        if (j.contains("wells")) {
            for (const auto& w : j.at("wells")) {
                std::vector<std::string> labels;
                for (const auto& v : w) labels.push_back(label_from_json(v));
                c.wells.push_back(std::move(labels));
            }
        }
        if (j.contains("diagnostics")) {
            const auto& d = j.at("diagnostics");
            c.c1 = d.value("c1", c.c1);
            c.c2 = d.value("c2", c.c2);
            c.c3 = d.value("c3", c.c3);
            c.h2h3 = d.value("h2h3", c.h2h3);
        }
    } catch (const nlohmann::json::exception& e) {
        config_error(std::string("malformed configuration: ") + e.what());
    }

    if (c.model != "zr" && c.model != "bd" && c.model != "chain") config_error("model must be zr, bd or chain");
    if (c.ell && c.beta) config_error("give either ell or beta, not both");
    if (c.ell && *c.ell < 1) config_error("ell must be positive");
    if (c.beta && !(*c.beta > 0.0 && *c.beta < 1.0)) config_error("beta must lie in (0,1)");
    if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) config_error("horizon must be positive");
    if (c.model != "chain") {
        if (c.n_grid.empty()) config_error("n_grid must be nonempty");
        for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
            if (c.n_grid[i] < 1) config_error("grid values must be positive");
            if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) config_error("n_grid must be strictly ascending");
        }
        if (!(c.alpha > 1.0)) config_error("alpha must exceed 1");
    }
    if (c.model == "zr" && c.kappa < 2) config_error("kappa must be at least 2");
    if (c.model == "bd") {
        if (c.exponents.empty()) c.exponents.assign(c.zeros.size(), c.alpha);
        if (c.exponents.size() != c.zeros.size()) config_error("zeros and exponents differ in length");
        if (!(c.lambda.is_number() || c.lambda.is_array())) config_error("lambda must be a number or a table");
    }
    if (c.model == "chain") {
        if (c.chain_file.empty()) config_error("chain model needs chain_file");
        if (c.wells.size() < 2) config_error("chain model needs at least two wells");
        c.n_grid = {0};
    }
    return c;
}

namespace detail {

inline std::function<double(double)> lambda_function(const nlohmann::json& spec) {
    if (spec.is_number()) {
        const double v = spec.get<double>();
        if (!(v > 0.0)) config_error("lambda must be positive");
        return [v](double) { return v; };
    }
    std::vector<std::pair<double, double>> table;
    for (const auto& row : spec) {
        if (!row.is_array() || row.size() != 2) config_error("lambda table rows must be [x, value]");
        table.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    if (table.size() < 2) config_error("lambda table needs at least two rows");
    std::sort(table.begin(), table.end());
    return [table](double x) {
        if (x <= table.front().first) return table.front().second;
        if (x >= table.back().first) return table.back().second;
        auto it = std::upper_bound(table.begin(), table.end(), std::make_pair(x, -1e300));
        const auto& [x1, y1] = *it;
        const auto& [x0, y0] = *(it - 1);
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    };
}

inline bd::Spec bd_spec(const ExperimentConfig& c, int N) {
    bd::Spec s;
    s.a = c.a;
    s.b = c.b;
    s.zeros = c.zeros;
    s.exponents = c.exponents;
    s.lambda = lambda_function(c.lambda);
    s.N = N;
    s.ell = c.ell;
    s.beta = c.beta;
    return s;
}

inline zr::Spec zr_spec(const ExperimentConfig& c, int N) { return {c.kappa, c.alpha, N, c.ell, c.beta}; }

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(std::isfinite(m(i, j)) ? nlohmann::json(m(i, j)) : nlohmann::json(nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

struct ReportRow {
    int N = 0;
    std::string key;
    std::string quantity;
    double value = 0.0;
    std::optional<double> stderr_;
};

struct ReportBundle {
    nlohmann::json report;
    std::vector<ReportRow> rates;
    std::vector<ReportRow> conditions;
    std::vector<ReportRow> occupation;
    nlohmann::json provenance;
};

/// Rejects configurations whose state spaces or model parameters are out of range, before any work.
inline void preflight(const ExperimentConfig& c) {
    for (int N : c.n_grid) {
        if (c.model == "zr") {
            const std::size_t count = zr::composition_count(N, c.kappa, c.max_states);
            if (count > c.max_states) {
                throw Error(Errc::StateSpaceTooLarge, "zero-range state space at N=" + std::to_string(N) + " exceeds " +
                                                          std::to_string(c.max_states) + " states");
            }
            try {
                zr::validate(detail::zr_spec(c, N), zr::resolve_ell(detail::zr_spec(c, N)));
            } catch (const Error& e) {
                config_error(e.what());
            }
        } else if (c.model == "bd") {
            try {
                const auto s = detail::bd_spec(c, N);
                bd::validate_shape(s);
                if (bd::build_grid(s).size() > c.max_states) {
                    throw Error(Errc::StateSpaceTooLarge, "birth-death grid at N=" + std::to_string(N) + " exceeds " +
                                                              std::to_string(c.max_states) + " states");
                }
            } catch (const Error& e) {
                if (e.code() == Errc::StateSpaceTooLarge) throw;
                config_error(e.what());
            }
        }
    }
}

namespace detail {

struct GridPoint {
    Chain chain;
    ProbabilityMeasure nu;
    WellPartition partition;
    GeometryOverrides overrides;
    nlohmann::json extra;
    std::vector<ReportRow> conditions;
    std::optional<Eigen::MatrixXd> limit;
};

inline GridPoint prepare(const ExperimentConfig& c, int N) {
    if (c.model == "zr") {
        auto m = zr::zr_build(zr_spec(c, N), c.max_states);
        auto th = zr::zr_theta(m);
        GridPoint g{th.sped, m.nu(), m.partition, m.overrides, {}, {}, std::nullopt};
        const double scale = std::pow(static_cast<double>(N), 1.0 + c.alpha);
        g.extra = {{"ell", m.ell}, {"theta", th.theta}, {"theta_scaled", th.theta / scale}, {"theta_spread", th.spread},
                   {"Z", m.system.Z}, {"ln_ratio", m.ln_ratio}, {"states", m.chain().size()}};
        g.conditions = {{N, "-", "ell", static_cast<double>(m.ell), {}},
                        {N, "-", "theta", th.theta, {}},
                        {N, "-", "theta_over_N^(1+alpha)", th.theta / scale, {}},
                        {N, "-", "theta_spread", th.spread, {}},
                        {N, "-", "Z", m.system.Z, {}},
                        {N, "-", "ln_ratio", m.ln_ratio, {}}};
        return g;
    }
    if (c.model == "bd") {
        const auto spec = bd_spec(c, N);
        auto m = bd::bd_build(spec, c.max_states);
        GridPoint g{m.chain, m.nu, m.partition, m.overrides, {}, {}, bd::bd_limit_rates(spec)};
        g.extra = {{"ell", m.ell}, {"Z", m.Z}, {"Z_over_N^alpha", m.Z / std::pow(static_cast<double>(N), m.alpha)},
                   {"states", m.chain.size()}};
        g.conditions = {{N, "-", "ell", static_cast<double>(m.ell), {}},
                        {N, "-", "Z_over_N^alpha", m.Z / std::pow(static_cast<double>(N), m.alpha), {}}};
        for (std::size_t i = 0; i + 1 < m.anchor.size(); ++i) {
            const auto last = m.partition.wells[i].back();
            const auto first = m.partition.wells[i + 1].front();
            const double cap = bd_capacity_closed_form(m.chain, m.nu, last, first).value;
            g.conditions.push_back({N, std::to_string(i + 1) + "->" + std::to_string(i + 2), "capacity_closed_form", cap, {}});
        }
        return g;
    }
    Chain chain = load_chain(c.chain_file);
    auto nu = stationary_measure(chain);
    std::vector<StateSet> wells;
    for (const auto& w : c.wells) {
        StateSet s;
        for (const auto& label : w) s.push_back(chain.space().index(label));
        wells.push_back(make_set(std::move(s)));
    }
    auto partition = WellPartition::from_wells(chain.size(), std::move(wells));
    GridPoint g{std::move(chain), std::move(nu), std::move(partition), {}, {}, {}, std::nullopt};
    g.extra = {{"states", g.chain.size()}};
    return g;
}

}  // namespace detail

/// Exact analysis and simulation over the grid; nothing is written here.
inline ReportBundle run_experiment(const ExperimentConfig& c) {
    preflight(c);
    using detail::num;
    ReportBundle bundle;
    nlohmann::json points = nlohmann::json::array();
    std::vector<Eigen::MatrixXd> r_sequence;
    for (int N : c.n_grid) {
        auto g = detail::prepare(c, N);
        const std::size_t kappa = g.partition.kappa();
        AnalysisToggles toggles{c.c2, c.c3, c.h2h3 && check_detailed_balance(g.chain, g.nu).reversible};
        const auto rep = analyze(g.chain, g.nu, g.partition, g.overrides, toggles);
        r_sequence.push_back(rep.rates.r);
        nlohmann::json point = g.extra;
        point["N"] = N;
        point["r"] = detail::matrix_json(rep.rates.r);
        point["well_mass"] = rep.rates.mass;
        point["delta_mass"] = rep.rates.delta_mass;
        point["aggregated_balance"] = rep.aggregated_balance;
        point["trace_residual"] = rep.rates.trace.stationary_residual;
        for (auto& row : g.conditions) bundle.conditions.push_back(row);
        bundle.conditions.push_back({N, "-", "nu_delta", rep.rates.delta_mass, {}});
        bundle.conditions.push_back({N, "-", "aggregated_balance", rep.aggregated_balance, {}});

        for (std::size_t x = 0; x < kappa; ++x) {
            const std::string wx = std::to_string(x + 1);
            double row_sum = 0.0;
            for (std::size_t y = 0; y < kappa; ++y) {
                if (y == x) continue;
                const std::string pair = wx + "->" + std::to_string(y + 1);
                const double r = rep.rates.r(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                row_sum += r;
                bundle.rates.push_back({N, pair, "r_exact", r, {}});
                if (g.limit) {
                    const double lim = (*g.limit)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                    if (lim > 0.0) {
                        bundle.rates.push_back({N, pair, "r_limit", lim, {}});
                        bundle.rates.push_back({N, pair, "relative_error", std::abs(r - lim) / lim, {}});
                    }
                }
                if (c.c2) bundle.conditions.push_back({N, pair, "c2", rep.c2(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)), {}});
                if (toggles.h2h3) bundle.conditions.push_back({N, pair, "h3", rep.h.h3(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)), {}});
            }
            bundle.rates.push_back({N, wx, "r_row_sum", row_sum, {}});
            bundle.rates.push_back({N, wx, "inverse_well_mass", 1.0 / rep.rates.mass[x], {}});
            if (c.c2) bundle.conditions.push_back({N, wx, "sigma", rep.sigma[x], {}});
            if (c.c3) bundle.conditions.push_back({N, wx, "c3", rep.c3[x], {}});
            if (toggles.h2h3) {
                bundle.conditions.push_back({N, wx, "h2", rep.h.h2[x], {}});
                bundle.conditions.push_back({N, wx, "h2_unspeeded", rep.h.h2_unspeeded[x], {}});
                bundle.conditions.push_back({N, wx, "gate_capacity", rep.h.gate_capacity[x], {}});
            }
        }
        if (c.c2) {
            point["c2"] = detail::matrix_json(rep.c2);
            point["sigma"] = rep.sigma;
        }
        if (c.c3) point["c3"] = rep.c3;
        if (toggles.h2h3) {
            nlohmann::json h2 = nlohmann::json::array(), h2u = nlohmann::json::array();
            for (std::size_t x = 0; x < kappa; ++x) {
                h2.push_back(num(rep.h.h2[x]));
                h2u.push_back(num(rep.h.h2_unspeeded[x]));
            }
            point["h2"] = h2;
            point["h2_unspeeded"] = h2u;
            point["h2prime"] = {{"nu_delta", rep.h.nu_delta}, {"gate_capacity", rep.h.gate_capacity}};
            point["h3"] = detail::matrix_json(rep.h.h3);
        }

        if (c.simulate) {
            const WellProcessSampler sampler(g.chain, g.nu, g.partition);
            const StateIndex start = rep.geometry.anchors[0];
            WellRunOptions opt;
            if (c.jump_budget) {
                opt.stop.max_jumps = c.jump_budget;
            } else {
                opt.stop.horizon = c.horizon;
            }
            const std::uint64_t grid_seed = SeedSpec{c.seed, static_cast<std::uint64_t>(N)}.derived();
            std::vector<WellRun> runs(c.replicas);
            parallel_for(c.replicas, [&](std::size_t r) {
                runs[r] = simulate_well_process(sampler, start, opt, SeedSpec{grid_seed, r});
            });
            std::vector<ProjectedPath> xs, xhats;
            std::vector<double> fractions;
            std::size_t violations = 0;
            for (const auto& run : runs) {
                xs.push_back(run.path(PathKind::trace));
                xhats.push_back(run.path(PathKind::last_well));
                fractions.push_back(run.delta_fraction());
                if (!check_coupling(xs.back(), xhats.back(), run.delta_time).holds) ++violations;
            }
            const auto frac = summarize(fractions);
            const auto rx = empirical_rates(xs, kappa);
            const auto rxh = empirical_rates(xhats, kappa);
            bundle.occupation.push_back({N, "Delta", "delta_fraction", frac.mean, frac.stderr_});
            bundle.occupation.push_back({N, "Delta", "delta_fraction_ci_low", frac.ci_low, {}});
            bundle.occupation.push_back({N, "Delta", "delta_fraction_ci_high", frac.ci_high, {}});
            bundle.occupation.push_back({N, "-", "replicas", static_cast<double>(c.replicas), {}});
            bundle.occupation.push_back({N, "-", "coupling_violations", static_cast<double>(violations), {}});
            nlohmann::json sim = {{"delta_fraction", frac.mean}, {"delta_fraction_stderr", frac.stderr_},
                                  {"coupling_violations", violations}, {"r_hat_X", detail::matrix_json(rx.rate)},
                                  {"r_hat_X_stderr", detail::matrix_json(rx.stderr_)},
                                  {"r_hat_Xhat", detail::matrix_json(rxh.rate)},
                                  {"r_hat_Xhat_stderr", detail::matrix_json(rxh.stderr_)}};
            for (std::size_t x = 0; x < kappa; ++x) {
                for (std::size_t y = 0; y < kappa; ++y) {
                    if (x == y) continue;
                    const auto X = static_cast<Eigen::Index>(x);
                    const auto Y = static_cast<Eigen::Index>(y);
                    const std::string pair = std::to_string(x + 1) + "->" + std::to_string(y + 1);
                    if (!rx.insufficient[x]) bundle.rates.push_back({N, pair, "r_hat_X", rx.rate(X, Y), rx.stderr_(X, Y)});
                    if (!rxh.insufficient[x]) bundle.rates.push_back({N, pair, "r_hat_Xhat", rxh.rate(X, Y), rxh.stderr_(X, Y)});
                }
            }
            point["simulation"] = std::move(sim);
        }
        points.push_back(std::move(point));
    }

    nlohmann::json report = {{"version", kVersion}, {"model", c.model}, {"grid", std::move(points)}};
    if (c.c1 && c.n_grid.size() >= 3) {
        std::size_t k = 0;
        const auto c1 = check_C1(c.n_grid, [&](int) { return r_sequence[k++]; });
        report["c1"] = {{"max_change", detail::matrix_json(c1.max_change)},
                        {"last_two_change", detail::matrix_json(c1.last_two_change)}};
        for (Eigen::Index x = 0; x < c1.last.rows(); ++x) {
            for (Eigen::Index y = 0; y < c1.last.cols(); ++y) {
                if (x == y) continue;
                const std::string pair = std::to_string(x + 1) + "->" + std::to_string(y + 1);
                const int N = c.n_grid.back();
                bundle.conditions.push_back({N, pair, "c1_max_change", c1.max_change(x, y), {}});
                bundle.conditions.push_back({N, pair, "c1_last_two_change", c1.last_two_change(x, y), {}});
                bundle.conditions.push_back({N, pair, "c1_plausibly_convergent", c1.plausibly_convergent(x, y) ? 1.0 : 0.0, {}});
                bundle.conditions.push_back({N, pair, "c1_vanishing", c1.vanishing(x, y) ? 1.0 : 0.0, {}});
            }
        }
    }
    const std::string canonical = c.to_json().dump();
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(canonical);
    bundle.provenance = {{"version", kVersion}, {"config_hash", hash.str()}, {"seed", c.seed}, {"config", c.to_json()},
                         {"rng", "mt19937_64 per replica, seeded by splitmix64(base, replica)"}};
    report["provenance"] = bundle.provenance;
    bundle.report = std::move(report);
    return bundle;
}

inline void write_rows(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::ConfigInvalid, "cannot write " + path.string());
    out << "N,key,quantity,value,stderr\n";
    for (const auto& r : rows) {
        out << r.N << ',' << r.key << ',' << r.quantity << ',' << detail::fmt(r.value) << ','
            << (r.stderr_ ? detail::fmt(*r.stderr_) : std::string()) << '\n';
    }
}

inline void write_bundle(const ReportBundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    std::ofstream(base / "report.json") << bundle.report.dump(2) << '\n';
    write_rows(base / "rates.csv", bundle.rates);
    write_rows(base / "conditions.csv", bundle.conditions);
    write_rows(base / "occupation.csv", bundle.occupation);
    std::ofstream(base / "provenance.json") << bundle.provenance.dump(2) << '\n';
}

}  // namespace metastab
