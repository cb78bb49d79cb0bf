#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "metastab/chain.hpp"
#include "metastab/meta.hpp"
#include "metastab/trace.hpp"
#include "metastab/trajectory.hpp"

namespace metastab {

/// One step of the splitmix64 generator (Steele, Lea, Flood).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Replica substreams: the mt19937_64 of replica r is seeded with
/// splitmix64 applied to (splitmix64(base) xor (r * golden + offset)).
struct SeedSpec {
    std::uint64_t base = 0;
    std::uint64_t replica = 0;

    std::uint64_t derived() const {
        std::uint64_t s = base;
        std::uint64_t mixed = splitmix64(s) ^ (replica * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
        return splitmix64(mixed);
    }
    std::mt19937_64 engine() const { return std::mt19937_64(derived()); }
};

/// Uniform on the open interval (0,1) from the top 53 bits.
inline double uniform_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Flat jump-chain tables for fast sampling of the next state.
class JumpSampler {
public:
    explicit JumpSampler(const Chain& chain) : n_(chain.size()) {
        offset_.reserve(n_ + 1);
        exit_.resize(n_);
        offset_.push_back(0);
        for (StateIndex i = 0; i < n_; ++i) {
            const auto ts = chain.transitions(i);
            double acc = 0.0;
            const double total = chain.raw_exit_rate(i);
            for (const auto& t : ts) {
                acc += t.rate;
                cum_.push_back(acc / total);
                target_.push_back(t.to);
            }
            cum_.back() = 1.0;
            offset_.push_back(cum_.size());
            exit_[i] = chain.exit_rate(i);
        }
    }

    std::size_t size() const noexcept { return n_; }
    double exit_rate(StateIndex s) const { return exit_[s]; }

    /// First transition whose cumulative probability exceeds u (ties go to the lower index).
    StateIndex next(StateIndex s, double u) const {
        std::size_t lo = offset_[s];
        const std::size_t hi = offset_[s + 1];
        if (hi - lo <= 8) {
            while (lo + 1 < hi && !(u < cum_[lo])) ++lo;
            return target_[lo];
        }
        const auto it = std::upper_bound(cum_.begin() + static_cast<long>(lo), cum_.begin() + static_cast<long>(hi) - 1, u);
        return target_[static_cast<std::size_t>(it - cum_.begin())];
    }

private:
    std::size_t n_;
    std::vector<std::size_t> offset_;
    std::vector<double> cum_;
    std::vector<StateIndex> target_;
    std::vector<double> exit_;
};

struct StopRule {
    std::optional<double> horizon;
    std::optional<std::size_t> max_jumps;

    void validate() const {
        if (!horizon && !max_jumps) throw Error(Errc::InvalidHorizon, "a horizon or a jump budget is required");
        if (horizon && !(*horizon > 0.0 && std::isfinite(*horizon))) {
            throw Error(Errc::InvalidHorizon, "horizon must be positive and finite");
        }
        if (max_jumps && *max_jumps < 1) throw Error(Errc::InvalidHorizon, "jump budget must be at least 1");
    }
};

/// Jump-chain / exponential-holding-time simulation.  Without a horizon the
/// path ends at its last jump.
inline Trajectory simulate(const Chain& chain, StateIndex start, const StopRule& stop, const SeedSpec& seed) {
    stop.validate();
    if (start >= chain.size()) throw Error(Errc::StateNotFound, "start state out of range");
    const JumpSampler sampler(chain);
    auto rng = seed.engine();
    Trajectory traj;
    traj.start = start;
    StateIndex s = start;
    double t = 0.0;
    while (true) {
        const double hold = -std::log(uniform_open(rng)) / sampler.exit_rate(s);
        if (stop.horizon && t + hold >= *stop.horizon) {
            traj.horizon = *stop.horizon;
            break;
        }
        t += hold;
        s = sampler.next(s, uniform_open(rng));
        traj.events.push_back({t, s});
        if (stop.max_jumps && traj.events.size() >= *stop.max_jumps) {
            traj.horizon = t;
            break;
        }
    }
    return traj;
}

struct ProjectedPaths {
    ProjectedPath X;     // trace projection
    ProjectedPath Xhat;  // last visited well, original clock
};

inline ProjectedPaths project_paths(const Trajectory& traj, const WellPartition& p) {
    if (traj.start >= p.psi.size() || p.psi[traj.start] < 0) {
        throw Error(Errc::StartOutsideWells, "projected paths need a start state inside a well");
    }
    ProjectedPaths out;
    out.X.kind = PathKind::trace;
    out.Xhat.kind = PathKind::last_well;
    out.X.start_label = out.Xhat.start_label = p.psi[traj.start];
    int w = p.psi[traj.start];
    double clock = 0.0;
    double t = 0.0;
    StateIndex s = traj.start;
    for (const auto& e : traj.events) {
        if (e.time >= traj.horizon) break;
        if (p.psi[s] >= 0) clock += e.time - t;
        t = e.time;
        s = e.state;
        const int label = p.psi[s];
        if (label >= 0 && label != w) {
            out.X.jumps.push_back({clock, label});
            out.Xhat.jumps.push_back({t, label});
            w = label;
        }
    }
    if (p.psi[s] >= 0) clock += traj.horizon - t;
    out.X.horizon = clock;
    out.Xhat.horizon = traj.horizon;
    return out;
}

inline double delta_occupation(const Trajectory& traj, const WellPartition& p) {
    if (p.delta.empty()) return 0.0;
    return traj.occupation(make_mask(p.psi.size(), p.delta)) / traj.horizon;
}

struct WellJump {
    double real_time;
    double trace_time;
    int from;
    int to;
};

/// Well-level summary of one long run: the jumps of X and X-hat plus clocks at the end.
struct WellRun {
    int start_label = 0;
    std::vector<WellJump> jumps;
    double real_time = 0.0;   // end of the run on the original clock
    double trace_time = 0.0;  // time spent in the wells
    double delta_time = 0.0;  // time spent in Delta
    StateIndex final_state = 0;
    std::uint64_t steps = 0;

    double delta_fraction() const { return real_time > 0.0 ? delta_time / real_time : 0.0; }

    ProjectedPath path(PathKind kind) const {
        ProjectedPath p;
        p.kind = kind;
        p.start_label = start_label;
        for (const auto& j : jumps) p.jumps.push_back({kind == PathKind::trace ? j.trace_time : j.real_time, j.to});
        p.horizon = kind == PathKind::trace ? trace_time : real_time;
        return p;
    }
};

struct WellRunOptions {
    StopRule stop;
    std::size_t segment_steps = std::size_t{1} << 16;
};

/// Exact simulation of the well-level processes that never materializes the full path.
///
/// The embedded jump chain is run step by step.  Holding times are only needed
/// through their sums between observable events (well changes, the horizon),
/// and the sum of k independent Exp(lambda) times is Gamma(k, 1/lambda), so
/// per-state visit counts are drawn as one Gamma each.  When a segment crosses
/// the horizon the per-state totals are split back into individual holding
/// times by uniform spacings, which is their exact conditional law.
inline WellRun simulate_well_process(const JumpSampler& sampler, const WellPartition& p, StateIndex start,
                                     const WellRunOptions& options, const SeedSpec& seed) {
    options.stop.validate();
    if (start >= sampler.size() || p.psi.size() != sampler.size()) {
        throw Error(Errc::StateNotFound, "start state out of range");
    }
    if (p.psi[start] < 0) throw Error(Errc::StartOutsideWells, "well process needs a start state inside a well");
    auto rng = seed.engine();
    const std::size_t n = sampler.size();
    const double horizon = options.stop.horizon.value_or(std::numeric_limits<double>::infinity());
    const std::size_t budget = options.stop.max_jumps.value_or(std::numeric_limits<std::size_t>::max());

    WellRun run;
    run.start_label = p.psi[start];
    int w = run.start_label;

    std::vector<std::uint32_t> visits(n, 0);
    std::vector<StateIndex> touched;
    std::vector<StateIndex> buffer;
    std::vector<double> totals(n, 0.0);
    buffer.reserve(options.segment_steps + 1);
    bool finished = false;

    // Returns true when the horizon fell inside the flushed segment.
    auto flush = [&]() -> bool {
        const double t0 = run.real_time;
        const double e0 = run.trace_time;
        const double d0 = run.delta_time;
        for (StateIndex q : touched) {
            std::gamma_distribution<double> gamma(static_cast<double>(visits[q]), 1.0);
            totals[q] = gamma(rng) / sampler.exit_rate(q);
            run.real_time += totals[q];
            (p.psi[q] >= 0 ? run.trace_time : run.delta_time) += totals[q];
        }
        if (run.real_time < horizon) {
            for (StateIndex q : touched) visits[q] = 0;
            touched.clear();
            buffer.clear();
            return false;
        }
        // split each total into its individual holding times
        std::vector<std::vector<double>> pieces(n);
        for (StateIndex q : touched) {
            const std::uint32_t k = visits[q];
            std::vector<double> cuts(k + 1);
            cuts[0] = 0.0;
            cuts[k] = 1.0;
            for (std::uint32_t j = 1; j < k; ++j) cuts[j] = uniform_open(rng);
            std::sort(cuts.begin() + 1, cuts.end() - 1);
            auto& v = pieces[q];
            v.resize(k);
            for (std::uint32_t j = 0; j < k; ++j) v[j] = (cuts[j + 1] - cuts[j]) * totals[q];
            visits[q] = 0;
        }
        std::vector<std::uint32_t> used(n, 0);
        double t = t0, e = e0, d = d0;
        StateIndex last = buffer.back();
        for (StateIndex q : buffer) {
            const double hold = pieces[q][used[q]++];
            const double take = std::min(hold, horizon - t);
            (p.psi[q] >= 0 ? e : d) += take;
            t += take;
            last = q;
            if (t >= horizon) break;
        }
        run.real_time = horizon;
        run.trace_time = e;
        run.delta_time = d;
        run.final_state = last;
        touched.clear();
        buffer.clear();
        return true;
    };
    auto push = [&](StateIndex q) {
        if (visits[q]++ == 0) touched.push_back(q);
        buffer.push_back(q);
    };

    StateIndex s = start;
    push(s);
    while (!finished) {
        const StateIndex next = sampler.next(s, uniform_open(rng));
        ++run.steps;
        const int label = p.psi[next];
        if (label >= 0 && label != w) {
            if (flush()) break;
            run.jumps.push_back({run.real_time, run.trace_time, w, label});
            w = label;
            if (run.jumps.size() >= budget) {
                run.final_state = next;
                finished = true;
                break;
            }
        }
        s = next;
        push(s);
        if (buffer.size() >= options.segment_steps && flush()) break;
    }
    if (!finished && !std::isfinite(horizon)) run.final_state = s;
    return run;
}

/// Law of (exit time, last state, first state outside) for one well, started at a well state.
///
/// With Q the generator restricted to the well and D = diag(sqrt(nu)), D Q D^{-1} is
/// symmetric for reversible chains, so e^{tQ} = D^{-1} U e^{t Lambda} U^T D.  The
/// survival function from i is then a finite exponential sum, and the last state
/// before exit has density proportional to e^{tQ}(i,j) times the exit rate of j.
class WellExitLaw {
public:
    struct Exit {
        double time = 0.0;
        bool censored = false;  // still inside at the end of the allowed time
        StateIndex from = 0;
        StateIndex to = 0;
    };

    WellExitLaw(const Chain& chain, const ProbabilityMeasure& nu, const StateSet& well)
        : states_(well), local_(chain.size(), -1) {
        const auto m = static_cast<Eigen::Index>(well.size());
        for (std::size_t k = 0; k < well.size(); ++k) local_[well[k]] = static_cast<long>(k);
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd d(m);
        for (Eigen::Index a = 0; a < m; ++a) d(a) = std::sqrt(nu[well[static_cast<std::size_t>(a)]]);
        out_rate_.assign(well.size(), 0.0);
        targets_.resize(well.size());
        for (Eigen::Index a = 0; a < m; ++a) {
            const StateIndex i = well[static_cast<std::size_t>(a)];
            S(a, a) = -chain.exit_rate(i);
            auto& tg = targets_[static_cast<std::size_t>(a)];
            for (const auto& t : chain.transitions(i)) {
                const long b = local_[t.to];
                if (b >= 0) {
                    S(a, b) = d(a) * chain.rate(i, t.to) / d(b);
                } else {
                    out_rate_[static_cast<std::size_t>(a)] += chain.rate(i, t.to);
                    tg.first.push_back(t.to);
                    tg.second.push_back(out_rate_[static_cast<std::size_t>(a)]);
                }
            }
            for (double& c : tg.second) c /= out_rate_[static_cast<std::size_t>(a)];
            if (out_rate_[static_cast<std::size_t>(a)] > 0.0) exits_.push_back(static_cast<std::size_t>(a));
        }
        if (exits_.empty()) throw Error(Errc::PartitionInvalid, "well has no exit");
        const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
        if (eig.info() != Eigen::Success) throw Error(Errc::SolverFailure, "well eigendecomposition failed");
        lambda_ = eig.eigenvalues();
        const Eigen::MatrixXd& U = eig.eigenvectors();
        slowest_ = 0;
        for (Eigen::Index k = 1; k < m; ++k) {
            if (lambda_(k) > lambda_(slowest_)) slowest_ = k;
        }
        // survival(i,t) = sum_k surv_(i,k) e^{lambda_k t}
        const Eigen::VectorXd beta = U.transpose() * d;
        left_ = d.cwiseInverse().asDiagonal() * U;
        surv_ = left_ * beta.asDiagonal();
        exit_weight_.resize(m, static_cast<Eigen::Index>(exits_.size()));
        for (std::size_t e = 0; e < exits_.size(); ++e) {
            const auto j = static_cast<Eigen::Index>(exits_[e]);
            exit_weight_.col(static_cast<Eigen::Index>(e)) = U.row(j).transpose() * d(j) * out_rate_[exits_[e]];
        }
        // starting points for the root finder: quantiles at v = -log u = kMaxV (q/kNodes)^2
        guess_.resize(m, kNodes + 1);
        for (Eigen::Index a = 0; a < m; ++a) {
            guess_(a, 0) = 0.0;
            for (int q = 1; q <= kNodes; ++q) {
                const double v = kMaxV * (static_cast<double>(q) / kNodes) * (static_cast<double>(q) / kNodes);
                guess_(a, q) = solve(a, std::exp(-v), guess_(a, q - 1));
            }
        }
    }

    std::size_t size() const noexcept { return states_.size(); }

    /// Probability of still being inside at time t, from well state `entry`.
    double survival(StateIndex entry, double t) const {
        const auto i = row(entry);
        double s = 0.0;
        for (Eigen::Index k = 0; k < lambda_.size(); ++k) s += surv_(i, k) * std::exp(lambda_(k) * t);
        return s;
    }

    Exit sample(StateIndex entry, double remaining, std::mt19937_64& rng) const {
        const auto i = row(entry);
        const double u = uniform_open(rng);
        Exit ex;
        ex.time = solve(i, u, initial_guess(i, u));
        if (ex.time >= remaining) {
            ex.time = remaining;
            ex.censored = true;
            ex.from = entry;
            ex.to = entry;
            return ex;
        }
        std::size_t e = 0;
        if (exits_.size() > 1) {
            Eigen::VectorXd a(lambda_.size());
            for (Eigen::Index k = 0; k < lambda_.size(); ++k) a(k) = left_(i, k) * std::exp(lambda_(k) * ex.time);
            const Eigen::VectorXd w = exit_weight_.transpose() * a;
            double total = 0.0;
            for (Eigen::Index q = 0; q < w.size(); ++q) total += std::max(w(q), 0.0);
            double v = uniform_open(rng) * total;
            e = exits_.size() - 1;
            for (std::size_t q = 0; q < exits_.size(); ++q) {
                v -= std::max(w(static_cast<Eigen::Index>(q)), 0.0);
                if (v < 0.0) {
                    e = q;
                    break;
                }
            }
        }
        const std::size_t j = exits_[e];
        ex.from = states_[j];
        const auto& tg = targets_[j];
        const double v = uniform_open(rng);
        std::size_t q = 0;
        while (q + 1 < tg.second.size() && !(v < tg.second[q])) ++q;
        ex.to = tg.first[q];
        return ex;
    }

private:
    Eigen::Index row(StateIndex entry) const {
        const long i = entry < local_.size() ? local_[entry] : -1;
        if (i < 0) throw Error(Errc::StateNotFound, "entry state is not in the well");
        return static_cast<Eigen::Index>(i);
    }

    // survival and its derivative
    std::pair<double, double> survival_at(Eigen::Index i, double t) const {
        double s = 0.0, ds = 0.0;
        for (Eigen::Index k = 0; k < lambda_.size(); ++k) {
            const double x = lambda_(k) * t;
            if (x < -745.0) continue;
            const double term = surv_(i, k) * std::exp(x);
            s += term;
            ds += lambda_(k) * term;
        }
        return {s, ds};
    }

    static constexpr int kNodes = 512;
    static constexpr double kMaxV = 40.0;

    double initial_guess(Eigen::Index i, double u) const {
        const double v = -std::log(u);
        const double x = std::sqrt(v / kMaxV) * kNodes;
        if (x >= kNodes) {
            const double c0 = surv_(i, slowest_);
            return c0 > u ? std::log(c0 / u) / -lambda_(slowest_) : guess_(i, kNodes);
        }
        const int q = static_cast<int>(x);
        const double f = x - q;
        return (1.0 - f) * guess_(i, q) + f * guess_(i, q + 1);
    }

    // Root of survival(t) = u by Newton on log survival, safeguarded by bisection.
    double solve(Eigen::Index i, double u, double t) const {
        const double log_u = std::log(u);
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        const double scale = 1.0 / -lambda_(slowest_);
        if (!(t > lo)) t = scale * 1e-6;
        for (int iter = 0; iter < 200; ++iter) {
            const auto [s, ds] = survival_at(i, t);
            if (s == u) return t;
            if (s > u) {
                lo = t;
            } else {
                hi = t;
            }
            double next = std::numeric_limits<double>::quiet_NaN();
            if (s > 0.0 && ds < 0.0) next = t - (std::log(s) - log_u) * s / ds;
            if (std::abs(next - t) <= 1e-13 * t) return next;
            if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t + scale;
            if (hi - lo <= 1e-13 * hi) return next;
            t = next;
        }
        return t;
    }

    StateSet states_;
    std::vector<long> local_;
    std::vector<double> out_rate_;
    std::vector<std::pair<std::vector<StateIndex>, std::vector<double>>> targets_;
    std::vector<std::size_t> exits_;
    Eigen::VectorXd lambda_;
    Eigen::Index slowest_ = 0;
    Eigen::MatrixXd left_;
    Eigen::MatrixXd surv_;
    Eigen::MatrixXd exit_weight_;
    Eigen::MatrixXd guess_;
};

/// Well process sampler that draws each well visit in one step.
///
/// Needs a reversible chain; otherwise, or when a well is larger than `max_well`,
/// the step-by-step engine is used for the whole run.
class WellProcessSampler {
public:
    WellProcessSampler(const Chain& chain, const ProbabilityMeasure& nu, WellPartition partition,
                       std::size_t max_well = 400)
        : steps_(chain), partition_(std::move(partition)) {
        partition_.require_matches(chain);
        bool ok = check_detailed_balance(chain, nu).reversible;
        for (const auto& w : partition_.wells) ok = ok && w.size() <= max_well;
        if (ok) {
            for (const auto& w : partition_.wells) laws_.emplace_back(chain, nu, w);
        }
    }

    bool collapses_wells() const noexcept { return !laws_.empty(); }
    const JumpSampler& step_sampler() const noexcept { return steps_; }
    const WellPartition& partition() const noexcept { return partition_; }
    const WellExitLaw& law(std::size_t x) const { return laws_.at(x); }

private:
    JumpSampler steps_;
    WellPartition partition_;
    std::vector<WellExitLaw> laws_;
};

inline WellRun simulate_well_process(const WellProcessSampler& sampler, StateIndex start,
                                     const WellRunOptions& options, const SeedSpec& seed) {
    if (!sampler.collapses_wells()) {
        return simulate_well_process(sampler.step_sampler(), sampler.partition(), start, options, seed);
    }
    options.stop.validate();
    const auto& p = sampler.partition();
    const auto& js = sampler.step_sampler();
    if (start >= js.size()) throw Error(Errc::StateNotFound, "start state out of range");
    if (p.psi[start] < 0) throw Error(Errc::StartOutsideWells, "well process needs a start state inside a well");
    auto rng = seed.engine();
    const double horizon = options.stop.horizon.value_or(std::numeric_limits<double>::infinity());
    const std::size_t budget = options.stop.max_jumps.value_or(std::numeric_limits<std::size_t>::max());

    WellRun run;
    run.start_label = p.psi[start];
    int w = run.start_label;
    StateIndex s = start;
    while (true) {
        ++run.steps;
        StateIndex next;
        const int here = p.psi[s];
        if (here >= 0) {
            const auto ex = sampler.law(static_cast<std::size_t>(here)).sample(s, horizon - run.real_time, rng);
            if (ex.censored) {
                run.trace_time += horizon - run.real_time;
                run.real_time = horizon;
                run.final_state = s;
                break;
            }
            run.real_time += ex.time;
            run.trace_time += ex.time;
            next = ex.to;
        } else {
            const double hold = -std::log(uniform_open(rng)) / js.exit_rate(s);
            if (run.real_time + hold >= horizon) {
                run.delta_time += horizon - run.real_time;
                run.real_time = horizon;
                run.final_state = s;
                break;
            }
            run.real_time += hold;
            run.delta_time += hold;
            next = js.next(s, uniform_open(rng));
        }
        const int label = p.psi[next];
        s = next;
        if (label >= 0 && label != w) {
            run.jumps.push_back({run.real_time, run.trace_time, w, label});
            w = label;
            if (run.jumps.size() >= budget) {
                run.final_state = s;
                break;
            }
        }
    }
    return run;
}

struct CouplingReport {
    bool same_sequence = true;
    bool ordered = true;     // tau_n(Xhat) >= tau_n(X)
    double max_excess = 0.0; // max_n tau_n(Xhat) - tau_n(X)
    double delta_time = 0.0;
    bool holds = true;
};

inline CouplingReport check_coupling(const ProjectedPath& X, const ProjectedPath& Xhat, double delta_time) {
    CouplingReport rep;
    rep.delta_time = delta_time;
    rep.same_sequence = X.start_label == Xhat.start_label && X.jumps.size() == Xhat.jumps.size();
    const std::size_t m = std::min(X.jumps.size(), Xhat.jumps.size());
    for (std::size_t k = 0; k < m; ++k) {
        if (X.jumps[k].label != Xhat.jumps[k].label) rep.same_sequence = false;
        const double excess = Xhat.jumps[k].time - X.jumps[k].time;
        if (excess < 0.0) rep.ordered = false;
        rep.max_excess = std::max(rep.max_excess, excess);
    }
    const double slack = 1e-9 * std::max(1.0, Xhat.horizon);
    rep.holds = rep.same_sequence && rep.ordered && rep.max_excess <= delta_time + slack;
    return rep;
}

struct EmpiricalRates {
    Eigen::MatrixXd counts;
    Eigen::MatrixXd rate;
    Eigen::MatrixXd stderr_;
    std::vector<double> time_in;
    std::vector<bool> insufficient;  // well never visited

    bool any_insufficient() const { return std::find(insufficient.begin(), insufficient.end(), true) != insufficient.end(); }
};

/// r(x,y) = #(x -> y) / time in x, Poisson standard error sqrt(#)/time.
inline EmpiricalRates empirical_rates(const std::vector<ProjectedPath>& paths, std::size_t kappa) {
    const auto k = static_cast<Eigen::Index>(kappa);
    EmpiricalRates er;
    er.counts = Eigen::MatrixXd::Zero(k, k);
    er.rate = Eigen::MatrixXd::Zero(k, k);
    er.stderr_ = Eigen::MatrixXd::Zero(k, k);
    er.time_in.assign(kappa, 0.0);
    er.insufficient.assign(kappa, false);
    for (const auto& path : paths) {
        int label = path.start_label;
        double t = 0.0;
        for (const auto& j : path.jumps) {
            er.time_in.at(static_cast<std::size_t>(label)) += j.time - t;
            er.counts(label, j.label) += 1.0;
            label = j.label;
            t = j.time;
        }
        er.time_in.at(static_cast<std::size_t>(label)) += path.horizon - t;
    }
    for (Eigen::Index x = 0; x < k; ++x) {
        const double T = er.time_in[static_cast<std::size_t>(x)];
        if (!(T > 0.0)) {
            er.insufficient[static_cast<std::size_t>(x)] = true;
            for (Eigen::Index y = 0; y < k; ++y) er.rate(x, y) = er.stderr_(x, y) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        for (Eigen::Index y = 0; y < k; ++y) {
            if (x == y) continue;
            er.rate(x, y) = er.counts(x, y) / T;
            er.stderr_(x, y) = std::sqrt(er.counts(x, y)) / T;
        }
    }
    return er;
}

/// Runs body(i) for i in [0, count) on worker threads; results must be written to slot i.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += threads) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct SampleSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;

    bool covers(double x) const { return ci_low <= x && x <= ci_high; }
};

inline SampleSummary summarize(const std::vector<double>& xs) {
    SampleSummary s;
    s.count = xs.size();
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    const double var = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
    s.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
    s.ci_low = s.mean - 1.959963984540054 * s.stderr_;
    s.ci_high = s.mean + 1.959963984540054 * s.stderr_;
    return s;
}

struct HittingSamples {
    std::vector<double> samples;
    SampleSummary summary;
};

/// Independent samples of H_target from `start`; replica r uses SeedSpec{base, r}.
inline HittingSamples hitting_samples(const Chain& chain, StateIndex start, const StateSet& target,
                                      std::size_t replicas, std::uint64_t base_seed) {
    require_valid(chain.size(), target, "target set");
    if (target.empty()) throw Error(Errc::EmptySubset, "target set is empty");
    if (start >= chain.size()) throw Error(Errc::StateNotFound, "start state out of range");
    if (contains(target, start)) throw Error(Errc::StateInTargetSet, "start state lies in the target set");
    const JumpSampler sampler(chain);
    const auto mask = make_mask(chain.size(), target);
    HittingSamples out;
    out.samples.resize(replicas);
    parallel_for(replicas, [&](std::size_t r) {
        auto rng = SeedSpec{base_seed, r}.engine();
        std::vector<std::uint64_t> visits(chain.size(), 0);
        std::vector<StateIndex> touched;
        StateIndex s = start;
        while (!mask[s]) {
            if (visits[s]++ == 0) touched.push_back(s);
            s = sampler.next(s, uniform_open(rng));
        }
        double t = 0.0;
        for (StateIndex q : touched) {
            std::gamma_distribution<double> gamma(static_cast<double>(visits[q]), 1.0);
            t += gamma(rng) / sampler.exit_rate(q);
        }
        out.samples[r] = t;
    });
    out.summary = summarize(out.samples);
    return out;
}

}  // namespace metastab
