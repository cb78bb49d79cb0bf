#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "metastab/error.hpp"
#include "metastab/state_set.hpp"

namespace metastab {

struct JumpEvent {
    double time;
    StateIndex state;
};

/// Piecewise-constant path: `start` on [0, t_1), events[k].state on [t_{k+1}, t_{k+2}), up to `horizon`.
struct Trajectory {
    StateIndex start = 0;
    std::vector<JumpEvent> events;
    double horizon = 0.0;

    StateIndex state_at(double t) const {
        StateIndex s = start;
        for (const auto& e : events) {
            if (e.time > t) break;
            s = e.state;
        }
        return s;
    }

    StateIndex final_state() const { return events.empty() ? start : events.back().state; }

    /// Throws if times are not strictly increasing within (0, horizon] or a jump repeats the state.
    void validate() const {
        double prev = 0.0;
        StateIndex s = start;
        for (const auto& e : events) {
            if (!(e.time > prev) || e.time > horizon) {
                throw Error(Errc::InvalidHorizon, "trajectory event times must increase strictly within the horizon");
            }
            if (e.state == s) throw Error(Errc::InvalidTransition, "trajectory jump to the same state");
            prev = e.time;
            s = e.state;
        }
    }

    /// Total time spent in states flagged by `mask`.
    double occupation(const std::vector<char>& mask) const {
        double total = 0.0;
        double t = 0.0;
        StateIndex s = start;
        for (const auto& e : events) {
            if (mask.at(s)) total += e.time - t;
            t = e.time;
            s = e.state;
        }
        if (mask.at(s)) total += horizon - t;
        return total;
    }
};

enum class PathKind { trace, last_well };

inline const char* to_string(PathKind k) { return k == PathKind::trace ? "X" : "Xhat"; }

struct LabelJump {
    double time;
    int label;
};

/// Well-label path with its jump times tau_n, sojourns T_n and counting function N_t.
struct ProjectedPath {
    PathKind kind = PathKind::trace;
    int start_label = 0;
    std::vector<LabelJump> jumps;
    double horizon = 0.0;

    /// tau_0 = 0, tau_n = time of the n-th jump.
    double tau(std::size_t n) const { return n == 0 ? 0.0 : jumps.at(n - 1).time; }
    double sojourn(std::size_t n) const { return tau(n) - tau(n - 1); }
    std::size_t count_until(double t) const {
        std::size_t k = 0;
        while (k < jumps.size() && jumps[k].time <= t) ++k;
        return k;
    }
    int label_at(double t) const {
        int label = start_label;
        for (const auto& j : jumps) {
            if (j.time > t) break;
            label = j.label;
        }
        return label;
    }
};

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                                 const std::vector<std::string>& labels) {
    out << "t,state\n";
    out.precision(17);
    out << 0.0 << ',' << labels.at(traj.start) << '\n';
    for (const auto& e : traj.events) out << e.time << ',' << labels.at(e.state) << '\n';
}

inline void write_projected_csv(std::ostream& out, const std::vector<ProjectedPath>& paths) {
    out << "t,label,kind\n";
    out.precision(17);
    for (const auto& p : paths) {
        out << 0.0 << ',' << p.start_label + 1 << ',' << to_string(p.kind) << '\n';
        for (const auto& j : p.jumps) out << j.time << ',' << j.label + 1 << ',' << to_string(p.kind) << '\n';
    }
}

}  // namespace metastab
