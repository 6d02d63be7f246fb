// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "loaded_network.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace beamspace {

// One optional reactance per port; entries of fed ports are ignored.
using PortLoads = std::vector<std::optional<double>>;

enum class GradientMethod { analytic, central_difference };

struct LoadOptimizerOptions {
    double max_reactance = kDefaultMaxReactance;
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    int memory = 8;
    double delta = 1e-8;
    double armijo = 1e-4;
    int max_backtracks = 60;
    double first_step = 10.0;  // ohms, largest component of the first steepest-descent trial step
    GradientMethod gradient = GradientMethod::analytic;
    double fd_step = 1e-5;     // relative, central differences
};

struct LoadOptimizationResult {
    PortLoads loads;
    double objective = 0.0;
    double initial_objective = 0.0;
    int iterations = 0;
    int evaluations = 0;
    double gradient_norm = 0.0;
    bool converged = false;
    bool warning = false;  // line search failed; best iterate returned
    std::string message;
};

inline PortLoads port_loads_from_config(int n, const FeedLoadConfig& cfg) {
    PortLoads out(static_cast<std::size_t>(n));
    const auto others = complement_ports(n, cfg.feeds);
    detail::require(cfg.loads.size() == others.size(), "expected one load per non-feed port", "loads");
    for (std::size_t i = 0; i < others.size(); ++i) out[static_cast<std::size_t>(others[i])] = cfg.loads[i];
    return out;
}

inline std::vector<std::optional<double>> config_loads(const PortLoads& loads, const std::vector<int>& feeds) {
    std::vector<std::optional<double>> out;
    for (int p : complement_ports(static_cast<int>(loads.size()), feeds)) out.push_back(loads[static_cast<std::size_t>(p)]);
    return out;
}

// Non-feed ports carrying a finite load, ascending.
inline std::vector<int> loaded_ports(const PortLoads& loads, const std::vector<int>& feeds) {
    std::vector<int> out;
    for (int p : complement_ports(static_cast<int>(loads.size()), feeds))
        if (loads[static_cast<std::size_t>(p)]) out.push_back(p);
    return out;
}

inline double loaded_objective(const LoadedNetwork& net, const std::vector<int>& feeds, const PortLoads& loads) {
    const auto lp = loaded_ports(loads, feeds);
    VectorXr x(static_cast<Eigen::Index>(lp.size()));
    for (std::size_t i = 0; i < lp.size(); ++i) x(static_cast<Eigen::Index>(i)) = *loads[static_cast<std::size_t>(lp[i])];
    return net.evaluate(feeds, lp, x, false).objective;
}

namespace detail {

struct SmoothEval {
    double f = 0.0;      // surrogate
    double truth = 0.0;  // sum |rho|
    VectorXr g;
};

inline SmoothEval smooth_eval(const LoadedNetwork& net, const std::vector<int>& feeds, const std::vector<int>& lp, const VectorXr& x,
                              const LoadOptimizerOptions& o) {
    SmoothEval out;
    if (o.gradient == GradientMethod::analytic) {
        auto ev = net.evaluate(feeds, lp, x, true, o.delta);
        out.f = ev.smooth_objective;
        out.truth = ev.objective;
        out.g = std::move(ev.gradient);
        return out;
    }
    const auto ev = net.evaluate(feeds, lp, x, false, o.delta);
    out.f = ev.smooth_objective;
    out.truth = ev.objective;
    out.g.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = o.fd_step * std::max(1.0, std::abs(x(i)));
        VectorXr xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        out.g(i) = (net.evaluate(feeds, lp, xp, false, o.delta).smooth_objective - net.evaluate(feeds, lp, xm, false, o.delta).smooth_objective) /
                   (2.0 * h);
    }
    return out;
}

inline VectorXr project_box(VectorXr x, double bound) { return x.cwiseMax(-bound).cwiseMin(bound); }

// Gradient with components pinned at an active bound removed.
inline VectorXr projected_gradient(const VectorXr& x, const VectorXr& g, double bound) {
    VectorXr pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if ((x(i) >= bound && g(i) < 0.0) || (x(i) <= -bound && g(i) > 0.0)) pg(i) = 0.0;
    return pg;
}

} // namespace detail

// Minimizes sum_{j != k} |rho_jk| over the finite loads of the non-feed ports with
// a box-projected limited-memory BFGS and Armijo backtracking. The surrogate
// sqrt(|rho|^2 + delta^2) drives the steps; the returned point is the iterate
// with the lowest true objective, so the result never exceeds the start.
inline LoadOptimizationResult optimize_loads(const LoadedNetwork& net, const std::vector<int>& feeds, const PortLoads& x0,
                                             const LoadOptimizerOptions& o = {}) {
    detail::require(x0.size() == static_cast<std::size_t>(net.ports()), "one load entry per port required", "loads");
    validate_feeds(net.ports(), feeds, &net.dataset().feasible_feeds);
    const auto lp = loaded_ports(x0, feeds);
    VectorXr x(static_cast<Eigen::Index>(lp.size()));
    for (std::size_t i = 0; i < lp.size(); ++i) {
        const double v = *x0[static_cast<std::size_t>(lp[i])];
        detail::require(std::isfinite(v) && std::abs(v) <= o.max_reactance,
                        "initial reactance at port " + std::to_string(lp[i] + 1) + " outside [-X_max, X_max]", "loads");
        x(static_cast<Eigen::Index>(i)) = v;
    }

    LoadOptimizationResult res;
    res.loads = x0;
    auto cur = detail::smooth_eval(net, feeds, lp, x, o);
    res.evaluations = 1;
    res.initial_objective = res.objective = cur.truth;
    VectorXr best = x;
    auto store = [&](const VectorXr& v) {
        for (std::size_t i = 0; i < lp.size(); ++i) res.loads[static_cast<std::size_t>(lp[i])] = v(static_cast<Eigen::Index>(i));
    };
    if (lp.empty() || cur.truth == 0.0) {
        res.converged = true;
        res.message = lp.empty() ? "no loaded ports" : "objective already zero";
        return res;
    }

    std::deque<std::pair<VectorXr, VectorXr>> mem;  // (s, y)
    for (res.iterations = 0; res.iterations < o.max_iterations; ++res.iterations) {
        const VectorXr pg = detail::projected_gradient(x, cur.g, o.max_reactance);
        res.gradient_norm = pg.lpNorm<Eigen::Infinity>();
        if (res.gradient_norm < o.gradient_tolerance) {
            res.converged = true;
            break;
        }
        // Two-loop recursion on the projected gradient.
        VectorXr d = pg;
        std::vector<double> alpha(mem.size());
        for (std::size_t k = mem.size(); k-- > 0;) {
            const auto& [s, y] = mem[k];
            alpha[k] = s.dot(d) / y.dot(s);
            d -= alpha[k] * y;
        }
        if (!mem.empty()) d *= mem.back().first.dot(mem.back().second) / mem.back().second.squaredNorm();
        for (std::size_t k = 0; k < mem.size(); ++k) {
            const auto& [s, y] = mem[k];
            d += (alpha[k] - y.dot(d) / y.dot(s)) * s;
        }
        d = -d;
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (pg(i) == 0.0) d(i) = 0.0;
        if (!(d.dot(pg) < 0.0)) {
            mem.clear();
            d = -pg;
        }
        double step = mem.empty() ? std::min(1.0, o.first_step / d.lpNorm<Eigen::Infinity>()) : 1.0;

        bool accepted = false;
        VectorXr x_new;
        detail::SmoothEval next;
        for (int bt = 0; bt < o.max_backtracks; ++bt, step *= 0.5) {
            x_new = detail::project_box(x + step * d, o.max_reactance);
            if ((x_new - x).lpNorm<Eigen::Infinity>() == 0.0) break;
            try {
                next = detail::smooth_eval(net, feeds, lp, x_new, o);
                ++res.evaluations;
            } catch (const NumericalError&) {
                continue;
            }
            if (std::isfinite(next.f) && next.f <= cur.f + o.armijo * cur.g.dot(x_new - x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!mem.empty()) {
                mem.clear();
                continue;
            }
            res.warning = true;
            res.message = "line search failed";
            break;
        }
        const VectorXr s = x_new - x;
        const VectorXr y = next.g - cur.g;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            mem.emplace_back(s, y);
            if (static_cast<int>(mem.size()) > o.memory) mem.pop_front();
        }
        x = x_new;
        cur = std::move(next);
        if (cur.truth < res.objective) {
            res.objective = cur.truth;
            best = x;
        }
    }
    if (res.iterations >= o.max_iterations && !res.converged) res.message = "iteration limit reached";
    store(best);
    return res;
}

// Load search that also covers the open sentinel, which lies outside the
// reactance box. Tries descents from the current loads and from both box
// edges (the near-open corners), then opens single ports while that strictly
// lowers the objective. Never returns anything worse than optimize_loads(x0).
inline LoadOptimizationResult polish_loads(const LoadedNetwork& net, const std::vector<int>& feeds, const PortLoads& x0,
                                           const LoadOptimizerOptions& o = {}) {
    auto best = optimize_loads(net, feeds, x0, o);
    const double start = best.initial_objective;
    const auto lp = loaded_ports(x0, feeds);
    if (lp.empty()) return best;
    auto consider = [&](const PortLoads& loads) {
        try {
            const auto r = optimize_loads(net, feeds, loads, o);
            if (r.objective < best.objective) best = r;
        } catch (const NumericalError&) {
        }
    };
    for (double edge : {o.max_reactance, -o.max_reactance}) {
        PortLoads loads = x0;
        for (int p : lp) loads[static_cast<std::size_t>(p)] = edge;
        consider(loads);
    }
    PortLoads open = x0;
    for (int p : lp) open[static_cast<std::size_t>(p)].reset();
    const double open_objective = loaded_objective(net, feeds, open);
    if (open_objective < best.objective) {
        best.loads = open;
        best.objective = open_objective;
    }
    for (bool improved = true; improved;) {
        improved = false;
        for (int p : loaded_ports(best.loads, feeds)) {
            PortLoads trial = best.loads;
            trial[static_cast<std::size_t>(p)].reset();
            double f = 0.0;
            try {
                f = loaded_objective(net, feeds, trial);
            } catch (const NumericalError&) {
                continue;
            }
            if (f < best.objective) {
                best.loads = trial;
                best.objective = f;
                improved = true;
            }
        }
    }
    best.initial_objective = start;
    return best;
}

struct GreedyResult {
    std::vector<int> feeds;
    double objective = 0.0;
    double initial_objective = 0.0;
    int evaluations = 0;
};

// For q = 1..Q in order, replace feed q by the feasible port (among the ones not
// used by the other feeds) that minimizes the objective with loads held fixed.
// The incumbent is kept unless a candidate is strictly better. Feasible ports
// that are not fed stay open.
inline GreedyResult greedy_feed_update(const LoadedNetwork& net, const PortLoads& loads, const std::vector<int>& previous) {
    const auto& feasible = net.dataset().feasible_feeds;
    validate_feeds(net.ports(), previous, &feasible);
    auto fixed = loads;
    for (int s : feasible) fixed[static_cast<std::size_t>(s)].reset();

    auto objective_of = [&](const std::vector<int>& feeds) {
        try {
            return loaded_objective(net, feeds, fixed);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    GreedyResult res;
    res.feeds = previous;
    res.initial_objective = res.objective = objective_of(previous);
    res.evaluations = 1;
    for (std::size_t q = 0; q < res.feeds.size(); ++q) {
        std::vector<int> candidates;
        for (int s : feasible)
            if (s == res.feeds[q] || std::find(res.feeds.begin(), res.feeds.end(), s) == res.feeds.end()) candidates.push_back(s);
        std::vector<double> value(candidates.size());
        parallel_for(candidates.size(), [&](std::size_t c) {
            if (candidates[c] == res.feeds[q]) {
                value[c] = res.objective;
                return;
            }
            auto trial = res.feeds;
            trial[q] = candidates[c];
            value[c] = objective_of(trial);
        });
        res.evaluations += static_cast<int>(candidates.size()) - 1;
        int pick = res.feeds[q];
        double best = res.objective;
        for (std::size_t c = 0; c < candidates.size(); ++c)
            if (value[c] < best) {
                best = value[c];
                pick = candidates[c];
            }
        res.feeds[q] = pick;
        res.objective = best;
    }
    return res;
}

struct AlternateOptions {
    int max_outer = 30;
    std::uint64_t seed = 1;
    std::vector<int> initial_feeds;  // overrides the random draw when non-empty
    LoadOptimizerOptions loads;
};

struct IterationRecord {
    int iteration = 0;
    std::vector<int> feeds;     // after the greedy update
    double objective_loads = 0.0;   // after optimize_loads
    double objective = 0.0;         // after the greedy update
    int load_iterations = 0;
    bool load_warning = false;
    double wall_seconds = 0.0;
};

struct AltOptState {
    int iteration = 0;
    std::vector<int> feeds;
    PortLoads loads;
    double objective = 0.0;
    double initial_objective = 0.0;
    std::vector<IterationRecord> history;
    bool converged = false;       // feed set repeated the previous one
    bool cycle_detected = false;  // feed set revisited an older one
    bool load_warning = false;
};

struct AlternateResult {
    FeedLoadConfig config;
    AltOptState state;
};

// Seeded choice of Q distinct feasible feeds, in draw order.
inline std::vector<int> random_feeds(const std::vector<int>& feasible, int q, std::uint64_t seed) {
    detail::require(q >= 1 && q <= static_cast<int>(feasible.size()), "Q must be in 1..|S|", "Q");
    CounterRng rng(seed, 0x5eed);
    std::vector<int> pool = feasible;
    for (int i = 0; i < q; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(q));
    return pool;
}

// Alternating load / feed optimization. Starts from a random feed set with
// unselected feasible ports open and parasitic reactances at zero, and always
// finishes with a load optimization (including open loads) for the final feed set.
inline AlternateResult alternate(const LoadedNetwork& net, int q, const AlternateOptions& o = {}) {
    const auto& ds = net.dataset();
    detail::require(o.max_outer >= 1, "must be at least 1", "max_outer");
    std::vector<int> feeds = o.initial_feeds.empty() ? random_feeds(ds.feasible_feeds, q, o.seed) : o.initial_feeds;
    detail::require(static_cast<int>(feeds.size()) == q, "initial feed count must equal Q", "feeds");
    validate_feeds(ds.ports(), feeds, &ds.feasible_feeds);

    PortLoads loads(static_cast<std::size_t>(ds.ports()), 0.0);
    for (int s : ds.feasible_feeds) loads[static_cast<std::size_t>(s)].reset();

    AltOptState st;
    st.feeds = feeds;
    st.loads = loads;
    st.initial_objective = st.objective = loaded_objective(net, feeds, loads);
    std::set<std::vector<int>> seen;
    auto key = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    seen.insert(key(feeds));

    for (int it = 1; it <= o.max_outer; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto lr = optimize_loads(net, feeds, loads, o.loads);
        loads = lr.loads;
        const auto gr = greedy_feed_update(net, loads, feeds);
        IterationRecord rec;
        rec.iteration = it;
        rec.feeds = gr.feeds;
        rec.objective_loads = lr.objective;
        rec.objective = gr.objective;
        rec.load_iterations = lr.iterations;
        rec.load_warning = lr.warning;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        st.history.push_back(rec);
        st.load_warning = st.load_warning || lr.warning;
        st.iteration = it;
        const bool same = gr.feeds == feeds;
        feeds = gr.feeds;
        if (same) {
            st.converged = true;
            break;
        }
        if (!seen.insert(key(feeds)).second) {
            st.cycle_detected = true;
            break;
        }
    }
    const auto last = polish_loads(net, feeds, loads, o.loads);
    st.load_warning = st.load_warning || last.warning;
    st.feeds = feeds;
    st.loads = last.loads;
    st.objective = last.objective;

    AlternateResult out;
    out.state = st;
    out.config.feeds = feeds;
    out.config.loads = config_loads(st.loads, feeds);
    out.config.objective = st.objective;
    out.config.provenance = "alternate seed=" + std::to_string(o.seed) + " outer=" + std::to_string(st.iteration) +
                            (st.converged ? " converged" : st.cycle_detected ? " cycle" : " max_outer");
    return out;
}

struct RestartResult {
    AlternateResult best;
    int best_restart = 0;
    std::vector<double> objectives;  // per restart
};

// Best of R independently seeded runs; ties go to the lowest restart index.
inline RestartResult alternate_restarts(const LoadedNetwork& net, int q, int restarts, const AlternateOptions& o = {}) {
    detail::require(restarts >= 1, "must be at least 1", "restarts");
    std::vector<std::optional<AlternateResult>> runs(static_cast<std::size_t>(restarts));
    parallel_for(runs.size(), [&](std::size_t r) {
        AlternateOptions ro = o;
        ro.seed = r == 0 ? o.seed : stream_id(o.seed, r);
        if (r > 0) ro.initial_feeds.clear();
        runs[r] = alternate(net, q, ro);
    });
    RestartResult res;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        res.objectives.push_back(runs[r]->config.objective);
        if (r == 0 || runs[r]->config.objective < res.best.config.objective) {
            res.best = *runs[r];
            res.best_restart = static_cast<int>(r);
        }
    }
    return res;
}

} // namespace beamspace
