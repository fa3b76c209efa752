#pragma once

// Self-financing backtests on simulated paths.
//
// A weight rule is called once per period with the price prefix up to and
// including the current step and returns (w1, w2) for the coming period:
//
//   V_{k+1} = V_k (1 + w1 (X_{k+1}/X_k - 1) + w2 (Y_{k+1}/Y_k - 1)).
//
// Wealth is floored at zero; after ruin no further trading happens.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cointel/dgm.hpp"
#include "cointel/error.hpp"
#include "cointel/moments.hpp"
#include "cointel/mvc.hpp"
#include "cointel/net.hpp"
#include "cointel/sim.hpp"

namespace cointel {

struct StepWeights {
    double w1 = 0.0;
    double w2 = 0.0;
};

/// Prices observed so far; the last element is the current step.
struct PricePrefix {
    std::span<const double> t, x, y;

    std::size_t step() const { return x.size() - 1; }
    double time() const { return t.back(); }
    double x_now() const { return x.back(); }
    double y_now() const { return y.back(); }
};

/// Per-rule event counts.
struct RuleCounters {
    long fallback_events = 0;  // MVC: Monte Carlo moments or previous weights used
    long eval_errors = 0;      // SC: optimal weight undefined, flat step taken
    long clamp_events = 0;     // SC: |pi1| hit pi_max
    long domain_clamps = 0;    // SC: z outside the trained domain
    long switches = 0;         // DS: changes of the selected constituent
};

enum class StrategyKind { MVC, SC, DS, BandML, FixedWeights };

inline const char* to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::MVC: return "MVC";
    case StrategyKind::SC: return "SC";
    case StrategyKind::DS: return "DS";
    case StrategyKind::BandML: return "BandML";
    case StrategyKind::FixedWeights: return "fixed";
    }
    return "?";
}

/// A stateful causal rule. Build a fresh one per path.
struct WeightRule {
    std::function<StepWeights(const PricePrefix&)> fn;
    std::shared_ptr<RuleCounters> counters = std::make_shared<RuleCounters>();
    StrategyKind kind = StrategyKind::FixedWeights;
    std::string label;

    StepWeights operator()(const PricePrefix& p) const { return fn(p); }
};

struct StrategyTrace {
    std::string label;
    StrategyKind kind = StrategyKind::FixedWeights;
    std::vector<double> times;
    /// Weights held over (t_k, t_{k+1}]; one entry fewer than `wealth`.
    std::vector<double> w1, w2;
    std::vector<double> wealth;
    std::vector<double> pnl;
    /// DS only: 1 when the SC constituent was selected for the period.
    std::vector<int> selected_sc;
    RuleCounters counters;
    bool ruined = false;
    long ruin_step = -1;
};

inline constexpr double kDefaultInitialWealth = 1.0;

inline StrategyTrace run_strategy(const PathPair& path, const WeightRule& rule, double v0 = kDefaultInitialWealth) {
    detail::require(std::isfinite(v0) && v0 > 0.0, "initial wealth must be > 0");
    detail::require(!path.x.empty() && path.x.size() == path.y.size() && path.x.size() == path.times.size(),
                    "path series must be non-empty and of equal length");
    const std::size_t n = path.x.size();
    StrategyTrace tr;
    tr.label = rule.label;
    tr.kind = rule.kind;
    tr.times = path.times;
    tr.wealth.assign(n, 0.0);
    tr.pnl.assign(n, 0.0);
    tr.w1.assign(n - 1, 0.0);
    tr.w2.assign(n - 1, 0.0);
    tr.wealth[0] = v0;

    const std::span<const double> ts(path.times), xs(path.x), ys(path.y);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double v = tr.wealth[k];
        if (tr.ruined) {
            tr.wealth[k + 1] = 0.0;
            continue;
        }
        const PricePrefix prefix{ts.first(k + 1), xs.first(k + 1), ys.first(k + 1)};
        const StepWeights w = rule(prefix);
        if (!std::isfinite(w.w1) || !std::isfinite(w.w2)) {
            throw NumericalFault("weight rule produced a non-finite weight at step " + std::to_string(k));
        }
        tr.w1[k] = w.w1;
        tr.w2[k] = w.w2;
        const double rx = path.x[k + 1] / path.x[k] - 1.0;
        const double ry = path.y[k + 1] / path.y[k] - 1.0;
        double next = v * (1.0 + w.w1 * rx + w.w2 * ry);
        if (!(next > 0.0)) {
            next = 0.0;
            tr.ruined = true;
            tr.ruin_step = static_cast<long>(k + 1);
        }
        tr.wealth[k + 1] = next;
    }
    for (std::size_t k = 0; k < n; ++k) tr.pnl[k] = tr.wealth[k] - v0;
    tr.counters = *rule.counters;
    return tr;
}

/// (V_T - V_0) / V_0.
inline double portfolio_return(const StrategyTrace& tr) {
    detail::require(!tr.wealth.empty(), "empty trace");
    return (tr.wealth.back() - tr.wealth.front()) / tr.wealth.front();
}

inline WeightRule fixed_weights(double w1, double w2, std::string label = "fixed") {
    WeightRule r;
    r.kind = StrategyKind::FixedWeights;
    r.label = std::move(label);
    r.fn = [w1, w2](const PricePrefix&) { return StepWeights{w1, w2}; };
    return r;
}

/// Replays the weights recorded in a trace.
inline WeightRule replay_rule(const StrategyTrace& tr) {
    WeightRule r;
    r.kind = tr.kind;
    r.label = tr.label;
    auto w1 = std::make_shared<std::vector<double>>(tr.w1);
    auto w2 = std::make_shared<std::vector<double>>(tr.w2);
    r.fn = [w1, w2](const PricePrefix& p) {
        const std::size_t k = p.step();
        if (k >= w1->size()) throw InvalidInput("replayed trace is shorter than the path");
        return StepWeights{(*w1)[k], (*w2)[k]};
    };
    return r;
}

inline constexpr std::size_t kFallbackOraclePaths = 1000;

/// Daily MVC weights from one-step moments conditioned on current prices.
/// Flagged closed-form moments fall back to Monte Carlo moments (seeded per
/// step from `fallback_seed`); a singular covariance keeps the previous weights.
inline WeightRule mvc_strategy(const CointelationParams& params, double tau, double dt = kDailyDt,
                               std::uint64_t fallback_seed = 0) {
    params.validate();
    detail::require(std::isfinite(tau) && tau >= 0.0, "risk tolerance must be >= 0");
    detail::require(dt > 0.0, "dt must be > 0");
    WeightRule r;
    r.kind = StrategyKind::MVC;
    r.label = "MVC";
    auto counters = r.counters;
    auto last = std::make_shared<StepWeights>(StepWeights{0.5, 0.5});
    r.fn = [params, tau, dt, fallback_seed, counters, last](const PricePrefix& p) {
        try {
            MomentSet m = return_moments(params, p.x_now(), p.y_now(), dt);
            if (m.flagged) {
                ++counters->fallback_events;
                const auto e = mc_moment_oracle(params, p.x_now(), p.y_now(), dt, kFallbackOraclePaths,
                                                stream_seed(fallback_seed, p.step()));
                m = moments_from_oracle(e, p.x_now(), p.y_now(), dt);
            }
            const MVCWeights w = mvc_weights(m, tau);
            *last = {w.h1, w.h2};
        } catch (const NumericalFault&) {
            ++counters->fallback_events;
        }
        return *last;
    };
    return r;
}

/// Pairs weights (pi1, -pi1) from a trained value network. Time is measured
/// from the start of the path; t and z are clamped into the trained domain.
inline WeightRule sc_strategy(std::shared_ptr<const DGMNetwork> net, const CointelationParams& params, double gamma,
                              double T, double z_lo, double z_hi, double pi_max = kPiMax) {
    detail::require(net != nullptr, "SC strategy needs a trained network");
    detail::require(z_lo < z_hi && T > 0.0, "SC strategy needs a valid domain");
    WeightRule r;
    r.kind = StrategyKind::SC;
    r.label = "SC";
    auto counters = r.counters;
    r.fn = [net, params, gamma, T, z_lo, z_hi, pi_max, counters](const PricePrefix& p) {
        const double t = std::clamp(p.time() - p.t.front(), 0.0, T);
        const double z_raw = p.x_now() / p.y_now();
        const double z = std::clamp(z_raw, z_lo, z_hi);
        if (z != z_raw) ++counters->domain_clamps;
        try {
            const PairWeights w = optimal_pi(*net, t, z, params, gamma, pi_max);
            if (w.clamped) ++counters->clamp_events;
            return StepWeights{w.pi1, w.pi2};
        } catch (const NumericalFault&) {
            ++counters->eval_errors;
            return StepWeights{0.0, 0.0};
        }
    };
    return r;
}

enum class SwitchingMode {
    /// Two standalone shadow books from v0; the leader is followed.
    TwoShadow,
    /// Shadows are re-based to the live book's wealth at every switch, so the
    /// comparison only covers performance since the last switch.
    OneBook,
};

/// psi*(t) = pi*(t) if V^pi(t) >= V^h(t), else h*(t). Both constituents are
/// queried every step so their internal state advances in lockstep. When
/// `selection_log` is given, the pick of every period is appended (1 = SC).
inline WeightRule dynamic_switching(WeightRule rule_sc, WeightRule rule_mvc,
                                    SwitchingMode mode = SwitchingMode::TwoShadow,
                                    std::shared_ptr<std::vector<int>> selection_log = nullptr) {
    struct State {
        double v_sc = 1.0, v_mvc = 1.0, v_live = 1.0;
        StepWeights prev_sc, prev_mvc, prev_live;
        int selected = -1;  // 1 = SC, 0 = MVC
    };
    WeightRule r;
    r.kind = StrategyKind::DS;
    r.label = "DS";
    auto counters = r.counters;
    auto st = std::make_shared<State>();
    r.fn = [rule_sc = std::move(rule_sc), rule_mvc = std::move(rule_mvc), mode, counters, st,
            selection_log](const PricePrefix& p) {
        const std::size_t k = p.step();
        if (k > 0) {
            const double rx = p.x[k] / p.x[k - 1] - 1.0;
            const double ry = p.y[k] / p.y[k - 1] - 1.0;
            auto grow = [&](double v, const StepWeights& w) {
                return std::max(0.0, v * (1.0 + w.w1 * rx + w.w2 * ry));
            };
            st->v_sc = grow(st->v_sc, st->prev_sc);
            st->v_mvc = grow(st->v_mvc, st->prev_mvc);
            st->v_live = grow(st->v_live, st->prev_live);
        }
        st->prev_sc = rule_sc(p);
        st->prev_mvc = rule_mvc(p);
        const int pick = st->v_sc >= st->v_mvc ? 1 : 0;
        if (st->selected >= 0 && pick != st->selected) {
            ++counters->switches;
            if (mode == SwitchingMode::OneBook) st->v_sc = st->v_mvc = st->v_live;
        }
        st->selected = pick;
        if (selection_log) selection_log->push_back(pick);
        st->prev_live = pick == 1 ? st->prev_sc : st->prev_mvc;
        counters->fallback_events = rule_mvc.counters->fallback_events;
        counters->eval_errors = rule_sc.counters->eval_errors;
        counters->clamp_events = rule_sc.counters->clamp_events;
        counters->domain_clamps = rule_sc.counters->domain_clamps;
        return st->prev_live;
    };
    return r;
}

/// DS trace rebuilt from recorded SC and MVC traces on the same path; the
/// per-period selection is recovered alongside.
inline StrategyTrace dynamic_switching_trace(const PathPair& path, const StrategyTrace& sc, const StrategyTrace& mvc,
                                             SwitchingMode mode = SwitchingMode::TwoShadow,
                                             double v0 = kDefaultInitialWealth) {
    auto log = std::make_shared<std::vector<int>>();
    WeightRule ds = dynamic_switching(replay_rule(sc), replay_rule(mvc), mode, log);
    StrategyTrace tr = run_strategy(path, ds, v0);
    tr.selected_sc = *log;
    tr.selected_sc.resize(tr.w1.size(), 0);
    tr.counters.fallback_events = mvc.counters.fallback_events;
    tr.counters.eval_errors = sc.counters.eval_errors;
    tr.counters.clamp_events = sc.counters.clamp_events;
    tr.counters.domain_clamps = sc.counters.domain_clamps;
    return tr;
}

/// step,time,w1,w2,V,pnl,label; the final row has no following period and
/// leaves w1, w2 empty.
inline void write_trace(std::ostream& os, const StrategyTrace& tr, std::uint64_t seed, bool header = true) {
    if (header) os << "# columns: step,time,w1,w2,V,pnl,label seed: " << seed << '\n';
    os << std::setprecision(17);
    for (std::size_t k = 0; k < tr.wealth.size(); ++k) {
        os << k << ',' << tr.times[k] << ',';
        if (k < tr.w1.size()) os << tr.w1[k] << ',' << tr.w2[k];
        else os << ',';
        os << ',' << tr.wealth[k] << ',' << tr.pnl[k] << ',' << tr.label << '\n';
    }
}

} // namespace cointel
