#pragma once

// Band-wise strategy learning on the spread X - Y.
//
// Training spreads are split at order statistics into h bands of near-equal
// size. Bands are left-open, right-closed: band i covers (e_{i-1}, e_i] with
// e_{-1} = -inf and e_{h-1} = +inf. Within each band three strategy kinds are
// scored on price increments over the steps whose spread lies in the band:
//
//   PP: w dX + (1 - w) dY      PM: w dX - (1 - w) dY      MP: -w dX + (1 - w) dY
//
// and the best (kind, w) on a weight grid is kept. Live trading looks up the
// band of the current spread and holds that band's weights.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cointel/backtest.hpp"
#include "cointel/error.hpp"
#include "cointel/sim.hpp"

namespace cointel {

struct BandSet {
    /// Interior edges e_0 < ... < e_{h-2}.
    std::vector<double> edges;
    int h = 1;
    int requested_h = 1;
    /// Quantile level i/h behind each surviving edge.
    std::vector<double> provenance;

    double lower(int band) const {
        return band == 0 ? -std::numeric_limits<double>::infinity() : edges[static_cast<std::size_t>(band - 1)];
    }
    double upper(int band) const {
        return band == h - 1 ? std::numeric_limits<double>::infinity() : edges[static_cast<std::size_t>(band)];
    }
    bool contains(int band, double v) const { return lower(band) < v && v <= upper(band); }

    /// Index of the band containing v.
    int locate(double v) const {
        return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
    }
};

inline constexpr int kDefaultBandCount = 5;
inline constexpr double kDefaultWeightStep = 0.05;

/// Edges at the order statistics s_(floor(n i / h)), i = 1..h-1 (1-based), so
/// band i holds sorted samples floor(n (i-1) / h) + 1 .. floor(n i / h).
/// Repeated edges (duplicate-heavy data) are merged and h reduced.
inline BandSet find_percentile_bands(std::span<const double> samples, int h) {
    detail::require(h >= 1, "band count must be >= 1");
    detail::require(samples.size() >= static_cast<std::size_t>(h), "need at least h samples");
    for (double v : samples) detail::require(std::isfinite(v), "band samples must be finite");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    BandSet b;
    b.requested_h = h;
    for (int i = 1; i < h; ++i) {
        const std::size_t idx = n * static_cast<std::size_t>(i) / static_cast<std::size_t>(h);
        const double e = sorted[idx - 1];
        if (!b.edges.empty() && e <= b.edges.back()) continue;
        b.edges.push_back(e);
        b.provenance.push_back(static_cast<double>(i) / static_cast<double>(h));
    }
    b.h = static_cast<int>(b.edges.size()) + 1;
    return b;
}

inline std::vector<std::vector<std::size_t>> allocate_to_bands(std::span<const double> samples, const BandSet& bands) {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(bands.h));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out[static_cast<std::size_t>(bands.locate(samples[i]))].push_back(i);
    }
    return out;
}

struct BandGaussianFit {
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<std::size_t> count;
};

/// Per-band sample mean and (n - 1) standard deviation; single-sample bands
/// report zero spread.
inline BandGaussianFit band_gaussian_fit(std::span<const double> samples, const BandSet& bands) {
    const auto groups = allocate_to_bands(samples, bands);
    BandGaussianFit fit;
    for (std::size_t b = 0; b < groups.size(); ++b) {
        const auto& g = groups[b];
        if (g.empty()) throw InvalidInput("band " + std::to_string(b) + " has no samples");
        double s = 0.0;
        for (std::size_t i : g) s += samples[i];
        const double m = s / static_cast<double>(g.size());
        double ss = 0.0;
        for (std::size_t i : g) ss += (samples[i] - m) * (samples[i] - m);
        fit.mean.push_back(m);
        fit.stdev.push_back(g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1)) : 0.0);
        fit.count.push_back(g.size());
    }
    return fit;
}

enum class BandKind { PP = 0, PM = 1, MP = 2 };

inline const char* to_string(BandKind k) {
    switch (k) {
    case BandKind::PP: return "PP";
    case BandKind::PM: return "PM";
    case BandKind::MP: return "MP";
    }
    return "?";
}

inline BandKind parse_band_kind(const std::string& s) {
    if (s == "PP") return BandKind::PP;
    if (s == "PM") return BandKind::PM;
    if (s == "MP") return BandKind::MP;
    throw InvalidInput("unknown band strategy kind '" + s + "'");
}

/// (w1, w2) held by a kind at weight w.
inline StepWeights kind_weights(BandKind k, double w) {
    switch (k) {
    case BandKind::PP: return {w, 1.0 - w};
    case BandKind::PM: return {w, -(1.0 - w)};
    case BandKind::MP: return {-w, 1.0 - w};
    }
    return {};
}

struct BandStrategy {
    int band = 0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    BandKind kind = BandKind::PP;
    double w = 0.5;
    double trained_pnl = 0.0;
    bool trained = false;
    std::size_t visits = 0;
};

/// Summed in-band increments; every band P&L is affine in w given these.
struct BandIncrements {
    double sum_dx = 0.0;
    double sum_dy = 0.0;
    std::size_t visits = 0;
};

inline BandIncrements band_increments(const PathPair& path, double lo, double hi) {
    BandIncrements inc;
    for (std::size_t t = 0; t + 1 < path.x.size(); ++t) {
        const double s = path.x[t] - path.y[t];
        if (lo < s && s <= hi) {
            inc.sum_dx += path.x[t + 1] - path.x[t];
            inc.sum_dy += path.y[t + 1] - path.y[t];
            ++inc.visits;
        }
    }
    return inc;
}

inline double kind_pnl(BandKind k, double w, const BandIncrements& inc) {
    const StepWeights sw = kind_weights(k, w);
    return sw.w1 * inc.sum_dx + sw.w2 * inc.sum_dy;
}

/// Grid w_j = j / J, J = round(1 / weight_step). Per kind, the argmax over the
/// grid with ties to the smallest w; a P&L that is flat in w selects w = 0.5.
inline std::array<BandStrategy, 3> optimize_band(const PathPair& train_path, double lo, double hi,
                                                 double weight_step = kDefaultWeightStep, int band = 0) {
    detail::require(lo < hi, "band needs lo < hi");
    detail::require(weight_step > 0.0 && weight_step <= 1.0, "weight step must lie in (0, 1]");
    const long J = std::max(1L, std::lround(1.0 / weight_step));
    const BandIncrements inc = band_increments(train_path, lo, hi);

    std::array<BandStrategy, 3> out;
    for (int k = 0; k < 3; ++k) {
        BandStrategy& s = out[static_cast<std::size_t>(k)];
        s.band = band;
        s.lo = lo;
        s.hi = hi;
        s.kind = static_cast<BandKind>(k);
        s.visits = inc.visits;
        if (inc.visits == 0) {
            s.trained = false;
            s.w = 0.5;
            s.trained_pnl = 0.0;
            continue;
        }
        s.trained = true;
        double best = -std::numeric_limits<double>::infinity();
        long best_j = 0;
        // Affine in w: flat exactly when both ends agree.
        const bool flat = kind_pnl(s.kind, 0.0, inc) == kind_pnl(s.kind, 1.0, inc);
        for (long j = 0; j <= J; ++j) {
            const double w = static_cast<double>(j) / static_cast<double>(J);
            const double p = kind_pnl(s.kind, w, inc);
            if (p > best) {
                best = p;
                best_j = j;
            }
        }
        s.w = flat ? 0.5 : static_cast<double>(best_j) / static_cast<double>(J);
        s.trained_pnl = flat ? kind_pnl(s.kind, 0.5, inc) : best;
    }
    return out;
}

/// Bit mask over kinds: bit k set when BandKind(k) may be chosen.
inline constexpr unsigned kAllKinds = 0b111;
inline constexpr unsigned kPairsKinds = 0b110;  // PM, MP

/// Highest trained P&L among the allowed kinds; ties go to PP, then PM, then MP.
inline BandStrategy select_best(const std::array<BandStrategy, 3>& candidates, unsigned allowed = kAllKinds) {
    detail::require((allowed & kAllKinds) != 0, "no strategy kind allowed");
    const BandStrategy* best = nullptr;
    for (const auto& c : candidates) {
        if (!(allowed & (1u << static_cast<unsigned>(c.kind)))) continue;
        if (!best || c.trained_pnl > best->trained_pnl) best = &c;
    }
    return *best;
}

struct BandModel {
    BandSet bands;
    std::vector<BandStrategy> strategies;
    bool pairs_only = false;
};

/// Bands from the training spreads, then the best strategy per band.
inline BandModel train_bandml(const PathPair& train_path, int h = kDefaultBandCount,
                              double weight_step = kDefaultWeightStep, bool pairs_only = false) {
    detail::require(train_path.x.size() >= 2, "training path needs at least two points");
    std::vector<double> spread(train_path.x.size());
    for (std::size_t i = 0; i < spread.size(); ++i) spread[i] = train_path.x[i] - train_path.y[i];
    BandModel m;
    m.pairs_only = pairs_only;
    m.bands = find_percentile_bands(spread, h);
    for (int b = 0; b < m.bands.h; ++b) {
        const auto cands = optimize_band(train_path, m.bands.lower(b), m.bands.upper(b), weight_step, b);
        m.strategies.push_back(select_best(cands, pairs_only ? kPairsKinds : kAllKinds));
    }
    return m;
}

inline StepWeights band_weights(const BandModel& m, double x, double y) {
    const BandStrategy& s = m.strategies[static_cast<std::size_t>(m.bands.locate(x - y))];
    if (!s.trained) return {0.0, 0.0};
    return kind_weights(s.kind, s.w);
}

inline WeightRule live_strategy(std::shared_ptr<const BandModel> model, std::string label = "ML") {
    detail::require(model != nullptr && model->strategies.size() == static_cast<std::size_t>(model->bands.h),
                    "band model needs one strategy per band");
    WeightRule r;
    r.kind = StrategyKind::BandML;
    r.label = std::move(label);
    r.fn = [model](const PricePrefix& p) { return band_weights(*model, p.x_now(), p.y_now()); };
    return r;
}

enum class Signal { Buy, Sell, Hold };

inline const char* to_string(Signal s) {
    switch (s) {
    case Signal::Buy: return "buy";
    case Signal::Sell: return "sell";
    case Signal::Hold: return "hold";
    }
    return "?";
}

inline std::pair<Signal, Signal> forecast_signals(const BandModel& m, double x, double y) {
    const StepWeights w = band_weights(m, x, y);
    auto sig = [](double v) { return v > 0.0 ? Signal::Buy : (v < 0.0 ? Signal::Sell : Signal::Hold); };
    return {sig(w.w1), sig(w.w2)};
}

// Trained-strategy table: band_lo,band_hi,kind,w,trained_pnl,flag (flag is
// "trained" or "untrained"). The outer bands carry -inf / inf.

inline void write_band_model(std::ostream& os, const BandModel& m, std::uint64_t seed) {
    os << "# columns: band_lo,band_hi,kind,w,trained_pnl,flag seed: " << seed << '\n';
    os << std::setprecision(17);
    for (const auto& s : m.strategies) {
        os << s.lo << ',' << s.hi << ',' << to_string(s.kind) << ',' << s.w << ',' << s.trained_pnl << ','
           << (s.trained ? "trained" : "untrained") << '\n';
    }
}

inline BandModel read_band_model(std::istream& is) {
    BandModel m;
    std::string line;
    std::vector<double> his;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::array<std::string, 6> f;
        for (auto& cell : f) {
            if (!std::getline(ss, cell, ',')) throw InvalidInput("band model row needs 6 fields: " + line);
        }
        BandStrategy s;
        try {
            s.lo = std::stod(f[0]);
            s.hi = std::stod(f[1]);
            s.w = std::stod(f[3]);
            s.trained_pnl = std::stod(f[4]);
        } catch (const std::logic_error&) {
            throw InvalidInput("malformed number in band model row: " + line);
        }
        s.kind = parse_band_kind(f[2]);
        if (f[5] != "trained" && f[5] != "untrained") throw InvalidInput("band model flag must be trained/untrained");
        s.trained = f[5] == "trained";
        s.band = static_cast<int>(m.strategies.size());
        m.strategies.push_back(s);
        his.push_back(s.hi);
    }
    if (m.strategies.empty()) throw InvalidInput("band model has no rows");
    m.bands.h = static_cast<int>(m.strategies.size());
    m.bands.requested_h = m.bands.h;
    his.pop_back();
    m.bands.edges = his;
    for (std::size_t i = 1; i < m.bands.edges.size(); ++i) {
        if (!(m.bands.edges[i] > m.bands.edges[i - 1])) throw InvalidInput("band edges must be strictly increasing");
    }
    return m;
}

inline void save_band_model(const std::string& path, const BandModel& m, std::uint64_t seed) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open band model for writing: " + path);
    write_band_model(os, m, seed);
    if (!os) throw IoError("failed writing band model: " + path);
}

inline BandModel load_band_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open band model: " + path);
    return read_band_model(is);
}

} // namespace cointel
