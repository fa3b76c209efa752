#pragma once

// DGM surrogate f(t, z; theta).
//
//   S1      = tanh(W1 x + b1)
//   Z^l     = tanh(Uz x + Wz S^l + bz)
//   G^l     = tanh(Ug x + Wg S^l + bg)
//   R^l     = tanh(Ur x + Wr S^l + br)
//   H^l     = tanh(Uh x + Wh (S^l . R^l) + bh)
//   S^{l+1} = (1 - G^l) . H^l + Z^l . S^l
//   f       = w . S^{L+1} + b
//
// x is the affinely normalized input (t, z). Every intermediate is carried as
// a jet (value, d/dt, d/dz, d2/dz2) with respect to the *physical* inputs, so
// f_t, f_z and f_zz are exact. Parameter gradients of any adjoint-weighted
// combination of the four jet components are obtained by reverse accumulation
// over the jet graph.
//
// All parameters live in one flat vector `theta`; matrices are stored
// row-major in the order: W1, b1, then per layer for gate in (z, g, r, h):
// U (width x 2), W (width x width), b (width); finally w (width), b (1).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cointel/error.hpp"
#include "cointel/rng.hpp"

namespace cointel {

/// Physical -> network input map: x_t = (t - t_offset) * t_scale, likewise z.
struct InputMap {
    double t_offset = 0.0;
    double t_scale = 1.0;
    double z_offset = 0.0;
    double z_scale = 1.0;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Gate : int { Z = 0, G = 1, R = 2, H = 3 };

/// Offsets of every tensor in the flat parameter vector.
struct ParamLayout {
    int width = 0;
    int layers = 0;

    std::size_t gate_block() const {
        const auto m = static_cast<std::size_t>(width);
        return 2 * m + m * m + m;
    }
    std::size_t w1() const { return 0; }
    std::size_t b1() const { return 2 * static_cast<std::size_t>(width); }
    std::size_t gate(int layer, Gate g) const {
        return 3 * static_cast<std::size_t>(width) +
               (static_cast<std::size_t>(layer) * 4 + static_cast<std::size_t>(g)) * gate_block();
    }
    std::size_t gate_u(int layer, Gate g) const { return gate(layer, g); }
    std::size_t gate_w(int layer, Gate g) const { return gate(layer, g) + 2 * static_cast<std::size_t>(width); }
    std::size_t gate_b(int layer, Gate g) const {
        const auto m = static_cast<std::size_t>(width);
        return gate(layer, g) + 2 * m + m * m;
    }
    std::size_t w_out() const { return gate(layers, Gate::Z); }
    std::size_t b_out() const { return w_out() + static_cast<std::size_t>(width); }
    std::size_t size() const { return b_out() + 1; }
};

struct DGMNetwork {
    int width = 0;
    int layers = 0;
    std::uint64_t seed = 0;
    InputMap input_map;
    std::vector<double> theta;

    ParamLayout layout() const { return {width, layers}; }
    std::size_t parameter_count() const { return theta.size(); }

    Eigen::Map<const RowMatrix> matrix(std::size_t offset, int rows, int cols) const {
        return {theta.data() + offset, rows, cols};
    }
    Eigen::Map<const Eigen::VectorXd> vector(std::size_t offset, int n) const { return {theta.data() + offset, n}; }

    bool all_finite() const {
        for (double v : theta)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct EvalResult {
    double f = 0.0;
    double f_t = 0.0;
    double f_z = 0.0;
    double f_zz = 0.0;
};

/// Column-wise results of a batched evaluation.
struct EvalBatch {
    Eigen::RowVectorXd f, f_t, f_z, f_zz;
    EvalResult at(Eigen::Index i) const { return {f(i), f_t(i), f_z(i), f_zz(i)}; }
};

/// Adjoints on (f, f_t, f_z, f_zz), one column per batch point.
struct Adjoints {
    Eigen::RowVectorXd f, f_t, f_z, f_zz;

    static Adjoints zeros(Eigen::Index n) {
        Adjoints a;
        a.f = a.f_t = a.f_z = a.f_zz = Eigen::RowVectorXd::Zero(n);
        return a;
    }
};

struct ParamGradient {
    std::vector<double> values;
    double loss = 0.0;

    double squared_norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return s;
    }
    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return std::isfinite(loss);
    }
};

/// Uniform on +-sqrt(6 / (fan_in + fan_out)) per weight tensor; biases zero.
inline DGMNetwork init_network(int hidden_width, int n_layers, std::uint64_t seed, InputMap map = {}) {
    detail::require(hidden_width >= 1, "hidden width must be >= 1");
    detail::require(n_layers >= 1, "layer count must be >= 1");
    DGMNetwork net;
    net.width = hidden_width;
    net.layers = n_layers;
    net.seed = seed;
    net.input_map = map;
    const ParamLayout lay = net.layout();
    net.theta.assign(lay.size(), 0.0);

    Rng rng(seed);
    auto fill = [&](std::size_t offset, int fan_out, int fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        const std::size_t n = static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out);
        for (std::size_t i = 0; i < n; ++i) net.theta[offset + i] = rng.uniform(-limit, limit);
    };
    const int m = hidden_width;
    fill(lay.w1(), m, 2);
    for (int l = 0; l < n_layers; ++l) {
        for (Gate g : {Gate::Z, Gate::G, Gate::R, Gate::H}) {
            fill(lay.gate_u(l, g), m, 2);
            fill(lay.gate_w(l, g), m, m);
        }
    }
    fill(lay.w_out(), 1, m);
    return net;
}

namespace detail {

// value, d/dt, d/dz, d2/dz2 of a (width x batch) block of activations.
struct Jet {
    Eigen::MatrixXd v, t, z, zz;

    static Jet zeros(Eigen::Index rows, Eigen::Index cols) {
        Jet j;
        j.v = j.t = j.z = j.zz = Eigen::MatrixXd::Zero(rows, cols);
        return j;
    }
    void add(const Jet& o) {
        v += o.v;
        t += o.t;
        z += o.z;
        zz += o.zz;
    }
};

struct NetInput {
    Eigen::Matrix<double, 2, Eigen::Dynamic> x;  // normalized (t, z) per column
    Eigen::Vector2d dt;                          // d x / d t
    Eigen::Vector2d dz;                          // d x / d z
};

inline NetInput make_input(const InputMap& map, const Eigen::VectorXd& t, const Eigen::VectorXd& z) {
    NetInput in;
    in.x.resize(2, t.size());
    in.x.row(0) = ((t.array() - map.t_offset) * map.t_scale).matrix().transpose();
    in.x.row(1) = ((z.array() - map.z_offset) * map.z_scale).matrix().transpose();
    in.dt << map.t_scale, 0.0;
    in.dz << 0.0, map.z_scale;
    return in;
}

// a = U x + W s + b, propagated through the jet.
template <class UMat, class WMat, class BVec>
Jet affine(const UMat& u, const WMat* w, const BVec& b, const NetInput& in, const Jet* s, bool derivs) {
    const Eigen::Index cols = in.x.cols();
    Jet a;
    a.v = u * in.x;
    a.v.colwise() += b;
    if (w) a.v.noalias() += (*w) * s->v;
    if (!derivs) return a;
    const Eigen::VectorXd ut = u * in.dt;
    const Eigen::VectorXd uz = u * in.dz;
    a.t = ut.replicate(1, cols);
    a.z = uz.replicate(1, cols);
    if (w) {
        a.t.noalias() += (*w) * s->t;
        a.z.noalias() += (*w) * s->z;
        a.zz.noalias() = (*w) * s->zz;
    } else {
        a.zz = Eigen::MatrixXd::Zero(a.v.rows(), cols);
    }
    return a;
}

inline Jet tanh_jet(const Jet& a, bool derivs) {
    Jet y;
    y.v = a.v.array().tanh().matrix();
    if (!derivs) return y;
    const Eigen::ArrayXXd d1 = 1.0 - y.v.array().square();
    const Eigen::ArrayXXd d2 = -2.0 * y.v.array() * d1;
    y.t = (d1 * a.t.array()).matrix();
    y.z = (d1 * a.z.array()).matrix();
    y.zz = (d1 * a.zz.array() + d2 * a.z.array().square()).matrix();
    return y;
}

inline Jet mul_jet(const Jet& u, const Jet& w, bool derivs) {
    Jet p;
    p.v = (u.v.array() * w.v.array()).matrix();
    if (!derivs) return p;
    p.t = (u.t.array() * w.v.array() + u.v.array() * w.t.array()).matrix();
    p.z = (u.z.array() * w.v.array() + u.v.array() * w.z.array()).matrix();
    p.zz = (u.zz.array() * w.v.array() + 2.0 * u.z.array() * w.z.array() + u.v.array() * w.zz.array()).matrix();
    return p;
}

inline Jet one_minus(const Jet& g, bool derivs) {
    Jet o;
    o.v = (1.0 - g.v.array()).matrix();
    if (!derivs) return o;
    o.t = -g.t;
    o.z = -g.z;
    o.zz = -g.zz;
    return o;
}

struct LayerCache {
    Jet s_in;
    Jet z_pre, z, g_pre, g, r_pre, r, sr, h_pre, h;
};

struct ForwardCache {
    NetInput input;
    Jet s1_pre;
    std::vector<LayerCache> layers;
    Jet s_out;
    bool derivs = false;
};

inline ForwardCache forward_pass(const DGMNetwork& net, const Eigen::VectorXd& t, const Eigen::VectorXd& z,
                                 bool derivs) {
    const ParamLayout lay = net.layout();
    const int m = net.width;
    ForwardCache c;
    c.derivs = derivs;
    c.input = make_input(net.input_map, t, z);

    const auto w1 = net.matrix(lay.w1(), m, 2);
    const auto b1 = net.vector(lay.b1(), m);
    c.s1_pre = affine(w1, static_cast<const Eigen::Map<const RowMatrix>*>(nullptr), b1, c.input, nullptr, derivs);
    Jet s = tanh_jet(c.s1_pre, derivs);

    c.layers.resize(static_cast<std::size_t>(net.layers));
    for (int l = 0; l < net.layers; ++l) {
        LayerCache& lc = c.layers[static_cast<std::size_t>(l)];
        auto gate_pre = [&](Gate g, const Jet& input) {
            const auto u = net.matrix(lay.gate_u(l, g), m, 2);
            const auto w = net.matrix(lay.gate_w(l, g), m, m);
            const auto b = net.vector(lay.gate_b(l, g), m);
            return affine(u, &w, b, c.input, &input, derivs);
        };
        lc.s_in = std::move(s);
        lc.z_pre = gate_pre(Gate::Z, lc.s_in);
        lc.z = tanh_jet(lc.z_pre, derivs);
        lc.g_pre = gate_pre(Gate::G, lc.s_in);
        lc.g = tanh_jet(lc.g_pre, derivs);
        lc.r_pre = gate_pre(Gate::R, lc.s_in);
        lc.r = tanh_jet(lc.r_pre, derivs);
        lc.sr = mul_jet(lc.s_in, lc.r, derivs);
        lc.h_pre = gate_pre(Gate::H, lc.sr);
        lc.h = tanh_jet(lc.h_pre, derivs);

        Jet next = mul_jet(one_minus(lc.g, derivs), lc.h, derivs);
        const Jet carry = mul_jet(lc.z, lc.s_in, derivs);
        next.v += carry.v;
        if (derivs) {
            next.t += carry.t;
            next.z += carry.z;
            next.zz += carry.zz;
        }
        s = std::move(next);
    }
    c.s_out = std::move(s);
    return c;
}

// Reverse of y = tanh(a) on jets.
inline Jet tanh_backward(const Jet& a, const Jet& y, const Jet& ybar) {
    const Eigen::ArrayXXd yv = y.v.array();
    const Eigen::ArrayXXd d1 = 1.0 - yv.square();
    const Eigen::ArrayXXd d2 = -2.0 * yv * d1;
    const Eigen::ArrayXXd d3 = (6.0 * yv.square() - 2.0) * d1;
    const Eigen::ArrayXXd az = a.z.array();
    Jet abar;
    abar.t = (ybar.t.array() * d1).matrix();
    abar.zz = (ybar.zz.array() * d1).matrix();
    abar.z = (ybar.z.array() * d1 + 2.0 * ybar.zz.array() * d2 * az).matrix();
    abar.v = (ybar.v.array() * d1 +
              d2 * (ybar.t.array() * a.t.array() + ybar.z.array() * az + ybar.zz.array() * a.zz.array()) +
              d3 * ybar.zz.array() * az.square())
                 .matrix();
    return abar;
}

// Reverse of p = u . w; accumulates into ubar and wbar.
inline void mul_backward(const Jet& u, const Jet& w, const Jet& pbar, Jet& ubar, Jet& wbar) {
    const auto pv = pbar.v.array(), pt = pbar.t.array(), pz = pbar.z.array(), pzz = pbar.zz.array();
    ubar.v.array() += pv * w.v.array() + pt * w.t.array() + pz * w.z.array() + pzz * w.zz.array();
    ubar.t.array() += pt * w.v.array();
    ubar.z.array() += pz * w.v.array() + 2.0 * pzz * w.z.array();
    ubar.zz.array() += pzz * w.v.array();
    wbar.v.array() += pv * u.v.array() + pt * u.t.array() + pz * u.z.array() + pzz * u.zz.array();
    wbar.t.array() += pt * u.v.array();
    wbar.z.array() += pz * u.v.array() + 2.0 * pzz * u.z.array();
    wbar.zz.array() += pzz * u.v.array();
}

// Reverse of a = U x + W s + b. Gradients accumulate into the flat buffer.
inline void affine_backward(const Jet& abar, const NetInput& in, const Jet* s, int m, int k,
                            std::size_t off_u, std::size_t off_w, std::size_t off_b, std::vector<double>& grad,
                            const Eigen::Map<const RowMatrix>* w, Jet* sbar) {
    Eigen::Map<RowMatrix> gu(grad.data() + off_u, m, 2);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + off_b, m);
    gu.noalias() += abar.v * in.x.transpose();
    gu.noalias() += abar.t.rowwise().sum() * in.dt.transpose();
    gu.noalias() += abar.z.rowwise().sum() * in.dz.transpose();
    gb += abar.v.rowwise().sum();
    if (!s) return;
    Eigen::Map<RowMatrix> gw(grad.data() + off_w, m, k);
    gw.noalias() += abar.v * s->v.transpose();
    gw.noalias() += abar.t * s->t.transpose();
    gw.noalias() += abar.z * s->z.transpose();
    gw.noalias() += abar.zz * s->zz.transpose();
    sbar->v.noalias() += w->transpose() * abar.v;
    sbar->t.noalias() += w->transpose() * abar.t;
    sbar->z.noalias() += w->transpose() * abar.z;
    sbar->zz.noalias() += w->transpose() * abar.zz;
}

inline EvalBatch read_output(const DGMNetwork& net, const ForwardCache& c) {
    const ParamLayout lay = net.layout();
    const auto w = net.vector(lay.w_out(), net.width);
    const double b = net.theta[lay.b_out()];
    EvalBatch out;
    out.f = (w.transpose() * c.s_out.v).array() + b;
    if (c.derivs) {
        out.f_t = w.transpose() * c.s_out.t;
        out.f_z = w.transpose() * c.s_out.z;
        out.f_zz = w.transpose() * c.s_out.zz;
    }
    return out;
}

} // namespace detail

/// f at each (t_i, z_i).
inline Eigen::RowVectorXd forward(const DGMNetwork& net, const Eigen::VectorXd& t, const Eigen::VectorXd& z) {
    const auto cache = detail::forward_pass(net, t, z, false);
    return detail::read_output(net, cache).f;
}

inline double forward(const DGMNetwork& net, double t, double z) {
    return forward(net, Eigen::VectorXd::Constant(1, t), Eigen::VectorXd::Constant(1, z))(0);
}

inline EvalBatch forward_with_input_derivs(const DGMNetwork& net, const Eigen::VectorXd& t,
                                           const Eigen::VectorXd& z) {
    const auto cache = detail::forward_pass(net, t, z, true);
    return detail::read_output(net, cache);
}

inline EvalResult forward_with_input_derivs(const DGMNetwork& net, double t, double z) {
    return forward_with_input_derivs(net, Eigen::VectorXd::Constant(1, t), Eigen::VectorXd::Constant(1, z)).at(0);
}

/// Gradient with respect to theta of sum_i [adj.f_i f_i + adj.f_t_i f_t,i + adj.f_z_i f_z,i + adj.f_zz_i f_zz,i].
/// Also returns the forward evaluation so callers need only one pass.
inline ParamGradient backward(const DGMNetwork& net, const Eigen::VectorXd& t, const Eigen::VectorXd& z,
                              const Adjoints& adj, EvalBatch* eval_out = nullptr) {
    using detail::Jet;
    const ParamLayout lay = net.layout();
    const int m = net.width;
    const Eigen::Index n = t.size();
    detail::require(adj.f.size() == n && adj.f_t.size() == n && adj.f_z.size() == n && adj.f_zz.size() == n,
                    "adjoint count must match the batch size");

    const auto c = detail::forward_pass(net, t, z, true);
    if (eval_out) *eval_out = detail::read_output(net, c);

    ParamGradient grad;
    grad.values.assign(lay.size(), 0.0);
    {
        Eigen::Map<Eigen::VectorXd> gw(grad.values.data() + lay.w_out(), m);
        gw.noalias() += c.s_out.v * adj.f.transpose();
        gw.noalias() += c.s_out.t * adj.f_t.transpose();
        gw.noalias() += c.s_out.z * adj.f_z.transpose();
        gw.noalias() += c.s_out.zz * adj.f_zz.transpose();
        grad.values[lay.b_out()] += adj.f.sum();
    }
    const auto w_out = net.vector(lay.w_out(), m);
    Jet sbar;
    sbar.v = w_out * adj.f;
    sbar.t = w_out * adj.f_t;
    sbar.z = w_out * adj.f_z;
    sbar.zz = w_out * adj.f_zz;

    for (int l = net.layers - 1; l >= 0; --l) {
        const auto& lc = c.layers[static_cast<std::size_t>(l)];
        Jet omg_bar = Jet::zeros(m, n), h_bar = Jet::zeros(m, n);
        Jet z_bar = Jet::zeros(m, n), s_prev_bar = Jet::zeros(m, n);
        detail::mul_backward(detail::one_minus(lc.g, true), lc.h, sbar, omg_bar, h_bar);
        detail::mul_backward(lc.z, lc.s_in, sbar, z_bar, s_prev_bar);
        Jet g_bar;
        g_bar.v = -omg_bar.v;
        g_bar.t = -omg_bar.t;
        g_bar.z = -omg_bar.z;
        g_bar.zz = -omg_bar.zz;

        auto gate_backward = [&](Gate g, const Jet& pre, const Jet& post, const Jet& post_bar, const Jet& input,
                                 Jet& input_bar) {
            const Jet pre_bar = detail::tanh_backward(pre, post, post_bar);
            const auto w = net.matrix(lay.gate_w(l, g), m, m);
            detail::affine_backward(pre_bar, c.input, &input, m, m, lay.gate_u(l, g), lay.gate_w(l, g),
                                    lay.gate_b(l, g), grad.values, &w, &input_bar);
        };

        Jet sr_bar = Jet::zeros(m, n), r_bar = Jet::zeros(m, n);
        gate_backward(Gate::H, lc.h_pre, lc.h, h_bar, lc.sr, sr_bar);
        detail::mul_backward(lc.s_in, lc.r, sr_bar, s_prev_bar, r_bar);
        gate_backward(Gate::R, lc.r_pre, lc.r, r_bar, lc.s_in, s_prev_bar);
        gate_backward(Gate::G, lc.g_pre, lc.g, g_bar, lc.s_in, s_prev_bar);
        gate_backward(Gate::Z, lc.z_pre, lc.z, z_bar, lc.s_in, s_prev_bar);
        sbar = std::move(s_prev_bar);
    }

    const Jet s1 = detail::tanh_jet(c.s1_pre, true);
    const Jet s1_pre_bar = detail::tanh_backward(c.s1_pre, s1, sbar);
    detail::affine_backward(s1_pre_bar, c.input, nullptr, m, 0, lay.w1(), 0, lay.b1(), grad.values, nullptr,
                            nullptr);
    return grad;
}

inline ParamGradient backward(const DGMNetwork& net, double t, double z, const EvalResult& adjoint) {
    Adjoints a = Adjoints::zeros(1);
    a.f(0) = adjoint.f;
    a.f_t(0) = adjoint.f_t;
    a.f_z(0) = adjoint.f_z;
    a.f_zz(0) = adjoint.f_zz;
    return backward(net, Eigen::VectorXd::Constant(1, t), Eigen::VectorXd::Constant(1, z), a);
}

/// theta <- theta - alpha grad. Returns false (and leaves theta untouched)
/// when the gradient is not finite.
inline bool sgd_step(DGMNetwork& net, const ParamGradient& grad, double alpha) {
    detail::require(alpha > 0.0, "learning rate must be > 0");
    detail::require(grad.values.size() == net.theta.size(), "gradient shape does not match the network");
    for (double g : grad.values)
        if (!std::isfinite(g)) return false;
    for (std::size_t i = 0; i < net.theta.size(); ++i) net.theta[i] -= alpha * grad.values[i];
    return true;
}

// ---------------------------------------------------------------------------
// Checkpoint: plain text, one token per field, parameters one per line in
// flat-layout order with 17 significant digits.

inline constexpr const char* kCheckpointMagic = "cointel-dgm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const DGMNetwork& net) {
    os << kCheckpointMagic << " v" << kCheckpointVersion << '\n';
    os << "width " << net.width << '\n';
    os << "layers " << net.layers << '\n';
    os << "seed " << net.seed << '\n';
    os << std::setprecision(17);
    os << "input_map " << net.input_map.t_offset << ' ' << net.input_map.t_scale << ' ' << net.input_map.z_offset
       << ' ' << net.input_map.z_scale << '\n';
    os << "parameters " << net.theta.size() << '\n';
    for (double v : net.theta) os << v << '\n';
}

inline DGMNetwork read_checkpoint(std::istream& is) {
    std::string magic, version, key;
    is >> magic >> version;
    if (magic != kCheckpointMagic) throw InvalidInput("not a DGM checkpoint");
    if (version != "v" + std::to_string(kCheckpointVersion)) throw InvalidInput("unsupported checkpoint version " + version);
    DGMNetwork net;
    std::size_t count = 0;
    auto expect = [&](const char* name) {
        is >> key;
        if (key != name) throw InvalidInput(std::string("checkpoint: expected '") + name + "', got '" + key + "'");
    };
    expect("width");
    is >> net.width;
    expect("layers");
    is >> net.layers;
    expect("seed");
    is >> net.seed;
    expect("input_map");
    is >> net.input_map.t_offset >> net.input_map.t_scale >> net.input_map.z_offset >> net.input_map.z_scale;
    expect("parameters");
    is >> count;
    if (!is || net.width < 1 || net.layers < 1) throw InvalidInput("checkpoint: malformed header");
    if (count != ParamLayout{net.width, net.layers}.size()) {
        throw InvalidInput("checkpoint: parameter count does not match width/layers");
    }
    net.theta.resize(count);
    for (auto& v : net.theta) {
        std::string tok;
        if (!(is >> tok)) throw InvalidInput("checkpoint: truncated parameter list");
        try {
            v = std::stod(tok);
        } catch (const std::logic_error&) {
            throw InvalidInput("checkpoint: malformed parameter '" + tok + "'");
        }
    }
    if (!net.all_finite()) throw InvalidInput("checkpoint: non-finite parameter");
    return net;
}

inline void save_checkpoint(const std::string& path, const DGMNetwork& net) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    write_checkpoint(os, net);
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

inline DGMNetwork load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    return read_checkpoint(is);
}

} // namespace cointel
