#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cointel/net.hpp"

using namespace cointel;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

DGMNetwork hand_network() {
    DGMNetwork net = init_network(1, 1, 0);
    for (std::size_t i = 0; i < net.theta.size(); ++i) net.theta[i] = 0.1 * (i + 1) * (i % 2 == 0 ? 1.0 : -1.0);
    return net;
}

const InputMap kMap{0.5, 2.0, 1.0, 1.5};

} // namespace

TEST(Init, SeedDeterminesParameters) {
    const DGMNetwork a = init_network(10, 2, 5);
    const DGMNetwork b = init_network(10, 2, 5);
    const DGMNetwork c = init_network(10, 2, 6);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_NE(a.theta, c.theta);
    EXPECT_EQ(a.theta.size(), a.layout().size());
    EXPECT_EQ(a.theta[a.layout().b_out()], 0.0);
    EXPECT_THROW(init_network(0, 2, 1), InvalidInput);
}

TEST(Init, GlorotBounds) {
    const DGMNetwork net = init_network(50, 3, 1);
    const ParamLayout lay = net.layout();
    const double lim = std::sqrt(6.0 / 100.0);
    for (int i = 0; i < 50 * 50; ++i) EXPECT_LE(std::abs(net.theta[lay.gate_w(1, Gate::R) + i]), lim);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(net.theta[lay.gate_b(2, Gate::H) + i], 0.0);
}

TEST(Init, OutputsFiniteAndBounded) {
    const DGMNetwork net = init_network(20, 3, 9, kMap);
    Rng rng(3);
    Eigen::VectorXd t(1000), z(1000);
    for (int i = 0; i < 1000; ++i) {
        t(i) = rng.uniform(-5.0, 5.0);
        z(i) = rng.uniform(-5.0, 5.0);
    }
    const Eigen::RowVectorXd f = forward(net, t, z);
    // |f| <= sum |w_out| because every hidden unit lies in [-1, 1].
    double bound = 0.0;
    for (int i = 0; i < 20; ++i) bound += std::abs(net.theta[net.layout().w_out() + i]);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_TRUE(std::isfinite(f(i)));
        EXPECT_LE(std::abs(f(i)), bound);
    }
}

TEST(Forward, ConstantNetwork) {
    DGMNetwork net = init_network(5, 2, 1);
    std::fill(net.theta.begin(), net.theta.end(), 0.0);
    net.theta[net.layout().b_out()] = 0.37;
    const EvalResult e = forward_with_input_derivs(net, 0.2, 1.4);
    EXPECT_EQ(e.f, 0.37);
    EXPECT_EQ(e.f_t, 0.0);
    EXPECT_EQ(e.f_z, 0.0);
    EXPECT_EQ(e.f_zz, 0.0);
    EXPECT_EQ(forward(net, -3.0, 8.0), 0.37);
}

TEST(Forward, HandComputedComposition) {
    const DGMNetwork net = hand_network();
    EXPECT_NEAR(forward(net, 0.3, 0.7), 1.5772485134455798, 1e-15);
}

TEST(Forward, DeterministicAndConsistent) {
    const DGMNetwork net = init_network(12, 2, 4, kMap);
    Rng rng(5);
    Eigen::VectorXd t(50), z(50);
    for (int i = 0; i < 50; ++i) {
        t(i) = rng.uniform(0.0, 1.0);
        z(i) = rng.uniform(0.3, 1.7);
    }
    const Eigen::RowVectorXd a = forward(net, t, z);
    const Eigen::RowVectorXd b = forward(net, t, z);
    const EvalBatch e = forward_with_input_derivs(net, t, z);
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(a(i), b(i));
        EXPECT_EQ(a(i), e.f(i));
        // Single-point and batched evaluation may vectorize differently.
        EXPECT_NEAR(forward(net, t(i), z(i)), a(i), 1e-14);
        EXPECT_NEAR(forward_with_input_derivs(net, t(i), z(i)).f, a(i), 1e-14);
    }
}

TEST(InputDerivatives, MatchFiniteDifferences) {
    Rng rng(6);
    const double h = 1e-4;
    const std::array<std::pair<int, int>, 3> sizes{{{1, 1}, {2, 10}, {3, 50}}};
    for (int c = 0; c < 100; ++c) {
        const auto [layers, width] = sizes[c % 3];
        const DGMNetwork net = init_network(width, layers, 100 + c, kMap);
        const double t = rng.uniform(0.0, 1.0), z = rng.uniform(0.3, 1.7);
        const EvalResult e = forward_with_input_derivs(net, t, z);
        const double ft = (forward(net, t + h, z) - forward(net, t - h, z)) / (2 * h);
        const double fz = (forward(net, t, z + h) - forward(net, t, z - h)) / (2 * h);
        const double fzz = (forward_with_input_derivs(net, t, z + h).f_z - forward_with_input_derivs(net, t, z - h).f_z) /
                           (2 * h);
        EXPECT_LT(rel_err(e.f_t, ft), 1e-5) << "case " << c;
        EXPECT_LT(rel_err(e.f_z, fz), 1e-5) << "case " << c;
        EXPECT_LT(rel_err(e.f_zz, fzz), 1e-5) << "case " << c;
    }
}

TEST(InputDerivatives, StructuralZeroInTime) {
    DGMNetwork net = init_network(8, 2, 11, kMap);
    const ParamLayout lay = net.layout();
    for (int i = 0; i < 8; ++i) {
        net.theta[lay.w1() + 2 * i] = 0.0;
        for (int l = 0; l < 2; ++l)
            for (Gate g : {Gate::Z, Gate::G, Gate::R, Gate::H}) net.theta[lay.gate_u(l, g) + 2 * i] = 0.0;
    }
    EXPECT_EQ(forward_with_input_derivs(net, 0.4, 1.2).f_t, 0.0);
}

TEST(Backward, ZeroAdjointsGiveZeroGradient) {
    const DGMNetwork net = init_network(6, 2, 12, kMap);
    const ParamGradient g = backward(net, 0.3, 0.9, EvalResult{});
    for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MatchesFiniteDifferences) {
    Rng rng(13);
    const double h = 1e-6;
    const std::array<std::pair<int, int>, 3> sizes{{{1, 1}, {2, 10}, {3, 50}}};
    for (const auto& [layers, width] : sizes) {
        DGMNetwork net = init_network(width, layers, 14, kMap);
        for (double& v : net.theta) v += rng.uniform(-0.1, 0.1);
        const double t = rng.uniform(0.0, 1.0), z = rng.uniform(0.3, 1.7);
        const EvalResult adj{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto objective = [&](const DGMNetwork& n) {
            const EvalResult e = forward_with_input_derivs(n, t, z);
            return adj.f * e.f + adj.f_t * e.f_t + adj.f_z * e.f_z + adj.f_zz * e.f_zz;
        };
        const ParamGradient g = backward(net, t, z, adj);
        ASSERT_EQ(g.values.size(), net.theta.size());
        for (int k = 0; k < 50; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform() * net.theta.size()) % net.theta.size();
            DGMNetwork up = net, dn = net;
            up.theta[i] += h;
            dn.theta[i] -= h;
            const double fd = (objective(up) - objective(dn)) / (2 * h);
            EXPECT_LT(rel_err(g.values[i], fd), 1e-5) << "size " << layers << "x" << width << " coord " << i;
        }
    }
}

TEST(Backward, OutputLayerGradientIsActivation) {
    const DGMNetwork net = hand_network();
    const ParamGradient g = backward(net, 0.3, 0.7, EvalResult{1.0, 0.0, 0.0, 0.0});
    const ParamLayout lay = net.layout();
    EXPECT_NEAR(g.values[lay.w_out()], 0.26137574327721014, 1e-15);
    EXPECT_EQ(g.values[lay.b_out()], 1.0);
}

TEST(Backward, BatchEqualsSumOfPoints) {
    const DGMNetwork net = init_network(7, 2, 15, kMap);
    Eigen::VectorXd t(3), z(3);
    t << 0.1, 0.5, 0.9;
    z << 0.6, 1.0, 1.4;
    Adjoints a = Adjoints::zeros(3);
    a.f.setConstant(0.3);
    a.f_zz.setConstant(-0.7);
    const ParamGradient batch = backward(net, t, z, a);
    std::vector<double> sum(net.theta.size(), 0.0);
    for (int i = 0; i < 3; ++i) {
        const ParamGradient g = backward(net, t(i), z(i), EvalResult{0.3, 0.0, 0.0, -0.7});
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.values[k];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) EXPECT_NEAR(batch.values[k], sum[k], 1e-12);
}

TEST(SgdStep, Updates) {
    DGMNetwork net = init_network(3, 1, 16);
    const auto before = net.theta;
    ParamGradient g;
    g.values.assign(net.theta.size(), 0.0);
    EXPECT_TRUE(sgd_step(net, g, 0.1));
    EXPECT_EQ(net.theta, before);
    g.values[4] = 0.25;
    EXPECT_TRUE(sgd_step(net, g, 1.0));
    EXPECT_EQ(net.theta[4], before[4] - 0.25);
    g.values[5] = std::nan("");
    EXPECT_FALSE(sgd_step(net, g, 1.0));
    EXPECT_EQ(net.theta[4], before[4] - 0.25);
    EXPECT_THROW(sgd_step(net, g, 0.0), InvalidInput);
}

TEST(SgdStep, ConvergesOnQuadratic) {
    DGMNetwork net = init_network(4, 2, 17);
    std::vector<double> target(net.theta.size());
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = std::sin(static_cast<double>(i));
    ParamGradient g;
    g.values.resize(net.theta.size());
    for (int step = 0; step < 200; ++step) {
        // Gradient of 1/2 |theta - target|^2.
        for (std::size_t i = 0; i < target.size(); ++i) g.values[i] = net.theta[i] - target[i];
        sgd_step(net, g, 0.1);
    }
    for (std::size_t i = 0; i < target.size(); ++i) EXPECT_NEAR(net.theta[i], target[i], 1e-6);
}

TEST(Checkpoint, RoundTripIsExact) {
    DGMNetwork net = init_network(9, 2, 18, kMap);
    net.theta[3] = 1.0 / 3.0;
    std::stringstream ss;
    write_checkpoint(ss, net);
    const DGMNetwork back = read_checkpoint(ss);
    EXPECT_EQ(back.theta, net.theta);
    EXPECT_EQ(back.width, 9);
    EXPECT_EQ(back.layers, 2);
    EXPECT_EQ(back.seed, 18u);
    EXPECT_EQ(back.input_map.z_scale, kMap.z_scale);
    EXPECT_EQ(forward(back, 0.2, 0.8), forward(net, 0.2, 0.8));
}

TEST(Checkpoint, RejectsMalformedInput) {
    std::stringstream bad("something else");
    EXPECT_THROW(read_checkpoint(bad), InvalidInput);
    std::stringstream ss;
    write_checkpoint(ss, init_network(2, 1, 1));
    std::string text = ss.str();
    std::stringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(read_checkpoint(truncated), InvalidInput);
    const auto pos = text.find("parameters");
    std::stringstream garbled(text.substr(0, pos) + "parameters " + std::to_string(ParamLayout{2, 1}.size()) + "\nabc\n");
    EXPECT_THROW(read_checkpoint(garbled), InvalidInput);
    EXPECT_THROW(load_checkpoint("/nonexistent/dir/ckpt"), IoError);
}
