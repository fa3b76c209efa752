#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cointel/experiment.hpp"

using namespace cointel;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.horizon_days = 60;
    c.n_paths = 4;
    c.seed = 5;
    c.dgm.width = 4;
    c.dgm.layers = 1;
    c.dgm.train.max_steps = 20;
    c.dgm.train.batch_interior = 16;
    c.dgm.train.batch_terminal = 8;
    c.dgm.domain_paths = 20;
    c.histogram_bins = 5;
    return c;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST(Experiment, SinglePath) {
    ExperimentConfig c = tiny_config();
    c.n_paths = 1;
    const ExperimentSummary s = run_experiment(c);
    for (const auto& st : s.stats) EXPECT_EQ(st.std_error, 0.0);
    EXPECT_EQ(s.returns.at("ML").size(), 1u);
}

TEST(Experiment, Deterministic) {
    const ExperimentConfig c = tiny_config();
    const ExperimentSummary a = run_experiment(c);
    const ExperimentSummary b = run_experiment(c);
    EXPECT_EQ(a.returns, b.returns);
    EXPECT_EQ(a.ranking, b.ranking);
}

TEST(Experiment, EmptyRoster) {
    ExperimentConfig c = tiny_config();
    c.roster.clear();
    const ExperimentSummary s = run_experiment(c);
    EXPECT_TRUE(s.stats.empty());
    EXPECT_TRUE(s.win_rates.empty());
    EXPECT_TRUE(s.ranking.empty());
    EXPECT_FALSE(s.dgm_net);
}

TEST(Experiment, SummaryAgreesWithReturns) {
    const ExperimentConfig c = tiny_config();
    const ExperimentSummary s = run_experiment(c);
    for (const auto& st : s.stats) {
        const auto& r = s.returns.at(st.label);
        double sum = 0.0;
        for (double v : r) sum += v;
        EXPECT_NEAR(st.mean, sum / static_cast<double>(r.size()), 1e-12);
    }
    for (const auto& h : s.histograms) {
        long total = 0;
        for (long n : h.counts) total += n;
        EXPECT_EQ(total, c.n_paths);
        EXPECT_EQ(h.edges.size(), h.counts.size() + 1);
    }
    for (const auto& w : s.win_rates) {
        const auto& ra = s.returns.at(w.a);
        const auto& rb = s.returns.at(w.b);
        long wins = 0;
        for (std::size_t i = 0; i < ra.size(); ++i) wins += ra[i] > rb[i];
        EXPECT_EQ(w.rate, static_cast<double>(wins) / static_cast<double>(ra.size()));
    }
    EXPECT_NE(s.ranking.find("FM"), std::string::npos);
}

TEST(Experiment, PathResultsIndependentOfPathCount) {
    ExperimentConfig c = tiny_config();
    c.roster = {"MVC", "ML"};
    const ExperimentSummary a = run_experiment(c);
    c.n_paths = 2;
    const ExperimentSummary b = run_experiment(c);
    EXPECT_EQ(a.returns.at("ML")[1], b.returns.at("ML")[1]);
    EXPECT_EQ(a.returns.at("MVC")[0], b.returns.at("MVC")[0]);
}

TEST(Experiment, RejectsInvalidConfig) {
    ExperimentConfig c = tiny_config();
    c.roster = {"XYZ"};
    EXPECT_THROW(run_experiment(c), InvalidInput);
    c = tiny_config();
    c.illustrative_path = 4;
    EXPECT_THROW(run_experiment(c), InvalidInput);
    c = tiny_config();
    c.dgm.checkpoint_in = "/nonexistent/net.ckpt";
    EXPECT_THROW(run_experiment(c), IoError);
}

TEST(Experiment, CheckpointReuseMatchesTraining) {
    ExperimentConfig c = tiny_config();
    c.roster = {"SC"};
    const ExperimentSummary trained = run_experiment(c);
    const auto dir = std::filesystem::temp_directory_path() / "cointel_test_experiment";
    std::filesystem::create_directories(dir);
    const auto ckpt = (dir / "net.ckpt").string();
    save_checkpoint(ckpt, *trained.dgm_net);
    c.dgm.checkpoint_in = ckpt;
    const ExperimentSummary loaded = run_experiment(c);
    EXPECT_EQ(trained.returns, loaded.returns);
    c.horizon_days = 80;
    EXPECT_THROW(run_experiment(c), InvalidInput);
}

TEST(Histogram, BinsAndDegenerateRange) {
    const Histogram h = make_histogram("h", {0.0, 0.25, 0.5, 1.0}, 4);
    EXPECT_EQ(h.counts, (std::vector<long>{1, 1, 1, 1}));
    EXPECT_EQ(h.edges.front(), 0.0);
    EXPECT_EQ(h.edges.back(), 1.0);
    const Histogram flat = make_histogram("f", {2.0, 2.0}, 3);
    EXPECT_EQ(flat.counts, (std::vector<long>{0, 2, 0}));
    const Histogram none = make_histogram("n", {}, 2);
    EXPECT_EQ(none.counts, (std::vector<long>{0, 0}));
}

TEST(Outputs, EveryFileNamesColumnsAndSeed) {
    const ExperimentSummary s = run_experiment(tiny_config());
    const auto dir = std::filesystem::temp_directory_path() / "cointel_test_outputs";
    std::filesystem::remove_all(dir);
    const auto files = emit_outputs(s, dir.string());
    EXPECT_GE(files.size(), 12u);
    for (const auto& f : files) {
        const std::string text = read_file(f);
        EXPECT_EQ(text.rfind("# columns: ", 0), 0u) << f;
        const std::string first = text.substr(0, text.find('\n'));
        EXPECT_NE(first.find(" seed: 5"), std::string::npos) << f;
    }
    const std::string summary = read_file(dir / "summary.csv");
    EXPECT_EQ(summary.rfind("# columns: criterion,average_return,std_error,n_paths seed: 5\nMVC,", 0), 0u);
    const std::string win = read_file(dir / "win_rates.csv");
    EXPECT_NE(win.find("FM,SC,"), std::string::npos);
}
