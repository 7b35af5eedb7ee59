#include <gtest/gtest.h>

#include <filesystem>

#include "gasflow/generators.hpp"
#include "gasflow/monte_carlo.hpp"
#include "gasflow/network_io.hpp"
#include "test_util.hpp"

using namespace gasflow;
using namespace gasflow::testing;

namespace {

Instance small_cactus() {
  Rng rng(4);
  GeneratorOptions o;
  o.compressor_prob = 0.5;
  return random_cactus(rng, 2, 3, 4, o);
}

McConfig config(const Instance& in, std::size_t n, double sigma) {
  McConfig cfg;
  cfg.q0 = in.q;
  cfg.n_samples = n;
  cfg.sigma = sigma;
  cfg.balancing = in.net.num_nodes() - 1;
  cfg.record_timing = false;
  return cfg;
}

std::size_t count_lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Perturb, ZeroSigmaKeepsBase) {
  Injections q0 = inj({1.0, 2.0, -1.0, 5.0});
  Rng rng(1);
  Injections q = perturb_injections(q0, 0.0, 2, rng);
  EXPECT_EQ(q.q[0], 1.0);
  EXPECT_EQ(q.q[1], 2.0);
  EXPECT_EQ(q.q[3], 5.0);
  EXPECT_EQ(q.q[2], -8.0);
}

TEST(Perturb, Balanced) {
  Injections q0 = inj({1.0, 2.0, -3.0, 0.0, 0.0});
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = Rng::stream(5, s);
    Injections q = perturb_injections(q0, 2.0, 4, rng);
    EXPECT_LE(std::abs(q.imbalance()), tol::kBalance);
    EXPECT_NE(q.q[0], 1.0);
  }
  Rng rng(1);
  EXPECT_THROW(perturb_injections(q0, 1.0, 9, rng), GasFlowError);
  EXPECT_THROW(perturb_injections(q0, -1.0, 0, rng), GasFlowError);
}

TEST(Rng, PortableStream) {
  // Fixed by the engine definition and our own transforms.
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
  // 10000th draw of a default-seeded mt19937_64, as the standard requires.
  Rng c(5489);
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = c.bits();
  EXPECT_EQ(last, 9981545732273789042ULL);
  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    EXPECT_LT(u.index(7), 7u);
  }
  EXPECT_NE(Rng::stream(1, 0).bits(), Rng::stream(1, 1).bits());
}

TEST(MonteCarlo, SeedPinnedAndRepeatable) {
  Instance in = small_cactus();
  McConfig cfg = config(in, 3, 1.0);
  cfg.seed = 42;
  const std::string a = report_csv(run_monte_carlo(in.net, cfg));
  const std::string b = report_csv(run_monte_carlo(in.net, cfg));
  EXPECT_EQ(a, b);
  EXPECT_EQ(count_lines(a), 4u);
  EXPECT_EQ(a.substr(0, a.find('\n')), "sample_id,status,gap,objective,runtime_ms");
}

TEST(MonteCarlo, ParallelEqualsSerial) {
  Instance in = small_cactus();
  McConfig cfg = config(in, 24, 0.8);
  cfg.jobs = 4;
  McReport par = run_monte_carlo(in.net, cfg);
  McReport ser = run_monte_carlo_serial(in.net, cfg);
  EXPECT_EQ(par, ser);
  EXPECT_EQ(report_csv(par), report_csv(ser));
  const McAggregates& g = par.aggregates;
  EXPECT_EQ(g.solved + g.inexact + g.infeasible + g.timeout, g.samples);
  EXPECT_EQ(g.samples, 24u);
  EXPECT_TRUE(std::is_sorted(par.ranked_gap.begin(), par.ranked_gap.end()));
  EXPECT_EQ(par.ranked_gap.size(), g.feasible);
  EXPECT_EQ(par.runtime_ms.size(), 24u);
}

TEST(MonteCarlo, SingleZeroNoiseSampleMatchesSolve) {
  Instance in = small_cactus();
  McConfig cfg = config(in, 1, 0.0);
  McReport rep = run_monte_carlo(in.net, cfg);
  SolveResult r = solve_gf(in.net, in.q);
  ASSERT_EQ(rep.records.size(), 1u);
  EXPECT_EQ(rep.records[0].status, r.status);
  EXPECT_EQ(rep.records[0].objective, r.objective);
  EXPECT_EQ(rep.records[0].gap, r.gap);
}

TEST(MonteCarlo, InfeasibleSamplesCarryCertificates) {
  // low reference pressure: most draws infeasible
  GasNetwork net = triangle(1.0, 1.5);
  McConfig cfg;
  cfg.q0 = inj({2.0, -1.0, -1.0});
  cfg.n_samples = 12;
  cfg.sigma = 1.0;
  cfg.balancing = 2;
  cfg.record_timing = false;
  McReport rep = run_monte_carlo(net, cfg);
  EXPECT_GT(rep.aggregates.infeasible, 0u);
  for (const SampleRecord& r : rep.records) {
    if (r.status != SolveStatus::Infeasible) continue;
    EXPECT_FALSE(r.certificate.empty());
    EXPECT_GE(r.certificate_nodes, 1u);
    EXPECT_LE(r.certificate_residual, 1e-6);
  }
}

TEST(Report, EmptyFeasibleSetHasNullAggregates) {
  std::vector<SampleRecord> recs(2);
  recs[0].id = 0;
  recs[1].id = 1;
  McAggregates a = aggregate(recs);
  EXPECT_EQ(a.infeasible, 2u);
  EXPECT_FALSE(a.gap.has_value());
  EXPECT_FALSE(a.frac_below_1e4.has_value());
  EXPECT_FALSE(a.mean_runtime_ms.has_value());

  McReport rep;
  rep.records = recs;
  rep.aggregates = a;
  rep.runtime_ms = {0.0, 0.0};
  EXPECT_EQ(count_lines(report_csv(rep)), 3u);
  McReport back = report_from_json(report_json(rep));
  EXPECT_EQ(back, rep);
}

TEST(Report, QuantilesAndFractions) {
  std::vector<SampleRecord> recs;
  const double gaps[] = {1e-6, 5e-4, 2e-3, 0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    SampleRecord r;
    r.id = i;
    r.status = SolveStatus::Solved;
    r.gap = gaps[i];
    r.objective = 1.0;
    r.runtime_ms = double(i + 1);
    recs.push_back(r);
  }
  McAggregates a = aggregate(recs);
  ASSERT_TRUE(a.gap.has_value());
  EXPECT_EQ(a.gap->min, 0.0);
  EXPECT_EQ(a.gap->max, 2e-3);
  EXPECT_DOUBLE_EQ(*a.frac_below_1e4, 0.5);
  EXPECT_DOUBLE_EQ(*a.frac_below_1e3, 0.75);
  EXPECT_DOUBLE_EQ(*a.mean_runtime_ms, 2.5);
  EXPECT_DOUBLE_EQ(*a.median_runtime_ms, 2.5);
}

TEST(Report, JsonRoundTripAndFiles) {
  Instance in = small_cactus();
  McConfig cfg = config(in, 6, 1.0);
  cfg.record_timing = true;
  McReport rep = run_monte_carlo(in.net, cfg);
  EXPECT_EQ(report_from_json(report_json(rep)), rep);

  const auto dir = std::filesystem::temp_directory_path() / "gasflow_mc_test";
  std::filesystem::create_directories(dir);
  emit_report(rep, ReportFormat::Csv, dir / "r.csv");
  emit_report(rep, ReportFormat::Json, dir / "r.json");
  EXPECT_EQ(read_text_file(dir / "r.csv"), report_csv(rep));
  EXPECT_EQ(report_from_json(read_text_file(dir / "r.json")), rep);
  EXPECT_THROW(emit_report(rep, ReportFormat::Csv, dir / "missing" / "r.csv"), GasFlowError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(report_from_json("{"), GasFlowError);
  EXPECT_THROW(report_from_json("{}"), GasFlowError);
}
