#include <random>

#include <benchmark/benchmark.h>

#include "rxprice/causal_select.hpp"
#include "rxprice/datagen.hpp"
#include "rxprice/market_store.hpp"
#include "rxprice/policy_opt.hpp"
#include "rxprice/simplex.hpp"

namespace rxprice {
namespace {

void BM_GroupProx(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Eigen::VectorXd row(state.range(0));
  for (auto& v : row) v = normal(rng);
  const PenaltyConfig pen{PenaltyKind::kMcp, 0.5, 3.0};
  for (auto _ : state) benchmark::DoNotOptimize(GroupProx(row, 0.5, pen));
}
BENCHMARK(BM_GroupProx)->Arg(3)->Arg(7);

ActionPartitionedData SelectionData(std::size_t p, std::size_t n) {
  DatagenConfig config;
  config.covariates = p;
  config.samples = n;
  config.price_grid = {445, 510, 635};
  const auto design = EncodeForSelection(Generate(config).first);
  return Standardize(design.data);
}

void BM_FitGroupSparse(benchmark::State& state) {
  const auto data = SelectionData(static_cast<std::size_t>(state.range(0)), 400);
  const PenaltyConfig pen{PenaltyKind::kMcp,
                          DefaultLambda(data.covariates(), data.actions(), data.samples(), 0.2), 3.0};
  for (auto _ : state) benchmark::DoNotOptimize(FitGroupSparse(data, pen));
}
BENCHMARK(BM_FitGroupSparse)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

// Random set-partitioning relaxation: rows are samples plus one cardinality row.
void BM_SolveLp(benchmark::State& state) {
  const auto rows = state.range(0);
  const auto cols = 4 * rows;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LinearProgram lp;
  lp.a = Eigen::MatrixXd::Zero(rows + 1, cols + rows + 1);
  lp.b = Eigen::VectorXd::Ones(rows + 1);
  lp.b[rows] = 3.0;
  lp.c.resize(cols + rows + 1);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) lp.a(i, j) = unit(rng) < 0.3 ? 1.0 : 0.0;
    lp.a(rows, j) = 1.0;
    lp.c[j] = lp.a.col(j).head(rows).sum() * unit(rng);
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    lp.a(i, cols + i) = 1.0;  // slack
    lp.c[cols + i] = -0.5;
  }
  lp.a(rows, cols + rows) = 1.0;  // unused-cardinality slack
  lp.c[cols + rows] = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(SolveLp(lp));
}
BENCHMARK(BM_SolveLp)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_SolveColumnGeneration(benchmark::State& state) {
  DatagenConfig config;
  config.samples = 2000;
  const auto entry = BuildMarketEntry(Generate(config).first);
  const auto graph = PolicyGraph(entry);
  const auto levels = ExtractLayerLevels(graph, entry.observations);
  const auto m = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(SolveColumnGeneration(graph, levels, entry.cf, m, entry.slack_penalty));
  }
}
BENCHMARK(BM_SolveColumnGeneration)->Arg(1)->Arg(6)->Arg(18)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace rxprice

BENCHMARK_MAIN();
