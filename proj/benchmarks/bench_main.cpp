#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hpt/data_io.hpp"
#include "hpt/losses.hpp"
#include "hpt/structure.hpp"
#include "hpt/trainer.hpp"

namespace {

void BM_Zmlce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<double> scores(n);
  for (auto& s : scores) s = u(rng);
  std::vector<int> positives;
  for (std::size_t i = 0; i < n; i += 3) positives.push_back(static_cast<int>(i));
  for (auto _ : state) {
    benchmark::DoNotOptimize(hpt::zmlce(scores, positives));
    benchmark::DoNotOptimize(hpt::zmlce_gradient(scores, positives));
  }
}
BENCHMARK(BM_Zmlce)->Arg(16)->Arg(128)->Arg(1024);

void BM_Propagate(benchmark::State& state) {
  hpt::SyntheticSpec spec;
  spec.branching = {static_cast<int>(state.range(0)), 4};
  const auto corpus = hpt::generate_synthetic(spec);
  const auto hier = hpt::LabelHierarchy::from_records(corpus.taxonomy);
  const auto graph = hpt::build_augmented_graph(hier, hpt::ConnectionScheme::kSameDepth, 0);
  std::mt19937_64 rng(2);
  const hpt::Matrix x = hpt::random_normal(static_cast<Eigen::Index>(graph.node_count()), 64, 1.0, rng);
  const std::vector<hpt::Matrix> w{hpt::random_normal(64, 64, 0.125, rng)};
  for (auto _ : state) benchmark::DoNotOptimize(hpt::propagate(graph, x, w));
}
BENCHMARK(BM_Propagate)->Arg(4)->Arg(16)->Arg(64);

struct TrainFixture {
  hpt::SyntheticCorpus corpus = hpt::generate_synthetic(hpt::SyntheticSpec{});
  hpt::LabelHierarchy hier = hpt::LabelHierarchy::from_records(corpus.taxonomy);
  hpt::RunConfig config;
  std::unique_ptr<hpt::HptModel> model =
      hpt::HptModel::create(config, hier, hpt::build_vocabulary(corpus.data, hier, config));
  std::vector<hpt::EncodedExample> batch = [this] {
    auto all = hpt::encode_examples(*model, corpus.data.train);
    all.resize(static_cast<std::size_t>(config.batch_size));
    return all;
  }();
};

void BM_ForwardScore(benchmark::State& state) {
  TrainFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.model->score(f.batch.front().ids));
}
BENCHMARK(BM_ForwardScore)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  TrainFixture f;
  hpt::Trainer trainer(*f.model, f.config);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(f.batch, ++seed));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.size()));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
