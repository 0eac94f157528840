// Serial reference vs OpenMP paths. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "lsdm/evaluation.hpp"
#include "lsdm/experiment.hpp"
#include "lsdm/synthetic.hpp"
#include "lsdm/training.hpp"

namespace {

using namespace lsdm;

struct Fixture {
  Split split;
  TrainConfig config;
  TrainState state;
  std::vector<UserExample> batch;

  Fixture() {
    SyntheticSpec spec;
    spec.num_users = 64;
    spec.num_items = 50;
    spec.horizon_days = 60;
    for (ItemId i = 1; i <= 6; ++i) {
      spec.periodic_rules.push_back({i, 7, 1});
      spec.copurchase_rules.push_back({i, 10 + i, 1, 0.9});
    }
    spec.noise_rate = 0.3;
    spec.rules_per_user = 2;
    spec.random_phase = true;
    split = split_leave_last(generate_synthetic(spec).log);
    config.dim = 16;
    state = init_training(split, config);
    batch = training_examples(split.train, state.model.builder());
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_BatchGradients(benchmark::State& st) {
  const Fixture& f = fixture();
  const auto policy = st.range(0) ? ExecutionPolicy::Parallel : ExecutionPolicy::Serial;
  for (auto _ : st) {
    BatchGradients g = batch_gradients(f.state.model.params, f.batch, f.config.loss_weights,
                                       f.config.per_scale_loss_weight, policy);
    benchmark::DoNotOptimize(g.loss.total);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.batch.size()));
  st.SetLabel(st.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_BatchGradients)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& st) {
  const Fixture& f = fixture();
  const Scorer scorer = model_scorer(f.state.model);
  EvalOptions options;
  options.parallel = st.range(0) != 0;
  for (auto _ : st) {
    MetricReport r = evaluate(scorer, f.split, options);
    benchmark::DoNotOptimize(r.metrics.front().mean);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.split.train.num_users()));
  st.SetLabel(st.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_Evaluate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
