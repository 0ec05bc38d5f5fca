#include <benchmark/benchmark.h>

#include <agentsec/detector.hpp>
#include <agentsec/rng.hpp>

namespace {

using namespace agentsec;

FeatureVector random_features(rng::Engine& eng, std::size_t dim) {
    std::vector<double> values(dim);
    std::vector<std::string> names(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        values[i] = rng::symmetric(eng, 3.0);
        names[i] = "f" + std::to_string(i);
    }
    return make_features(std::move(values), std::move(names));
}

void BM_DetectorScore(benchmark::State& state) {
    const std::size_t dim = static_cast<std::size_t>(state.range(0));
    auto eng = rng::make_engine(1);
    std::vector<double> w(dim);
    for (auto& v : w) v = rng::symmetric(eng, 2.0);
    const LogisticDetector detector{WeightVector{w, 0.1}, "bench", 0.5};
    const FeatureVector features = random_features(eng, dim);
    for (auto _ : state) {
        benchmark::DoNotOptimize(score(detector, features));
    }
}
BENCHMARK(BM_DetectorScore)->Arg(5)->Arg(64)->Arg(512);

void BM_DetectorTrain(benchmark::State& state) {
    auto eng = rng::make_engine(2);
    std::vector<LabeledTrial> trials;
    for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
        trials.push_back({random_features(eng, 8), static_cast<int>(rng::bounded(eng, 2))});
    }
    trials.push_back({random_features(eng, 8), 1});
    trials.push_back({random_features(eng, 8), 0});
    TrainOptions options;
    options.epochs = 100;
    options.learning_rate = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train(trials, options));
    }
}
BENCHMARK(BM_DetectorTrain)->Arg(32)->Arg(256);

void BM_GradientCheck(benchmark::State& state) {
    auto eng = rng::make_engine(3);
    std::vector<LabeledTrial> trials;
    for (int i = 0; i < 32; ++i) {
        trials.push_back({random_features(eng, 8), static_cast<int>(rng::bounded(eng, 2))});
    }
    std::vector<double> w(8);
    for (auto& v : w) v = rng::symmetric(eng, 1.0);
    const LogisticDetector detector{WeightVector{w, 0.0}, "bench", 0.5};
    for (auto _ : state) {
        benchmark::DoNotOptimize(gradient_check(detector, trials, 1e-5));
    }
}
BENCHMARK(BM_GradientCheck);

} // namespace
