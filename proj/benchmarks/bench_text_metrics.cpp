#include <benchmark/benchmark.h>

#include <agentsec/metrics.hpp>
#include <agentsec/rng.hpp>

namespace {

using namespace agentsec;

std::vector<std::string> synthetic_corpus(std::size_t docs, std::size_t tokens_per_doc) {
    auto eng = rng::make_engine(4);
    std::vector<std::string> corpus;
    for (std::size_t d = 0; d < docs; ++d) {
        std::string doc;
        for (std::size_t t = 0; t < tokens_per_doc; ++t) {
            doc += "w" + std::to_string(rng::bounded(eng, 200)) + " ";
        }
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

void BM_DiversityMetrics(benchmark::State& state) {
    const auto corpus = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 40);
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::diversity_metrics(corpus, 2, 4));
    }
}
BENCHMARK(BM_DiversityMetrics)->Arg(8)->Arg(32)->Arg(128);

void BM_SelfBleu(benchmark::State& state) {
    const auto corpus = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 40);
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::self_bleu(corpus, 4));
    }
}
BENCHMARK(BM_SelfBleu)->Arg(8)->Arg(32);

void BM_Tokenize(benchmark::State& state) {
    const auto corpus = synthetic_corpus(1, 2000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::tokenize(corpus.front()));
    }
}
BENCHMARK(BM_Tokenize);

} // namespace
