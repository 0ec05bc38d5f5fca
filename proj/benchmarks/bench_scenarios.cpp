#include <benchmark/benchmark.h>

#include <filesystem>

#include <agentsec/alignment.hpp>
#include <agentsec/io.hpp>
#include <agentsec/msj.hpp>
#include <agentsec/rogue.hpp>

namespace {

using namespace agentsec;

const std::filesystem::path kFixtures = AGENTSEC_FIXTURE_DIR;

void BM_ReverseTuringTrial(benchmark::State& state) {
    const auto path = kFixtures / "rogue" / "one_rogue.json";
    const auto config = rogue::rogue_config_from_json(read_json_file(path), path.parent_path());
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rogue::run_reverse_turing_trial(config, seed++));
    }
}
BENCHMARK(BM_ReverseTuringTrial);

void BM_AlignmentTrial(benchmark::State& state) {
    const auto path = kFixtures / "alignment" / "overt_faking.json";
    const auto config = alignment::alignment_config_from_json(read_json_file(path), path.parent_path());
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(alignment::run_alignment_trial(config, seed++));
    }
}
BENCHMARK(BM_AlignmentTrial);

void BM_MsjTrial(benchmark::State& state) {
    const auto path = kFixtures / "msj" / "msj_scripted.json";
    auto config = msj::msj_config_from_json(read_json_file(path), path.parent_path());
    config.num_shots = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(msj::run_msj_trial(config, seed++));
    }
}
BENCHMARK(BM_MsjTrial)->Arg(0)->Arg(10)->Arg(40);

void BM_MsjPromptGeneration(benchmark::State& state) {
    const auto path = kFixtures / "msj" / "msj_scripted.json";
    const auto config = msj::msj_config_from_json(read_json_file(path), path.parent_path());
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(msj::generate_msj_prompts(static_cast<int>(state.range(0)),
                                                           config.templates, config.target_query,
                                                           seed++));
    }
}
BENCHMARK(BM_MsjPromptGeneration)->Arg(10)->Arg(100);

} // namespace
