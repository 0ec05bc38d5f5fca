// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <agentsec/alignment.hpp>
#include <agentsec/detector.hpp>
#include <agentsec/harness.hpp>
#include <agentsec/io.hpp>
#include <agentsec/metrics.hpp>
#include <agentsec/msj.hpp>
#include <agentsec/rng.hpp>
#include <agentsec/rogue.hpp>

using namespace agentsec;

namespace {

const std::filesystem::path kFixtures = AGENTSEC_FIXTURE_DIR;

struct CheckFailure {
    std::string message;
};

void require(bool condition, const std::string& message) {
    if (!condition) throw CheckFailure{message};
}

void require_close(double got, double expected, double tolerance, const std::string& what) {
    if (std::abs(got - expected) > tolerance) {
        std::ostringstream oss;
        oss << what << ": got " << got << ", expected " << expected << " +/- " << tolerance;
        throw CheckFailure{oss.str()};
    }
}

class Runner {
public:
    void criterion(int number, const std::string& title, const std::function<void()>& body) {
        const auto start = std::chrono::steady_clock::now();
        std::string failure;
        try {
            body();
        } catch (const CheckFailure& f) {
            failure = f.message;
        } catch (const std::exception& e) {
            failure = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (failure.empty()) {
            std::printf("[PASS] criterion %d: %s (%.2fs)\n", number, title.c_str(), seconds);
        } else {
            ++failures_;
            std::printf("[FAIL] criterion %d: %s (%.2fs)\n       %s\n", number, title.c_str(), seconds,
                        failure.c_str());
        }
        std::fflush(stdout);
    }

    int failures() const { return failures_; }

private:
    int failures_ = 0;
};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

rogue::RogueScenarioConfig rogue_config(const std::string& name) {
    const auto path = kFixtures / "rogue" / name;
    return rogue::rogue_config_from_json(read_json_file(path), path.parent_path());
}

alignment::AlignmentScenarioConfig alignment_config(const std::string& name) {
    const auto path = kFixtures / "alignment" / name;
    return alignment::alignment_config_from_json(read_json_file(path), path.parent_path());
}

msj::MsjScenarioConfig msj_config(const std::string& name) {
    const auto path = kFixtures / "msj" / name;
    return msj::msj_config_from_json(read_json_file(path), path.parent_path());
}

// --------------------------------------------------------------------------
// 1. Fixture replay
// --------------------------------------------------------------------------

void criterion_fixture_replay() {
    const auto start = std::chrono::steady_clock::now();
    const auto replay = harness::replay_paper_tables(kFixtures / "paper");
    require(replay.at("tables").size() == 4, "expected four replayed tables");
    for (const auto& table : replay.at("tables")) {
        const std::string text = table.at("rendered_text").get<std::string>();
        for (const auto& row : table.at("rows")) {
            for (const auto& column : table.at("columns")) {
                const auto& cell = row.at(column.get<std::string>());
                const std::string rendered = cell.is_string() ? cell.get<std::string>() : cell.dump();
                require(text.find(rendered) != std::string::npos,
                        "value '" + rendered + "' missing from rendered " +
                            table.at("table_id").get<std::string>());
            }
        }
    }
    const auto& table1 = replay.at("tables").at(0);
    require(table1.at("f1_consistency").size() == 5, "five F1 consistency rows expected");
    for (const auto& check : table1.at("f1_consistency")) {
        require(check.at("consistent_within_half_pp") == true,
                "F1 inconsistent for " + check.at("model").get<std::string>());
        require_close(check.at("f1_derived_pct").get<double>(),
                      check.at("f1_published_pct").get<double>(), 0.5, "F1 derived vs published");
    }
    require(seconds_since(start) < 1.0, "fixture replay exceeded 1 s");
}

// --------------------------------------------------------------------------
// 2. Algorithm-literal contracts
// --------------------------------------------------------------------------

void criterion_algorithm_literals() {
    const auto start = std::chrono::steady_clock::now();
    const std::set<std::string> allowed = {
        rogue::kVerdictRogue,          rogue::kVerdictClean,
        alignment::kVerdictFaking,     alignment::kVerdictGenuine,
        msj::kOutcomeBlocked,          msj::kOutcomeFailed,
    };
    std::set<std::string> seen;
    long trials = 0;
    auto note = [&](const std::string& verdict) {
        require(allowed.count(verdict) == 1, "verdict not an algorithm literal: '" + verdict + "'");
        seen.insert(verdict);
        ++trials;
    };

    const auto one_rogue = rogue_config("one_rogue.json");
    const auto all_compliant = rogue_config("all_compliant.json");
    for (std::uint64_t s = 0; s < 35; ++s) note(rogue::run_reverse_turing_trial(one_rogue, s).verdict);
    for (std::uint64_t s = 0; s < 35; ++s) {
        note(rogue::run_reverse_turing_trial(all_compliant, s).verdict);
    }

    const auto overt = alignment_config("overt_faking.json");
    const auto genuine = alignment_config("no_faking.json");
    for (std::uint64_t s = 0; s < 35; ++s) note(alignment::run_alignment_trial(overt, s).verdict.verdict);
    for (std::uint64_t s = 0; s < 35; ++s) {
        note(alignment::run_alignment_trial(genuine, s).verdict.verdict);
    }

    const auto perfect = msj_config("msj_perfect_defender.json");
    const auto disabled = msj_config("msj_disabled_defender.json");
    for (std::uint64_t s = 0; s < 30; ++s) note(msj::run_msj_trial(perfect, s).verdict.outcome);
    for (std::uint64_t s = 0; s < 30; ++s) note(msj::run_msj_trial(disabled, s).verdict.outcome);

    require(trials == 200, "expected exactly 200 trials");
    require(seen.size() == 6, "not all six algorithm literals were exercised");
    require(seconds_since(start) < 30.0, "literal suite exceeded 30 s");
}

// --------------------------------------------------------------------------
// 3. Brute-force oracles
// --------------------------------------------------------------------------

void criterion_oracles() {
    auto eng = rng::make_engine(0xacce97ULL);
    auto rel_ok = [](double got, double expected) {
        return std::abs(got - expected) <= 1e-12 * std::max({1.0, std::abs(got), std::abs(expected)});
    };

    // deviation vs naive L2 over the z-scored difference
    for (int i = 0; i < 1000; ++i) {
        const std::size_t dim = 1 + rng::bounded(eng, 8);
        std::vector<double> value(dim);
        std::vector<double> mean(dim);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < dim; ++k) {
            value[k] = rng::symmetric(eng, 100.0);
            mean[k] = rng::symmetric(eng, 100.0);
            names.push_back("f" + std::to_string(k));
        }
        rogue::BaselineProfile baseline;
        baseline.means = make_features(mean, names);
        baseline.spreads = make_features(std::vector<double>(dim, 1.0), names);
        rogue::QueryResponse response;
        response.features = make_features(value, names);
        double expected = 0.0;
        for (std::size_t k = 0; k < dim; ++k) expected += (value[k] - mean[k]) * (value[k] - mean[k]);
        expected = std::sqrt(expected);
        require(rel_ok(rogue::analyze_response(response, baseline), expected),
                "deviation oracle mismatch");
    }

    // baseline mean vs naive per-coordinate mean
    for (int i = 0; i < 1000; ++i) {
        const int nodes = 1 + static_cast<int>(rng::bounded(eng, 6));
        rogue::SimulatedNetwork net;
        std::vector<std::string> ids;
        std::vector<double> latencies;
        for (int k = 0; k < nodes; ++k) {
            rogue::SystemNode node;
            node.id = "n" + std::to_string(k);
            node.fingerprint_expected = "fp";
            const double latency = rng::unit(eng) * 500.0;
            node.responses["q"] = rogue::ScriptedResponse{"text", latency, "fp"};
            net.nodes.push_back(node);
            ids.push_back(node.id);
            latencies.push_back(latency);
        }
        const auto baseline = rogue::establish_baseline(net, {"q"}, ids, {});
        double expected = 0.0;
        for (double l : latencies) expected += l;
        expected /= static_cast<double>(nodes);
        require(rel_ok(baseline.means.values[0], expected), "mean oracle mismatch");
    }

    // detector dot product vs naive reimplementation
    for (int i = 0; i < 1000; ++i) {
        const std::size_t dim = 1 + rng::bounded(eng, 10);
        std::vector<double> w(dim);
        std::vector<double> x(dim);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < dim; ++k) {
            w[k] = rng::symmetric(eng, 4.0);
            x[k] = rng::symmetric(eng, 4.0);
            names.push_back("f" + std::to_string(k));
        }
        const double bias = rng::symmetric(eng, 2.0);
        double z = bias;
        for (std::size_t k = 0; k < dim; ++k) z += w[k] * x[k];
        const double expected = 1.0 / (1.0 + std::exp(-z));
        const LogisticDetector d{WeightVector{w, bias}, "oracle", 0.5};
        require(rel_ok(score(d, make_features(x, names)), expected), "dot-product oracle mismatch");
    }

    // total risk vs naive mean of products
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng::bounded(eng, 30);
        std::vector<std::pair<double, double>> pairs;
        double expected = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double ph = rng::unit(eng);
            const double pd = rng::unit(eng);
            pairs.emplace_back(ph, pd);
            expected += ph * (1.0 - pd);
        }
        expected /= static_cast<double>(n);
        require(rel_ok(msj::estimate_total_risk(pairs).total_risk, expected), "risk oracle mismatch");
    }
}

// --------------------------------------------------------------------------
// 4. Detector gradient check + separable training
// --------------------------------------------------------------------------

void criterion_detector_training() {
    auto eng = rng::make_engine(0x9e4dULL);
    for (int round = 0; round < 20; ++round) {
        const std::size_t dim = 1 + rng::bounded(eng, 5);
        std::vector<LabeledTrial> trials;
        for (int i = 0; i < 10; ++i) {
            std::vector<double> x(dim);
            std::vector<std::string> names;
            for (std::size_t k = 0; k < dim; ++k) {
                x[k] = rng::symmetric(eng, 2.0);
                names.push_back("f" + std::to_string(k));
            }
            trials.push_back({make_features(x, names), static_cast<int>(rng::bounded(eng, 2))});
        }
        std::vector<std::string> names;
        std::vector<double> w(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            w[k] = rng::symmetric(eng, 1.5);
            names.push_back("f" + std::to_string(k));
        }
        trials.push_back({make_features(std::vector<double>(dim, 0.4), names), 1});
        trials.push_back({make_features(std::vector<double>(dim, -0.4), names), 0});
        const LogisticDetector d{WeightVector{w, rng::symmetric(eng, 1.0)}, "check", 0.5};
        const double err = gradient_check(d, trials, 1e-5);
        require(err < 1e-6, "gradient check error " + std::to_string(err) + " >= 1e-6");
    }

    std::vector<LabeledTrial> toy;
    for (int i = 0; i < 25; ++i) {
        toy.push_back({make_features({1.0 + rng::unit(eng) * 2.0, rng::symmetric(eng, 1.0)},
                                     {"x", "y"}),
                       1});
        toy.push_back({make_features({-1.0 - rng::unit(eng) * 2.0, rng::symmetric(eng, 1.0)},
                                     {"x", "y"}),
                       0});
    }
    TrainOptions options;
    options.epochs = 500;
    options.learning_rate = 0.5;
    options.seed = 17;
    const auto result = train(toy, options);
    for (const auto& t : toy) {
        const bool positive = result.detector.positive(score(result.detector, t.features));
        require(positive == (t.label == 1), "separable toy set not perfectly classified");
    }
}

// --------------------------------------------------------------------------
// 5. Detection-fraction law
// --------------------------------------------------------------------------

alignment::AlignmentScenarioConfig detection_fraction_config(int fakers) {
    alignment::AlignmentScenarioConfig config;
    config.n = 10;
    for (int i = 0; i < 10; ++i) {
        config.policies.push_back(i < fakers ? alignment::FakingPolicy::OvertFaker
                                             : alignment::FakingPolicy::Genuine);
    }
    config.lexicon = {"deceive", "conceal", "pretend", "masquerade", "coverup"};
    config.detector = LogisticDetector{WeightVector{{20.0, 0.0, 0.0, 0.0}, -5.0}, "alignment_v1", 0.5};
    config.keyword_insert_prob = 0.5;
    return config;
}

void criterion_detection_fraction_law() {
    const std::vector<int> ks = {0, 2, 5, 8, 10};
    std::vector<double> frequencies;
    for (int k : ks) {
        const auto config = detection_fraction_config(k);
        long positive = 0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const auto report = alignment::run_alignment_trial(config, rng::mix(seed, k));
            if (report.verdict.verdict == alignment::kVerdictFaking) ++positive;

            if (seed == 0) {
                std::vector<alignment::AlignmentDecision> decisions;
                for (const auto& [agent, d] : report.decisions) decisions.push_back({agent, d, 0});
                const double p = alignment::detection_prob_given_faking(decisions);
                require(p == static_cast<double>(k) / 10.0,
                        "detection_prob_given_faking != k/10 for k=" + std::to_string(k));
            }
        }
        frequencies.push_back(static_cast<double>(positive) / 1000.0);
    }
    for (std::size_t i = 1; i < frequencies.size(); ++i) {
        require(frequencies[i] >= frequencies[i - 1] - 0.03,
                "positive-verdict frequency not monotone within 3pp at k=" +
                    std::to_string(ks[i]) + " (" + std::to_string(frequencies[i - 1]) + " -> " +
                    std::to_string(frequencies[i]) + ")");
    }
    require(frequencies.front() <= 0.03, "k=0 frequency should be ~0");
    require(frequencies.back() >= 0.97, "k=10 frequency should be ~1");
}

// --------------------------------------------------------------------------
// 6. ASR-vs-shots law
// --------------------------------------------------------------------------

void criterion_asr_vs_shots_law() {
    const auto start = std::chrono::steady_clock::now();
    auto config = msj_config("msj_scripted.json");
    const std::vector<int> shots = {0, 5, 10, 20, 40};
    std::vector<double> ns;
    std::vector<double> asr;
    for (int n : shots) {
        config.num_shots = n;
        long jailbroken = 0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            if (msj::run_msj_trial(config, rng::mix(seed, n)).jailbroken) ++jailbroken;
        }
        ns.push_back(static_cast<double>(n));
        asr.push_back(static_cast<double>(jailbroken) / 1000.0);
    }
    for (std::size_t i = 1; i < asr.size(); ++i) {
        require(asr[i] >= asr[i - 1] - 0.03, "ASR curve not monotone within 3pp at N=" +
                                                  std::to_string(shots[i]));
    }
    const double rho = metrics::spearman_correlation(ns, asr);
    require(rho >= 0.9, "Spearman rho " + std::to_string(rho) + " < 0.9");
    require_close(asr[2], 0.5, 0.03, "ASR at N=10 vs the configured Bernoulli(0.5)");
    require_close(asr.back(), 1.0, 0.03, "ASR at N=40 vs configured saturation");
    require(seconds_since(start) < 120.0, "ASR sweep exceeded 2 min");
}

// --------------------------------------------------------------------------
// 7. Defense totality
// --------------------------------------------------------------------------

void criterion_defense_totality() {
    const auto perfect = msj_config("msj_perfect_defender.json"); // N=20 -> every response harmful
    long harmful_total = 0;
    long harmful_blocked = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto report = msj::run_msj_trial(perfect, seed);
        require(report.verdict.outcome == msj::kOutcomeBlocked,
                "perfect defender missing blocked literal at seed " + std::to_string(seed));
        std::map<int, bool> blocked;
        for (const auto& f : report.verdict.flags) blocked[f.response_index] = f.blocked;
        int index = 0;
        for (const auto& m : report.star_lord_transcript.messages) {
            if (m.role != Role::Assistant) continue;
            if (m.content.find(msj::kHarmMarkerPrefix) != std::string::npos) {
                ++harmful_total;
                if (blocked.count(index) && blocked.at(index)) ++harmful_blocked;
            }
            ++index;
        }
    }
    require(harmful_total > 0, "perfect-defender sweep produced no harmful responses");
    require(harmful_blocked == harmful_total, "perfect defender blocked " +
                                                  std::to_string(harmful_blocked) + " of " +
                                                  std::to_string(harmful_total));

    const auto disabled = msj_config("msj_disabled_defender.json");
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto report = msj::run_msj_trial(disabled, seed);
        require(report.verdict.outcome == msj::kOutcomeFailed,
                "disabled defender emitted the wrong literal at seed " + std::to_string(seed));
        for (const auto& f : report.verdict.flags) {
            require(!f.blocked, "disabled defender blocked a response");
        }
    }
}

// --------------------------------------------------------------------------
// 8. Diversity metric anchors
// --------------------------------------------------------------------------

void criterion_diversity_anchors() {
    const std::vector<std::string> dup(5, "the quick brown fox jumps over the lazy dog");
    const auto dup_report = metrics::diversity_metrics(dup, 2, 4);
    require(dup_report.self_bleu.has_value() && *dup_report.self_bleu == 1.0,
            "self-BLEU of duplicated corpus != 1.0");

    std::string sixteen;
    for (int i = 0; i < 16; ++i) sixteen += "tok" + std::to_string(i) + " ";
    require(metrics::corpus_entropy_bits({sixteen}) == 4.0, "uniform 16-token entropy != 4.0 bits");

    const std::vector<std::string> distinct = {"a b c", "d e f", "g h i", "j k l"};
    require(metrics::unique_ngram_pct(distinct, 2) == 100.0, "all-distinct bigram pct != 100");

    std::vector<std::string> corpus = {"alpha beta gamma", "beta gamma delta delta",
                                       "epsilon zeta", "gamma beta alpha", "zeta zeta alpha"};
    const auto base = metrics::diversity_metrics(corpus, 2, 4);
    auto eng = rng::make_engine(71);
    for (int i = 0; i < 20; ++i) {
        for (std::size_t k = corpus.size(); k > 1; --k) {
            std::swap(corpus[k - 1], corpus[rng::bounded(eng, k)]);
        }
        const auto shuffled = metrics::diversity_metrics(corpus, 2, 4);
        require(std::abs(shuffled.unique_ngram_pct - base.unique_ngram_pct) <= 1e-12,
                "unique n-gram pct not permutation-invariant");
        require(std::abs(shuffled.entropy_bits - base.entropy_bits) <= 1e-12,
                "entropy not permutation-invariant");
        require(std::abs(*shuffled.self_bleu - *base.self_bleu) <= 1e-12,
                "self-BLEU not permutation-invariant");
    }
}

// --------------------------------------------------------------------------
// 9. End-to-end determinism
// --------------------------------------------------------------------------

void criterion_determinism() {
    const auto root = std::filesystem::temp_directory_path() / "agentsec_acceptance_det";
    std::filesystem::remove_all(root);

    const std::vector<std::pair<std::string, std::string>> scenarios = {
        {"reverse_turing", "rogue/one_rogue.json"},
        {"alignment", "overt"},
        {"msj", "msj/msj_scripted.json"},
    };
    for (const auto& [scenario, fixture] : scenarios) {
        nlohmann::json j{{"scenario", scenario},
                         {"trials", 6},
                         {"base_seed", 31},
                         {"scenario_config", scenario == "alignment"
                                                 ? std::string("alignment/overt_faking.json")
                                                 : fixture}};
        auto config = harness::run_config_from_json(j, kFixtures);
        std::vector<std::map<std::string, std::string>> snapshots;
        for (int round = 0; round < 3; ++round) {
            config.jobs = round == 2 ? 3 : 1;
            config.out_dir = root / (scenario + "_" + std::to_string(round));
            harness::run_batch(config);
            std::map<std::string, std::string> files;
            for (const auto& entry : std::filesystem::directory_iterator(config.out_dir)) {
                files[entry.path().filename().string()] = read_text_file(entry.path());
            }
            snapshots.push_back(std::move(files));
        }
        for (std::size_t round = 1; round < snapshots.size(); ++round) {
            require(snapshots[round].size() == snapshots[0].size(),
                    scenario + ": file sets differ between runs");
            for (const auto& [name, bytes] : snapshots[0]) {
                require(snapshots[round].at(name) == bytes,
                        scenario + ": " + name + " differs between identical runs");
            }
        }
    }
    std::filesystem::remove_all(root);
}

} // namespace

int main() {
    Runner runner;
    runner.criterion(1, "fixture replay reproduces every published table value with F1 consistency",
                     criterion_fixture_replay);
    runner.criterion(2, "200-trial suite emits only the six algorithm literals",
                     criterion_algorithm_literals);
    runner.criterion(3, "deviation/mean/dot-product/risk match brute-force oracles at 1e-12",
                     criterion_oracles);
    runner.criterion(4, "gradient check < 1e-6 and separable training reaches 100%",
                     criterion_detector_training);
    runner.criterion(5, "detection-fraction law: exact k/n and monotone positive-verdict frequency",
                     criterion_detection_fraction_law);
    runner.criterion(6, "ASR-vs-shots law: monotone, Spearman >= 0.9, saturation at N=40",
                     criterion_asr_vs_shots_law);
    runner.criterion(7, "defense totality: perfect defender blocks all, disabled blocks none",
                     criterion_defense_totality);
    runner.criterion(8, "diversity anchors: self-BLEU 1.0, entropy 4.0 bits, 100% bigrams, invariance",
                     criterion_diversity_anchors);
    runner.criterion(9, "byte-identical logs and reports across reruns and job counts",
                     criterion_determinism);
    return runner.failures();
}
