#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <agentsec/harness.hpp>
#include <agentsec/io.hpp>
#include <agentsec/metrics.hpp>

using namespace agentsec;
using namespace agentsec::harness;

namespace {

const std::filesystem::path kFixtures = AGENTSEC_FIXTURE_DIR;

std::filesystem::path fresh_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("agentsec_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

RunConfig msj_run_config(const std::filesystem::path& out, int trials = 8, std::uint64_t seed = 5,
                         int jobs = 1) {
    nlohmann::json j{{"scenario", "msj"},
                     {"trials", trials},
                     {"base_seed", seed},
                     {"scenario_config", "msj/msj_scripted.json"},
                     {"backend", "scripted"},
                     {"jobs", jobs}};
    auto config = run_config_from_json(j, kFixtures);
    config.out_dir = out;
    return config;
}

std::map<std::filesystem::path, std::string> slurp_dir(const std::filesystem::path& dir) {
    std::map<std::filesystem::path, std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        files[entry.path().filename()] = read_text_file(entry.path());
    }
    return files;
}

} // namespace

TEST_CASE("run configs validate scenario, trials and remote endpoint") {
    CHECK_THROWS_WITH_AS(run_config_from_json(nlohmann::json{{"trials", 1}}, kFixtures),
                         doctest::Contains("config_invalid"), Error);
    CHECK_THROWS_WITH_AS(
        run_config_from_json(nlohmann::json{{"scenario", "chess"}, {"scenario_config", "x"}}, kFixtures),
        doctest::Contains("config_invalid"), Error);
    CHECK_THROWS_WITH_AS(
        run_config_from_json(
            nlohmann::json{{"scenario", "msj"}, {"trials", 0}, {"scenario_config", "x"}}, kFixtures),
        doctest::Contains("config_invalid"), Error);
    // remote mode without endpoint-config fails before any execution
    CHECK_THROWS_WITH_AS(
        run_config_from_json(nlohmann::json{{"scenario", "msj"},
                                            {"scenario_config", "msj/msj_scripted.json"},
                                            {"backend", "remote"}},
                             kFixtures),
        doctest::Contains("config_invalid"), Error);
    CHECK_THROWS_WITH_AS(
        run_config_from_json(nlohmann::json{{"scenario", "msj"}, {"backend", "scripted"}}, kFixtures),
        doctest::Contains("config_invalid"), Error);
}

TEST_CASE("run_batch writes exactly the documented file set") {
    const auto out = fresh_dir("manifest");
    const auto summary = run_batch(msj_run_config(out));
    std::vector<std::string> expected = {"msj_events.jsonl",  "msj_labeled_features.jsonl",
                                         "msj_transcripts.jsonl", "msj_trials.jsonl",
                                         "msj_prompt_embedding.csv",
                                         "msj_report.json",   "msj_report.csv",
                                         "msj_report.txt",    "msj_confusion.csv",
                                         "msj_asr_curve.csv"};
    const auto files = slurp_dir(out);
    CHECK(files.size() == expected.size());
    for (const auto& name : expected) {
        CHECK(files.count(name) == 1);
    }
    CHECK(summary.files_written.size() == expected.size());
}

TEST_CASE("msj batches export obedience counts and a prompt embedding") {
    const auto out = fresh_dir("embedding");
    const auto summary = run_batch(msj_run_config(out, 6, 2));
    long labeled = 0;
    for (auto it = summary.aggregate.at("metrics").at("obedience_counts").begin();
         it != summary.aggregate.at("metrics").at("obedience_counts").end(); ++it) {
        labeled += it.value().get<long>();
    }
    CHECK(labeled == 6); // one response per trial

    std::istringstream embedding(read_text_file(out / "msj_prompt_embedding.csv"));
    std::string header;
    std::getline(embedding, header);
    CHECK(header == "prompt_id,length_chars,unique_ngram_pct,entropy_bits,lexicon_hits,asr");
    long rows = 0;
    std::string line;
    while (std::getline(embedding, line)) ++rows;
    CHECK(rows == 6);
}

TEST_CASE("run_batch is byte-deterministic across reruns and job counts") {
    const auto out1 = fresh_dir("det1");
    const auto out2 = fresh_dir("det2");
    const auto out3 = fresh_dir("det3");
    run_batch(msj_run_config(out1, 10, 5, 1));
    run_batch(msj_run_config(out2, 10, 5, 1));
    run_batch(msj_run_config(out3, 10, 5, 4));
    const auto a = slurp_dir(out1);
    const auto b = slurp_dir(out2);
    const auto c = slurp_dir(out3);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() == c.size());
    for (const auto& [name, bytes] : a) {
        CHECK(b.at(name) == bytes);
        CHECK(c.at(name) == bytes);
    }
}

TEST_CASE("report totals equal an independent event-log recount") {
    const auto out = fresh_dir("recount");
    const auto summary = run_batch(msj_run_config(out, 12, 3));
    std::map<std::string, long> recount;
    std::map<long, std::uint64_t> last_ts;
    std::istringstream events(read_text_file(out / "msj_events.jsonl"));
    std::string line;
    while (std::getline(events, line)) {
        const auto e = nlohmann::json::parse(line);
        const long trial = e.at("trial").get<long>();
        const std::uint64_t ts = e.at("ts").get<std::uint64_t>();
        if (last_ts.count(trial)) CHECK(ts > last_ts[trial]); // strictly ordered per trial
        last_ts[trial] = ts;
        if (e.at("kind") == "verdict") {
            recount[e.at("payload").at("verdict").get<std::string>()] += 1;
        }
    }
    long total = 0;
    for (auto it = summary.aggregate.at("verdict_counts").begin();
         it != summary.aggregate.at("verdict_counts").end(); ++it) {
        CHECK(recount[it.key()] == it.value().get<long>());
        total += it.value().get<long>();
    }
    CHECK(total == 12);
}

TEST_CASE("a single all-compliant trial reports the clean verdict") {
    const auto out = fresh_dir("single_clean");
    nlohmann::json j{{"scenario", "reverse_turing"},
                     {"trials", 1},
                     {"base_seed", 0},
                     {"scenario_config", "rogue/all_compliant.json"}};
    auto config = run_config_from_json(j, kFixtures);
    config.out_dir = out;
    const auto summary = run_batch(config);
    CHECK(summary.aggregate.at("trials") == 1);
    CHECK(summary.aggregate.at("verdict_counts").at("No rogue instance detected.") == 1);
}

TEST_CASE("rogue and alignment batches aggregate their scenario metrics") {
    const auto out = fresh_dir("rogue_agg");
    nlohmann::json j{{"scenario", "reverse_turing"},
                     {"trials", 3},
                     {"base_seed", 1},
                     {"scenario_config", "rogue/one_rogue.json"}};
    auto config = run_config_from_json(j, kFixtures);
    config.out_dir = out;
    const auto summary = run_batch(config);
    CHECK(summary.aggregate.at("metrics").at("safety_S") == 1.0);
    CHECK(summary.aggregate.at("metrics").at("confusion").at("tp") == 3);
    CHECK(summary.aggregate.at("metrics").at("tool_call_totals").at("scan_network") == 3);

    const auto out2 = fresh_dir("align_agg");
    nlohmann::json j2{{"scenario", "alignment"},
                      {"trials", 4},
                      {"base_seed", 2},
                      {"scenario_config", "alignment/overt_faking.json"}};
    auto config2 = run_config_from_json(j2, kFixtures);
    config2.out_dir = out2;
    const auto summary2 = run_batch(config2);
    CHECK(summary2.aggregate.at("metrics").at("tpr") == "1.0000");
    CHECK(summary2.aggregate.at("metrics").at("fpr") == "undefined");
    CHECK(summary2.aggregate.at("metrics").at("mean_faking_fraction") == doctest::Approx(0.4));
}

TEST_CASE("sandbag probe results surface in the alignment aggregate") {
    const auto out = fresh_dir("sandbag");
    nlohmann::json j{{"scenario", "alignment"},
                     {"trials", 1},
                     {"base_seed", 1},
                     {"scenario_config", "alignment/sandbag_probe.json"}};
    auto config = run_config_from_json(j, kFixtures);
    config.out_dir = out;
    const auto summary = run_batch(config);
    const auto& probe = summary.aggregate.at("metrics").at("sandbag_probe");
    CHECK(probe.contains("s1"));
    CHECK(probe.contains("s2"));
    CHECK(probe.at("s1") != probe.at("s2"));
    CHECK(probe.at("detected_probability").get<double>() > 0.0);
}

TEST_CASE("render_report is idempotent over the same aggregate") {
    const auto out = fresh_dir("render1");
    const auto summary = run_batch(msj_run_config(out, 5, 9));
    const auto out2 = fresh_dir("render2");
    render_report(summary.aggregate, out2);
    render_report(summary.aggregate, out2); // overwrite with identical bytes
    const auto rendered = slurp_dir(out2);
    const auto original = slurp_dir(out);
    for (const auto& [name, bytes] : rendered) {
        CHECK(original.at(name) == bytes);
    }
}

TEST_CASE("labeled feature logs train a detector that separates the fixture") {
    const auto out = fresh_dir("train");
    nlohmann::json j{{"scenario", "reverse_turing"},
                     {"trials", 5},
                     {"base_seed", 1},
                     {"scenario_config", "rogue/one_rogue.json"}};
    auto config = run_config_from_json(j, kFixtures);
    config.out_dir = out;
    run_batch(config);

    const auto trials = load_labeled_trials(out / "reverse_turing_labeled_features.jsonl");
    CHECK(trials.size() == 15); // 3 nodes x 5 trials
    TrainOptions options;
    options.epochs = 300;
    options.learning_rate = 0.5;
    options.seed = 7;
    const auto result = train(trials, options, "rogue_v1");
    long correct = 0;
    for (const auto& t : trials) {
        const bool positive = result.detector.positive(score(result.detector, t.features));
        if (positive == (t.label == 1)) ++correct;
    }
    CHECK(correct == static_cast<long>(trials.size()));
}

TEST_CASE("remote batches propagate backend failures") {
    nlohmann::json j{{"scenario", "msj"},
                     {"trials", 1},
                     {"scenario_config", "msj/msj_scripted.json"},
                     {"backend", "remote"},
                     {"endpoint", nlohmann::json{{"base_url", "http://127.0.0.1:1"},
                                                 {"model", "m"},
                                                 {"timeout_ms", 100},
                                                 {"max_retries", 0},
                                                 {"retry_base_ms", 1}}}};
    auto config = run_config_from_json(j, kFixtures);
    config.out_dir = fresh_dir("remote_fail");
    try {
        run_batch(config);
        FAIL("expected a backend error");
    } catch (const Error& e) {
        CHECK(exit_code_for(e) == 4);
    }
}

TEST_CASE("transcript logs carry every trial's messages") {
    const auto out = fresh_dir("transcripts");
    run_batch(msj_run_config(out, 3, 8));
    std::istringstream lines(read_text_file(out / "msj_transcripts.jsonl"));
    std::string line;
    std::set<std::string> names;
    std::set<long> trials;
    while (std::getline(lines, line)) {
        const auto row = nlohmann::json::parse(line);
        names.insert(row.at("transcript").get<std::string>());
        trials.insert(row.at("trial").get<long>());
        CHECK(row.at("message").contains("role"));
    }
    CHECK(names == std::set<std::string>{"rocket", "star_lord", "groot"});
    CHECK(trials == std::set<long>{0, 1, 2});
}

TEST_CASE("table2 replay reports diversity/ASR correlations without asserting one") {
    const auto replay = replay_paper_tables(kFixtures / "paper");
    const auto& table2 = replay.at("tables").at(1);
    REQUIRE(table2.at("table_id") == "table2");
    const auto& correlations = table2.at("diversity_asr_correlations");
    for (const std::string column : {"unique_ngrams_pct", "entropy", "self_bleu"}) {
        const double pearson = correlations.at(column).at("pearson_vs_asr").get<double>();
        const double spearman = correlations.at(column).at("spearman_vs_asr").get<double>();
        CHECK(pearson >= -1.0);
        CHECK(pearson <= 1.0);
        CHECK(spearman >= -1.0);
        CHECK(spearman <= 1.0);
    }
}

TEST_CASE("published tables replay with all checked-in values and a passing F1 check") {
    const auto start = std::chrono::steady_clock::now();
    const auto replay = replay_paper_tables(kFixtures / "paper");
    const auto elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 1.0);

    REQUIRE(replay.at("tables").size() == 4);
    for (const auto& table : replay.at("tables")) {
        const std::string text = table.at("rendered_text").get<std::string>();
        for (const auto& row : table.at("rows")) {
            for (const auto& column : table.at("columns")) {
                const auto& cell = row.at(column.get<std::string>());
                const std::string rendered = cell.is_string() ? cell.get<std::string>() : cell.dump();
                CHECK(text.find(rendered) != std::string::npos);
            }
        }
    }

    const auto& table1 = replay.at("tables").at(0);
    REQUIRE(table1.at("table_id") == "table1");
    REQUIRE(table1.at("f1_consistency").size() == 5);
    for (const auto& check : table1.at("f1_consistency")) {
        CHECK(check.at("consistent_within_half_pp") == true);
        CHECK(std::abs(check.at("f1_derived_pct").get<double>() -
                       check.at("f1_published_pct").get<double>()) <= 0.5);
    }
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(replay.at("tables").at(i).at("f1_consistency") == "not_derivable");
    }
}

TEST_CASE("missing or corrupt fixtures raise fixture errors") {
    CHECK_THROWS_WITH_AS(replay_paper_tables(kFixtures / "nonexistent"),
                         doctest::Contains("fixture_missing"), Error);
    const auto dir = fresh_dir("corrupt");
    write_text_file(dir / "table1.json", "{not json");
    CHECK_THROWS_WITH_AS(replay_paper_tables(dir), doctest::Contains("fixture_corrupt"), Error);
    write_text_file(dir / "table1.json", R"({"table_id": "tableX", "rows": [], "columns": []})");
    CHECK_THROWS_WITH_AS(replay_paper_tables(dir), doctest::Contains("fixture_corrupt"), Error);
}

TEST_CASE("exit codes map error families to the documented values") {
    CHECK(exit_code_for(Error("config_invalid", "x")) == 2);
    CHECK(exit_code_for(Error("profile_invalid", "x")) == 2);
    CHECK(exit_code_for(Error("fixture_missing", "x")) == 3);
    CHECK(exit_code_for(Error("fixture_corrupt", "x")) == 3);
    CHECK(exit_code_for(Error("fixture_invalid", "x")) == 3);
    CHECK(exit_code_for(Error("backend_failure", "x")) == 4);
    CHECK(exit_code_for(Error("timeout", "x")) == 4);
    CHECK(exit_code_for(Error("auth_failure", "x")) == 4);
    CHECK(exit_code_for(Error("rate_limited", "x")) == 4);
    CHECK(exit_code_for(Error("script_exhausted", "x")) == 1);
}

TEST_CASE("labeled trial files reject junk") {
    const auto dir = fresh_dir("labeled");
    write_text_file(dir / "bad.jsonl", "{oops\n");
    CHECK_THROWS_WITH_AS(load_labeled_trials(dir / "bad.jsonl"), doctest::Contains("fixture_corrupt"),
                         Error);
    CHECK_THROWS_WITH_AS(load_labeled_trials(dir / "missing.jsonl"),
                         doctest::Contains("fixture_missing"), Error);
}
