#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agentsec/detector.hpp"
#include "agentsec/harness.hpp"
#include "agentsec/io.hpp"
#include "agentsec/metrics.hpp"

namespace {

using agentsec::Error;

int cmd_run(const std::string& config_path, const std::optional<std::string>& scenario,
            std::optional<int> trials, std::optional<std::uint64_t> seed,
            const std::optional<std::string>& out_dir, std::optional<int> jobs) {
    const std::filesystem::path path(config_path);
    nlohmann::json config_json = agentsec::read_json_file(path);
    if (scenario) config_json["scenario"] = *scenario;
    if (trials) config_json["trials"] = *trials;
    if (seed) config_json["base_seed"] = *seed;
    // Paths inside the config resolve against the config file; the CLI
    // override resolves against the working directory.
    if (out_dir) config_json["out_dir"] = std::filesystem::absolute(*out_dir).string();
    if (jobs) config_json["jobs"] = *jobs;

    const auto run_config = agentsec::harness::run_config_from_json(config_json, path.parent_path());
    const auto summary = agentsec::harness::run_batch(run_config);

    std::cout << "scenario: " << summary.aggregate.at("scenario").get<std::string>() << "\n";
    std::cout << "trials:   " << summary.aggregate.at("trials").get<long>() << "\n";
    for (auto it = summary.aggregate.at("verdict_counts").begin();
         it != summary.aggregate.at("verdict_counts").end(); ++it) {
        std::cout << "  " << it.value().get<long>() << "x " << it.key() << "\n";
    }
    std::cout << "files:\n";
    for (const auto& f : summary.files_written) std::cout << "  " << f.string() << "\n";
    return 0;
}

int cmd_replay_tables(const std::string& fixtures_dir, const std::optional<std::string>& out_dir) {
    const auto replay = agentsec::harness::replay_paper_tables(fixtures_dir);
    for (const auto& table : replay.at("tables")) {
        std::cout << table.at("rendered_text").get<std::string>() << "\n";
        if (table.at("f1_consistency").is_array()) {
            for (const auto& check : table.at("f1_consistency")) {
                std::cout << "  F1 check " << check.at("model").get<std::string>() << ": published "
                          << check.at("f1_published_pct").dump() << ", derived "
                          << agentsec::metrics::format_metric(check.at("f1_derived_pct").get<double>(), 2)
                          << " -> "
                          << (check.at("consistent_within_half_pp").get<bool>() ? "consistent"
                                                                                : "INCONSISTENT")
                          << "\n";
            }
            std::cout << "\n";
        }
        if (table.contains("diversity_asr_correlations")) {
            for (auto it = table.at("diversity_asr_correlations").begin();
                 it != table.at("diversity_asr_correlations").end(); ++it) {
                std::cout << "  " << it.key() << " vs ASR: pearson "
                          << agentsec::metrics::format_metric(
                                 it.value().at("pearson_vs_asr").get<double>(), 3)
                          << ", spearman "
                          << agentsec::metrics::format_metric(
                                 it.value().at("spearman_vs_asr").get<double>(), 3)
                          << "\n";
            }
            std::cout << "\n";
        }
    }
    if (out_dir) {
        for (const auto& table : replay.at("tables")) {
            const auto base = std::filesystem::path(*out_dir) /
                              table.at("table_id").get<std::string>();
            agentsec::write_text_file(base.string() + ".txt",
                                      table.at("rendered_text").get<std::string>());
            nlohmann::json data = table;
            data.erase("rendered_text");
            agentsec::write_text_file(base.string() + ".json", data.dump(2) + "\n");
        }
    }
    return 0;
}

int cmd_train_detector(const std::string& data_path, const std::string& out_path, int epochs,
                       double learning_rate, double l2, std::uint64_t seed, double threshold,
                       const std::string& extractor_id) {
    const auto trials = agentsec::harness::load_labeled_trials(data_path);
    agentsec::TrainOptions options;
    options.epochs = epochs;
    options.learning_rate = learning_rate;
    options.l2 = l2;
    options.seed = seed;
    const auto result = agentsec::train(trials, options, extractor_id, threshold);
    agentsec::write_text_file(out_path,
                              agentsec::detector_to_profile(result.detector).dump(2) + "\n");
    std::cout << "trained on " << trials.size() << " labeled trials, final loss "
              << result.final_loss << "\n";
    std::cout << "profile written to " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& aggregate_path, const std::string& out_dir) {
    const nlohmann::json aggregate = agentsec::read_json_file(aggregate_path);
    if (!aggregate.is_object() || !aggregate.contains("scenario")) {
        agentsec::fail("config_invalid", "not an aggregate report: " + aggregate_path);
    }
    for (const auto& f : agentsec::harness::render_report(aggregate, out_dir)) {
        std::cout << f.string() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentsec: adversarial security evaluations for tool-calling agents"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> scenario;
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> jobs;
    auto* run = app.add_subcommand("run", "Run a batch of seeded scenario trials");
    run->add_option("--config", config_path, "Run config JSON")->required();
    run->add_option("--scenario", scenario, "Override: reverse_turing | alignment | msj");
    run->add_option("--trials", trials, "Override: number of trials");
    run->add_option("--seed", seed, "Override: base seed");
    run->add_option("--out", out_dir, "Override: output directory");
    run->add_option("--jobs", jobs, "Override: worker pool size");

    std::string fixtures_dir = "fixtures/paper";
    std::optional<std::string> tables_out;
    auto* replay = app.add_subcommand("replay-tables", "Render the published evaluation tables");
    replay->add_option("--fixtures", fixtures_dir, "Directory with table1..table3/fig5 JSON files");
    replay->add_option("--out", tables_out, "Also write rendered tables to this directory");

    std::string data_path;
    std::string profile_out = "detector.json";
    int epochs = 500;
    double learning_rate = 0.1;
    double l2 = 0.0;
    std::uint64_t train_seed = 0;
    double threshold = 0.5;
    std::string extractor_id = "trained";
    auto* train = app.add_subcommand("train-detector", "Fit a logistic detector on labeled features");
    train->add_option("--data", data_path, "Labeled features JSONL")->required();
    train->add_option("--out", profile_out, "Output profile path");
    train->add_option("--epochs", epochs, "Training epochs");
    train->add_option("--lr", learning_rate, "Learning rate");
    train->add_option("--l2", l2, "L2 coefficient");
    train->add_option("--seed", train_seed, "Init seed");
    train->add_option("--threshold", threshold, "Decision threshold");
    train->add_option("--extractor-id", extractor_id, "Feature extractor id to record");

    std::string aggregate_path;
    std::string report_out = "out";
    auto* report = app.add_subcommand("report", "Re-render report files from an aggregate JSON");
    report->add_option("--aggregate", aggregate_path, "Aggregate report JSON")->required();
    report->add_option("--out", report_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, scenario, trials, seed, out_dir, jobs);
        if (replay->parsed()) return cmd_replay_tables(fixtures_dir, tables_out);
        if (train->parsed()) {
            return cmd_train_detector(data_path, profile_out, epochs, learning_rate, l2, train_seed,
                                      threshold, extractor_id);
        }
        if (report->parsed()) return cmd_report(aggregate_path, report_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return agentsec::harness::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
