#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentsec/error.hpp"

namespace agentsec {

/// Fixed-length feature vector with parallel feature names.
struct FeatureVector {
    std::vector<double> values;
    std::vector<std::string> names;

    std::size_t dimension() const { return values.size(); }
};

/// Builds a FeatureVector, enforcing equal lengths and finite values.
FeatureVector make_features(std::vector<double> values, std::vector<std::string> names);

struct WeightVector {
    std::vector<double> weights;
    double bias = 0.0;
};

/// Linear-sigmoid detection model: score = sigmoid(weights . features + bias).
/// One instance per scenario; profiles persist as JSON.
struct LogisticDetector {
    WeightVector weights;
    std::string feature_extractor_id;
    double decision_threshold = 0.5;

    bool positive(double probability) const { return probability >= decision_threshold; }
};

struct LabeledTrial {
    FeatureVector features;
    int label = 0; // 1 = malicious/faking/harmful, 0 = benign
};

/// Numerically stable logistic function; never overflows for finite input.
double sigmoid(double x);

/// Detection probability for one feature vector. Throws dimension_mismatch.
double score(const LogisticDetector& detector, const FeatureVector& features);

struct TrainOptions {
    int epochs = 500;
    double learning_rate = 0.1;
    double l2 = 0.0;
    std::uint64_t seed = 0;
    double init_half_width = 0.01;
};

struct TrainResult {
    LogisticDetector detector;
    double final_loss = 0.0;
    std::vector<double> loss_per_epoch;
};

/// Full-batch gradient descent on mean binary cross-entropy.
/// Deterministic given options.seed. Throws degenerate_data on single-class
/// input and divergence if the loss turns non-finite.
TrainResult train(const std::vector<LabeledTrial>& trials, const TrainOptions& options,
                  std::string feature_extractor_id = "trained", double threshold = 0.5);

/// Mean binary cross-entropy of `weights` over `trials` (plus optional L2 term).
double bce_loss(const WeightVector& weights, const std::vector<LabeledTrial>& trials, double l2 = 0.0);

/// Analytic gradient of bce_loss; last element is the bias derivative.
std::vector<double> bce_gradient(const WeightVector& weights, const std::vector<LabeledTrial>& trials,
                                 double l2 = 0.0);

/// Compares the analytic gradient against central finite differences
/// coordinate-wise and returns the max relative error.
double gradient_check(const LogisticDetector& detector, const std::vector<LabeledTrial>& trials,
                      double epsilon);

/// Profile persistence: {feature_extractor_id, weights, bias, threshold}.
nlohmann::json detector_to_profile(const LogisticDetector& detector);
LogisticDetector detector_from_profile(const nlohmann::json& profile);

} // namespace agentsec
