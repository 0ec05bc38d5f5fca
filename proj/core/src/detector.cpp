#include "agentsec/detector.hpp"

#include <algorithm>
#include <cmath>

#include "agentsec/rng.hpp"

namespace agentsec {

FeatureVector make_features(std::vector<double> values, std::vector<std::string> names) {
    if (values.size() != names.size()) {
        fail("feature_shape", "values and names must have equal length");
    }
    for (double v : values) {
        if (!std::isfinite(v)) fail("feature_shape", "non-finite feature value");
    }
    return FeatureVector{std::move(values), std::move(names)};
}

double sigmoid(double x) {
    // Split on sign so exp() only ever sees a non-positive argument.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double score(const LogisticDetector& detector, const FeatureVector& features) {
    const auto& w = detector.weights.weights;
    if (w.size() != features.values.size()) {
        fail("dimension_mismatch", "detector expects " + std::to_string(w.size()) +
                                       " features, got " + std::to_string(features.values.size()));
    }
    double z = detector.weights.bias;
    for (std::size_t i = 0; i < w.size(); ++i) {
        z += w[i] * features.values[i];
    }
    return sigmoid(z);
}

namespace {

// Clamped log keeps the loss finite when a prediction saturates.
double safe_log(double p) {
    constexpr double kFloor = 1e-300;
    return std::log(std::max(p, kFloor));
}

void check_trials(const std::vector<LabeledTrial>& trials) {
    if (trials.empty()) fail("degenerate_data", "no trials");
    const std::size_t dim = trials.front().features.dimension();
    bool has_pos = false;
    bool has_neg = false;
    for (const auto& t : trials) {
        if (t.label != 0 && t.label != 1) fail("degenerate_data", "label must be 0 or 1");
        if (t.features.dimension() != dim) fail("dimension_mismatch", "inconsistent feature dimensions");
        (t.label == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) fail("degenerate_data", "training needs at least one trial of each label");
}

} // namespace

double bce_loss(const WeightVector& weights, const std::vector<LabeledTrial>& trials, double l2) {
    double loss = 0.0;
    for (const auto& t : trials) {
        double z = weights.bias;
        for (std::size_t i = 0; i < weights.weights.size(); ++i) {
            z += weights.weights[i] * t.features.values[i];
        }
        const double p = sigmoid(z);
        loss += t.label == 1 ? -safe_log(p) : -safe_log(1.0 - p);
    }
    loss /= static_cast<double>(trials.size());
    if (l2 > 0.0) {
        double norm2 = 0.0;
        for (double w : weights.weights) norm2 += w * w;
        loss += 0.5 * l2 * norm2;
    }
    return loss;
}

std::vector<double> bce_gradient(const WeightVector& weights, const std::vector<LabeledTrial>& trials,
                                 double l2) {
    const std::size_t dim = weights.weights.size();
    std::vector<double> grad(dim + 1, 0.0);
    for (const auto& t : trials) {
        double z = weights.bias;
        for (std::size_t i = 0; i < dim; ++i) {
            z += weights.weights[i] * t.features.values[i];
        }
        const double err = sigmoid(z) - static_cast<double>(t.label);
        for (std::size_t i = 0; i < dim; ++i) {
            grad[i] += err * t.features.values[i];
        }
        grad[dim] += err;
    }
    const double inv_n = 1.0 / static_cast<double>(trials.size());
    for (double& g : grad) g *= inv_n;
    if (l2 > 0.0) {
        for (std::size_t i = 0; i < dim; ++i) grad[i] += l2 * weights.weights[i];
    }
    return grad;
}

TrainResult train(const std::vector<LabeledTrial>& trials, const TrainOptions& options,
                  std::string feature_extractor_id, double threshold) {
    check_trials(trials);
    const std::size_t dim = trials.front().features.dimension();

    auto eng = rng::make_engine(options.seed);
    WeightVector w;
    w.weights.resize(dim);
    for (double& wi : w.weights) wi = rng::symmetric(eng, options.init_half_width);
    w.bias = rng::symmetric(eng, options.init_half_width);

    TrainResult result;
    result.loss_per_epoch.reserve(static_cast<std::size_t>(options.epochs));
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const auto grad = bce_gradient(w, trials, options.l2);
        for (std::size_t i = 0; i < dim; ++i) {
            w.weights[i] -= options.learning_rate * grad[i];
        }
        w.bias -= options.learning_rate * grad[dim];
        const double loss = bce_loss(w, trials, options.l2);
        if (!std::isfinite(loss)) {
            fail("divergence", "loss became non-finite at epoch " + std::to_string(epoch) +
                                   " (learning_rate=" + std::to_string(options.learning_rate) + ")");
        }
        result.loss_per_epoch.push_back(loss);
    }
    result.final_loss = result.loss_per_epoch.empty() ? bce_loss(w, trials, options.l2)
                                                      : result.loss_per_epoch.back();
    result.detector = LogisticDetector{w, std::move(feature_extractor_id), threshold};
    return result;
}

double gradient_check(const LogisticDetector& detector, const std::vector<LabeledTrial>& trials,
                      double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1e-3)) fail("bad_epsilon", "epsilon must be in (0, 1e-3]");
    const auto analytic = bce_gradient(detector.weights, trials);
    const std::size_t dim = detector.weights.weights.size();

    double max_rel = 0.0;
    for (std::size_t i = 0; i <= dim; ++i) {
        WeightVector plus = detector.weights;
        WeightVector minus = detector.weights;
        if (i < dim) {
            plus.weights[i] += epsilon;
            minus.weights[i] -= epsilon;
        } else {
            plus.bias += epsilon;
            minus.bias -= epsilon;
        }
        const double numeric = (bce_loss(plus, trials) - bce_loss(minus, trials)) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
    }
    return max_rel;
}

nlohmann::json detector_to_profile(const LogisticDetector& detector) {
    return nlohmann::json{{"feature_extractor_id", detector.feature_extractor_id},
                          {"weights", detector.weights.weights},
                          {"bias", detector.weights.bias},
                          {"threshold", detector.decision_threshold}};
}

LogisticDetector detector_from_profile(const nlohmann::json& profile) {
    if (!profile.is_object() || !profile.contains("weights") || !profile.contains("bias")) {
        fail("profile_invalid", "detector profile needs weights and bias");
    }
    LogisticDetector d;
    d.weights.weights = profile.at("weights").get<std::vector<double>>();
    d.weights.bias = profile.at("bias").get<double>();
    d.feature_extractor_id = profile.value("feature_extractor_id", std::string{});
    d.decision_threshold = profile.value("threshold", 0.5);
    if (!(d.decision_threshold > 0.0 && d.decision_threshold < 1.0)) {
        fail("profile_invalid", "threshold must lie in (0,1)");
    }
    return d;
}

} // namespace agentsec
