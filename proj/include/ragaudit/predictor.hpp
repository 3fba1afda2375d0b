#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ragaudit/core.hpp"

namespace ragaudit {

struct FeatureVector {
    double confidence = 0.0;   // self-rated probability in [0,1]
    double sufficient = 0.0;   // sufficiency bit as 0/1

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct TrainingExample {
    FeatureVector features;
    bool label = false;  // true = hallucination (answered and wrong)

    friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

struct Hyperparams {
    double l2_lambda = 0.0;
    double learning_rate = 0.1;
    int epochs = 500;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline const std::array<const char*, 2>& feature_order() {
    static const std::array<const char*, 2> order = {"confidence", "sufficient"};
    return order;
}

struct LogisticModel {
    std::array<double, 2> weights{0.0, 0.0};  // feature_order(): confidence, sufficient
    double bias = 0.0;
    Hyperparams hyperparams;
    bool use_sufficiency = true;
    // Training metadata, carried into the model file.
    std::uint64_t seed = 0;
    std::size_t n_examples = 0;
    double final_loss = 0.0;

    friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Predicted hallucination risk.
inline double score(const LogisticModel& model, const FeatureVector& x) {
    return sigmoid(model.weights[0] * x.confidence + model.weights[1] * x.sufficient + model.bias);
}

// Mean cross-entropy plus 0.5·λ·‖w‖² (bias unregularized). The per-example
// term uses the overflow-safe form max(z,0) − z·y + log1p(exp(−|z|)).
inline double nll_loss(const std::array<double, 2>& w, double b,
                       const std::vector<TrainingExample>& data, double l2_lambda) {
    if (data.empty()) throw Error("nll_loss needs at least one example");
    double total = 0.0;
    for (const TrainingExample& ex : data) {
        double z = w[0] * ex.features.confidence + w[1] * ex.features.sufficient + b;
        double y = ex.label ? 1.0 : 0.0;
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    return total / static_cast<double>(data.size()) +
           0.5 * l2_lambda * (w[0] * w[0] + w[1] * w[1]);
}

struct Gradient {
    std::array<double, 2> d_weights{0.0, 0.0};
    double d_bias = 0.0;
};

inline Gradient nll_gradient(const std::array<double, 2>& w, double b,
                             const std::vector<TrainingExample>& data, double l2_lambda) {
    if (data.empty()) throw Error("nll_gradient needs at least one example");
    Gradient g;
    for (const TrainingExample& ex : data) {
        double z = w[0] * ex.features.confidence + w[1] * ex.features.sufficient + b;
        double r = sigmoid(z) - (ex.label ? 1.0 : 0.0);
        g.d_weights[0] += r * ex.features.confidence;
        g.d_weights[1] += r * ex.features.sufficient;
        g.d_bias += r;
    }
    double n = static_cast<double>(data.size());
    g.d_weights[0] = g.d_weights[0] / n + l2_lambda * w[0];
    g.d_weights[1] = g.d_weights[1] / n + l2_lambda * w[1];
    g.d_bias /= n;
    return g;
}

// Full-batch gradient descent from zero weights. A step that raises the loss
// is reverted and the learning rate halved, so the recorded loss sequence is
// non-increasing and the whole fit is deterministic; `seed` is metadata only.
// With use_sufficiency = false the sufficiency weight is pinned at 0, giving
// the confidence-only variant.
inline LogisticModel train(const std::vector<TrainingExample>& data, const Hyperparams& hp,
                           std::uint64_t seed, bool use_sufficiency = true) {
    if (data.empty()) throw Error("train needs at least one example");
    if (!(hp.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (hp.l2_lambda < 0.0) throw ConfigError("l2_lambda must be >= 0");
    if (hp.epochs < 1) throw ConfigError("epochs must be >= 1");

    bool has_pos = false, has_neg = false;
    for (const TrainingExample& ex : data) (ex.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
        warn("train: only one label present; the fit will be near-constant");
    }

    LogisticModel model;
    model.hyperparams = hp;
    model.use_sufficiency = use_sufficiency;
    model.seed = seed;
    model.n_examples = data.size();

    std::array<double, 2> w{0.0, 0.0};
    double b = 0.0;
    double lr = hp.learning_rate;
    double loss = nll_loss(w, b, data, hp.l2_lambda);
    for (int epoch = 0; epoch < hp.epochs && lr > 1e-15; ++epoch) {
        Gradient g = nll_gradient(w, b, data, hp.l2_lambda);
        if (!use_sufficiency) g.d_weights[1] = 0.0;
        std::array<double, 2> w2{w[0] - lr * g.d_weights[0], w[1] - lr * g.d_weights[1]};
        double b2 = b - lr * g.d_bias;
        double loss2 = nll_loss(w2, b2, data, hp.l2_lambda);
        if (loss2 > loss) {
            lr *= 0.5;  // revert: keep w, b
            continue;
        }
        w = w2;
        b = b2;
        loss = loss2;
    }
    model.weights = w;
    model.bias = b;
    model.final_loss = loss;
    return model;
}

namespace detail {

// 53-bit uniform in [0,1). Drawn directly from the engine's output so results
// do not depend on a standard library's distribution implementation.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    double u = unit_uniform(rng);
    return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
}

// Fisher–Yates with our own uniform, again for engine-only determinism.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
        if (j >= i) j = i - 1;  // guard against u rounding to 1.0·i
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace detail

struct RandomSearchReport {
    std::size_t best_index = 0;
    Hyperparams best_hyperparams;
    double best_val_loss = 0.0;
    double val_accuracy = 0.0;  // refit model on the validation split
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

// Log-uniform hyperparameter search: λ ∈ [1e-6, 10], lr ∈ [1e-3, 1],
// epochs ∈ {100..2000}. Candidates are scored by validation log-loss on a
// seeded 80/20 shuffle split; ties keep the earliest candidate; the winner
// is refit on all data. Deterministic given (data, n_iters, seed).
inline LogisticModel random_search(const std::vector<TrainingExample>& data, int n_iters,
                                   std::uint64_t seed, bool use_sufficiency = true,
                                   RandomSearchReport* report = nullptr) {
    if (n_iters < 1) throw ConfigError("random_search needs n_iters >= 1");
    if (data.size() < 2) {
        throw Error("random_search needs at least 2 examples for an 80/20 split");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    detail::shuffle_indices(idx, rng);

    std::size_t n_val = std::max<std::size_t>(1, data.size() / 5);
    std::size_t n_train = data.size() - n_val;
    std::vector<TrainingExample> train_split, val_split;
    train_split.reserve(n_train);
    val_split.reserve(n_val);
    for (std::size_t i = 0; i < n_train; ++i) train_split.push_back(data[idx[i]]);
    for (std::size_t i = n_train; i < data.size(); ++i) val_split.push_back(data[idx[i]]);

    bool have_best = false;
    double best_loss = 0.0;
    std::size_t best_index = 0;
    Hyperparams best_hp;
    for (int i = 0; i < n_iters; ++i) {
        Hyperparams hp;
        hp.l2_lambda = detail::log_uniform(rng, 1e-6, 10.0);
        hp.learning_rate = detail::log_uniform(rng, 1e-3, 1.0);
        double e = detail::log_uniform(rng, 100.0, 2000.0);
        hp.epochs = static_cast<int>(std::lround(e));
        hp.epochs = std::max(100, std::min(2000, hp.epochs));

        LogisticModel candidate =
            train(train_split, hp, static_cast<std::uint64_t>(i), use_sufficiency);
        double val_loss = nll_loss(candidate.weights, candidate.bias, val_split, 0.0);
        if (!have_best || val_loss < best_loss) {
            have_best = true;
            best_loss = val_loss;
            best_index = static_cast<std::size_t>(i);
            best_hp = hp;
        }
    }

    LogisticModel model = train(data, best_hp, seed, use_sufficiency);
    if (report != nullptr) {
        report->best_index = best_index;
        report->best_hyperparams = best_hp;
        report->best_val_loss = best_loss;
        report->n_train = n_train;
        report->n_val = n_val;
        std::size_t hits = 0;
        for (const TrainingExample& ex : val_split) {
            bool predicted = score(model, ex.features) >= 0.5;
            if (predicted == ex.label) ++hits;
        }
        report->val_accuracy = static_cast<double>(hits) / static_cast<double>(val_split.size());
    }
    return model;
}

}  // namespace ragaudit
