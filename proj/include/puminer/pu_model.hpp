#pragma once

// Two-stage PU classifier: centroid-based reliable-negative selection,
// then a binary classifier over positives vs reliable negatives. Includes
// the pseudo-negative (PPN) baseline that skips stage 1.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "puminer/common.hpp"
#include "puminer/embedding.hpp"

namespace puminer {

struct Centroid {
    std::vector<double> vector;
    size_t count = 0;
};

Centroid compute_centroid(const std::vector<std::vector<float>>& members);

// O(1) update: (old * N + sum(new)) / (N + |new|).
Centroid update_centroid_incremental(const Centroid& old,
                                     const std::vector<std::vector<float>>& new_vectors);

enum class ClassifierKind { LogisticRegression, LinearSVM, KNN, Plugin };

const char* classifier_kind_name(ClassifierKind k);
ClassifierKind classifier_kind_from_name(const std::string& name);

struct PUConfig {
    double alpha = 1.1;
    ClassifierKind kind = ClassifierKind::LogisticRegression;
    double regularization_c = 1.0;  // LR / linear SVM
    int knn_neighbors = 11;
    bool knn_distance_weighted = false;
    int knn_norm = 2;  // 1 or 2
    std::string plugin_name;
    double min_rn_fraction = 0.05;
    uint64_t seed = 1;

    // gradient-descent stopping criteria
    double lr_tolerance = 1e-6;   // gradient norm
    int lr_max_iterations = 5000;
    double svm_tolerance = 1e-8;  // relative objective change
    int svm_max_iterations = 5000;

    void validate() const;
    std::string describe() const;
    nlohmann::json to_json() const;
    static PUConfig from_json(const nlohmann::json& j);
};

struct TrainingSplit {
    std::vector<std::vector<float>> positives;
    std::vector<std::vector<float>> unlabelled;
};

// Indices into split.unlabelled with d(x, centroid_U) < alpha * d(x, centroid_P),
// strict. Throws DegenerateModelError (message carries alpha and a distance
// histogram) when fewer than min_rn_fraction * |U| qualify.
std::vector<size_t> select_reliable_negatives(const TrainingSplit& split,
                                              const Centroid& centroid_p,
                                              const Centroid& centroid_u, double alpha,
                                              double min_rn_fraction);

// Serialized classifier: scalars in meta, parameters as one flat array
// (stored on disk as little-endian float64 so reloads score identically).
struct ClassifierState {
    std::string kind;
    nlohmann::json meta;
    std::vector<double> params;
};

class Stage2Classifier {
public:
    virtual ~Stage2Classifier() = default;
    // y holds 1 (positive) / 0 (negative). Returns false when the solver
    // hit its iteration cap before converging (best iterate kept).
    virtual bool fit(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
                     const PUConfig& config) = 0;
    // positive-class confidence in [0, 1]
    virtual double score(std::span<const float> x) const = 0;
    virtual ClassifierState state() const = 0;
    virtual void restore(const ClassifierState& state) = 0;
};

// External classifiers register a factory under a name and are selected
// with ClassifierKind::Plugin + plugin_name.
using PluginFactory = std::function<std::unique_ptr<Stage2Classifier>()>;
void register_plugin_classifier(const std::string& name, PluginFactory factory);

std::unique_ptr<Stage2Classifier> make_classifier(const PUConfig& config);

// L2-regularized mean logistic loss over wb = [w..., b] (bias unpenalized);
// exposed so the analytic gradient can be checked by finite differences.
double logistic_loss(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
                     std::span<const double> wb, double lambda);
std::vector<double> logistic_gradient(const std::vector<std::vector<float>>& x,
                                      const std::vector<int>& y, std::span<const double> wb,
                                      double lambda);

struct PredictOutcome {
    bool security = false;
    double score = 0.0;
    bool inferable = true;
};

class PUModel {
public:
    PUConfig config;
    Centroid centroid_p;
    Centroid centroid_u;
    bool ppn_baseline = false;
    std::string embedding_hash;
    size_t trained_positives = 0;
    size_t trained_reliable_negatives = 0;
    bool stage2_converged = true;

    double score_vector(std::span<const float> vec) const;

    // Infers the post vector, applies the stage-2 decision. Tie at the
    // threshold goes to Security. Uninferable posts come back flagged,
    // never silently negative.
    PredictOutcome predict(const EmbeddingModel& embedding,
                           const std::vector<std::string>& tokens,
                           double threshold = 0.5, uint64_t seed = 1) const;

    void save(const std::filesystem::path& dir) const;
    static PUModel load(const std::filesystem::path& dir);

    const Stage2Classifier* classifier() const { return classifier_.get(); }
    void set_classifier(std::unique_ptr<Stage2Classifier> c) { classifier_ = std::move(c); }

private:
    std::unique_ptr<Stage2Classifier> classifier_;
};

PUModel train_stage2(const std::vector<std::vector<float>>& positives,
                     const std::vector<std::vector<float>>& reliable_negatives,
                     const PUConfig& config);

// Full two-stage pipeline over a split.
PUModel train_pu_model(const TrainingSplit& split, const PUConfig& config);

// Stage 1 skipped; every unlabelled vector is treated as a negative.
PUModel train_ppn_baseline(const TrainingSplit& split, const PUConfig& config);

}  // namespace puminer
