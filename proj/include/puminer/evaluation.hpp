#pragma once

// PU- and ground-truth metrics, G-mean rank scaling, stratified k-fold
// cross-validation with grid search, Mann-Whitney U / Cohen's d, and PCA
// projection for plotting.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "puminer/embedding.hpp"
#include "puminer/pu_model.hpp"

namespace puminer {

struct ConfusionPU {
    size_t tp_p = 0;   // predicted positive within labelled P
    size_t fn_p = 0;   // predicted negative within labelled P
    size_t tp_u = 0;   // predicted positive within U
    size_t fp = 0;     // predicted positive within known negatives (0 in pure PU)
    size_t u_size = 0;
    size_t total = 0;

    size_t predicted_pos() const { return tp_p + tp_u + fp; }
    void validate() const;
};

struct ConfusionPN {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct PUEvalConfig {
    double r = 0.025;  // assumed positive ratio inside U
    std::optional<double> prior;  // P(y=1), for G-mean scaling
};

struct MetricsReport {
    std::map<std::string, double> values;     // snake_case Table-3 names
    std::set<std::string> degenerate;         // 0/0 cases pinned to 0
    nlohmann::json config_echo;

    std::string to_json() const;
    std::string to_csv() const;
};

MetricsReport pu_metrics(const ConfusionPU& c, const PUEvalConfig& cfg);
MetricsReport pn_metrics(const ConfusionPN& c);

// sqrt(gmean_pu * prior): the PN-scale approximation of a PU G-mean.
double gmean_scale(double gmean_pu, double prior);

// ---------------------------------------------------------------------------
// Cross-validation

struct CVExample {
    int64_t id = 0;
    std::vector<std::string> tokens;
    std::vector<std::string> doc_labels;
    bool labelled_positive = false;
    std::string stratum;
};

struct CVPlan {
    int k = 10;
    std::vector<PUConfig> grid;
    std::string selection_metric = "g_mean_pu";
    uint64_t seed = 1;
    EmbeddingConfig embedding;
    PUEvalConfig eval;
    int workers = 1;
    double decision_threshold = 0.5;
};

using PUTrainer = std::function<PUModel(const TrainingSplit&, const PUConfig&)>;

struct CVFoldReport {
    size_t fold = 0;
    MetricsReport metrics;
    bool degenerate = false;
    size_t uninferable = 0;
};

struct CVConfigResult {
    size_t config_index = 0;
    PUConfig config;
    std::vector<CVFoldReport> folds;
    MetricsReport mean;          // over non-degenerate folds
    double selection_value = 0;
    bool failed = false;         // degenerate in more than half the folds
};

struct CVResult {
    std::vector<CVConfigResult> ranked;
    std::vector<std::vector<size_t>> fold_assignment;  // example indices per fold
    nlohmann::json to_json() const;
};

// Deterministic given plan.seed: fold split stratified on `stratum`, one
// embedding per fold trained on the k-1 training folds, every grid config
// evaluated on the held-out fold, means ranked by the selection metric
// (ties: precision_pu_lb, then grid order).
CVResult stratified_kfold_cv(const std::vector<CVExample>& dataset, const CVPlan& plan,
                             const PUTrainer& trainer = {});

// ---------------------------------------------------------------------------
// Statistical comparisons

enum class Alternative { Less, Greater, TwoSided };

struct MannWhitneyResult {
    double u = 0;  // U statistic of sample a
    double p = 1;
    bool exact = false;
};

// Midranks for ties; exact enumeration when n_a + n_b <= 16, otherwise the
// normal approximation with tie correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative);

// (mean_a - mean_b) / pooled SD (n-1 denominators).
double cohens_d(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// PCA projection

struct PCAResult {
    std::vector<std::vector<double>> coordinates;  // n x components
    std::vector<double> explained_variance_ratio;  // per component
};

// Mean-centered projection onto the top principal directions. Sign pinned:
// the largest-magnitude coordinate of each component is positive.
PCAResult project_pca(const std::vector<std::vector<float>>& vectors, int components = 2);

}  // namespace puminer
