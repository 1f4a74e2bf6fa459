#include "puminer/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace puminer {

void ConfusionPU::validate() const {
    if (predicted_pos() > total) throw std::invalid_argument("confusion: predicted_pos > total");
    if (tp_u > u_size) throw std::invalid_argument("confusion: tp_u > u_size");
    if (tp_p + fn_p > total) throw std::invalid_argument("confusion: |P| exceeds total");
}

namespace {

// 0/0 convention: the metric is pinned to 0 and flagged, never NaN.
void set_ratio(MetricsReport& r, const std::string& name, double num, double den) {
    if (den == 0) {
        r.values[name] = 0.0;
        r.degenerate.insert(name);
    } else {
        r.values[name] = num / den;
    }
}

double harmonic(MetricsReport& r, const std::string& name, double p, double rec) {
    if (p + rec == 0) {
        r.values[name] = 0.0;
        r.degenerate.insert(name);
        return 0.0;
    }
    double f1 = 2.0 * p * rec / (p + rec);
    r.values[name] = f1;
    return f1;
}

}  // namespace

MetricsReport pu_metrics(const ConfusionPU& c, const PUEvalConfig& cfg) {
    if (cfg.r < 0 || cfg.r > 1) throw std::invalid_argument("r out of [0,1]");
    c.validate();
    MetricsReport rep;
    double pp = double(c.predicted_pos());
    set_ratio(rep, "precision_pu_lb", double(c.tp_p), pp);
    double capped = std::min(cfg.r * double(c.u_size), double(c.tp_u + c.fp));
    set_ratio(rep, "precision_pu_ub", double(c.tp_p) + capped, pp);
    set_ratio(rep, "recall_pu", double(c.tp_p), double(c.tp_p + c.fn_p));
    double recall = rep.values["recall_pu"];
    harmonic(rep, "f1_score_pu_lb", rep.values["precision_pu_lb"], recall);
    harmonic(rep, "f1_score_pu_ub", rep.values["precision_pu_ub"], recall);
    set_ratio(rep, "g_mean_pu", double(c.total) * recall * recall, pp);
    return rep;
}

MetricsReport pn_metrics(const ConfusionPN& c) {
    if (c.tp + c.fp + c.tn + c.fn == 0)
        throw std::invalid_argument("pn_metrics: empty confusion");
    MetricsReport rep;
    set_ratio(rep, "precision_pn", double(c.tp), double(c.tp + c.fp));
    set_ratio(rep, "recall_pn", double(c.tp), double(c.tp + c.fn));
    harmonic(rep, "f1_score_pn", rep.values["precision_pn"], rep.values["recall_pn"]);
    rep.values["g_mean_pn"] = std::sqrt(rep.values["precision_pn"] * rep.values["recall_pn"]);
    double denom = std::sqrt(double(c.tp + c.fp)) * std::sqrt(double(c.tp + c.fn)) *
                   std::sqrt(double(c.tn + c.fp)) * std::sqrt(double(c.tn + c.fn));
    if (denom == 0) {
        rep.values["mcc_pn"] = 0.0;
        rep.degenerate.insert("mcc_pn");
    } else {
        rep.values["mcc_pn"] =
            (double(c.tp) * double(c.tn) - double(c.fp) * double(c.fn)) / denom;
    }
    return rep;
}

double gmean_scale(double gmean_pu, double prior) {
    if (gmean_pu < 0) throw std::invalid_argument("gmean_scale: negative g-mean");
    if (!(prior > 0) || prior > 1) throw std::invalid_argument("gmean_scale: prior out of (0,1]");
    return std::sqrt(gmean_pu * prior);
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    for (const auto& [k, v] : values) j["metrics"][k] = v;
    j["degenerate"] = std::vector<std::string>(degenerate.begin(), degenerate.end());
    if (!config_echo.is_null()) j["config"] = config_echo;
    return j.dump(2) + "\n";
}

std::string MetricsReport::to_csv() const {
    std::string header, row;
    for (const auto& [k, v] : values) {
        if (!header.empty()) {
            header += ',';
            row += ',';
        }
        header += k;
        row += format_double(v);
    }
    return header + "\n" + row + "\n";
}

// ---------------------------------------------------------------------------
// Cross-validation

namespace {

std::vector<std::vector<size_t>> stratified_folds(const std::vector<CVExample>& dataset, int k,
                                                  uint64_t seed) {
    std::map<std::string, std::vector<size_t>> strata;
    for (size_t i = 0; i < dataset.size(); ++i) strata[dataset[i].stratum].push_back(i);
    for (const auto& [name, members] : strata)
        if (members.size() < size_t(k))
            throw InputError("stratum '" + name + "' has " + std::to_string(members.size()) +
                             " examples, fewer than k=" + std::to_string(k));
    std::mt19937_64 rng(seed);
    std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
    for (auto& [name, members] : strata) {
        std::shuffle(members.begin(), members.end(), rng);
        for (size_t i = 0; i < members.size(); ++i)
            folds[i % size_t(k)].push_back(members[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct FoldContext {
    EmbeddingModel embedding;
    TrainingSplit split;                 // train-fold doc vectors by PU label
    std::vector<size_t> validation;      // dataset indices
    std::vector<std::optional<std::vector<float>>> val_vectors;  // nullopt = uninferable
};

}  // namespace

CVResult stratified_kfold_cv(const std::vector<CVExample>& dataset, const CVPlan& plan,
                             const PUTrainer& trainer) {
    if (plan.k < 2) throw std::invalid_argument("cv: k must be >= 2");
    if (plan.grid.empty()) throw std::invalid_argument("cv: empty configuration grid");
    for (const auto& c : plan.grid) c.validate();
    PUTrainer train = trainer ? trainer : PUTrainer(&train_pu_model);

    CVResult result;
    result.fold_assignment = stratified_folds(dataset, plan.k, plan.seed);

    // Per-fold work (embedding + inference) is independent of the config,
    // so each fold is prepared once and shared across the whole grid.
    std::vector<FoldContext> contexts(size_t(plan.k));
    {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        int workers = std::max(1, std::min(plan.workers, plan.k));
        auto prepare = [&]() {
            for (size_t f; (f = next.fetch_add(1)) < size_t(plan.k);) {
                FoldContext& ctx = contexts[f];
                ctx.validation = result.fold_assignment[f];
                std::vector<TrainDoc> docs;
                std::vector<size_t> train_idx;
                for (size_t g = 0; g < size_t(plan.k); ++g) {
                    if (g == f) continue;
                    for (size_t idx : result.fold_assignment[g]) train_idx.push_back(idx);
                }
                std::sort(train_idx.begin(), train_idx.end());
                docs.reserve(train_idx.size());
                for (size_t idx : train_idx)
                    docs.push_back({dataset[idx].tokens, dataset[idx].doc_labels});
                EmbeddingConfig ecfg = plan.embedding;
                ecfg.seed = plan.seed + f + 1;
                ctx.embedding = train_pvdm(docs, ecfg);

                for (size_t idx : train_idx) {
                    auto vec = ctx.embedding.label_vector(std::to_string(dataset[idx].id));
                    if (dataset[idx].labelled_positive)
                        ctx.split.positives.push_back(std::move(vec));
                    else
                        ctx.split.unlabelled.push_back(std::move(vec));
                }
                ctx.val_vectors.resize(ctx.validation.size());
                for (size_t v = 0; v < ctx.validation.size(); ++v) {
                    const CVExample& ex = dataset[ctx.validation[v]];
                    try {
                        ctx.val_vectors[v] = ctx.embedding.infer_vector(
                            ex.tokens, ecfg.epochs, plan.seed + uint64_t(ex.id));
                    } catch (const UninferablePostError&) {
                        ctx.val_vectors[v] = std::nullopt;
                    }
                }
            }
        };
        for (int w = 0; w < workers; ++w) pool.emplace_back(prepare);
        for (auto& t : pool) t.join();
    }

    struct Cell {
        MetricsReport metrics;
        bool degenerate = false;
        size_t uninferable = 0;
    };
    std::vector<std::vector<Cell>> cells(plan.grid.size(), std::vector<Cell>(size_t(plan.k)));
    {
        std::atomic<size_t> next{0};
        size_t total_cells = plan.grid.size() * size_t(plan.k);
        std::vector<std::thread> pool;
        int workers = std::max(1, plan.workers);
        auto run_cell = [&]() {
            for (size_t cell; (cell = next.fetch_add(1)) < total_cells;) {
                size_t ci = cell / size_t(plan.k);
                size_t f = cell % size_t(plan.k);
                FoldContext& ctx = contexts[f];
                Cell& out = cells[ci][f];
                PUConfig cfg = plan.grid[ci];
                cfg.seed = plan.seed;
                PUModel model;
                try {
                    model = train(ctx.split, cfg);
                } catch (const DegenerateModelError&) {
                    out.degenerate = true;
                    continue;
                }
                ConfusionPU confusion;
                confusion.total = ctx.validation.size();
                for (size_t v = 0; v < ctx.validation.size(); ++v) {
                    const CVExample& ex = dataset[ctx.validation[v]];
                    bool predicted_pos = false;
                    if (ctx.val_vectors[v]) {
                        double score = model.score_vector(*ctx.val_vectors[v]);
                        predicted_pos = score >= plan.decision_threshold;
                    } else {
                        ++out.uninferable;  // counted as predicted negative
                    }
                    if (ex.labelled_positive) {
                        predicted_pos ? ++confusion.tp_p : ++confusion.fn_p;
                    } else {
                        ++confusion.u_size;
                        if (predicted_pos) ++confusion.tp_u;
                    }
                }
                out.metrics = pu_metrics(confusion, plan.eval);
            }
        };
        for (int w = 0; w < workers; ++w) pool.emplace_back(run_cell);
        for (auto& t : pool) t.join();
    }

    for (size_t ci = 0; ci < plan.grid.size(); ++ci) {
        CVConfigResult cr;
        cr.config_index = ci;
        cr.config = plan.grid[ci];
        size_t degenerate_folds = 0;
        std::map<std::string, double> sums;
        size_t ok_folds = 0;
        for (size_t f = 0; f < size_t(plan.k); ++f) {
            const Cell& cell = cells[ci][f];
            CVFoldReport fr;
            fr.fold = f;
            fr.metrics = cell.metrics;
            fr.degenerate = cell.degenerate;
            fr.uninferable = cell.uninferable;
            cr.folds.push_back(std::move(fr));
            if (cell.degenerate) {
                ++degenerate_folds;
                continue;
            }
            ++ok_folds;
            for (const auto& [k, v] : cell.metrics.values) sums[k] += v;
        }
        cr.failed = degenerate_folds * 2 > size_t(plan.k);
        if (ok_folds > 0)
            for (const auto& [k, v] : sums) cr.mean.values[k] = v / double(ok_folds);
        cr.mean.config_echo = cr.config.to_json();
        auto it = cr.mean.values.find(plan.selection_metric);
        cr.selection_value = it == cr.mean.values.end() ? 0.0 : it->second;
        result.ranked.push_back(std::move(cr));
    }

    std::stable_sort(result.ranked.begin(), result.ranked.end(),
                     [](const CVConfigResult& a, const CVConfigResult& b) {
                         if (a.failed != b.failed) return !a.failed;
                         if (a.selection_value != b.selection_value)
                             return a.selection_value > b.selection_value;
                         double pa = a.mean.values.count("precision_pu_lb")
                                         ? a.mean.values.at("precision_pu_lb") : 0;
                         double pb = b.mean.values.count("precision_pu_lb")
                                         ? b.mean.values.at("precision_pu_lb") : 0;
                         if (pa != pb) return pa > pb;
                         return a.config_index < b.config_index;
                     });
    return result;
}

nlohmann::json CVResult::to_json() const {
    nlohmann::json j;
    j["configurations"] = nlohmann::json::array();
    for (const auto& cr : ranked) {
        nlohmann::json c;
        c["config_index"] = cr.config_index;
        c["config"] = cr.config.to_json();
        c["status"] = cr.failed ? "degenerate" : "ok";
        c["selection_value"] = cr.selection_value;
        for (const auto& [k, v] : cr.mean.values) c["mean"][k] = v;
        c["folds"] = nlohmann::json::array();
        for (const auto& f : cr.folds) {
            nlohmann::json fj;
            fj["fold"] = f.fold;
            fj["degenerate"] = f.degenerate;
            fj["uninferable"] = f.uninferable;
            for (const auto& [k, v] : f.metrics.values) fj["metrics"][k] = v;
            c["folds"].push_back(std::move(fj));
        }
        j["configurations"].push_back(std::move(c));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Statistical comparisons

namespace {

// Lexicographic successor of an increasing index combination out of {0..n-1}.
bool next_combination(std::vector<size_t>& comb, size_t n) {
    size_t k = comb.size();
    size_t i = k;
    while (i-- > 0) {
        if (comb[i] < n - k + i) {
            ++comb[i];
            for (size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
            return true;
        }
    }
    return false;
}

std::vector<double> midranks(const std::vector<double>& pooled_sorted) {
    size_t n = pooled_sorted.size();
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && pooled_sorted[j + 1] == pooled_sorted[i]) ++j;
        double rank = (double(i + 1) + double(j + 1)) / 2.0;
        for (size_t t = i; t <= j; ++t) ranks[t] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    size_t na = a.size(), nb = b.size(), n = na + nb;

    struct Item {
        double value;
        bool from_a;
    };
    std::vector<Item> pooled;
    pooled.reserve(n);
    for (double v : a) pooled.push_back({v, true});
    for (double v : b) pooled.push_back({v, false});
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const Item& x, const Item& y) { return x.value < y.value; });
    std::vector<double> values(n);
    for (size_t i = 0; i < n; ++i) values[i] = pooled[i].value;
    std::vector<double> ranks = midranks(values);

    double rank_sum_a = 0;
    for (size_t i = 0; i < n; ++i)
        if (pooled[i].from_a) rank_sum_a += ranks[i];
    double u_obs = rank_sum_a - double(na) * double(na + 1) / 2.0;
    double mu = double(na) * double(nb) / 2.0;

    MannWhitneyResult res;
    res.u = u_obs;

    if (n <= 16) {
        res.exact = true;
        // enumerate which sorted positions belong to sample a
        std::vector<size_t> comb(na);
        std::iota(comb.begin(), comb.end(), 0);
        uint64_t count_le = 0, count_ge = 0, count_extreme = 0, total = 0;
        const double eps = 1e-9;
        double obs_dev = std::abs(u_obs - mu);
        do {
            double rs = 0;
            for (size_t idx : comb) rs += ranks[idx];
            double u = rs - double(na) * double(na + 1) / 2.0;
            ++total;
            if (u <= u_obs + eps) ++count_le;
            if (u >= u_obs - eps) ++count_ge;
            if (std::abs(u - mu) >= obs_dev - eps) ++count_extreme;
        } while (next_combination(comb, n));
        switch (alternative) {
            case Alternative::Less: res.p = double(count_le) / double(total); break;
            case Alternative::Greater: res.p = double(count_ge) / double(total); break;
            case Alternative::TwoSided: res.p = double(count_extreme) / double(total); break;
        }
        return res;
    }

    // normal approximation with tie correction
    double tie_term = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[j + 1] == values[i]) ++j;
        double t = double(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double var = double(na) * double(nb) / 12.0 *
                 (double(n + 1) - tie_term / (double(n) * double(n - 1)));
    if (var <= 0) {  // all observations tied
        res.p = 1.0;
        return res;
    }
    double sigma = std::sqrt(var);
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    switch (alternative) {
        case Alternative::Less:
            res.p = phi((u_obs - mu + 0.5) / sigma);
            break;
        case Alternative::Greater:
            res.p = phi((mu - u_obs + 0.5) / sigma);
            break;
        case Alternative::TwoSided: {
            double z = (std::abs(u_obs - mu) - 0.5) / sigma;
            res.p = std::min(1.0, 2.0 * (1.0 - phi(z)));
            break;
        }
    }
    return res;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("cohens_d: each sample needs >= 2 elements");
    auto mean = [](std::span<const double> s) {
        double m = 0;
        for (double v : s) m += v;
        return m / double(s.size());
    };
    auto var = [&](std::span<const double> s, double m) {
        double acc = 0;
        for (double v : s) acc += (v - m) * (v - m);
        return acc / double(s.size() - 1);
    };
    double ma = mean(a), mb = mean(b);
    double va = var(a, ma), vb = var(b, mb);
    double pooled = std::sqrt((double(a.size() - 1) * va + double(b.size() - 1) * vb) /
                              double(a.size() + b.size() - 2));
    if (pooled == 0) throw std::invalid_argument("cohens_d: zero pooled standard deviation");
    return (ma - mb) / pooled;
}

// ---------------------------------------------------------------------------
// PCA

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major).
void jacobi_eigen(std::vector<double>& m, size_t d, std::vector<double>& eigvals,
                  std::vector<double>& eigvecs) {
    eigvecs.assign(d * d, 0.0);
    for (size_t i = 0; i < d; ++i) eigvecs[i * d + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) off += m[p * d + q] * m[p * d + q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) {
                double apq = m[p * d + q];
                if (std::abs(apq) < 1e-300) continue;
                double app = m[p * d + p], aqq = m[q * d + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t i = 0; i < d; ++i) {
                    double aip = m[i * d + p], aiq = m[i * d + q];
                    m[i * d + p] = c * aip - s * aiq;
                    m[i * d + q] = s * aip + c * aiq;
                }
                for (size_t i = 0; i < d; ++i) {
                    double api = m[p * d + i], aqi = m[q * d + i];
                    m[p * d + i] = c * api - s * aqi;
                    m[q * d + i] = s * api + c * aqi;
                }
                for (size_t i = 0; i < d; ++i) {
                    double vip = eigvecs[i * d + p], viq = eigvecs[i * d + q];
                    eigvecs[i * d + p] = c * vip - s * viq;
                    eigvecs[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.resize(d);
    for (size_t i = 0; i < d; ++i) eigvals[i] = m[i * d + i];
}

}  // namespace

PCAResult project_pca(const std::vector<std::vector<float>>& vectors, int components) {
    if (components < 1) throw std::invalid_argument("pca: components must be >= 1");
    size_t n = vectors.size();
    if (n < size_t(components) + 1)
        throw std::invalid_argument("pca: need at least components+1 vectors");
    size_t d = vectors[0].size();
    for (const auto& v : vectors)
        if (v.size() != d) throw std::invalid_argument("pca: dimension mismatch");

    std::vector<double> mean(d, 0.0);
    for (const auto& v : vectors)
        for (size_t j = 0; j < d; ++j) mean[j] += v[j];
    for (auto& m : mean) m /= double(n);

    std::vector<double> centered(n * d);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) centered[i * d + j] = double(vectors[i][j]) - mean[j];

    std::vector<double> cov(d * d, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t p = 0; p < d; ++p) {
            double cp = centered[i * d + p];
            if (cp == 0) continue;
            for (size_t q = p; q < d; ++q) cov[p * d + q] += cp * centered[i * d + q];
        }
    for (size_t p = 0; p < d; ++p)
        for (size_t q = p; q < d; ++q) {
            cov[p * d + q] /= double(n - 1);
            cov[q * d + p] = cov[p * d + q];
        }

    std::vector<double> eigvals, eigvecs;
    jacobi_eigen(cov, d, eigvals, eigvecs);

    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return eigvals[a] > eigvals[b]; });

    double total_var = 0;
    for (double v : eigvals) total_var += std::max(v, 0.0);
    double max_eig = eigvals[order[0]];
    if (!(max_eig > 0)) throw InputError("pca: data has zero variance");
    for (int cidx = 0; cidx < components; ++cidx) {
        double ev = eigvals[order[size_t(cidx)]];
        if (ev <= max_eig * 1e-12)
            throw InputError("pca: data rank below requested components");
    }

    PCAResult result;
    result.coordinates.assign(n, std::vector<double>(size_t(components), 0.0));
    result.explained_variance_ratio.resize(size_t(components));
    for (int cidx = 0; cidx < components; ++cidx) {
        size_t col = order[size_t(cidx)];
        std::vector<double> axis(d);
        for (size_t i = 0; i < d; ++i) axis[i] = eigvecs[i * d + col];
        // sign convention: largest-magnitude coordinate positive, first on tie
        size_t arg = 0;
        for (size_t i = 1; i < d; ++i)
            if (std::abs(axis[i]) > std::abs(axis[arg])) arg = i;
        if (axis[arg] < 0)
            for (auto& x : axis) x = -x;
        for (size_t i = 0; i < n; ++i) {
            double dot = 0;
            for (size_t j = 0; j < d; ++j) dot += centered[i * d + j] * axis[j];
            result.coordinates[i][size_t(cidx)] = dot;
        }
        result.explained_variance_ratio[size_t(cidx)] =
            total_var > 0 ? std::max(eigvals[col], 0.0) / total_var : 0.0;
    }
    return result;
}

}  // namespace puminer
