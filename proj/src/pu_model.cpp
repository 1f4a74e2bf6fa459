#include "puminer/pu_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <sstream>

namespace puminer {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Centroid compute_centroid(const std::vector<std::vector<float>>& members) {
    if (members.empty()) throw std::invalid_argument("compute_centroid: empty set");
    size_t dim = members[0].size();
    std::vector<double> acc(dim, 0.0);
    for (const auto& v : members) {
        if (v.size() != dim) throw std::invalid_argument("compute_centroid: dimension mismatch");
        for (size_t i = 0; i < dim; ++i) acc[i] += v[i];
    }
    Centroid c;
    c.count = members.size();
    c.vector.resize(dim);
    for (size_t i = 0; i < dim; ++i) c.vector[i] = acc[i] / double(members.size());
    return c;
}

Centroid update_centroid_incremental(const Centroid& old,
                                     const std::vector<std::vector<float>>& new_vectors) {
    if (old.count == 0) throw std::invalid_argument("update_centroid: invalid old centroid");
    if (new_vectors.empty()) throw std::invalid_argument("update_centroid: no new vectors");
    size_t dim = old.vector.size();
    std::vector<double> acc(dim, 0.0);
    for (const auto& v : new_vectors) {
        if (v.size() != dim) throw std::invalid_argument("update_centroid: dimension mismatch");
        for (size_t i = 0; i < dim; ++i) acc[i] += v[i];
    }
    Centroid out;
    out.count = old.count + new_vectors.size();
    out.vector.resize(dim);
    for (size_t i = 0; i < dim; ++i)
        out.vector[i] = (old.vector[i] * double(old.count) + acc[i]) / double(out.count);
    return out;
}

const char* classifier_kind_name(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::LogisticRegression: return "lr";
        case ClassifierKind::LinearSVM: return "svm";
        case ClassifierKind::KNN: return "knn";
        case ClassifierKind::Plugin: return "plugin";
    }
    return "lr";
}

ClassifierKind classifier_kind_from_name(const std::string& name) {
    if (name == "lr") return ClassifierKind::LogisticRegression;
    if (name == "svm") return ClassifierKind::LinearSVM;
    if (name == "knn") return ClassifierKind::KNN;
    if (name == "plugin") return ClassifierKind::Plugin;
    throw InputError("unknown classifier kind: " + name);
}

void PUConfig::validate() const {
    if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
    if (!(regularization_c > 0)) throw std::invalid_argument("regularization coefficient must be positive");
    if (knn_neighbors < 1) throw std::invalid_argument("knn neighbors must be >= 1");
    if (knn_norm != 1 && knn_norm != 2) throw std::invalid_argument("knn norm must be 1 or 2");
    if (min_rn_fraction < 0 || min_rn_fraction > 1)
        throw std::invalid_argument("min_rn_fraction out of [0,1]");
    if (kind == ClassifierKind::Plugin && plugin_name.empty())
        throw std::invalid_argument("plugin classifier requires plugin_name");
}

std::string PUConfig::describe() const {
    std::ostringstream ss;
    ss << "alpha=" << alpha << " " << classifier_kind_name(kind);
    switch (kind) {
        case ClassifierKind::LogisticRegression:
        case ClassifierKind::LinearSVM:
            ss << " C=" << regularization_c;
            break;
        case ClassifierKind::KNN:
            ss << " k=" << knn_neighbors << " weight=" << (knn_distance_weighted ? "distance" : "uniform")
               << " norm=" << knn_norm;
            break;
        case ClassifierKind::Plugin:
            ss << " name=" << plugin_name;
            break;
    }
    return ss.str();
}

nlohmann::json PUConfig::to_json() const {
    return {{"alpha", alpha},
            {"classifier", classifier_kind_name(kind)},
            {"regularization_c", regularization_c},
            {"knn_neighbors", knn_neighbors},
            {"knn_distance_weighted", knn_distance_weighted},
            {"knn_norm", knn_norm},
            {"plugin_name", plugin_name},
            {"min_rn_fraction", min_rn_fraction},
            {"seed", seed},
            {"lr_tolerance", lr_tolerance},
            {"lr_max_iterations", lr_max_iterations},
            {"svm_tolerance", svm_tolerance},
            {"svm_max_iterations", svm_max_iterations}};
}

PUConfig PUConfig::from_json(const nlohmann::json& j) {
    PUConfig c;
    c.alpha = j.value("alpha", c.alpha);
    c.kind = classifier_kind_from_name(j.value("classifier", std::string("lr")));
    c.regularization_c = j.value("regularization_c", c.regularization_c);
    c.knn_neighbors = j.value("knn_neighbors", c.knn_neighbors);
    c.knn_distance_weighted = j.value("knn_distance_weighted", c.knn_distance_weighted);
    c.knn_norm = j.value("knn_norm", c.knn_norm);
    c.plugin_name = j.value("plugin_name", c.plugin_name);
    c.min_rn_fraction = j.value("min_rn_fraction", c.min_rn_fraction);
    c.seed = j.value("seed", c.seed);
    c.lr_tolerance = j.value("lr_tolerance", c.lr_tolerance);
    c.lr_max_iterations = j.value("lr_max_iterations", c.lr_max_iterations);
    c.svm_tolerance = j.value("svm_tolerance", c.svm_tolerance);
    c.svm_max_iterations = j.value("svm_max_iterations", c.svm_max_iterations);
    return c;
}

std::vector<size_t> select_reliable_negatives(const TrainingSplit& split,
                                              const Centroid& centroid_p,
                                              const Centroid& centroid_u, double alpha,
                                              double min_rn_fraction) {
    if (centroid_p.count == 0 || centroid_u.count == 0)
        throw std::invalid_argument("select_reliable_negatives: empty centroid");
    std::vector<size_t> rn;
    std::vector<double> ratio_histogram(10, 0);  // d_U / (alpha * d_P) buckets
    for (size_t i = 0; i < split.unlabelled.size(); ++i) {
        const auto& x = split.unlabelled[i];
        double du = cosine_distance(x, centroid_u.vector);
        double dp = cosine_distance(x, centroid_p.vector);
        if (du < alpha * dp) rn.push_back(i);
        double denom = alpha * dp;
        double r = denom > 0 ? du / denom : 10.0;
        size_t bucket = std::min<size_t>(9, size_t(r * 5.0));
        ++ratio_histogram[bucket];
    }
    double floor_count = min_rn_fraction * double(split.unlabelled.size());
    if (double(rn.size()) < floor_count) {
        std::ostringstream ss;
        ss << "degenerate stage 1: |RN|=" << rn.size() << " of |U|=" << split.unlabelled.size()
           << " (floor " << floor_count << ") at alpha=" << alpha
           << "; d_U/(alpha*d_P) histogram [0,2) step 0.2:";
        for (double b : ratio_histogram) ss << ' ' << size_t(b);
        throw DegenerateModelError(ss.str());
    }
    return rn;
}

double logistic_loss(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
                     std::span<const double> wb, double lambda) {
    size_t n = x.size();
    size_t dim = wb.size() - 1;
    double b = wb[dim];
    double loss = 0;
    for (size_t i = 0; i < n; ++i) {
        double z = b;
        for (size_t j = 0; j < dim; ++j) z += wb[j] * double(x[i][j]);
        // log(1 + exp(-t z)) with t in {-1, +1}, computed stably
        double tz = (y[i] > 0 ? z : -z);
        loss += tz > 0 ? std::log1p(std::exp(-tz)) : -tz + std::log1p(std::exp(tz));
    }
    loss /= double(n);
    double reg = 0;
    for (size_t j = 0; j < dim; ++j) reg += wb[j] * wb[j];
    return loss + 0.5 * lambda * reg;
}

std::vector<double> logistic_gradient(const std::vector<std::vector<float>>& x,
                                      const std::vector<int>& y, std::span<const double> wb,
                                      double lambda) {
    size_t n = x.size();
    size_t dim = wb.size() - 1;
    double b = wb[dim];
    std::vector<double> grad(dim + 1, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double z = b;
        for (size_t j = 0; j < dim; ++j) z += wb[j] * double(x[i][j]);
        double err = sigmoid(z) - double(y[i]);  // d loss / d z
        for (size_t j = 0; j < dim; ++j) grad[j] += err * double(x[i][j]);
        grad[dim] += err;
    }
    for (auto& g : grad) g /= double(n);
    for (size_t j = 0; j < dim; ++j) grad[j] += lambda * wb[j];
    return grad;
}

namespace {

double grad_norm(const std::vector<double>& g) {
    double s = 0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
}

class LogisticRegressionClassifier : public Stage2Classifier {
public:
    bool fit(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
             const PUConfig& config) override {
        size_t dim = x[0].size();
        lambda_ = 1.0 / (config.regularization_c * double(x.size()));
        wb_.assign(dim + 1, 0.0);
        double step = 1.0;
        double loss = logistic_loss(x, y, wb_, lambda_);
        bool converged = false;
        for (int iter = 0; iter < config.lr_max_iterations; ++iter) {
            auto grad = logistic_gradient(x, y, wb_, lambda_);
            if (grad_norm(grad) <= config.lr_tolerance) {
                converged = true;
                break;
            }
            // backtracking line search on the full-batch objective
            std::vector<double> trial(wb_.size());
            double g2 = 0;
            for (double g : grad) g2 += g * g;
            double s = step * 2.0;
            double new_loss;
            while (true) {
                for (size_t j = 0; j < wb_.size(); ++j) trial[j] = wb_[j] - s * grad[j];
                new_loss = logistic_loss(x, y, trial, lambda_);
                if (new_loss <= loss - 0.5 * s * g2 || s < 1e-12) break;
                s *= 0.5;
            }
            step = s;
            wb_ = trial;
            loss = new_loss;
        }
        return converged;
    }

    double score(std::span<const float> x) const override {
        double z = wb_.back();
        for (size_t j = 0; j + 1 < wb_.size(); ++j) z += wb_[j] * double(x[j]);
        return sigmoid(z);
    }

    ClassifierState state() const override {
        ClassifierState st;
        st.kind = "lr";
        st.meta = {{"dim", wb_.size() - 1}, {"lambda", lambda_}};
        st.params.assign(wb_.begin(), wb_.end());
        return st;
    }

    void restore(const ClassifierState& st) override {
        wb_.assign(st.params.begin(), st.params.end());
        lambda_ = st.meta.value("lambda", 0.0);
    }

private:
    std::vector<double> wb_;
    double lambda_ = 0.0;
};

class LinearSvmClassifier : public Stage2Classifier {
public:
    bool fit(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
             const PUConfig& config) override {
        size_t n = x.size(), dim = x[0].size();
        lambda_ = 1.0 / (config.regularization_c * double(n));
        wb_.assign(dim + 1, 0.0);
        std::vector<double> best = wb_;
        double best_obj = objective(x, y, wb_);
        double prev_obj = best_obj;
        bool converged = false;
        for (int iter = 1; iter <= config.svm_max_iterations; ++iter) {
            // full-batch subgradient of mean hinge loss + L2
            std::vector<double> grad(dim + 1, 0.0);
            for (size_t i = 0; i < n; ++i) {
                double t = y[i] > 0 ? 1.0 : -1.0;
                double z = wb_[dim];
                for (size_t j = 0; j < dim; ++j) z += wb_[j] * double(x[i][j]);
                if (t * z < 1.0) {
                    for (size_t j = 0; j < dim; ++j) grad[j] -= t * double(x[i][j]);
                    grad[dim] -= t;
                }
            }
            for (auto& g : grad) g /= double(n);
            for (size_t j = 0; j < dim; ++j) grad[j] += lambda_ * wb_[j];

            double step = 1.0 / (lambda_ * double(iter) + 1.0);
            for (size_t j = 0; j <= dim; ++j) wb_[j] -= step * grad[j];

            double obj = objective(x, y, wb_);
            if (obj < best_obj) {
                best_obj = obj;
                best = wb_;
            }
            if (iter > 50 && std::abs(prev_obj - obj) <= config.svm_tolerance * std::max(1.0, obj)) {
                converged = true;
                break;
            }
            prev_obj = obj;
        }
        wb_ = best;  // best iterate, converged or not
        return converged;
    }

    double score(std::span<const float> x) const override {
        double z = wb_.back();
        for (size_t j = 0; j + 1 < wb_.size(); ++j) z += wb_[j] * double(x[j]);
        return sigmoid(z);  // calibrated margin for the uniform [0,1] contract
    }

    ClassifierState state() const override {
        ClassifierState st;
        st.kind = "svm";
        st.meta = {{"dim", wb_.size() - 1}, {"lambda", lambda_}};
        st.params.assign(wb_.begin(), wb_.end());
        return st;
    }

    void restore(const ClassifierState& st) override {
        wb_.assign(st.params.begin(), st.params.end());
        lambda_ = st.meta.value("lambda", 0.0);
    }

private:
    double objective(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
                     const std::vector<double>& wb) const {
        size_t n = x.size(), dim = wb.size() - 1;
        double loss = 0;
        for (size_t i = 0; i < n; ++i) {
            double t = y[i] > 0 ? 1.0 : -1.0;
            double z = wb[dim];
            for (size_t j = 0; j < dim; ++j) z += wb[j] * double(x[i][j]);
            loss += std::max(0.0, 1.0 - t * z);
        }
        loss /= double(n);
        double reg = 0;
        for (size_t j = 0; j < dim; ++j) reg += wb[j] * wb[j];
        return loss + 0.5 * lambda_ * reg;
    }

    std::vector<double> wb_;
    double lambda_ = 0.0;
};

class KnnClassifier : public Stage2Classifier {
public:
    bool fit(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
             const PUConfig& config) override {
        k_ = config.knn_neighbors;
        weighted_ = config.knn_distance_weighted;
        norm_ = config.knn_norm;
        dim_ = x[0].size();
        data_.clear();
        data_.reserve(x.size() * dim_);
        for (const auto& v : x) data_.insert(data_.end(), v.begin(), v.end());
        labels_ = y;
        return true;
    }

    double score(std::span<const float> x) const override {
        size_t n = labels_.size();
        std::vector<std::pair<double, size_t>> dist(n);
        for (size_t i = 0; i < n; ++i) {
            const float* row = data_.data() + i * dim_;
            double d = 0;
            if (norm_ == 2) {
                for (size_t j = 0; j < dim_; ++j) {
                    double diff = double(x[j]) - double(row[j]);
                    d += diff * diff;
                }
                d = std::sqrt(d);
            } else {
                for (size_t j = 0; j < dim_; ++j) d += std::abs(double(x[j]) - double(row[j]));
            }
            dist[i] = {d, i};  // index tie-break keeps ordering deterministic
        }
        size_t k = std::min(size_t(k_), n);
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double pos = 0, total = 0;
        for (size_t i = 0; i < k; ++i) {
            double w = weighted_ ? 1.0 / (dist[i].first + 1e-12) : 1.0;
            total += w;
            if (labels_[dist[i].second] > 0) pos += w;
        }
        return total > 0 ? pos / total : 0.0;
    }

    ClassifierState state() const override {
        ClassifierState st;
        st.kind = "knn";
        st.meta = {{"k", k_}, {"weighted", weighted_}, {"norm", norm_},
                   {"dim", dim_}, {"count", labels_.size()}};
        st.params.assign(data_.begin(), data_.end());
        for (int l : labels_) st.params.push_back(double(l));
        return st;
    }

    void restore(const ClassifierState& st) override {
        k_ = st.meta.at("k").get<int>();
        weighted_ = st.meta.at("weighted").get<bool>();
        norm_ = st.meta.at("norm").get<int>();
        dim_ = st.meta.at("dim").get<size_t>();
        size_t count = st.meta.at("count").get<size_t>();
        data_.assign(st.params.begin(), st.params.begin() + count * dim_);

        labels_.clear();
        for (size_t i = 0; i < count; ++i) labels_.push_back(int(st.params[count * dim_ + i]));
    }

private:
    int k_ = 11;
    bool weighted_ = false;
    int norm_ = 2;
    size_t dim_ = 0;
    std::vector<float> data_;
    std::vector<int> labels_;
};

std::map<std::string, PluginFactory>& plugin_registry() {
    static std::map<std::string, PluginFactory> registry;
    return registry;
}

}  // namespace

void register_plugin_classifier(const std::string& name, PluginFactory factory) {
    plugin_registry()[name] = std::move(factory);
}

std::unique_ptr<Stage2Classifier> make_classifier(const PUConfig& config) {
    switch (config.kind) {
        case ClassifierKind::LogisticRegression:
            return std::make_unique<LogisticRegressionClassifier>();
        case ClassifierKind::LinearSVM:
            return std::make_unique<LinearSvmClassifier>();
        case ClassifierKind::KNN:
            return std::make_unique<KnnClassifier>();
        case ClassifierKind::Plugin: {
            auto it = plugin_registry().find(config.plugin_name);
            if (it == plugin_registry().end())
                throw InputError("no plugin classifier registered as '" + config.plugin_name + "'");
            return it->second();
        }
    }
    throw std::invalid_argument("unknown classifier kind");
}

PUModel train_stage2(const std::vector<std::vector<float>>& positives,
                     const std::vector<std::vector<float>>& reliable_negatives,
                     const PUConfig& config) {
    config.validate();
    if (positives.empty()) throw InputError("train_stage2: positive class is empty");
    if (reliable_negatives.empty()) throw InputError("train_stage2: negative class is empty");

    std::vector<std::vector<float>> x;
    std::vector<int> y;
    x.reserve(positives.size() + reliable_negatives.size());
    for (const auto& v : positives) {
        x.push_back(v);
        y.push_back(1);
    }
    for (const auto& v : reliable_negatives) {
        x.push_back(v);
        y.push_back(0);
    }

    PUModel model;
    model.config = config;
    model.trained_positives = positives.size();
    model.trained_reliable_negatives = reliable_negatives.size();
    auto clf = make_classifier(config);
    model.stage2_converged = clf->fit(x, y, config);
    model.set_classifier(std::move(clf));
    return model;
}

PUModel train_pu_model(const TrainingSplit& split, const PUConfig& config) {
    config.validate();
    if (split.positives.empty()) throw InputError("train_pu_model: no positives");
    if (split.unlabelled.empty()) throw InputError("train_pu_model: no unlabelled posts");
    Centroid cp = compute_centroid(split.positives);
    Centroid cu = compute_centroid(split.unlabelled);
    auto rn_idx = select_reliable_negatives(split, cp, cu, config.alpha, config.min_rn_fraction);
    std::vector<std::vector<float>> rn;
    rn.reserve(rn_idx.size());
    for (size_t i : rn_idx) rn.push_back(split.unlabelled[i]);
    PUModel model = train_stage2(split.positives, rn, config);
    model.centroid_p = std::move(cp);
    model.centroid_u = std::move(cu);
    return model;
}

PUModel train_ppn_baseline(const TrainingSplit& split, const PUConfig& config) {
    config.validate();
    if (split.positives.empty()) throw InputError("train_ppn_baseline: no positives");
    if (split.unlabelled.empty()) throw InputError("train_ppn_baseline: no unlabelled posts");
    PUModel model = train_stage2(split.positives, split.unlabelled, config);
    model.centroid_p = compute_centroid(split.positives);
    model.centroid_u = compute_centroid(split.unlabelled);
    model.ppn_baseline = true;
    return model;
}

double PUModel::score_vector(std::span<const float> vec) const {
    if (!classifier_) throw InputError("PUModel has no trained classifier");
    return classifier_->score(vec);
}

PredictOutcome PUModel::predict(const EmbeddingModel& embedding,
                                const std::vector<std::string>& tokens, double threshold,
                                uint64_t seed) const {
    PredictOutcome out;
    std::vector<float> vec;
    try {
        vec = embedding.infer_vector(tokens, embedding.config().epochs, seed);
    } catch (const UninferablePostError&) {
        out.inferable = false;
        return out;
    }
    out.score = score_vector(vec);
    out.security = out.score >= threshold;  // tie goes to Security
    return out;
}

namespace {

std::string double_bytes(const std::vector<double>& v) {
    std::string s(v.size() * sizeof(double), '\0');
    std::memcpy(s.data(), v.data(), s.size());
    return s;
}

std::vector<double> bytes_doubles(const std::string& s) {
    if (s.size() % sizeof(double) != 0) throw InputError("float64 array has unexpected size");
    std::vector<double> v(s.size() / sizeof(double));
    std::memcpy(v.data(), s.data(), s.size());
    return v;
}

constexpr int kPuFormatVersion = 1;

}  // namespace

void PUModel::save(const std::filesystem::path& dir) const {
    if (!classifier_) throw InputError("PUModel has no trained classifier");
    std::filesystem::create_directories(dir);
    ClassifierState st = classifier_->state();
    std::string cp = double_bytes(centroid_p.vector);
    std::string cu = double_bytes(centroid_u.vector);
    std::string params = double_bytes(st.params);
    atomic_write_file(dir / "centroid_p.f64", cp);
    atomic_write_file(dir / "centroid_u.f64", cu);
    atomic_write_file(dir / "classifier_params.f64", params);

    nlohmann::json j;
    j["format_version"] = kPuFormatVersion;
    j["kind"] = "pu_model";
    j["config"] = config.to_json();
    j["classifier_state"] = {{"kind", st.kind}, {"meta", st.meta}};
    j["centroid_p_count"] = centroid_p.count;
    j["centroid_u_count"] = centroid_u.count;
    j["ppn_baseline"] = ppn_baseline;
    j["embedding_sha256"] = embedding_hash;
    j["trained_positives"] = trained_positives;
    j["trained_reliable_negatives"] = trained_reliable_negatives;
    j["stage2_converged"] = stage2_converged;
    j["arrays"] = {{"centroid_p.f64", sha256_hex(cp)},
                   {"centroid_u.f64", sha256_hex(cu)},
                   {"classifier_params.f64", sha256_hex(params)}};
    j["created_utc"] = utc_timestamp_now();
    atomic_write_file(dir / "manifest.json", j.dump(2) + "\n");
}

PUModel PUModel::load(const std::filesystem::path& dir) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    if (j.at("format_version").get<int>() != kPuFormatVersion)
        throw InputError("unsupported PU model format version");
    PUModel m;
    m.config = PUConfig::from_json(j.at("config"));
    m.centroid_p.vector = bytes_doubles(read_text_file(dir / "centroid_p.f64"));
    m.centroid_p.count = j.at("centroid_p_count").get<size_t>();
    m.centroid_u.vector = bytes_doubles(read_text_file(dir / "centroid_u.f64"));
    m.centroid_u.count = j.at("centroid_u_count").get<size_t>();
    m.ppn_baseline = j.value("ppn_baseline", false);
    m.embedding_hash = j.value("embedding_sha256", "");
    m.trained_positives = j.value("trained_positives", size_t(0));
    m.trained_reliable_negatives = j.value("trained_reliable_negatives", size_t(0));
    m.stage2_converged = j.value("stage2_converged", true);

    ClassifierState st;
    st.kind = j.at("classifier_state").at("kind").get<std::string>();
    st.meta = j.at("classifier_state").at("meta");
    st.params = bytes_doubles(read_text_file(dir / "classifier_params.f64"));

    PUConfig mk = m.config;
    if (st.kind == "lr") mk.kind = ClassifierKind::LogisticRegression;
    else if (st.kind == "svm") mk.kind = ClassifierKind::LinearSVM;
    else if (st.kind == "knn") mk.kind = ClassifierKind::KNN;
    else {
        mk.kind = ClassifierKind::Plugin;
        mk.plugin_name = st.kind;
    }
    auto clf = make_classifier(mk);
    clf->restore(st);
    m.set_classifier(std::move(clf));
    return m;
}

}  // namespace puminer
