#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "puminer/evaluation.hpp"
#include "testsupport.hpp"

using namespace puminer;

TEST_CASE("pu metrics on the worked confusion") {
    ConfusionPU c;
    c.tp_p = 90;
    c.fn_p = 10;
    c.tp_u = 5;
    c.fp = 5;
    c.u_size = 1000;
    c.total = 1100;
    PUEvalConfig cfg;
    cfg.r = 0.025;
    auto rep = pu_metrics(c, cfg);
    CHECK(rep.values.at("recall_pu") == doctest::Approx(0.9));
    CHECK(rep.values.at("precision_pu_lb") == doctest::Approx(0.9));
    CHECK(rep.values.at("precision_pu_ub") == doctest::Approx(1.0));  // (90+min(25,10))/100
    CHECK(rep.values.at("g_mean_pu") == doctest::Approx(8.91));      // 1100*0.81/100
    CHECK(rep.degenerate.empty());
}

TEST_CASE("perfect P-only predictor scores ones") {
    ConfusionPU c;
    c.tp_p = 50;
    c.fn_p = 0;
    c.tp_u = 0;
    c.fp = 0;
    c.u_size = 50;
    c.total = 100;
    auto rep = pu_metrics(c, PUEvalConfig{});
    CHECK(rep.values.at("precision_pu_lb") == doctest::Approx(1.0));
    CHECK(rep.values.at("precision_pu_ub") == doctest::Approx(1.0));
    CHECK(rep.values.at("recall_pu") == doctest::Approx(1.0));
    CHECK(rep.values.at("f1_score_pu_lb") == doctest::Approx(1.0));
    CHECK(rep.values.at("f1_score_pu_ub") == doctest::Approx(1.0));
}

TEST_CASE("degenerate predictor is flagged not NaN") {
    ConfusionPU c;
    c.fn_p = 10;
    c.u_size = 90;
    c.total = 100;  // nothing predicted positive
    auto rep = pu_metrics(c, PUEvalConfig{});
    CHECK(rep.values.at("precision_pu_lb") == 0.0);
    CHECK(rep.degenerate.count("precision_pu_lb") == 1);
    CHECK(rep.values.at("g_mean_pu") == 0.0);
    CHECK(rep.degenerate.count("g_mean_pu") == 1);
}

TEST_CASE("report serialization carries the metric names") {
    // layout fixture with externally reported values; not recomputed here
    MetricsReport rep;
    rep.values = {{"recall_pu", 0.893},     {"precision_pu_lb", 0.903},
                  {"precision_pu_ub", 0.928}, {"f1_score_pu_lb", 0.898},
                  {"f1_score_pu_ub", 0.910},  {"g_mean_pu", 1.611}};
    std::string csv = rep.to_csv();
    CHECK(csv.find("precision_pu_lb") != std::string::npos);
    CHECK(csv.find("g_mean_pu") != std::string::npos);
    CHECK(csv.find("1.611") != std::string::npos);
    std::string json = rep.to_json();
    CHECK(json.find("\"recall_pu\": 0.893") != std::string::npos);
}

TEST_CASE("pn metrics basics") {
    ConfusionPN perfect{50, 0, 50, 0};
    auto rep = pn_metrics(perfect);
    CHECK(rep.values.at("mcc_pn") == doctest::Approx(1.0));
    CHECK(rep.values.at("g_mean_pn") == doctest::Approx(1.0));

    // all-positive on a balanced set: TN = FN = 0 pins MCC to 0
    ConfusionPN allpos{50, 50, 0, 0};
    auto rep2 = pn_metrics(allpos);
    CHECK(rep2.values.at("mcc_pn") == 0.0);
    CHECK(rep2.degenerate.count("mcc_pn") == 1);

    CHECK_THROWS_AS(pn_metrics(ConfusionPN{}), std::invalid_argument);
}

TEST_CASE("pn metrics match a brute-force reference on 1000 confusions") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        ConfusionPN c;
        c.tp = rng() % 200;
        c.fp = rng() % 200;
        c.tn = rng() % 200;
        c.fn = rng() % 200;
        if (c.tp + c.fp + c.tn + c.fn == 0) c.tp = 1;
        auto rep = pn_metrics(c);

        double tp = double(c.tp), fp = double(c.fp), tn = double(c.tn), fn = double(c.fn);
        double precision = tp + fp > 0 ? tp / (tp + fp) : 0;
        double recall = tp + fn > 0 ? tp / (tp + fn) : 0;
        double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0;
        double gmean = std::sqrt(precision * recall);
        double mcc_den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
        double mcc = mcc_den > 0 ? (tp * tn - fp * fn) / mcc_den : 0;

        CHECK(std::abs(rep.values.at("precision_pn") - precision) <= 1e-9);
        CHECK(std::abs(rep.values.at("recall_pn") - recall) <= 1e-9);
        CHECK(std::abs(rep.values.at("f1_score_pn") - f1) <= 1e-9);
        CHECK(std::abs(rep.values.at("g_mean_pn") - gmean) <= 1e-9);
        CHECK(std::abs(rep.values.at("mcc_pn") - mcc) <= 1e-9);
        CHECK(rep.values.at("mcc_pn") >= -1.0 - 1e-12);
        CHECK(rep.values.at("mcc_pn") <= 1.0 + 1e-12);
    }
}

TEST_CASE("label-independent predictor has near-zero MCC") {
    std::mt19937_64 rng(41);
    ConfusionPN c;
    for (int i = 0; i < 10000; ++i) {
        bool truth = i % 2 == 0;  // balanced
        bool pred = rng() % 2 == 0;
        if (truth && pred) ++c.tp;
        else if (truth) ++c.fn;
        else if (pred) ++c.fp;
        else ++c.tn;
    }
    CHECK(std::abs(pn_metrics(c).values.at("mcc_pn")) <= 0.05);
}

TEST_CASE("gmean scaling reproduces the published arithmetic") {
    CHECK(gmean_scale(1.611, 0.5125) == doctest::Approx(0.909).epsilon(0).scale(1).epsilon(0.0006));
    CHECK(gmean_scale(1.454, 0.5125) == doctest::Approx(0.863).epsilon(0.0006));
    CHECK(gmean_scale(1.0, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(gmean_scale(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gmean_scale(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("pu and pn agree when U is empty") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 50; ++trial) {
        size_t tp = 1 + rng() % 50, fn = rng() % 50;
        ConfusionPU pu;
        pu.tp_p = tp;
        pu.fn_p = fn;
        pu.total = tp + fn;
        ConfusionPN pn;
        pn.tp = tp;
        pn.fn = fn;
        auto rpu = pu_metrics(pu, PUEvalConfig{});
        auto rpn = pn_metrics(pn);
        CHECK(rpu.values.at("precision_pu_lb") == doctest::Approx(1.0));
        CHECK(rpu.values.at("precision_pu_ub") == doctest::Approx(1.0));
        CHECK(rpu.values.at("recall_pu") == doctest::Approx(rpn.values.at("recall_pn")));
    }
}

TEST_CASE("lower bounds never exceed upper bounds") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 500; ++trial) {
        ConfusionPU c;
        c.tp_p = rng() % 100;
        c.fn_p = rng() % 100;
        c.u_size = rng() % 500;
        c.tp_u = c.u_size ? rng() % (c.u_size + 1) : 0;
        c.total = c.tp_p + c.fn_p + c.u_size;
        PUEvalConfig cfg;
        cfg.r = double(rng() % 100) / 100.0;
        auto rep = pu_metrics(c, cfg);
        CHECK(rep.values.at("precision_pu_lb") <= rep.values.at("precision_pu_ub") + 1e-12);
        CHECK(rep.values.at("f1_score_pu_lb") <= rep.values.at("f1_score_pu_ub") + 1e-12);
    }
}

TEST_CASE("g-mean rank equivalence on a fully labelled set") {
    std::mt19937_64 rng(61);
    const size_t n_pos = 120, n_neg = 80;
    struct Pair {
        double pu, pn;
    };
    std::vector<Pair> metrics;
    for (int predictor = 0; predictor < 25; ++predictor) {
        size_t tp = rng() % (n_pos + 1);
        size_t fp = rng() % (n_neg + 1);
        if (tp + fp == 0) tp = 1;
        ConfusionPN pn{tp, fp, n_neg - fp, n_pos - tp};
        // same predictions viewed as PU data: P = true positives, U = negatives
        ConfusionPU pu;
        pu.tp_p = tp;
        pu.fn_p = n_pos - tp;
        pu.tp_u = fp;
        pu.u_size = n_neg;
        pu.total = n_pos + n_neg;
        metrics.push_back({pu_metrics(pu, PUEvalConfig{}).values.at("g_mean_pu"),
                           pn_metrics(pn).values.at("g_mean_pn")});
    }
    for (size_t i = 0; i < metrics.size(); ++i)
        for (size_t j = 0; j < metrics.size(); ++j) {
            bool tie_pu = std::abs(metrics[i].pu - metrics[j].pu) <= 1e-9;
            bool tie_pn = std::abs(metrics[i].pn - metrics[j].pn) <= 1e-9;
            CHECK(tie_pu == tie_pn);
            if (!tie_pu) CHECK((metrics[i].pu > metrics[j].pu) == (metrics[i].pn > metrics[j].pn));
        }
}

// Mann-Whitney oracle: U by pairwise comparison, p by enumerating value
// assignments. Completely independent of the midrank implementation.
namespace {

double pairwise_u(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0;
    for (double x : a)
        for (double y : b) {
            if (x > y) u += 1;
            else if (x == y) u += 0.5;
        }
    return u;
}

double enumerate_p(const std::vector<double>& a, const std::vector<double>& b, Alternative alt) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    size_t n = pooled.size(), na = a.size();
    double u_obs = pairwise_u(a, b);
    double mu = double(na) * double(n - na) / 2.0;
    std::vector<size_t> comb(na);
    std::iota(comb.begin(), comb.end(), 0);
    uint64_t hits = 0, total = 0;
    while (true) {
        std::vector<double> xa, xb;
        std::vector<bool> in_a(n, false);
        for (size_t i : comb) in_a[i] = true;
        for (size_t i = 0; i < n; ++i) (in_a[i] ? xa : xb).push_back(pooled[i]);
        double u = pairwise_u(xa, xb);
        ++total;
        switch (alt) {
            case Alternative::Less: hits += u <= u_obs + 1e-9; break;
            case Alternative::Greater: hits += u >= u_obs - 1e-9; break;
            case Alternative::TwoSided:
                hits += std::abs(u - mu) >= std::abs(u_obs - mu) - 1e-9;
                break;
        }
        // next combination
        size_t i = na;
        bool more = false;
        while (i-- > 0) {
            if (comb[i] < n - na + i) {
                ++comb[i];
                for (size_t j = i + 1; j < na; ++j) comb[j] = comb[j - 1] + 1;
                more = true;
                break;
            }
        }
        if (!more) break;
    }
    return double(hits) / double(total);
}

}  // namespace

TEST_CASE("mann-whitney exact results") {
    std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    auto res = mann_whitney_u(a, b, Alternative::Less);
    CHECK(res.exact);
    CHECK(res.u == doctest::Approx(0.0));
    CHECK(res.p == doctest::Approx(0.05));  // 1 of C(6,3)=20 assignments

    // identical constant samples sit at the midpoint
    std::vector<double> c1{2, 2, 2}, c2{2, 2, 2, 2};
    auto tied = mann_whitney_u(c1, c2, Alternative::Less);
    CHECK(tied.u == doctest::Approx(3.0 * 4.0 / 2.0));

    // swapping samples mirrors the alternative
    std::vector<double> x{1.5, 3.0, 2.2, 5.1}, y{2.0, 4.4, 6.2};
    auto p1 = mann_whitney_u(x, y, Alternative::Less);
    auto p2 = mann_whitney_u(y, x, Alternative::Greater);
    CHECK(p1.p == doctest::Approx(p2.p).epsilon(1e-12));
}

TEST_CASE("mann-whitney exact p matches the enumeration oracle") {
    std::mt19937_64 rng(67);
    std::uniform_int_distribution<int> val(0, 4);  // small range forces ties
    for (size_t na = 1; na <= 5; ++na) {
        for (size_t nb = 1; nb + na <= 10; ++nb) {
            std::vector<double> a(na), b(nb);
            for (auto& v : a) v = val(rng);
            for (auto& v : b) v = val(rng);
            for (auto alt : {Alternative::Less, Alternative::Greater, Alternative::TwoSided}) {
                auto res = mann_whitney_u(a, b, alt);
                REQUIRE(res.exact);
                double oracle = enumerate_p(a, b, alt);
                CAPTURE(na);
                CAPTURE(nb);
                CHECK(res.p == doctest::Approx(oracle).epsilon(1e-12));
                CHECK(res.u == doctest::Approx(pairwise_u(a, b)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("mann-whitney normal approximation is sane") {
    std::mt19937_64 rng(71);
    std::normal_distribution<double> g1(0.0, 1.0), g2(1.0, 1.0);
    std::vector<double> a(40), b(40);
    for (auto& v : a) v = g1(rng);
    for (auto& v : b) v = g2(rng);
    auto res = mann_whitney_u(a, b, Alternative::Less);
    CHECK_FALSE(res.exact);
    CHECK(res.p < 0.01);  // a is clearly smaller
    auto rev = mann_whitney_u(a, b, Alternative::Greater);
    CHECK(rev.p > 0.9);
    CHECK_THROWS_AS(mann_whitney_u({}, a, Alternative::Less), std::invalid_argument);
}

TEST_CASE("cohens d") {
    std::vector<double> same1{1, 2, 3}, same2{2, 1, 3};
    CHECK(cohens_d(same1, same2) == doctest::Approx(0.0));

    // means one pooled SD apart
    std::vector<double> lo{0, 1, -1, 0}, hi;
    double sd = std::sqrt((2.0 + 2.0) / 6.0);
    for (double v : lo) hi.push_back(v + sd);
    CHECK(cohens_d(hi, lo) == doctest::Approx(1.0));

    std::mt19937_64 rng(73);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(3 + rng() % 20), b(3 + rng() % 20);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        double ma = 0, mb = 0;
        for (double v : a) ma += v;
        for (double v : b) mb += v;
        ma /= double(a.size());
        mb /= double(b.size());
        double va = 0, vb = 0;
        for (double v : a) va += (v - ma) * (v - ma);
        for (double v : b) vb += (v - mb) * (v - mb);
        va /= double(a.size() - 1);
        vb /= double(b.size() - 1);
        double pooled = std::sqrt((double(a.size() - 1) * va + double(b.size() - 1) * vb) /
                                  double(a.size() + b.size() - 2));
        CHECK(cohens_d(a, b) == doctest::Approx((ma - mb) / pooled).epsilon(1e-9));
    }

    std::vector<double> constant{2, 2, 2};
    CHECK_THROWS_AS(cohens_d(constant, constant), std::invalid_argument);
    std::vector<double> one{1};
    CHECK_THROWS_AS(cohens_d(one, same1), std::invalid_argument);
}

namespace {

// PCA oracle: power iteration with deflation over an independently built
// covariance matrix.
std::vector<double> power_iteration_eigenvalues(const std::vector<std::vector<float>>& data,
                                                int count) {
    size_t n = data.size(), d = data[0].size();
    std::vector<double> mean(d, 0);
    for (const auto& v : data)
        for (size_t j = 0; j < d; ++j) mean[j] += v[j];
    for (auto& m : mean) m /= double(n);
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0));
    for (const auto& v : data)
        for (size_t p = 0; p < d; ++p)
            for (size_t q = 0; q < d; ++q)
                cov[p][q] += (double(v[p]) - mean[p]) * (double(v[q]) - mean[q]);
    for (auto& row : cov)
        for (auto& x : row) x /= double(n - 1);

    std::mt19937_64 rng(123);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> eigs;
    for (int c = 0; c < count; ++c) {
        std::vector<double> v(d);
        for (auto& x : v) x = g(rng);
        double lambda = 0;
        for (int iter = 0; iter < 3000; ++iter) {
            std::vector<double> w(d, 0);
            for (size_t p = 0; p < d; ++p)
                for (size_t q = 0; q < d; ++q) w[p] += cov[p][q] * v[q];
            double norm = 0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            if (norm == 0) break;
            for (size_t p = 0; p < d; ++p) v[p] = w[p] / norm;
            lambda = norm;
        }
        eigs.push_back(lambda);
        for (size_t p = 0; p < d; ++p)
            for (size_t q = 0; q < d; ++q) cov[p][q] -= lambda * v[p] * v[q];
    }
    return eigs;
}

}  // namespace

TEST_CASE("pca basics") {
    // all variance on the x axis
    std::vector<std::vector<float>> line = {{-2, 0}, {-1, 0}, {0, 0}, {1, 0}, {2, 0}};
    auto res = project_pca(line, 1);
    CHECK(res.explained_variance_ratio[0] == doctest::Approx(1.0));
    CHECK(res.coordinates.size() == line.size());
    // sign convention: axis points along +x, so the last point projects positive
    CHECK(res.coordinates[4][0] == doctest::Approx(2.0));
    CHECK(res.coordinates[0][0] == doctest::Approx(-2.0));

    // rank too low for two components
    CHECK_THROWS_AS(project_pca(line, 2), InputError);
    // too few points
    std::vector<std::vector<float>> two = {{0, 0}, {1, 1}};
    CHECK_THROWS_AS(project_pca(two, 2), std::invalid_argument);
}

TEST_CASE("pca explained variance matches the power-iteration oracle") {
    std::mt19937_64 rng(83);
    std::normal_distribution<float> g(0.f, 1.f);
    std::vector<std::vector<float>> data(100, std::vector<float>(10));
    for (auto& v : data) {
        float base = g(rng);
        for (size_t j = 0; j < v.size(); ++j)
            v[j] = g(rng) + base * float(j) * 0.3f;  // correlated structure
    }
    auto res = project_pca(data, 2);
    auto oracle = power_iteration_eigenvalues(data, 2);

    double trace = 0;
    {
        std::vector<double> mean(10, 0);
        for (const auto& v : data)
            for (size_t j = 0; j < 10; ++j) mean[j] += v[j];
        for (auto& m : mean) m /= double(data.size());
        for (const auto& v : data)
            for (size_t j = 0; j < 10; ++j)
                trace += (double(v[j]) - mean[j]) * (double(v[j]) - mean[j]);
        trace /= double(data.size() - 1);
    }
    CHECK(res.explained_variance_ratio[0] == doctest::Approx(oracle[0] / trace).epsilon(1e-6));
    CHECK(res.explained_variance_ratio[1] == doctest::Approx(oracle[1] / trace).epsilon(1e-6));
}

TEST_CASE("stratified cv contract") {
    // 1000 examples in two strata (600/400); tiny embedding settings
    std::vector<CVExample> dataset;
    std::mt19937_64 rng(91);
    const char* words[] = {"apple", "banana", "cherry", "secure", "token", "filter"};
    for (int i = 0; i < 1000; ++i) {
        CVExample ex;
        ex.id = i + 1;
        for (int t = 0; t < 3; ++t) ex.tokens.push_back(words[rng() % 6]);
        ex.doc_labels = build_doc_labels(ex.id, {});
        ex.labelled_positive = i % 2 == 0;
        ex.stratum = i < 600 ? "a" : "b";
        dataset.push_back(std::move(ex));
    }
    CVPlan plan;
    plan.k = 10;
    plan.seed = 9;
    plan.embedding.dim = 4;
    plan.embedding.epochs = 1;
    plan.embedding.min_count = 1;
    plan.eval.r = 0.025;
    PUConfig cfg;
    cfg.alpha = 1.2;
    cfg.min_rn_fraction = 0.0;
    plan.grid = {cfg};

    auto result = stratified_kfold_cv(dataset, plan);

    // partition with stratum proportions preserved within one example
    std::vector<int> seen(dataset.size(), 0);
    for (const auto& fold : result.fold_assignment) {
        size_t a = 0, b = 0;
        for (size_t idx : fold) {
            ++seen[idx];
            (dataset[idx].stratum == "a" ? a : b)++;
        }
        CHECK(std::abs(int(a) - 60) <= 1);
        CHECK(std::abs(int(b) - 40) <= 1);
    }
    for (int s : seen) CHECK(s == 1);

    // grid of one ranks that config
    REQUIRE(result.ranked.size() == 1);
    CHECK(result.ranked[0].config_index == 0);
    CHECK(result.ranked[0].folds.size() == 10);

    // deterministic fold assignment for a fixed seed
    auto again = stratified_kfold_cv(dataset, plan);
    CHECK(again.fold_assignment == result.fold_assignment);
}

TEST_CASE("cv means equal hand aggregation and ranking is ordered") {
    auto corpus = testsupport::make_two_topic_corpus(30, 25, 101);
    std::vector<CVExample> dataset;
    for (size_t i = 0; i < corpus.docs.size(); ++i) {
        CVExample ex;
        ex.id = int64_t(i + 1);
        ex.tokens = corpus.docs[i].tokens;
        ex.doc_labels = corpus.docs[i].labels;
        ex.labelled_positive = corpus.topic[i] == 0;
        ex.stratum = ex.labelled_positive ? "p" : "u";
        dataset.push_back(std::move(ex));
    }
    CVPlan plan;
    plan.k = 3;
    plan.seed = 4;
    plan.embedding.dim = 12;
    plan.embedding.epochs = 8;
    plan.embedding.min_count = 1;
    PUConfig c1;
    c1.alpha = 1.0;
    c1.regularization_c = 1.0;
    c1.min_rn_fraction = 0.0;
    PUConfig c2 = c1;
    c2.alpha = 1.2;
    c2.regularization_c = 0.1;
    plan.grid = {c1, c2};

    auto result = stratified_kfold_cv(dataset, plan);
    REQUIRE(result.ranked.size() == 2);
    CHECK(result.ranked[0].selection_value >= result.ranked[1].selection_value);

    for (const auto& cr : result.ranked) {
        std::map<std::string, double> sums;
        size_t n = 0;
        for (const auto& fold : cr.folds) {
            if (fold.degenerate) continue;
            ++n;
            for (const auto& [k, v] : fold.metrics.values) sums[k] += v;
        }
        REQUIRE(n > 0);
        for (const auto& [k, v] : sums)
            CHECK(cr.mean.values.at(k) == doctest::Approx(v / double(n)).epsilon(1e-12));
    }
}

TEST_CASE("cv rejects strata smaller than k") {
    std::vector<CVExample> dataset;
    for (int i = 0; i < 10; ++i) {
        CVExample ex;
        ex.id = i + 1;
        ex.tokens = {"a", "b"};
        ex.doc_labels = build_doc_labels(ex.id, {});
        ex.stratum = i < 9 ? "big" : "tiny";
        dataset.push_back(std::move(ex));
    }
    CVPlan plan;
    plan.k = 3;
    plan.grid = {PUConfig{}};
    try {
        stratified_kfold_cv(dataset, plan);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("tiny") != std::string::npos);
    }
}
