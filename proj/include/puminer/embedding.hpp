#pragma once

// PV-DM paragraph vectors: the center word is predicted from the mean of
// in-window word vectors plus the document's label vectors, trained by SGD
// with negative sampling.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "puminer/common.hpp"

namespace puminer {

class UninferablePostError : public std::runtime_error {
public:
    explicit UninferablePostError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmbeddingConfig {
    int dim = 300;
    int window = 5;
    int epochs = 20;
    float initial_lr = 0.025f;
    int min_count = 2;
    int negative_samples = 5;
    uint64_t seed = 1;
    int workers = 1;  // 1 = deterministic; >1 = hogwild, run-to-run variance

    void validate() const;
};

struct TrainDoc {
    std::vector<std::string> tokens;
    std::vector<std::string> labels;  // id label first by convention
};

// {id} + each tag + all tags sorted and joined with '_', no duplicates.
std::vector<std::string> build_doc_labels(int64_t id, const std::vector<std::string>& tags);

class EmbeddingModel {
public:
    const EmbeddingConfig& config() const { return config_; }
    int dim() const { return config_.dim; }
    size_t vocab_size() const { return vocab_words_.size(); }
    size_t label_count() const { return label_names_.size(); }

    int word_index(const std::string& word) const;
    int label_index(const std::string& label) const;
    const std::vector<std::string>& vocab_words() const { return vocab_words_; }
    const std::vector<std::string>& label_names() const { return label_names_; }

    std::span<const float> word_vector(int index) const;
    std::span<const float> label_vector(int index) const;
    std::vector<float> label_vector(const std::string& label) const;

    // Average negative-sampling loss per epoch, recorded during training.
    const std::vector<double>& epoch_losses() const { return epoch_losses_; }

    // Optimizes a fresh document vector against frozen word vectors and
    // output weights. Throws UninferablePostError when no token is known.
    std::vector<float> infer_vector(const std::vector<std::string>& tokens,
                                    int inference_epochs, uint64_t seed) const;

    // Labels ranked by cosine similarity to vec; ties broken by index.
    std::vector<std::pair<std::string, double>> nearest_labels(std::span<const float> vec,
                                                               size_t topn) const;

    // Hash over vocabulary, labels and all parameter arrays; stable across
    // reruns with the same seed in deterministic mode.
    std::string content_hash() const;

    void save(const std::filesystem::path& dir) const;
    static EmbeddingModel load(const std::filesystem::path& dir);

    std::string stopword_hash;
    std::string lexicon_hash;

private:
    friend EmbeddingModel train_pvdm(const std::vector<TrainDoc>&, const EmbeddingConfig&);

    EmbeddingConfig config_;
    std::vector<std::string> vocab_words_;
    std::vector<int64_t> word_freq_;
    std::unordered_map<std::string, int> word_index_;
    std::vector<std::string> label_names_;
    std::unordered_map<std::string, int> label_index_;
    std::vector<float> word_vecs_;    // |V| x dim
    std::vector<float> label_vecs_;   // |L| x dim
    std::vector<float> out_weights_;  // |V| x dim
    std::vector<double> epoch_losses_;
    std::vector<int> unigram_table_;

    void build_unigram_table();
};

EmbeddingModel train_pvdm(const std::vector<TrainDoc>& docs, const EmbeddingConfig& config);

namespace detail {

template <typename A, typename B>
double cosine_similarity_impl(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    if (na == 0 || nb == 0) throw std::invalid_argument("cosine: zero-norm vector");
    double cosv = dot / (std::sqrt(na) * std::sqrt(nb));
    return cosv < -1.0 ? -1.0 : (cosv > 1.0 ? 1.0 : cosv);
}

}  // namespace detail

// 1 - cos(a, b), in [0, 2]. Throws on zero-norm input. Mixed float/double
// overloads accumulate in double either way.
inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    return detail::cosine_similarity_impl(a, b);
}
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    return detail::cosine_similarity_impl(a, b);
}
inline double cosine_similarity(std::span<const float> a, std::span<const double> b) {
    return detail::cosine_similarity_impl(a, b);
}
inline double cosine_similarity(std::span<const double> a, std::span<const float> b) {
    return detail::cosine_similarity_impl(a, b);
}
template <typename A, typename B>
double cosine_distance(const A& a, const B& b) {
    return 1.0 - cosine_similarity(std::span(a), std::span(b));
}

}  // namespace puminer
