#include "puminer/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace puminer {

namespace {

constexpr int kUnigramTableSize = 1 << 20;
constexpr double kUnigramPower = 0.75;
constexpr float kMinLrFactor = 1e-4f;
constexpr int kFormatVersion = 1;

// word2vec's LCG; the low-quality bits never reach anything that matters.
inline uint64_t lcg_next(uint64_t& state) {
    state = state * 25214903917ULL + 11ULL;
    return state;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double safe_log(double p) { return std::log(std::max(p, 1e-12)); }

}  // namespace

void EmbeddingConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    if (negative_samples < 1) throw std::invalid_argument("negative_samples must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (!(initial_lr > 0)) throw std::invalid_argument("initial_lr must be positive");
}

std::vector<std::string> build_doc_labels(int64_t id, const std::vector<std::string>& tags) {
    std::vector<std::string> labels;
    labels.push_back(std::to_string(id));
    std::set<std::string> seen{labels[0]};
    for (const auto& t : tags)
        if (seen.insert(t).second) labels.push_back(t);
    if (!tags.empty()) {
        std::vector<std::string> sorted(seen.begin(), seen.end());
        sorted.erase(std::remove(sorted.begin(), sorted.end(), labels[0]), sorted.end());
        std::sort(sorted.begin(), sorted.end());
        std::string combined;
        for (size_t i = 0; i < sorted.size(); ++i) {
            if (i) combined += '_';
            combined += sorted[i];
        }
        if (seen.insert(combined).second) labels.push_back(combined);
    }
    return labels;
}

int EmbeddingModel::word_index(const std::string& word) const {
    auto it = word_index_.find(word);
    return it == word_index_.end() ? -1 : it->second;
}

int EmbeddingModel::label_index(const std::string& label) const {
    auto it = label_index_.find(label);
    return it == label_index_.end() ? -1 : it->second;
}

std::span<const float> EmbeddingModel::word_vector(int index) const {
    return {word_vecs_.data() + size_t(index) * config_.dim, size_t(config_.dim)};
}

std::span<const float> EmbeddingModel::label_vector(int index) const {
    return {label_vecs_.data() + size_t(index) * config_.dim, size_t(config_.dim)};
}

std::vector<float> EmbeddingModel::label_vector(const std::string& label) const {
    int idx = label_index(label);
    if (idx < 0) throw InputError("unknown label: " + label);
    auto s = label_vector(idx);
    return {s.begin(), s.end()};
}

void EmbeddingModel::build_unigram_table() {
    unigram_table_.assign(kUnigramTableSize, 0);
    double total = 0;
    for (auto f : word_freq_) total += std::pow(double(f), kUnigramPower);
    size_t idx = 0;
    double cum = std::pow(double(word_freq_[0]), kUnigramPower) / total;
    for (int i = 0; i < kUnigramTableSize; ++i) {
        unigram_table_[i] = int(idx);
        if (double(i + 1) / kUnigramTableSize > cum && idx + 1 < word_freq_.size()) {
            ++idx;
            cum += std::pow(double(word_freq_[idx]), kUnigramPower) / total;
        }
    }
}

namespace {

struct DocIds {
    std::vector<int> words;
    std::vector<int> labels;
};

struct TrainerShared {
    const EmbeddingConfig* cfg;
    std::vector<DocIds>* docs;
    std::vector<float>* word_vecs;
    std::vector<float>* label_vecs;
    std::vector<float>* out_weights;
    const std::vector<int>* unigram;
    uint64_t total_steps = 0;
    std::atomic<uint64_t> step{0};
    std::mutex loss_mutex;
    double epoch_loss = 0;
    uint64_t epoch_loss_terms = 0;
};

// One SGD pass over a document. `docvec_override`, when set, replaces the
// label vectors (used by inference, where only that vector may move).
template <bool kInference>
double train_document(const DocIds& doc, TrainerShared& sh, uint64_t& rng,
                      float* docvec_override, uint64_t* local_step, uint64_t total_steps,
                      uint64_t* loss_terms) {
    const int dim = sh.cfg->dim;
    const int window = sh.cfg->window;
    const int negative = sh.cfg->negative_samples;
    const float initial_lr = sh.cfg->initial_lr;
    const float min_lr = initial_lr * kMinLrFactor;
    float* word_vecs = sh.word_vecs->data();
    float* label_vecs = sh.label_vecs ? sh.label_vecs->data() : nullptr;
    float* out = sh.out_weights->data();
    const auto& table = *sh.unigram;

    std::vector<float> h(dim), neu1e(dim);
    std::vector<float*> inputs;
    double loss = 0;

    const int n = int(doc.words.size());
    for (int t = 0; t < n; ++t) {
        uint64_t done = kInference ? (*local_step)++ : sh.step.fetch_add(1, std::memory_order_relaxed);
        float lr = std::max(min_lr, initial_lr * (1.0f - float(double(done) / double(total_steps))));

        int b = int(lcg_next(rng) % uint64_t(window));
        inputs.clear();
        for (int a = b; a < 2 * window + 1 - b; ++a) {
            if (a == window) continue;
            int c = t - window + a;
            if (c < 0 || c >= n) continue;
            inputs.push_back(word_vecs + size_t(doc.words[c]) * dim);
        }
        if constexpr (kInference) {
            inputs.push_back(docvec_override);
        } else {
            for (int lid : doc.labels) inputs.push_back(label_vecs + size_t(lid) * dim);
        }
        if (inputs.empty()) continue;

        const float inv = 1.0f / float(inputs.size());
        std::fill(h.begin(), h.end(), 0.0f);
        for (float* v : inputs)
            for (int i = 0; i < dim; ++i) h[i] += v[i];
        for (int i = 0; i < dim; ++i) h[i] *= inv;
        std::fill(neu1e.begin(), neu1e.end(), 0.0f);

        int center = doc.words[t];
        for (int k = 0; k <= negative; ++k) {
            int target;
            float label;
            if (k == 0) {
                target = center;
                label = 1.0f;
            } else {
                target = table[(lcg_next(rng) >> 16) % table.size()];
                if (target == center) continue;
                label = 0.0f;
            }
            float* ow = out + size_t(target) * dim;
            double dot = 0;
            for (int i = 0; i < dim; ++i) dot += double(h[i]) * double(ow[i]);
            double p = sigmoid(dot);
            loss += label > 0.5f ? -safe_log(p) : -safe_log(1.0 - p);
            ++*loss_terms;
            float g = float((double(label) - p)) * lr;
            for (int i = 0; i < dim; ++i) neu1e[i] += g * ow[i];
            if constexpr (!kInference) {
                for (int i = 0; i < dim; ++i) ow[i] += g * h[i];
            }
        }

        // mean composition: every contributor receives its 1/|inputs| share
        if constexpr (kInference) {
            for (int i = 0; i < dim; ++i) docvec_override[i] += neu1e[i] * inv;
        } else {
            for (float* v : inputs)
                for (int i = 0; i < dim; ++i) v[i] += neu1e[i] * inv;
        }
    }
    return loss;
}

void init_vector(float* v, int dim, uint64_t& rng) {
    for (int i = 0; i < dim; ++i)
        v[i] = (float(lcg_next(rng) >> 16 & 0xFFFF) / 65536.0f - 0.5f) / float(dim);
}

}  // namespace

EmbeddingModel train_pvdm(const std::vector<TrainDoc>& docs, const EmbeddingConfig& config) {
    config.validate();
    if (docs.empty()) throw InputError("train_pvdm: empty corpus");

    EmbeddingModel model;
    model.config_ = config;

    // vocabulary: corpus frequency >= min_count, frequency then name order
    std::unordered_map<std::string, int64_t> freq;
    for (const auto& d : docs)
        for (const auto& w : d.tokens) ++freq[w];
    std::vector<std::pair<std::string, int64_t>> kept;
    for (auto& [w, f] : freq)
        if (f >= config.min_count) kept.emplace_back(w, f);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (kept.empty()) throw InputError("train_pvdm: empty effective vocabulary");
    for (auto& [w, f] : kept) {
        model.word_index_[w] = int(model.vocab_words_.size());
        model.vocab_words_.push_back(w);
        model.word_freq_.push_back(f);
    }

    std::vector<DocIds> doc_ids(docs.size());
    uint64_t total_words = 0;
    for (size_t d = 0; d < docs.size(); ++d) {
        for (const auto& w : docs[d].tokens) {
            int idx = model.word_index(w);
            if (idx >= 0) doc_ids[d].words.push_back(idx);
        }
        total_words += doc_ids[d].words.size();
        for (const auto& l : docs[d].labels) {
            auto [it, inserted] = model.label_index_.try_emplace(l, int(model.label_names_.size()));
            if (inserted) model.label_names_.push_back(l);
            doc_ids[d].labels.push_back(it->second);
        }
    }
    if (total_words == 0) throw InputError("train_pvdm: no in-vocabulary tokens");

    const int dim = config.dim;
    model.word_vecs_.resize(model.vocab_words_.size() * size_t(dim));
    model.label_vecs_.resize(model.label_names_.size() * size_t(dim));
    model.out_weights_.assign(model.vocab_words_.size() * size_t(dim), 0.0f);
    uint64_t init_rng = config.seed;
    for (size_t i = 0; i < model.vocab_words_.size(); ++i)
        init_vector(model.word_vecs_.data() + i * dim, dim, init_rng);
    for (size_t i = 0; i < model.label_names_.size(); ++i)
        init_vector(model.label_vecs_.data() + i * dim, dim, init_rng);

    model.build_unigram_table();

    TrainerShared sh;
    sh.cfg = &config;
    sh.docs = &doc_ids;
    sh.word_vecs = &model.word_vecs_;
    sh.label_vecs = &model.label_vecs_;
    sh.out_weights = &model.out_weights_;
    sh.unigram = &model.unigram_table_;
    sh.total_steps = total_words * uint64_t(config.epochs);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        sh.epoch_loss = 0;
        sh.epoch_loss_terms = 0;
        if (config.workers == 1) {
            uint64_t rng = config.seed + uint64_t(epoch) * 0x9E3779B97F4A7C15ULL + 1;
            double loss = 0;
            uint64_t terms = 0;
            for (const auto& d : doc_ids)
                loss += train_document<false>(d, sh, rng, nullptr, nullptr, sh.total_steps, &terms);
            sh.epoch_loss = loss;
            sh.epoch_loss_terms = terms;
        } else {
            std::vector<std::thread> threads;
            size_t per = (doc_ids.size() + config.workers - 1) / config.workers;
            for (int w = 0; w < config.workers; ++w) {
                size_t begin = w * per;
                size_t end = std::min(doc_ids.size(), begin + per);
                if (begin >= end) break;
                threads.emplace_back([&, w, begin, end] {
                    uint64_t rng = config.seed + uint64_t(epoch) * 0x9E3779B97F4A7C15ULL +
                                   uint64_t(w) * 0xD1B54A32D192ED03ULL + 1;
                    double loss = 0;
                    uint64_t terms = 0;
                    for (size_t d = begin; d < end; ++d)
                        loss += train_document<false>(doc_ids[d], sh, rng, nullptr, nullptr,
                                                      sh.total_steps, &terms);
                    std::scoped_lock lk(sh.loss_mutex);
                    sh.epoch_loss += loss;
                    sh.epoch_loss_terms += terms;
                });
            }
            for (auto& t : threads) t.join();
        }
        model.epoch_losses_.push_back(
            sh.epoch_loss_terms ? sh.epoch_loss / double(sh.epoch_loss_terms) : 0.0);
    }
    return model;
}

std::vector<float> EmbeddingModel::infer_vector(const std::vector<std::string>& tokens,
                                                int inference_epochs, uint64_t seed) const {
    if (inference_epochs < 1) throw std::invalid_argument("inference_epochs must be >= 1");
    DocIds doc;
    for (const auto& t : tokens) {
        int idx = word_index(t);
        if (idx >= 0) doc.words.push_back(idx);
    }
    if (doc.words.empty())
        throw UninferablePostError("uninferable post: no token in the model vocabulary");

    std::vector<float> vec(config_.dim);
    uint64_t rng = seed;
    init_vector(vec.data(), config_.dim, rng);

    TrainerShared sh;
    sh.cfg = &config_;
    // const_cast is confined to the frozen arrays; the inference path never
    // writes to them (kInference disables those updates).
    sh.word_vecs = const_cast<std::vector<float>*>(&word_vecs_);
    sh.label_vecs = nullptr;
    sh.out_weights = const_cast<std::vector<float>*>(&out_weights_);
    sh.unigram = &unigram_table_;
    uint64_t total_steps = uint64_t(inference_epochs) * doc.words.size();
    uint64_t local_step = 0;
    uint64_t terms = 0;
    for (int e = 0; e < inference_epochs; ++e)
        train_document<true>(doc, sh, rng, vec.data(), &local_step, total_steps, &terms);
    return vec;
}

std::vector<std::pair<std::string, double>> EmbeddingModel::nearest_labels(
    std::span<const float> vec, size_t topn) const {
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(label_names_.size());
    for (size_t i = 0; i < label_names_.size(); ++i)
        scored.emplace_back(label_names_[i], cosine_similarity(vec, label_vector(int(i))));
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (scored.size() > topn) scored.resize(topn);
    return scored;
}

namespace {

std::string bytes_of(const std::vector<float>& v) {
    std::string s(v.size() * sizeof(float), '\0');
    std::memcpy(s.data(), v.data(), s.size());
    return s;
}

std::vector<float> floats_of(const std::string& s, size_t expect) {
    if (s.size() != expect * sizeof(float))
        throw InputError("float array has unexpected size");
    std::vector<float> v(expect);
    std::memcpy(v.data(), s.data(), s.size());
    return v;
}

}  // namespace

std::string EmbeddingModel::content_hash() const {
    std::string blob;
    for (size_t i = 0; i < vocab_words_.size(); ++i)
        blob += vocab_words_[i] + ' ' + std::to_string(word_freq_[i]) + '\n';
    for (const auto& l : label_names_) blob += l + '\n';
    blob += bytes_of(word_vecs_);
    blob += bytes_of(label_vecs_);
    blob += bytes_of(out_weights_);
    return sha256_hex(blob);
}

void EmbeddingModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::string vocab_txt;
    for (size_t i = 0; i < vocab_words_.size(); ++i)
        vocab_txt += vocab_words_[i] + ' ' + std::to_string(word_freq_[i]) + '\n';
    std::string labels_txt;
    for (const auto& l : label_names_) labels_txt += l + '\n';

    atomic_write_file(dir / "vocab.txt", vocab_txt);
    atomic_write_file(dir / "labels.txt", labels_txt);
    std::string wv = bytes_of(word_vecs_), lv = bytes_of(label_vecs_), ow = bytes_of(out_weights_);
    atomic_write_file(dir / "word_vectors.f32", wv);
    atomic_write_file(dir / "label_vectors.f32", lv);
    atomic_write_file(dir / "output_weights.f32", ow);

    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "pvdm_embedding";
    j["config"] = {{"dim", config_.dim},
                   {"window", config_.window},
                   {"epochs", config_.epochs},
                   {"initial_lr", config_.initial_lr},
                   {"min_count", config_.min_count},
                   {"negative_samples", config_.negative_samples},
                   {"seed", config_.seed},
                   {"workers", config_.workers}};
    j["vocab_size"] = vocab_words_.size();
    j["label_count"] = label_names_.size();
    j["epoch_losses"] = epoch_losses_;
    j["stopword_sha256"] = stopword_hash;
    j["lexicon_sha256"] = lexicon_hash;
    j["content_sha256"] = content_hash();
    j["arrays"] = {{"vocab.txt", sha256_hex(vocab_txt)},
                   {"labels.txt", sha256_hex(labels_txt)},
                   {"word_vectors.f32", sha256_hex(wv)},
                   {"label_vectors.f32", sha256_hex(lv)},
                   {"output_weights.f32", sha256_hex(ow)}};
    j["created_utc"] = utc_timestamp_now();
    atomic_write_file(dir / "manifest.json", j.dump(2) + "\n");
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& dir) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    if (j.at("format_version").get<int>() != kFormatVersion)
        throw InputError("unsupported embedding model format version");

    EmbeddingModel m;
    const auto& c = j.at("config");
    m.config_.dim = c.at("dim").get<int>();
    m.config_.window = c.at("window").get<int>();
    m.config_.epochs = c.at("epochs").get<int>();
    m.config_.initial_lr = c.at("initial_lr").get<float>();
    m.config_.min_count = c.at("min_count").get<int>();
    m.config_.negative_samples = c.at("negative_samples").get<int>();
    m.config_.seed = c.at("seed").get<uint64_t>();
    m.config_.workers = c.at("workers").get<int>();
    m.epoch_losses_ = j.value("epoch_losses", std::vector<double>{});
    m.stopword_hash = j.value("stopword_sha256", "");
    m.lexicon_hash = j.value("lexicon_sha256", "");

    std::istringstream vin(read_text_file(dir / "vocab.txt"));
    std::string word;
    int64_t f;
    while (vin >> word >> f) {
        m.word_index_[word] = int(m.vocab_words_.size());
        m.vocab_words_.push_back(word);
        m.word_freq_.push_back(f);
    }
    std::istringstream lin(read_text_file(dir / "labels.txt"));
    std::string label;
    while (std::getline(lin, label)) {
        if (label.empty()) continue;
        m.label_index_[label] = int(m.label_names_.size());
        m.label_names_.push_back(label);
    }
    size_t v = m.vocab_words_.size(), l = m.label_names_.size(), d = size_t(m.config_.dim);
    m.word_vecs_ = floats_of(read_text_file(dir / "word_vectors.f32"), v * d);
    m.label_vecs_ = floats_of(read_text_file(dir / "label_vectors.f32"), l * d);
    m.out_weights_ = floats_of(read_text_file(dir / "output_weights.f32"), v * d);

    std::string expect = j.value("content_sha256", "");
    if (!expect.empty() && m.content_hash() != expect)
        throw InputError("embedding model content hash mismatch");
    m.build_unigram_table();
    return m;
}

}  // namespace puminer
