#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semjson/binary_io.hpp"
#include "semjson/common.hpp"
#include "semjson/embeddings.hpp"
#include "semjson/matrix.hpp"
#include "semjson/random.hpp"

namespace semjson {

struct PvDbowConfig {
    std::size_t dims = kParagraphDim;
    int epochs = 40;
    int negatives = 5;
    double learning_rate = 0.025;
    double min_learning_rate = 0.0001;
    int infer_steps = 50;
    std::uint64_t seed = 1;
};

/// Distributed bag-of-words paragraph vectors trained with negative sampling.
class PvDbowModel {
public:
    std::size_t dims() const noexcept { return dims_; }
    std::size_t vocab_size() const noexcept { return words_.size(); }
    std::size_t paragraph_count() const noexcept { return paragraphs_.rows(); }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<std::string>& words() const noexcept { return words_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    const Matrix<float>& paragraphs() const noexcept { return paragraphs_; }
    const Matrix<float>& word_weights() const noexcept { return word_out_; }
    const std::vector<double>& epoch_losses() const noexcept { return epoch_losses_; }

    int index_of(const std::string& w) const {
        auto it = index_.find(w);
        return it == index_.end() ? -1 : static_cast<int>(it->second);
    }

    /// Draws a word index from counts^0.75.
    std::size_t sample_negative(Rng& rng) const {
        double u = rng.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
    }

    /// `count` negatives for target `w`; a draw equal to the target is redrawn
    /// (a few times at most, so a one-word vocabulary still terminates).
    void draw_negatives(std::uint32_t w, int count, Rng& rng, std::vector<std::uint32_t>& out) const {
        out.clear();
        for (int k = 0; k < count; ++k)
            for (int attempt = 0; attempt < 8; ++attempt) {
                auto n = static_cast<std::uint32_t>(sample_negative(rng));
                if (n != w) {
                    out.push_back(n);
                    break;
                }
            }
    }

    std::vector<double> infer_vector(std::string_view text, int steps, double lr = 0.025, double min_lr = 0.0001,
                                     int negatives = 5) const;

    friend PvDbowModel train_pvdbow(const std::vector<std::string>& texts, const PvDbowConfig& cfg);
    friend void save_pvdbow(const PvDbowModel& m, const std::string& path);
    friend PvDbowModel load_pvdbow(const std::string& path);

private:
    void build_sampling_table() {
        cumulative_.resize(counts_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            acc += std::pow(static_cast<double>(counts_[i]), 0.75);
            cumulative_[i] = acc;
        }
        index_.clear();
        for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<std::uint32_t>(i));
    }

    std::size_t dims_ = kParagraphDim;
    std::uint64_t seed_ = 0;
    std::vector<std::string> words_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<double> cumulative_;
    Matrix<float> paragraphs_;
    Matrix<float> word_out_;
    std::vector<double> epoch_losses_;
};

namespace pvdbow {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

/// Negative-sampling loss of one (paragraph, word) pair:
/// -log s(d.o_w) - sum_n log s(-d.o_n). `outputs[0]` is the true word.
template <typename T>
double pair_loss(std::span<const T> paragraph, const std::vector<std::span<const T>>& outputs) {
    double loss = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        double f = dot(paragraph, outputs[k]);
        // -log s(x) = log(1 + e^-x), evaluated stably
        double x = k == 0 ? f : -f;
        loss += x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
    }
    return loss;
}

/// Gradient coefficients: dL/dd = sum_k c_k o_k and dL/do_k = c_k d, with
/// c_k = s(d.o_k) - label_k.
template <typename T>
std::vector<double> pair_coefficients(std::span<const T> paragraph, const std::vector<std::span<const T>>& outputs) {
    std::vector<double> c(outputs.size());
    for (std::size_t k = 0; k < outputs.size(); ++k)
        c[k] = sigmoid(dot(paragraph, outputs[k])) - (k == 0 ? 1.0 : 0.0);
    return c;
}

inline std::vector<std::vector<std::uint32_t>> index_texts(const std::vector<std::string>& texts,
                                                          const std::unordered_map<std::string, std::uint32_t>& index) {
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::vector<std::uint32_t> ids;
        for (const auto& tok : tokenize(t)) {
            auto it = index.find(tok);
            if (it != index.end()) ids.push_back(it->second);
        }
        out.push_back(std::move(ids));
    }
    return out;
}

// One SGD step on a pair. Word rows are written only through `writable`
// (nullptr keeps them frozen).
inline double sgd_pair(float* d, const Matrix<float>& words, Matrix<float>* writable, std::uint32_t target,
                       const std::vector<std::uint32_t>& negs, double lr, std::vector<double>& scratch) {
    const std::size_t dims = words.cols();
    scratch.assign(dims, 0.0);
    double loss = 0.0;
    for (std::size_t k = 0; k <= negs.size(); ++k) {
        std::uint32_t u = k == 0 ? target : negs[k - 1];
        const float* o = words.row(u).data();
        double f = 0.0;
        for (std::size_t i = 0; i < dims; ++i) f += static_cast<double>(d[i]) * o[i];
        double label = k == 0 ? 1.0 : 0.0;
        double x = k == 0 ? f : -f;
        loss += x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
        double g = (label - sigmoid(f)) * lr;
        for (std::size_t i = 0; i < dims; ++i) scratch[i] += g * o[i];
        if (writable != nullptr) {
            float* ow = writable->row(u).data();
            for (std::size_t i = 0; i < dims; ++i) ow[i] += static_cast<float>(g * d[i]);
        }
    }
    for (std::size_t i = 0; i < dims; ++i) d[i] += static_cast<float>(scratch[i]);
    return loss;
}

inline void init_row(float* row, std::size_t dims, Rng& rng) {
    for (std::size_t i = 0; i < dims; ++i) row[i] = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(dims));
}

}  // namespace pvdbow

/// Single-threaded so that a seed fixes the whole trajectory.
inline PvDbowModel train_pvdbow(const std::vector<std::string>& texts, const PvDbowConfig& cfg) {
    if (texts.empty()) throw ContractViolation("train_pvdbow: no texts");
    if (cfg.dims == 0 || cfg.epochs < 0 || cfg.negatives < 0) throw ConfigError("train_pvdbow: bad configuration");
    PvDbowModel m;
    m.dims_ = cfg.dims;
    m.seed_ = cfg.seed;
    std::unordered_map<std::string, std::uint32_t> index;
    for (const auto& t : texts) {
        for (auto& tok : tokenize(t)) {
            auto [it, inserted] = index.emplace(tok, static_cast<std::uint32_t>(m.words_.size()));
            if (inserted) {
                m.words_.push_back(tok);
                m.counts_.push_back(0);
            }
            ++m.counts_[it->second];
        }
    }
    if (m.words_.empty()) throw TrainingError("train_pvdbow: empty vocabulary after tokenization");
    m.build_sampling_table();

    auto docs = pvdbow::index_texts(texts, m.index_);
    Rng rng(mix_seed(cfg.seed));
    m.paragraphs_ = Matrix<float>(texts.size(), cfg.dims);
    for (std::size_t p = 0; p < texts.size(); ++p) pvdbow::init_row(m.paragraphs_.row(p).data(), cfg.dims, rng);
    m.word_out_ = Matrix<float>(m.words_.size(), cfg.dims, 0.0f);

    std::size_t words_per_epoch = 0;
    for (const auto& d : docs) words_per_epoch += d.size();
    const double total = static_cast<double>(words_per_epoch) * std::max(cfg.epochs, 1);
    std::size_t processed = 0;

    std::vector<std::size_t> order(texts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::uint32_t> negs;
    std::vector<double> scratch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t pairs = 0;
        for (std::size_t p : order) {
            for (std::uint32_t w : docs[p]) {
                double lr = cfg.learning_rate -
                            (cfg.learning_rate - cfg.min_learning_rate) * static_cast<double>(processed) / total;
                ++processed;
                m.draw_negatives(w, cfg.negatives, rng, negs);
                epoch_loss += pvdbow::sgd_pair(m.paragraphs_.row(p).data(), m.word_out_, &m.word_out_, w, negs, lr,
                                               scratch);
                ++pairs;
            }
        }
        m.epoch_losses_.push_back(pairs ? epoch_loss / static_cast<double>(pairs) : 0.0);
    }
    return m;
}

inline std::vector<double> PvDbowModel::infer_vector(std::string_view text, int steps, double lr, double min_lr,
                                                     int negatives) const {
    std::string owned(text);
    Rng rng(mix_seed(seed_ ^ fnv1a(owned)));
    std::vector<float> row(dims_);
    pvdbow::init_row(row.data(), dims_, rng);
    std::vector<std::uint32_t> ids;
    for (const auto& tok : tokenize(text)) {
        auto it = index_.find(tok);
        if (it != index_.end()) ids.push_back(it->second);
    }
    if (!ids.empty() && steps > 0) {
        const double total = static_cast<double>(ids.size()) * steps;
        std::size_t processed = 0;
        std::vector<std::uint32_t> negs;
        std::vector<double> scratch;
        for (int s = 0; s < steps; ++s) {
            for (std::uint32_t w : ids) {
                double a = lr - (lr - min_lr) * static_cast<double>(processed++) / total;
                draw_negatives(w, negatives, rng, negs);
                pvdbow::sgd_pair(row.data(), word_out_, nullptr, w, negs, a, scratch);
            }
        }
    }
    return {row.begin(), row.end()};
}

inline constexpr std::uint32_t kPvDbowMagic = 0x42445650;  // "PVDB"
inline constexpr std::uint32_t kPvDbowVersion = 1;

/// Header (magic, version, dims, vocab size, paragraph count, seed), then the
/// vocabulary with counts, then the paragraph and word matrices as LE float32.
inline void save_pvdbow(const PvDbowModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path);
    binio::put_u32(out, kPvDbowMagic);
    binio::put_u32(out, kPvDbowVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(m.dims_));
    binio::put_u32(out, static_cast<std::uint32_t>(m.words_.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(m.paragraphs_.rows()));
    binio::put_u64(out, m.seed_);
    for (std::size_t i = 0; i < m.words_.size(); ++i) {
        binio::put_string(out, m.words_[i]);
        binio::put_u64(out, m.counts_[i]);
    }
    binio::put_f32(out, m.paragraphs_.storage());
    binio::put_f32(out, m.word_out_.storage());
    if (!out) throw LoadError("write failed for " + path);
}

inline PvDbowModel load_pvdbow(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path);
    binio::Reader r(in, path);
    if (r.u32("magic") != kPvDbowMagic) throw LoadError(path + ": bad magic");
    if (auto v = r.u32("version"); v != kPvDbowVersion) throw LoadError(path + ": unsupported version " + std::to_string(v));
    PvDbowModel m;
    m.dims_ = r.u32("dims");
    std::uint32_t vocab = r.u32("vocab_size");
    std::uint32_t paras = r.u32("paragraph_count");
    m.seed_ = r.u64("seed");
    if (m.dims_ == 0 || vocab == 0) throw LoadError(path + ": empty dims or vocabulary");
    for (std::uint32_t i = 0; i < vocab; ++i) {
        m.words_.push_back(r.string("vocabulary"));
        m.counts_.push_back(r.u64("vocabulary counts"));
    }
    m.paragraphs_ = Matrix<float>(paras, m.dims_);
    r.f32(m.paragraphs_.storage(), "paragraph matrix");
    m.word_out_ = Matrix<float>(vocab, m.dims_);
    r.f32(m.word_out_.storage(), "word matrix");
    r.expect_end();
    m.build_sampling_table();
    return m;
}

class PvDbowProvider final : public ParagraphProvider {
public:
    PvDbowProvider(std::shared_ptr<const PvDbowModel> model, int steps = 50) : model_(std::move(model)), steps_(steps) {
        if (!model_) throw ConfigError("PvDbowProvider: no model");
        if (model_->dims() != kParagraphDim) throw ConfigError("PvDbowProvider: model dimension must be 400");
    }
    std::vector<double> embed(std::string_view text) const override { return model_->infer_vector(text, steps_); }

private:
    std::shared_ptr<const PvDbowModel> model_;
    int steps_;
};

}  // namespace semjson
