#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "semjson/common.hpp"
#include "semjson/embeddings.hpp"
#include "semjson/json_ingest.hpp"

namespace semjson {

// Slot layout of a feature vector.
inline constexpr std::size_t kGlobalStats = 27;
inline constexpr std::size_t kCharCount = 96;
inline constexpr std::size_t kCharFunctions = 10;
inline constexpr std::size_t kCharFeatures = kCharCount * kCharFunctions;  // 960
inline constexpr std::size_t kWordFeatures = 4 * kWordDim;                  // 200
inline constexpr std::size_t kFeatureDim = kGlobalStats + kCharFeatures + kWordFeatures + kParagraphDim;

inline constexpr std::size_t kGlobalOffset = 0;
inline constexpr std::size_t kCharOffset = kGlobalOffset + kGlobalStats;
inline constexpr std::size_t kWordOffset = kCharOffset + kCharFeatures;
inline constexpr std::size_t kParagraphOffset = kWordOffset + kWordFeatures;

static_assert(kFeatureDim == 1587);

/// Names of the 27 global statistics, in slot order.
inline constexpr std::array<const char*, kGlobalStats> kGlobalStatNames = {
    "n_values",       "n_distinct",     "frac_distinct",   "entropy",          "frac_numeric",
    "frac_integer",   "frac_alpha",     "frac_alnum",      "frac_empty",       "numeric_mean",
    "numeric_std",    "numeric_min",    "numeric_max",     "numeric_median",   "numeric_sum",
    "length_mean",    "length_std",     "length_min",      "length_max",       "length_median",
    "length_sum",     "words_mean",     "words_std",       "words_min",        "words_max",
    "words_median",   "frac_whitespace"};

/// Order of the ten per-character functions.
inline constexpr std::array<const char*, kCharFunctions> kCharFunctionNames = {
    "any", "all", "mean", "variance", "min", "max", "median", "sum", "kurtosis", "skewness"};

/// Form feed followed by the printable characters 32..126.
class CharSet {
public:
    CharSet() {
        codes_[0] = 12;
        for (int c = 32; c <= 126; ++c) codes_[static_cast<std::size_t>(c - 31)] = static_cast<unsigned char>(c);
        slot_.fill(-1);
        for (std::size_t i = 0; i < kCharCount; ++i) slot_[codes_[i]] = static_cast<int>(i);
    }
    std::size_t size() const noexcept { return kCharCount; }
    unsigned char operator[](std::size_t i) const { return codes_[i]; }
    const std::array<unsigned char, kCharCount>& codes() const noexcept { return codes_; }
    /// Slot of a byte, or -1 if untracked.
    int slot(unsigned char c) const noexcept { return slot_[c]; }

private:
    std::array<unsigned char, kCharCount> codes_{};
    std::array<int, 256> slot_{};
};

inline const CharSet& default_charset() {
    static const CharSet cs;
    return cs;
}

/// Fixed-length feature vector (1,587 slots).
class FeatureVector {
public:
    FeatureVector() : values_(kFeatureDim, 0.0) {}
    explicit FeatureVector(std::vector<double> v) : values_(std::move(v)) {
        if (values_.size() != kFeatureDim)
            throw ContractViolation("feature vector must have " + std::to_string(kFeatureDim) + " slots");
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    std::span<const double> global_stats() const { return {values_.data() + kGlobalOffset, kGlobalStats}; }
    std::span<const double> char_features() const { return {values_.data() + kCharOffset, kCharFeatures}; }
    std::span<const double> word_features() const { return {values_.data() + kWordOffset, kWordFeatures}; }
    std::span<const double> paragraph_features() const { return {values_.data() + kParagraphOffset, kParagraphDim}; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    std::vector<double> values_;
};

namespace stats {

struct Summary {
    double mean = 0, stddev = 0, min = 0, max = 0, median = 0, sum = 0;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Population statistics; all zero for an empty sample.
inline Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    for (double x : v) s.sum += x;
    s.mean = s.sum / static_cast<double>(v.size());
    double m2 = 0.0;
    for (double x : v) m2 += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(m2 / static_cast<double>(v.size()));
    s.median = median_of(v);
    return s;
}

/// Population moments with the degenerate-variance convention: skewness and
/// excess kurtosis are 0 when m2 < 1e-12.
struct Moments {
    double mean = 0, variance = 0, skewness = 0, kurtosis = 0;
};

inline Moments moments(std::span<const double> v) {
    Moments m;
    if (v.empty()) return m;
    const double n = static_cast<double>(v.size());
    for (double x : v) m.mean += x;
    m.mean /= n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : v) {
        double d = x - m.mean;
        double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.variance = m2;
    if (m2 >= 1e-12) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

}  // namespace stats

namespace detail {

inline constexpr double kNumericClamp = 1e150;

inline bool parse_numeric(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc{} || res.ptr != e || !std::isfinite(out)) return false;
    out = std::clamp(out, -kNumericClamp, kNumericClamp);
    return true;
}

inline bool is_integer_text(const std::string& s) {
    std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::size_t whitespace_tokens(const std::string& s) {
    std::size_t n = 0;
    bool in = false;
    for (char ch : s) {
        bool sp = is_space(static_cast<unsigned char>(ch));
        if (!sp && !in) ++n;
        in = !sp;
    }
    return n;
}

inline void require_column(const std::vector<std::string>& column, const char* who) {
    if (column.empty()) throw ContractViolation(std::string(who) + ": column is empty");
}

}  // namespace detail

/// The 27 hand-crafted column statistics (order: kGlobalStatNames).
inline std::array<double, kGlobalStats> global_stats(const std::vector<std::string>& column) {
    detail::require_column(column, "global_stats");
    const double n = static_cast<double>(column.size());
    std::map<std::string, std::size_t> freq;
    std::vector<double> numeric, lengths, words;
    std::size_t n_int = 0, n_alpha = 0, n_alnum = 0, n_empty = 0, n_ws = 0;
    for (const auto& v : column) {
        ++freq[v];
        double x;
        if (detail::parse_numeric(v, x)) {
            numeric.push_back(x);
            if (detail::is_integer_text(v)) ++n_int;
        }
        bool alpha = !v.empty(), alnum = !v.empty(), ws = false;
        for (char ch : v) {
            auto c = static_cast<unsigned char>(ch);
            bool letter = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
            bool digit = c >= '0' && c <= '9';
            alpha = alpha && letter;
            alnum = alnum && (letter || digit);
            ws = ws || detail::is_space(c);
        }
        n_alpha += alpha;
        n_alnum += alnum;
        n_ws += ws;
        n_empty += v.empty();
        lengths.push_back(static_cast<double>(v.size()));
        words.push_back(static_cast<double>(detail::whitespace_tokens(v)));
    }
    double entropy = 0.0;
    for (const auto& [value, count] : freq) {
        double p = static_cast<double>(count) / n;
        entropy -= p * std::log2(p);
    }
    if (entropy < 0.0) entropy = 0.0;  // -0.0 for a single distinct value

    auto num = stats::summarize(numeric);
    auto len = stats::summarize(lengths);
    auto wrd = stats::summarize(words);
    return {n,
            static_cast<double>(freq.size()),
            static_cast<double>(freq.size()) / n,
            entropy,
            static_cast<double>(numeric.size()) / n,
            static_cast<double>(n_int) / n,
            static_cast<double>(n_alpha) / n,
            static_cast<double>(n_alnum) / n,
            static_cast<double>(n_empty) / n,
            num.mean, num.stddev, num.min, num.max, num.median, num.sum,
            len.mean, len.stddev, len.min, len.max, len.median, len.sum,
            wrd.mean, wrd.stddev, wrd.min, wrd.max, wrd.median,
            static_cast<double>(n_ws) / n};
}

/// For each tracked character (outer) the ten functions (inner) of its
/// per-value occurrence counts.
inline std::vector<double> char_distributions(const std::vector<std::string>& column,
                                              const CharSet& chars = default_charset()) {
    detail::require_column(column, "char_distributions");
    const std::size_t n = column.size();
    // counts[c * n + v] = occurrences of character c in value v
    std::vector<double> counts(kCharCount * n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
        for (char ch : column[v])
            if (int s = chars.slot(static_cast<unsigned char>(ch)); s >= 0) counts[static_cast<std::size_t>(s) * n + v] += 1.0;

    std::vector<double> out;
    out.reserve(kCharFeatures);
    std::vector<double> sorted(n);
    for (std::size_t c = 0; c < kCharCount; ++c) {
        std::span<const double> k(counts.data() + c * n, n);
        double sum = 0.0, mn = k[0], mx = k[0];
        std::size_t nonzero = 0;
        for (double x : k) {
            sum += x;
            mn = std::min(mn, x);
            mx = std::max(mx, x);
            nonzero += x > 0;
        }
        std::copy(k.begin(), k.end(), sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        auto m = stats::moments(k);
        out.push_back(nonzero > 0 ? 1.0 : 0.0);
        out.push_back(nonzero == n ? 1.0 : 0.0);
        out.push_back(m.mean);
        out.push_back(m.variance);
        out.push_back(mn);
        out.push_back(mx);
        out.push_back(median);
        out.push_back(sum);
        out.push_back(m.kurtosis);
        out.push_back(m.skewness);
    }
    return out;
}

/// Element-wise mode after rounding to 6 decimals; ties go to the smaller value.
inline double rounded_mode(const std::vector<double>& values) {
    std::map<double, std::size_t> freq;
    for (double x : values) ++freq[std::round(x * 1e6) / 1e6];
    double best = 0.0;
    std::size_t best_n = 0;
    for (const auto& [v, c] : freq) {
        if (c > best_n) {
            best = v;
            best_n = c;
        }
    }
    return best;
}

/// mean | mode | median | variance of the per-value averaged embeddings.
inline std::vector<double> word_embedding_features(const std::vector<std::string>& column, const EmbeddingTable& table) {
    detail::require_column(column, "word_embedding_features");
    if (table.dimension() != kWordDim)
        throw ConfigError("word embedding table must have dimension " + std::to_string(kWordDim));
    std::vector<std::vector<double>> per_value;
    for (const auto& v : column) {
        std::vector<double> acc(kWordDim, 0.0);
        std::size_t hits = 0;
        for (const auto& tok : tokenize(v)) {
            if (const auto* e = table.find(tok)) {
                for (std::size_t d = 0; d < kWordDim; ++d) acc[d] += (*e)[d];
                ++hits;
            }
        }
        if (hits == 0) continue;
        for (double& x : acc) x /= static_cast<double>(hits);
        per_value.push_back(std::move(acc));
    }
    std::vector<double> out(kWordFeatures, 0.0);
    if (per_value.empty()) return out;
    std::vector<double> coord(per_value.size());
    for (std::size_t d = 0; d < kWordDim; ++d) {
        for (std::size_t i = 0; i < per_value.size(); ++i) coord[i] = per_value[i][d];
        auto m = stats::moments(coord);
        out[d] = m.mean;
        out[kWordDim + d] = rounded_mode(coord);
        out[2 * kWordDim + d] = stats::median_of(coord);
        out[3 * kWordDim + d] = m.variance;
    }
    return out;
}

inline std::string join_column(const std::vector<std::string>& column) {
    std::string text;
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (i) text += ' ';
        text += column[i];
    }
    return text;
}

inline std::vector<double> paragraph_features(const std::vector<std::string>& column, const ParagraphProvider& provider) {
    detail::require_column(column, "paragraph_features");
    std::vector<double> v;
    try {
        v = provider.embed(join_column(column));
    } catch (const std::exception& e) {
        throw Error(std::string("paragraph provider failed: ") + e.what());
    }
    if (v.size() != kParagraphDim) throw ConfigError("paragraph provider returned the wrong dimension");
    return v;
}

/// Concatenates the four families in slot order.
inline FeatureVector extract_features(const std::vector<std::string>& column, const EmbeddingTable& table,
                                      const ParagraphProvider& provider) {
    detail::require_column(column, "extract_features");
    std::vector<double> values;
    values.reserve(kFeatureDim);
    auto g = global_stats(column);
    values.insert(values.end(), g.begin(), g.end());
    auto c = char_distributions(column);
    values.insert(values.end(), c.begin(), c.end());
    auto w = word_embedding_features(column, table);
    values.insert(values.end(), w.begin(), w.end());
    auto p = paragraph_features(column, provider);
    values.insert(values.end(), p.begin(), p.end());
    for (double& x : values)
        if (!std::isfinite(x)) x = 0.0;
    return FeatureVector(std::move(values));
}

inline FeatureVector extract_features(const PathRecord& record, const EmbeddingTable& table,
                                      const ParagraphProvider& provider) {
    return extract_features(record.column, table, provider);
}

/// Per-slot z-scoring fitted on training vectors.
class Scaler {
public:
    static constexpr double kMinStd = 1e-8;

    Scaler() = default;
    Scaler(std::vector<double> mean, std::vector<double> stddev) : mean_(std::move(mean)), std_(std::move(stddev)) {
        if (mean_.size() != kFeatureDim || std_.size() != kFeatureDim)
            throw ContractViolation("scaler arrays must have " + std::to_string(kFeatureDim) + " entries");
        for (double& s : std_) s = std::max(s, kMinStd);
    }

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& stddev() const noexcept { return std_; }
    bool fitted() const noexcept { return !mean_.empty(); }

    /// Slots whose training spread is below kMinStd are only centered.
    double apply(std::size_t slot, double x) const {
        double c = x - mean_[slot];
        return std_[slot] <= kMinStd ? c : c / std_[slot];
    }

    FeatureVector apply(const FeatureVector& v) const {
        FeatureVector out;
        for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] = apply(i, v[i]);
        return out;
    }

    nlohmann::json to_json() const { return {{"format_version", 1}, {"mean", mean_}, {"std", std_}}; }

    static Scaler from_json(const nlohmann::json& j) {
        return Scaler(j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>());
    }

private:
    std::vector<double> mean_;
    std::vector<double> std_;
};

inline Scaler fit_scaler(const std::vector<const FeatureVector*>& train) {
    if (train.empty()) throw ContractViolation("fit_scaler: empty training set");
    std::vector<double> mean(kFeatureDim, 0.0), var(kFeatureDim, 0.0);
    const double n = static_cast<double>(train.size());
    for (const auto* v : train)
        for (std::size_t i = 0; i < kFeatureDim; ++i) mean[i] += (*v)[i];
    for (double& m : mean) m /= n;
    for (const auto* v : train)
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            double d = (*v)[i] - mean[i];
            var[i] += d * d;
        }
    std::vector<double> sd(kFeatureDim);
    for (std::size_t i = 0; i < kFeatureDim; ++i) sd[i] = std::sqrt(var[i] / n);
    return Scaler(std::move(mean), std::move(sd));
}

inline Scaler fit_scaler(const std::vector<FeatureVector>& train) {
    std::vector<const FeatureVector*> ptrs;
    ptrs.reserve(train.size());
    for (const auto& v : train) ptrs.push_back(&v);
    return fit_scaler(ptrs);
}

inline FeatureVector apply_scaler(const Scaler& s, const FeatureVector& v) { return s.apply(v); }

}  // namespace semjson
