#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semjson/common.hpp"

namespace semjson {

inline constexpr std::size_t kWordDim = 50;
inline constexpr std::size_t kParagraphDim = 400;

/// Lowercased maximal runs of ASCII letters and digits.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur += static_cast<char>(c);
        } else if (c >= 'A' && c <= 'Z') {
            cur += static_cast<char>(c - 'A' + 'a');
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/// Token -> fixed-dimension vector (GloVe text format).
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dimension = kWordDim) : dimension_(dimension) {}

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return vectors_.size(); }
    bool empty() const noexcept { return vectors_.empty(); }
    /// Lines whose token repeated an earlier entry (the later line wins).
    std::size_t duplicate_count() const noexcept { return duplicates_; }

    void insert(std::string token, std::vector<double> vec) {
        if (token.empty()) throw ContractViolation("embedding token must be non-empty");
        if (vec.size() != dimension_) throw ContractViolation("embedding for '" + token + "' has wrong dimension");
        auto [it, inserted] = vectors_.insert_or_assign(std::move(token), std::move(vec));
        if (!inserted) ++duplicates_;
    }

    const std::vector<double>* find(const std::string& token) const {
        auto it = vectors_.find(token);
        return it == vectors_.end() ? nullptr : &it->second;
    }

private:
    std::size_t dimension_;
    std::unordered_map<std::string, std::vector<double>> vectors_;
    std::size_t duplicates_ = 0;
};

/// Reads `token v1 ... vD` lines. Blank lines are skipped; any other line must
/// have exactly D numbers.
inline EmbeddingTable load_embeddings(const std::string& path, std::size_t dimension = kWordDim) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open embedding file " + path);
    EmbeddingTable table(dimension);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::vector<std::string_view> fields;
        std::string_view sv(line);
        std::size_t i = 0;
        while (i < sv.size()) {
            while (i < sv.size() && (sv[i] == ' ' || sv[i] == '\t' || sv[i] == '\r')) ++i;
            std::size_t j = i;
            while (j < sv.size() && sv[j] != ' ' && sv[j] != '\t' && sv[j] != '\r') ++j;
            if (j > i) fields.push_back(sv.substr(i, j - i));
            i = j;
        }
        if (fields.empty()) continue;
        if (fields.size() != dimension + 1)
            throw LoadError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dimension) +
                            " values, found " + std::to_string(fields.size() - 1));
        std::vector<double> vec(dimension);
        for (std::size_t d = 0; d < dimension; ++d) {
            auto f = fields[d + 1];
            auto res = std::from_chars(f.data(), f.data() + f.size(), vec[d]);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(vec[d]))
                throw LoadError(path + ":" + std::to_string(lineno) + ": bad number '" + std::string(f) + "'");
        }
        table.insert(std::string(fields[0]), std::move(vec));
    }
    return table;
}

/// Source of 400-dimensional paragraph vectors.
class ParagraphProvider {
public:
    virtual ~ParagraphProvider() = default;
    virtual std::vector<double> embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const noexcept { return kParagraphDim; }
};

/// Signed feature hashing over the token bag, L2-normalized.
inline std::vector<double> hashing_vector(std::string_view text, std::size_t dims = kParagraphDim) {
    std::vector<double> v(dims, 0.0);
    for (const auto& tok : tokenize(text)) {
        std::uint64_t h = fnv1a(tok);
        std::size_t slot = static_cast<std::size_t>(h % dims);
        double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
        v[slot] += sign;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

class HashingProvider final : public ParagraphProvider {
public:
    std::vector<double> embed(std::string_view text) const override { return hashing_vector(text); }
};

}  // namespace semjson
