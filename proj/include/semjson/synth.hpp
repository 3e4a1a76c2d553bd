#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "semjson/common.hpp"
#include "semjson/json_ingest.hpp"
#include "semjson/random.hpp"

namespace semjson {

enum class SynthProfile {
    separable,  // flat documents, one scalar value per class
    joint,      // class pairs told apart only by how values are spread over child keys
};

struct SynthSpec {
    std::size_t classes = 5;
    std::size_t docs_per_class = 200;
    int max_depth = 3;
    double noise = 0.1;
    std::uint64_t seed = 1;
    SynthProfile profile = SynthProfile::joint;
};

struct SynthCorpus {
    std::vector<std::string> lines;  // one compact JSON document per line
    AnnotationMap annotations;

    std::string corpus_text() const {
        std::string out;
        for (const auto& l : lines) out += l + "\n";
        return out;
    }
    std::string annotation_text() const {
        std::string out;
        for (const auto& r : annotations.rules()) {
            nlohmann::ordered_json j{{"pattern", r.pattern}, {"label", r.label}};
            out += j.dump() + "\n";
        }
        return out;
    }
};

inline SynthProfile parse_profile(const std::string& s) {
    if (s == "separable") return SynthProfile::separable;
    if (s == "joint") return SynthProfile::joint;
    throw ConfigError("unknown synth profile '" + s + "' (expected separable or joint)");
}

inline const char* profile_name(SynthProfile p) { return p == SynthProfile::separable ? "separable" : "joint"; }

namespace synth_detail {

inline std::string random_text(Rng& rng, std::string_view alphabet, std::size_t lo, std::size_t hi) {
    std::string s;
    const std::size_t n = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
}

inline constexpr std::array<const char*, 8> kScalarNames = {"screen_name",  "color",          "timestamp_ms", "country_code",
                                                            "description", "lang", "followers_count", "latitude"};

inline constexpr std::array<const char*, 24> kWords = {
    "coffee", "morning", "city", "music", "game", "night", "love",  "team",
    "happy",  "weekend", "news", "photo", "today", "life",  "world", "friends",
    "summer", "food",    "live", "show",  "great", "week",  "home",  "travel"};

/// Value of scalar class `k`; each class has its own alphabet, range or pool.
inline nlohmann::ordered_json scalar_value(std::size_t k, Rng& rng) {
    switch (k) {
        case 0: return random_text(rng, "abcdefgh", 4, 8) + "_" + random_text(rng, "0123456789", 1, 3);
        case 1: return "#" + random_text(rng, "0123456789ABCDEF", 6, 6);
        case 2: return static_cast<std::int64_t>(1500000000000LL + static_cast<std::int64_t>(rng.below(100000000000ULL)));
        case 3: {
            static constexpr std::array<const char*, 10> codes = {"US", "GB", "FR", "DE", "JP", "BR", "IN", "CA", "MX", "KR"};
            return codes[rng.below(codes.size())];
        }
        case 4: {
            std::string s;
            const auto n = rng.between(3, 6);
            for (std::int64_t i = 0; i < n; ++i) s += (i ? " " : "") + std::string(kWords[rng.below(kWords.size())]);
            return s;
        }
        case 5: {
            static constexpr std::array<const char*, 6> langs = {"en", "es", "fr", "pt", "ja", "ko"};
            return langs[rng.below(langs.size())];
        }
        case 6: return static_cast<std::int64_t>(rng.below(5000));
        case 7: return std::round(rng.uniform(-90.0, 90.0) * 10000.0) / 10000.0;
        default: return "k" + std::to_string(k) + "x" + random_text(rng, "0123456789", 3, 5);
    }
}

inline std::string scalar_name(std::size_t k) {
    return k < kScalarNames.size() ? kScalarNames[k] : "field_" + std::to_string(k);
}

inline constexpr std::array<const char*, 6> kPairNames = {"user_mentions", "urls", "media", "symbols", "hashtags", "polls"};

inline std::string pair_name(std::size_t pair, bool second) {
    const std::size_t i = 2 * pair + (second ? 1 : 0);
    return i < kPairNames.size() ? kPairNames[i] : "group" + std::to_string(pair) + (second ? "_b" : "_a");
}

// The two token pools of a pair; pools of different pairs use different alphabets.
inline std::string pool_token(std::size_t pair, bool y_pool, Rng& rng) {
    static constexpr std::array<const char*, 4> letters = {"abcdefghijklm", "nopqrstuvwxyz", "ABCDEFGHIJKLM", "NOPQRSTUVWXYZ"};
    static constexpr std::string_view marks = "#$%&+=~^";
    if (!y_pool) return random_text(rng, letters[pair % letters.size()], 5, 8);
    return random_text(rng, "0123456789", 6, 9) + std::string(1, marks[pair % marks.size()]);
}

inline constexpr const char* kInnerKey = "entities";
inline constexpr const char* kLeftKey = "primary";
inline constexpr const char* kRightKey = "secondary";

/// "Pure" instances put all pool-X tokens under one child and all pool-Y tokens
/// under the other; "mixed" instances spread both pools evenly. The whole
/// instance holds four X and four Y tokens either way.
inline nlohmann::ordered_json pair_instance(std::size_t pair, bool mixed, Rng& rng) {
    std::vector<std::string> x, y;
    for (int i = 0; i < 4; ++i) x.push_back(pool_token(pair, false, rng));
    for (int i = 0; i < 4; ++i) y.push_back(pool_token(pair, true, rng));
    std::vector<std::string> left, right;
    if (!mixed) {
        left = x;
        right = y;
    } else {
        left = {x[0], x[1], y[0], y[1]};
        right = {x[2], x[3], y[2], y[3]};
        rng.shuffle(left);
        rng.shuffle(right);
    }
    nlohmann::ordered_json inner;
    inner[kLeftKey] = left;
    inner[kRightKey] = right;
    nlohmann::ordered_json outer;
    outer[kInnerKey] = std::move(inner);
    return outer;
}

}  // namespace synth_detail

/// Deterministic Twitter-shaped corpus. In the joint profile every two classes
/// form a pair whose instances differ only in how values are grouped under
/// child keys; any leftover class is a scalar one. Child records of pair
/// instances are labelled "payload" and "part".
inline SynthCorpus generate_synthetic_corpus(const SynthSpec& spec) {
    using namespace synth_detail;
    if (spec.classes < 2) throw ConfigError("synth: at least two classes required");
    if (spec.docs_per_class == 0) throw ConfigError("synth: docs_per_class must be positive");
    if (spec.noise < 0.0 || spec.noise > 1.0) throw ConfigError("synth: noise must be in [0, 1]");
    if (spec.profile == SynthProfile::joint && spec.max_depth < 3)
        throw ConfigError("synth: the joint profile needs max_depth >= 3");

    Rng rng(mix_seed(spec.seed ^ 0x73796e7468ULL));
    SynthCorpus out;
    const std::size_t pairs = spec.profile == SynthProfile::joint ? spec.classes / 2 : 0;
    const std::size_t scalars = spec.classes - 2 * pairs;

    for (std::size_t k = 0; k < scalars; ++k) out.annotations.add("$." + scalar_name(k), scalar_name(k));
    for (std::size_t p = 0; p < pairs; ++p)
        for (bool second : {false, true}) {
            const std::string name = pair_name(p, second);
            out.annotations.add("$." + name, name);
            out.annotations.add("$." + name + "." + kInnerKey, "payload");
            out.annotations.add("$." + name + "." + kInnerKey + ".*", "part");
        }

    // Each pair contributes docs_per_class instances of each member, spread over
    // 2 * docs_per_class documents in shuffled order.
    const std::size_t docs = pairs ? 2 * spec.docs_per_class : spec.docs_per_class;
    std::vector<std::vector<bool>> pair_member(pairs);
    for (auto& m : pair_member) {
        m.assign(docs, false);
        for (std::size_t i = spec.docs_per_class; i < docs; ++i) m[i] = true;
        rng.shuffle(m);
    }

    for (std::size_t d = 0; d < docs; ++d) {
        nlohmann::ordered_json doc = nlohmann::ordered_json::object();
        if (d < spec.docs_per_class) {
            for (std::size_t k = 0; k < scalars; ++k) {
                std::size_t source = k;
                if (scalars > 1 && spec.noise > 0.0 && rng.bernoulli(spec.noise))
                    source = (k + 1 + rng.below(scalars - 1)) % scalars;
                doc[scalar_name(k)] = scalar_value(source, rng);
            }
        }
        for (std::size_t p = 0; p < pairs; ++p) {
            const bool second = pair_member[p][d];
            bool mixed = second;
            if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) mixed = !mixed;
            doc[pair_name(p, second)] = pair_instance(p, mixed, rng);
        }
        out.lines.push_back(doc.dump());
    }
    return out;
}

}  // namespace semjson
