#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "semjson/common.hpp"

namespace semjson {

/// Document tree. Object members keep their document order.
using JsonTree = nlohmann::ordered_json;

struct PathSegment {
    std::string key;  // empty for the array wildcard
    bool wildcard = false;

    static PathSegment make_key(std::string k) { return {std::move(k), false}; }
    static PathSegment array() { return {std::string{}, true}; }

    friend bool operator==(const PathSegment&, const PathSegment&) = default;
};

/// Sequence of key / `[*]` steps from the document root.
class JsonPath {
public:
    JsonPath() = default;
    explicit JsonPath(std::vector<PathSegment> segments) : segments_(std::move(segments)) {}

    /// Parses `$.a.b[*].c`. Keys may not contain '.' or '['.
    static JsonPath parse(std::string_view text) {
        if (text.empty() || text.front() != '$') throw ParseError(0, "path must start with '$'");
        JsonPath p;
        std::size_t i = 1;
        while (i < text.size()) {
            if (text[i] == '.') {
                std::size_t j = i + 1;
                while (j < text.size() && text[j] != '.' && text[j] != '[') ++j;
                if (j == i + 1) throw ParseError(i, "empty key segment");
                p.segments_.push_back(PathSegment::make_key(std::string(text.substr(i + 1, j - i - 1))));
                i = j;
            } else if (text.substr(i, 3) == "[*]") {
                p.segments_.push_back(PathSegment::array());
                i += 3;
            } else {
                throw ParseError(i, "unexpected character in path");
            }
        }
        return p;
    }

    const std::vector<PathSegment>& segments() const noexcept { return segments_; }
    bool empty() const noexcept { return segments_.empty(); }
    std::size_t size() const noexcept { return segments_.size(); }

    JsonPath child(std::string key) const {
        JsonPath p = *this;
        p.segments_.push_back(PathSegment::make_key(std::move(key)));
        return p;
    }
    JsonPath wildcard() const {
        JsonPath p = *this;
        p.segments_.push_back(PathSegment::array());
        return p;
    }
    JsonPath parent() const {
        JsonPath p = *this;
        if (!p.segments_.empty()) p.segments_.pop_back();
        return p;
    }

    int key_depth() const noexcept {
        int d = 0;
        for (const auto& s : segments_) d += s.wildcard ? 0 : 1;
        return d;
    }

    std::string final_key() const {
        for (auto it = segments_.rbegin(); it != segments_.rend(); ++it)
            if (!it->wildcard) return it->key;
        return {};
    }

    std::string str() const {
        std::string out = "$";
        for (const auto& s : segments_) {
            if (s.wildcard) {
                out += "[*]";
            } else {
                out += '.';
                out += s.key;
            }
        }
        return out;
    }

    friend bool operator==(const JsonPath&, const JsonPath&) = default;

private:
    std::vector<PathSegment> segments_;
};

/// One key-value pair of one document.
struct PathRecord {
    std::int64_t document_id = 0;
    JsonPath path;
    std::string label;
    std::vector<std::string> column;
    int depth = 0;
};

/// Ordered (pattern, label) rules. A pattern is a canonical path, optionally ending
/// in `.*` to match any single final key. First match wins.
class AnnotationMap {
public:
    struct Rule {
        std::string pattern;
        std::string label;
    };

    AnnotationMap() = default;
    explicit AnnotationMap(std::vector<Rule> rules) : rules_(std::move(rules)) {
        for (const auto& r : rules_)
            if (r.label.empty()) throw ConfigError("annotation rule '" + r.pattern + "' has an empty label");
    }

    void add(std::string pattern, std::string label) {
        if (label.empty()) throw ConfigError("annotation rule '" + pattern + "' has an empty label");
        rules_.push_back({std::move(pattern), std::move(label)});
    }

    const std::vector<Rule>& rules() const noexcept { return rules_; }

    static bool matches(std::string_view pattern, std::string_view path) {
        if (pattern.size() >= 2 && pattern.substr(pattern.size() - 2) == ".*") {
            std::string_view prefix = pattern.substr(0, pattern.size() - 1);  // keeps the dot
            if (path.size() <= prefix.size() || path.substr(0, prefix.size()) != prefix) return false;
            std::string_view rest = path.substr(prefix.size());
            return rest.find('.') == std::string_view::npos && rest.find('[') == std::string_view::npos;
        }
        return pattern == path;
    }

    /// Label of the first matching rule, or nullptr.
    const std::string* lookup(std::string_view path) const {
        for (const auto& r : rules_)
            if (matches(r.pattern, path)) return &r.label;
        return nullptr;
    }

    /// One `{"pattern":..., "label":...}` object per line; blank lines ignored.
    static AnnotationMap load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw LoadError("cannot open annotation file " + path);
        AnnotationMap map;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                auto j = nlohmann::json::parse(line);
                map.add(j.at("pattern").get<std::string>(), j.at("label").get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        return map;
    }

private:
    std::vector<Rule> rules_;
};

inline JsonTree parse_document(std::string_view text) {
    try {
        return JsonTree::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.byte, e.what());
    }
}

/// Shortest decimal that round-trips through a 64-bit float.
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline bool is_kept(const JsonTree& v) { return !v.is_null() && !v.is_boolean(); }

inline void write_compact(const JsonTree& v, std::string& out) {
    switch (v.type()) {
        case JsonTree::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!is_kept(*it)) continue;
                if (!first) out += ',';
                first = false;
                out += JsonTree(it.key()).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
                out += ':';
                write_compact(*it, out);
            }
            out += '}';
            break;
        }
        case JsonTree::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& e : v) {
                if (!is_kept(e)) continue;
                if (!first) out += ',';
                first = false;
                write_compact(e, out);
            }
            out += ']';
            break;
        }
        case JsonTree::value_t::number_integer:
        case JsonTree::value_t::number_unsigned:
        case JsonTree::value_t::number_float:
            out += format_number(v.get<double>());
            break;
        default:
            out += v.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    }
}

}  // namespace detail

/// Column text of a kept value: numbers in shortest form, strings unquoted,
/// containers as compact JSON (numbers inside formatted the same way, null and
/// Boolean members left out).
inline std::string serialize_value(const JsonTree& v) {
    if (!detail::is_kept(v)) throw ContractViolation("serialize_value: null and Boolean values have no column text");
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return format_number(v.get<double>());
    std::string out;
    detail::write_compact(v, out);
    return out;
}

namespace detail {

class Extractor {
public:
    Extractor(std::int64_t doc_id, const AnnotationMap& annotations, std::vector<PathRecord>& out)
        : doc_id_(doc_id), annotations_(annotations), out_(out) {}

    // `containers` are the objects/arrays sitting at `base` (one per merged occurrence).
    void descend(const JsonPath& base, const std::vector<const JsonTree*>& containers) {
        std::vector<std::pair<std::string, std::vector<const JsonTree*>>> keyed;
        std::vector<const JsonTree*> nested;
        for (const JsonTree* c : containers) {
            if (c->is_object()) {
                for (auto mit = c->begin(); mit != c->end(); ++mit) {
                    const std::string& k = mit.key();
                    const JsonTree& m = *mit;
                    if (!is_kept(m)) continue;
                    auto it = std::find_if(keyed.begin(), keyed.end(), [&](const auto& e) { return e.first == k; });
                    if (it == keyed.end()) {
                        keyed.emplace_back(k, std::vector<const JsonTree*>{&m});
                    } else {
                        it->second.push_back(&m);
                    }
                }
            } else if (c->is_array()) {
                for (const auto& e : *c)
                    if (e.is_object() || e.is_array()) nested.push_back(&e);
            }
        }
        for (const auto& [k, values] : keyed) visit(base.child(k), values);
        if (!nested.empty()) descend(base.wildcard(), nested);
    }

private:
    void visit(const JsonPath& path, const std::vector<const JsonTree*>& values) {
        PathRecord rec;
        rec.document_id = doc_id_;
        rec.path = path;
        rec.depth = path.key_depth();
        std::vector<const JsonTree*> containers;
        for (const JsonTree* v : values) {
            if (v->is_object() || v->is_array()) {
                containers.push_back(v);
                if (v->is_object()) {
                    for (const auto& m : *v)
                        if (is_kept(m)) rec.column.push_back(serialize_value(m));
                } else {
                    for (const auto& e : *v)
                        if (is_kept(e)) rec.column.push_back(serialize_value(e));
                }
            } else {
                rec.column.push_back(serialize_value(*v));
            }
        }
        // empty containers (or containers of only null/Boolean) carry no values
        if (!rec.column.empty()) {
            const std::string text = path.str();
            const std::string* annotated = annotations_.lookup(text);
            rec.label = annotated ? *annotated : path.final_key();
            out_.push_back(std::move(rec));
        }
        if (!containers.empty()) descend(path, containers);
    }

    std::int64_t doc_id_;
    const AnnotationMap& annotations_;
    std::vector<PathRecord>& out_;
};

}  // namespace detail

/// All key-value pairs of one document in pre-order. Values under arrays are
/// merged per `[*]` path. Null and Boolean values are dropped everywhere.
inline std::vector<PathRecord> extract_kv_pairs(const JsonTree& doc, std::int64_t doc_id,
                                                const AnnotationMap& annotations) {
    if (!doc.is_object()) throw StructuralError("document " + std::to_string(doc_id) + ": root is not an object");
    std::vector<PathRecord> out;
    detail::Extractor ex(doc_id, annotations, out);
    ex.descend(JsonPath{}, {&doc});
    return out;
}

/// Every value reached by `path` (wildcards fan out over array elements).
inline std::vector<const JsonTree*> resolve_path(const JsonTree& doc, const JsonPath& path) {
    std::vector<const JsonTree*> current{&doc};
    for (const auto& seg : path.segments()) {
        std::vector<const JsonTree*> next;
        for (const JsonTree* v : current) {
            if (seg.wildcard) {
                if (v->is_array())
                    for (const auto& e : *v) next.push_back(&e);
            } else if (v->is_object()) {
                auto it = v->find(seg.key);
                if (it != v->end()) next.push_back(&*it);
            }
        }
        current = std::move(next);
    }
    return current;
}

struct CorpusStats {
    std::map<int, std::size_t> depth_histogram;
    std::map<std::string, std::size_t> label_counts;
    std::size_t total = 0;
};

inline CorpusStats corpus_stats(const std::vector<PathRecord>& records) {
    CorpusStats s;
    for (const auto& r : records) {
        ++s.depth_histogram[r.depth];
        ++s.label_counts[r.label];
        ++s.total;
    }
    return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
    nlohmann::json depth = nlohmann::json::array();
    for (const auto& [d, n] : s.depth_histogram) depth.push_back({{"depth", d}, {"count", n}});
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [l, n] : s.label_counts) labels[l] = n;
    return {{"total", s.total}, {"depth_histogram", depth}, {"label_counts", labels}};
}

inline nlohmann::json to_json(const PathRecord& r) {
    return {{"format_version", 1},
            {"doc_id", r.document_id},
            {"path", r.path.str()},
            {"label", r.label},
            {"column", r.column},
            {"depth", r.depth}};
}

inline PathRecord record_from_json(const nlohmann::json& j) {
    PathRecord r;
    r.document_id = j.at("doc_id").get<std::int64_t>();
    r.path = JsonPath::parse(j.at("path").get<std::string>());
    r.label = j.at("label").get<std::string>();
    r.column = j.at("column").get<std::vector<std::string>>();
    r.depth = j.at("depth").get<int>();
    return r;
}

}  // namespace semjson
