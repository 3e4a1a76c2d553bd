#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace semjson {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed JSON text. `offset()` is the byte position reported by the parser.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class StructuralError : public Error { using Error::Error; };
class ContractViolation : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class LoadError : public Error { using Error::Error; };
class BuildError : public Error { using Error::Error; };
class SplitError : public Error { using Error::Error; };
class EvaluationError : public Error { using Error::Error; };

/// Raised when the training loss becomes non-finite.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, int epoch = -1, int batch = -1)
        : Error(what), epoch_(epoch), batch_(batch) {}
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

inline constexpr const char* kWorkersEnv = "SEMJSON_WORKERS";

/// Worker count from SEMJSON_WORKERS, falling back to the hardware concurrency.
inline std::size_t worker_count() {
    if (const char* env = std::getenv(kWorkersEnv); env != nullptr && *env != '\0') {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(worker, begin, end) over contiguous chunks of [0, n). The chunking only
/// depends on n and workers, so callers that reduce per-worker results in worker
/// order get the same answer on every run with the same worker count.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    if (workers > n) workers = n;
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        std::size_t b = w * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        threads.emplace_back([&fn, w, b, e] { fn(w, b, e); });
    }
    fn(std::size_t{0}, std::size_t{0}, std::min(n, chunk));
    for (auto& t : threads) t.join();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

/// SplitMix64, used to derive independent seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace semjson
