#pragma once

// Embedding vectors, the embedder abstraction, the deterministic hashed
// bag-of-tokens backend, a remote JSON backend, and the truncation report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polydedup/error.hpp"
#include "polydedup/hash.hpp"
#include "polydedup/http.hpp"
#include "polydedup/parallel.hpp"
#include "polydedup/retry.hpp"
#include "polydedup/text.hpp"
#include "polydedup/tokenize.hpp"

namespace polydedup {

enum class NormFlag : std::uint8_t { Unit, Zero };

struct EmbeddingVector {
    std::vector<float> values;
    NormFlag norm_flag = NormFlag::Zero;

    std::size_t dim() const noexcept { return values.size(); }
    bool is_zero() const noexcept { return norm_flag == NormFlag::Zero; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline constexpr std::size_t kDefaultEmbeddingDim = 256;

// Scales `raw` to unit L2 norm. A vector with zero norm comes back flagged Zero.
inline EmbeddingVector normalize_vector(std::vector<float> raw) {
    double sq = 0.0;
    for (float v : raw) sq += double(v) * double(v);
    EmbeddingVector out;
    if (sq == 0.0 || !std::isfinite(sq)) {
        std::fill(raw.begin(), raw.end(), 0.0f);
        out.values = std::move(raw);
        out.norm_flag = NormFlag::Zero;
        return out;
    }
    const double norm = std::sqrt(sq);
    for (auto& v : raw) v = static_cast<float>(double(v) / norm);
    out.values = std::move(raw);
    out.norm_flag = NormFlag::Unit;
    return out;
}

// Feature-hashed bag of tokens. Tokens are truncated to max_tokens, lowercased
// and hashed with 64-bit FNV-1a; bucket = h mod dim, sign = -1 when the top bit
// of h is set.
inline EmbeddingVector hashed_bow_embed(std::span<const std::string> tokens, std::size_t dim,
                                        std::size_t max_tokens = kDefaultMaxTokens) {
    if (dim < 2) throw ConfigError("embedding dimension must be >= 2");
    std::vector<double> acc(dim, 0.0);
    std::size_t used = std::min(tokens.size(), max_tokens);
    for (std::size_t i = 0; i < used; ++i) {
        std::uint64_t h = fnv1a_64(text::to_lower(tokens[i]));
        acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
    }
    std::vector<float> raw(dim);
    for (std::size_t i = 0; i < dim; ++i) raw[i] = static_cast<float>(acc[i]);
    return normalize_vector(std::move(raw));
}

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
    // One raw (not necessarily normalized) vector per input text.
    virtual std::vector<std::vector<float>> embed_texts(std::span<const std::string> texts) = 0;
};

class HashedEmbedder final : public Embedder {
public:
    explicit HashedEmbedder(std::size_t dim = kDefaultEmbeddingDim,
                            std::size_t max_tokens = kDefaultMaxTokens)
        : dim_(dim), max_tokens_(max_tokens) {
        if (dim_ < 2) throw ConfigError("embedding dimension must be >= 2");
        if (max_tokens_ == 0) throw ConfigError("max_tokens must be >= 1");
    }

    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "hashed"; }

    std::vector<std::vector<float>> embed_texts(std::span<const std::string> texts) override {
        std::vector<std::vector<float>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            auto tokens = tokenize(t);
            out.push_back(hashed_bow_embed(tokens, dim_, max_tokens_).values);
        }
        return out;
    }

private:
    std::size_t dim_;
    std::size_t max_tokens_;
};

// POST {"texts": [...]} -> {"dim": D, "vectors": [[...], ...]}
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(const std::string& endpoint, std::size_t declared_dim,
                   std::optional<std::string> bearer_token = std::nullopt)
        : endpoint_(http::parse_endpoint(endpoint)), dim_(declared_dim) {
        if (dim_ < 2) throw ConfigError("embedding dimension must be >= 2");
        options_.bearer_token = std::move(bearer_token);
    }

    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "remote"; }

    std::vector<std::vector<float>> embed_texts(std::span<const std::string> texts) override {
        nlohmann::json body;
        body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
        auto reply = http::post_json(endpoint_, body, options_);
        if (!reply.contains("dim") || !reply.contains("vectors"))
            throw BackendUnavailable("embed reply lacks dim/vectors");
        auto dim = reply["dim"].get<std::size_t>();
        if (dim != dim_) throw DimensionMismatch(dim_, dim);
        auto vectors = reply["vectors"].get<std::vector<std::vector<float>>>();
        if (vectors.size() != texts.size())
            throw BackendUnavailable("embed reply has " + std::to_string(vectors.size()) +
                                     " vectors for " + std::to_string(texts.size()) + " texts");
        return vectors;
    }

private:
    http::Endpoint endpoint_;
    std::size_t dim_;
    http::PostOptions options_;
};

struct EmbedOptions {
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 1;
    RetryPolicy retry{};
};

// Texts with no tokens get a zero vector without reaching the backend.
inline std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts, Embedder& backend,
                                                const EmbedOptions& options = {}) {
    const std::size_t dim = backend.dim();
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (tokenize(texts[i]).empty()) out[i] = EmbeddingVector{std::vector<float>(dim, 0.0f), NormFlag::Zero};
        else pending.push_back(i);
    }
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t n_batches = (pending.size() + batch - 1) / batch;
    run_bounded(n_batches, options.max_in_flight, [&](std::size_t b) {
        std::size_t lo = b * batch, hi = std::min(pending.size(), lo + batch);
        std::vector<std::string> chunk;
        for (std::size_t j = lo; j < hi; ++j) chunk.push_back(texts[pending[j]]);
        auto raw = with_retry(options.retry, b, [&] {
            auto r = backend.embed_texts(chunk);
            if (r.size() != chunk.size())
                throw BackendUnavailable("embedder returned wrong number of vectors");
            return r;
        });
        for (std::size_t j = lo; j < hi; ++j) {
            auto& v = raw[j - lo];
            if (v.size() != dim) throw DimensionMismatch(dim, v.size());
            out[pending[j]] = normalize_vector(std::move(v));
        }
    });
    return out;
}

namespace detail {

template <typename T>
double l2_distance(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = double(a[i]) - double(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

template <typename T>
double cosine_similarity(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace detail

// Stored vectors are 32-bit; their norms are 1 only to about 1e-7, which
// bounds how closely d^2 = 2(1 - cos) holds for them. The double overloads
// carry the identity to rounding level.
inline double l2_distance(std::span<const float> a, std::span<const float> b) { return detail::l2_distance(a, b); }
inline double l2_distance(std::span<const double> a, std::span<const double> b) { return detail::l2_distance(a, b); }
inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    return detail::cosine_similarity(a, b);
}
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    return detail::cosine_similarity(a, b);
}

// For unit vectors d^2 = 2(1 - cos), so a distance threshold theta is the
// cosine threshold 1 - theta^2 / 2 (theta = 0.25 -> 0.96875).
inline double cosine_for_l2_threshold(double theta) { return 1.0 - theta * theta / 2.0; }

struct TruncationReport {
    std::size_t max_tokens = kDefaultMaxTokens;
    std::size_t n_total = 0;
    std::size_t n_truncated = 0;
    double fraction_truncated = 0.0;
    // loss statistics over truncated records only
    double mean_tokens_lost = 0.0;
    double median_tokens_lost = 0.0;
    // token count of truncated records, bucket lower bound -> count
    std::map<std::size_t, std::size_t> histogram_over_limit;
    std::size_t bucket_width = 128;

    friend bool operator==(const TruncationReport&, const TruncationReport&) = default;
};

inline TruncationReport truncation_report_from_counts(std::span<const std::size_t> token_counts,
                                                      std::size_t max_tokens = kDefaultMaxTokens,
                                                      std::size_t bucket_width = 128) {
    if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
    TruncationReport r;
    r.max_tokens = max_tokens;
    r.bucket_width = std::max<std::size_t>(1, bucket_width);
    r.n_total = token_counts.size();
    std::vector<std::size_t> losses;
    for (auto n : token_counts) {
        if (n <= max_tokens) continue;
        losses.push_back(n - max_tokens);
        ++r.histogram_over_limit[n / r.bucket_width * r.bucket_width];
    }
    r.n_truncated = losses.size();
    if (r.n_total) r.fraction_truncated = double(r.n_truncated) / double(r.n_total);
    if (!losses.empty()) {
        double sum = 0.0;
        for (auto l : losses) sum += double(l);
        r.mean_tokens_lost = sum / double(losses.size());
        std::sort(losses.begin(), losses.end());
        auto m = losses.size() / 2;
        r.median_tokens_lost = losses.size() % 2 ? double(losses[m])
                                                 : (double(losses[m - 1]) + double(losses[m])) / 2.0;
    }
    return r;
}

inline TruncationReport truncation_report(std::span<const std::string> texts,
                                          std::size_t max_tokens = kDefaultMaxTokens) {
    std::vector<std::size_t> counts;
    counts.reserve(texts.size());
    for (const auto& t : texts) counts.push_back(tokenize(t).size());
    return truncation_report_from_counts(counts, max_tokens);
}

}  // namespace polydedup
