#pragma once

// Exact flat L2 index and IVF index (k-means coarse quantizer + inverted
// lists), with top-k search and a checksummed binary file format.
//
// Reported distances are true Euclidean distances (square root taken), not
// squared L2. Sums are accumulated in double in coordinate order, so results
// are bitwise reproducible regardless of how queries are spread over threads.
// Ties are broken by ascending id.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/crc.hpp>

#include "polydedup/embed.hpp"
#include "polydedup/error.hpp"
#include "polydedup/parallel.hpp"

namespace polydedup {

enum class IndexKind : std::uint8_t { Flat = 0, IVF = 1 };

struct IndexConfig {
    IndexKind kind = IndexKind::Flat;
    std::size_t dim = kDefaultEmbeddingDim;
    std::size_t nlist = 64;
    std::size_t nprobe = 8;
    std::size_t kmeans_iters = 20;
    std::uint64_t seed = 42;
};

struct SearchHit {
    std::string id;
    double distance = 0.0;

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

inline double squared_l2(const float* a, const float* b, std::size_t dim) {
    double sum = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double d = double(a[i]) - double(b[i]);
        sum += d * d;
    }
    return sum;
}

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

struct KMeansResult {
    std::vector<float> centroids;        // k x dim
    std::vector<std::uint32_t> assign;   // n
};

inline std::vector<std::uint32_t> assign_nearest(std::span<const float> data, std::size_t dim,
                                                 std::span<const float> centroids, std::size_t k) {
    const std::size_t n = data.size() / dim;
    std::vector<std::uint32_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
            double d = squared_l2(&data[i * dim], &centroids[c * dim], dim);
            if (d < best) {
                best = d;
                arg = static_cast<std::uint32_t>(c);
            }
        }
        assign[i] = arg;
    }
    return assign;
}

// k-means++ seeding followed by `iters` Lloyd iterations. An empty cluster is
// repaired by splitting the largest one: both centroids are nudged apart by a
// relative 1/1024 in alternating coordinate directions.
inline KMeansResult kmeans(std::span<const float> data, std::size_t dim, std::size_t k, std::size_t iters,
                           std::uint64_t seed) {
    const std::size_t n = data.size() / dim;
    std::mt19937_64 rng(seed);
    KMeansResult r;
    r.centroids.resize(k * dim);

    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    auto pick = static_cast<std::size_t>(unit_uniform(rng) * double(n));
    for (std::size_t c = 0;; ++c) {
        std::copy_n(&data[pick * dim], dim, &r.centroids[c * dim]);
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_l2(&data[i * dim], &r.centroids[c * dim], dim));
            total += nearest[i];
        }
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(unit_uniform(rng) * double(n));
            continue;
        }
        double target = unit_uniform(rng) * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            acc += nearest[i];
            if (acc > target && nearest[i] > 0.0) {
                pick = i;
                break;
            }
        }
    }

    for (std::size_t it = 0; it < iters; ++it) {
        r.assign = assign_nearest(data, dim, r.centroids, k);
        std::vector<double> sums(k * dim, 0.0);
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = r.assign[i];
            ++sizes[c];
            for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += data[i * dim + j];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (sizes[c])
                for (std::size_t j = 0; j < dim; ++j)
                    r.centroids[c * dim + j] = static_cast<float>(sums[c * dim + j] / double(sizes[c]));
        constexpr float eps = 1.0f / 1024.0f;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c]) continue;
            auto largest = static_cast<std::size_t>(
                std::distance(sizes.begin(), std::max_element(sizes.begin(), sizes.end())));
            for (std::size_t j = 0; j < dim; ++j) {
                float v = r.centroids[largest * dim + j];
                bool up = j % 2 == 0;
                r.centroids[c * dim + j] = v * (up ? 1 + eps : 1 - eps);
                r.centroids[largest * dim + j] = v * (up ? 1 - eps : 1 + eps);
            }
            sizes[c] = sizes[largest] / 2;
            sizes[largest] -= sizes[c];
        }
    }
    r.assign = assign_nearest(data, dim, r.centroids, k);
    return r;
}

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (n > remaining()) throw CorruptIndex("unexpected end of data");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

}  // namespace detail

class VectorIndex {
public:
    static constexpr char kMagic[4] = {'P', 'D', 'I', 'X'};
    static constexpr std::uint16_t kFormatVersion = 1;

    VectorIndex() = default;
    VectorIndex(VectorIndex&&) noexcept = default;
    VectorIndex& operator=(VectorIndex&&) noexcept = default;

    // Row-major `data` holds ids.size() vectors of config.dim floats.
    static VectorIndex build(std::vector<std::string> ids, std::vector<float> data, const IndexConfig& config) {
        if (config.dim == 0) throw ConfigError("index dimension must be positive");
        if (ids.empty()) throw EmptyInput("no vectors to index");
        if (data.size() != ids.size() * config.dim)
            throw DimensionMismatch(config.dim, ids.empty() ? 0 : data.size() / ids.size());
        VectorIndex index;
        index.kind_ = config.kind;
        index.dim_ = config.dim;
        if (config.kind == IndexKind::Flat) {
            index.ids_ = std::move(ids);
            index.data_ = std::move(data);
            return index;
        }
        if (config.nlist == 0) throw ConfigError("nlist must be positive");
        if (config.nprobe == 0 || config.nprobe > config.nlist) throw ConfigError("nprobe must be in [1, nlist]");
        if (config.kmeans_iters == 0) throw ConfigError("kmeans_iters must be positive");
        if (config.nlist > ids.size()) throw NlistExceedsPoints(config.nlist, ids.size());
        auto km = detail::kmeans(data, config.dim, config.nlist, config.kmeans_iters, config.seed);
        index.nlist_ = config.nlist;
        index.nprobe_ = config.nprobe;
        index.centroids_ = std::move(km.centroids);
        // counting sort rows into list order, stable within a list
        index.offsets_.assign(config.nlist + 1, 0);
        for (auto c : km.assign) ++index.offsets_[c + 1];
        std::partial_sum(index.offsets_.begin(), index.offsets_.end(), index.offsets_.begin());
        auto cursor = index.offsets_;
        index.ids_.resize(ids.size());
        index.data_.resize(data.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto slot = cursor[km.assign[i]]++;
            index.ids_[slot] = std::move(ids[i]);
            std::copy_n(&data[i * config.dim], config.dim, &index.data_[slot * config.dim]);
        }
        return index;
    }

    // Zero-flagged vectors are rejected; they carry no direction to compare.
    static VectorIndex build(const std::vector<std::pair<std::string, EmbeddingVector>>& vectors,
                             const IndexConfig& config) {
        std::vector<std::string> ids;
        std::vector<float> data;
        ids.reserve(vectors.size());
        data.reserve(vectors.size() * config.dim);
        for (const auto& [id, v] : vectors) {
            if (v.dim() != config.dim) throw DimensionMismatch(config.dim, v.dim());
            if (v.is_zero()) throw DataError("zero vector for '" + id + "' cannot be indexed");
            ids.push_back(id);
            data.insert(data.end(), v.values.begin(), v.values.end());
        }
        return build(std::move(ids), std::move(data), config);
    }

    IndexKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t nlist() const noexcept { return nlist_; }
    std::size_t nprobe() const noexcept { return nprobe_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    // Search-time parameter; not safe to change while searches are running.
    void set_nprobe(std::size_t nprobe) {
        if (kind_ != IndexKind::IVF) return;
        if (nprobe == 0 || nprobe > nlist_) throw ConfigError("nprobe must be in [1, nlist]");
        nprobe_ = nprobe;
    }

    std::span<const float> vector(std::size_t row) const { return {&data_[row * dim_], dim_}; }

    // Ids stored in inverted list `list` (IVF only).
    std::vector<std::string> list_ids(std::size_t list) const {
        if (kind_ != IndexKind::IVF || list >= nlist_) return {};
        return {ids_.begin() + static_cast<std::ptrdiff_t>(offsets_[list]),
                ids_.begin() + static_cast<std::ptrdiff_t>(offsets_[list + 1])};
    }

    std::vector<SearchHit> search(std::span<const float> query, std::size_t k) const {
        if (query.size() != dim_) throw DimensionMismatch(dim_, query.size());
        if (k == 0 || ids_.empty()) return {};
        std::vector<std::pair<double, std::uint32_t>> cand;
        auto scan = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t row = lo; row < hi; ++row)
                cand.emplace_back(squared_l2(query.data(), &data_[row * dim_], dim_), static_cast<std::uint32_t>(row));
        };
        if (kind_ == IndexKind::Flat) {
            cand.reserve(ids_.size());
            scan(0, ids_.size());
        } else {
            for (auto list : probe_lists(query)) scan(offsets_[list], offsets_[list + 1]);
        }
        comparisons_->fetch_add(cand.size(), std::memory_order_relaxed);
        auto less = [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return ids_[a.second] < ids_[b.second];
        };
        std::size_t take = std::min(k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), less);
        std::vector<SearchHit> hits;
        hits.reserve(take);
        for (std::size_t i = 0; i < take; ++i) hits.push_back({ids_[cand[i].second], std::sqrt(cand[i].first)});
        return hits;
    }

    // Element-wise equal to calling search() per query; queries are spread
    // over `threads` workers (0 = hardware concurrency).
    std::vector<std::vector<SearchHit>> search_batch(std::span<const std::vector<float>> queries, std::size_t k,
                                                     std::size_t threads = 0) const {
        std::vector<std::vector<SearchHit>> out(queries.size());
        parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = search(queries[i], k); });
        return out;
    }

    // Distance evaluations performed by searches so far (centroid probes excluded).
    std::uint64_t comparisons() const noexcept { return comparisons_->load(); }
    void reset_comparisons() const noexcept { comparisons_->store(0); }

    std::vector<std::uint8_t> serialize() const {
        detail::ByteWriter w;
        w.raw(std::string_view(kMagic, 4));
        w.u16(kFormatVersion);
        w.u8(static_cast<std::uint8_t>(kind_));
        w.u32(static_cast<std::uint32_t>(dim_));
        w.u64(ids_.size());
        if (kind_ == IndexKind::IVF) {
            w.u32(static_cast<std::uint32_t>(nlist_));
            w.u32(static_cast<std::uint32_t>(nprobe_));
            for (float v : centroids_) w.f32(v);
            for (auto o : offsets_) w.u64(o);
        }
        for (float v : data_) w.f32(v);
        for (const auto& id : ids_) {
            w.u32(static_cast<std::uint32_t>(id.size()));
            w.raw(id);
        }
        w.u32(detail::crc32(w.bytes()));
        return std::move(w.bytes());
    }

    static VectorIndex deserialize(std::span<const std::uint8_t> bytes) {
        if (bytes.size() < 4 + 2 + 1 + 4 + 8 + 4) throw CorruptIndex("file too short");
        auto body = bytes.first(bytes.size() - 4);
        detail::ByteReader tail(bytes.last(4));
        if (tail.u32() != detail::crc32(body)) throw CorruptIndex("checksum mismatch");
        detail::ByteReader r(body);
        if (r.raw(4) != std::string_view(kMagic, 4)) throw CorruptIndex("bad magic");
        if (r.u16() != kFormatVersion) throw CorruptIndex("unsupported format version");
        auto kind = r.u8();
        if (kind > 1) throw CorruptIndex("unknown index kind");
        VectorIndex index;
        index.kind_ = static_cast<IndexKind>(kind);
        index.dim_ = r.u32();
        auto count = r.u64();
        if (index.dim_ == 0) throw CorruptIndex("zero dimension");
        auto check_floats = [&](std::uint64_t n) {
            if (n > r.remaining() / 4) throw CorruptIndex("unexpected end of data");
        };
        if (index.kind_ == IndexKind::IVF) {
            index.nlist_ = r.u32();
            index.nprobe_ = r.u32();
            if (index.nlist_ == 0 || index.nprobe_ == 0 || index.nprobe_ > index.nlist_)
                throw CorruptIndex("invalid nlist/nprobe");
            check_floats(std::uint64_t(index.nlist_) * index.dim_);
            index.centroids_.resize(index.nlist_ * index.dim_);
            for (auto& v : index.centroids_) v = r.f32();
            check_floats(2 * (std::uint64_t(index.nlist_) + 1));
            index.offsets_.resize(index.nlist_ + 1);
            for (auto& o : index.offsets_) o = r.u64();
            if (index.offsets_.front() != 0 || index.offsets_.back() != count ||
                !std::is_sorted(index.offsets_.begin(), index.offsets_.end()))
                throw CorruptIndex("invalid list offsets");
        }
        if (count > r.remaining() / 4 / index.dim_) throw CorruptIndex("unexpected end of data");
        index.data_.resize(count * index.dim_);
        for (auto& v : index.data_) v = r.f32();
        if (count > r.remaining() / 4) throw CorruptIndex("unexpected end of data");
        index.ids_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) index.ids_.push_back(r.raw(r.u32()));
        if (r.remaining() != 0) throw CorruptIndex("trailing bytes");
        return index;
    }

    void save(const std::string& path) const {
        auto bytes = serialize();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + path);
    }

    static VectorIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return deserialize(bytes);
    }

private:
    std::vector<std::size_t> probe_lists(std::span<const float> query) const {
        std::vector<std::pair<double, std::size_t>> d(nlist_);
        for (std::size_t c = 0; c < nlist_; ++c) d[c] = {squared_l2(query.data(), &centroids_[c * dim_], dim_), c};
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(nprobe_), d.end());
        std::vector<std::size_t> lists(nprobe_);
        for (std::size_t i = 0; i < nprobe_; ++i) lists[i] = d[i].second;
        return lists;
    }

    IndexKind kind_ = IndexKind::Flat;
    std::size_t dim_ = 0;
    std::size_t nlist_ = 0;
    std::size_t nprobe_ = 0;
    std::vector<float> centroids_;
    std::vector<std::uint64_t> offsets_;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unique_ptr<std::atomic<std::uint64_t>> comparisons_ = std::make_unique<std::atomic<std::uint64_t>>(0);
};

}  // namespace polydedup
