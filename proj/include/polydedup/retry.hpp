#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <thread>

#include "polydedup/error.hpp"

namespace polydedup {

// Exponential backoff with full jitter: before retry n (1-based) sleep a
// uniform draw from [0, base_delay * 2^(n-1)].
struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{500};
    std::uint64_t seed = 0;
};

// Calls fn() until it succeeds or attempts run out. RateLimited waits at least
// its retry-after and is rethrown as-is when exhausted; any other failure is
// rethrown as BackendUnavailable. ConfigError is never retried.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, std::uint64_t stream, Fn&& fn) -> decltype(fn()) {
    std::mt19937_64 rng(policy.seed ^ (stream * 0x9e3779b97f4a7c15ULL));
    const int attempts = std::max(1, policy.max_attempts);
    for (int attempt = 1;; ++attempt) {
        std::chrono::duration<double, std::milli> wait{0};
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const RateLimited& e) {
            if (attempt >= attempts) throw;
            wait = std::chrono::duration<double>(e.retry_after_seconds());
        } catch (const std::exception& e) {
            if (attempt >= attempts)
                throw BackendUnavailable("after " + std::to_string(attempts) + " attempts: " + e.what());
        }
        double cap = double(policy.base_delay.count()) * double(1ULL << std::min(attempt - 1, 20));
        double jitter = double(rng() >> 11) * 0x1.0p-53 * cap;
        wait = std::max(wait, std::chrono::duration<double, std::milli>(jitter));
        std::this_thread::sleep_for(wait);
    }
}

}  // namespace polydedup
