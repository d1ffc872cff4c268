#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "omv/errors.hpp"

namespace omv {

/// Worker count: the explicit request if positive, else OBLIQUE_MV_THREADS,
/// else 1.
[[nodiscard]] inline std::size_t resolve_threads(int requested = 0) {
    if (requested > 0) return static_cast<std::size_t>(requested);
    if (const char* env = std::getenv("OBLIQUE_MV_THREADS"); env && *env) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("OBLIQUE_MV_THREADS must be a positive integer, got '") +
                          env + "'");
    }
    return 1;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index
/// is processed exactly once; if several bodies throw, the exception of the
/// lowest index is rethrown, so failures are schedule-independent.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    std::vector<std::exception_ptr> errors(count);
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                    failed.store(true);
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace omv
