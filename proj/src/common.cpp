#include "codite/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace codite {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling over the smallest covering power of two keeps the
    // draw unbiased and the stream consumption deterministic per accept.
    if (n == 0) throw ArgumentError("Rng::below: n must be positive");
    const std::uint64_t mask = n <= 1 ? 0 : ~std::uint64_t{0} >> __builtin_clzll(n - 1);
    std::uint64_t v;
    do {
        v = engine_() & mask;
    } while (v >= n);
    return v;
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

int thread_budget() {
    if (const char* env = std::getenv("CODITE_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return static_cast<int>(std::min(parsed, 256L));
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int max_threads) {
    if (n <= 0) return;
    int workers = max_threads > 0 ? max_threads : thread_budget();
    workers = static_cast<int>(std::min<std::int64_t>(workers, n));
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    // First exception wins; everything is joined before it is rethrown.
    std::mutex error_mutex;
    std::exception_ptr error;
    const auto guarded = [&](std::int64_t begin, std::int64_t end) {
        try {
            fn(begin, end);
        } catch (...) {
            const std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        const std::int64_t begin = w * chunk;
        const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
        if (begin >= end) break;
        pool.emplace_back(guarded, begin, end);
    }
    guarded(0, std::min<std::int64_t>(chunk, n));
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace codite
