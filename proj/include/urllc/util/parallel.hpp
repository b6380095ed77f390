#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace urllc::util
{
    /// Worker count for n tasks: min(n, max_threads or hardware concurrency), at least 1.
    inline unsigned worker_count(std::size_t n, unsigned max_threads) noexcept
    {
        unsigned hw = std::max(1U, std::thread::hardware_concurrency());
        if (max_threads > 0)
        {
            hw = std::min(hw, max_threads);
        }
        return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, hw)));
    }

    // Runs fn(i) for i in [0, n). Each task must write only its own output slot,
    // so the result is independent of scheduling. The first exception is rethrown.
    template <class Fn>
    void parallel_for(std::size_t n, unsigned max_threads, Fn &&fn)
    {
        const unsigned workers = worker_count(n, max_threads);
        if (workers == 1)
        {
            for (std::size_t i = 0; i < n; ++i)
            {
                fn(i);
            }
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
        {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++)
                {
                    try
                    {
                        fn(i);
                    }
                    catch (...)
                    {
                        std::lock_guard lock(error_mutex);
                        if (!error)
                        {
                            error = std::current_exception();
                        }
                    }
                }
            });
        }
        pool.clear();
        if (error)
        {
            std::rethrow_exception(error);
        }
    }
}
