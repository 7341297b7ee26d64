#include "infoflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace infoflow::parallel {

namespace {

std::atomic<std::size_t> g_threads{1};
thread_local bool t_inside_worker = false;

} // namespace

void set_thread_count(std::size_t n)
{
    g_threads.store(std::max<std::size_t>(n, 1));
}

std::size_t thread_count()
{
    return g_threads.load();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)> &body)
{
    if (n == 0)
    {
        return;
    }
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1 || t_inside_worker)
    {
        body(0, n);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + workers - 1) / workers;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
        {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin >= end)
            {
                break;
            }
            pool.emplace_back([&, begin, end] {
                t_inside_worker = true;
                try
                {
                    body(begin, end);
                }
                catch (...)
                {
                    std::lock_guard lock(error_mutex);
                    if (!first_error)
                    {
                        first_error = std::current_exception();
                    }
                }
            });
        }
    }
    if (first_error)
    {
        std::rethrow_exception(first_error);
    }
}

} // namespace infoflow::parallel
