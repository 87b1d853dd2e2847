#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace cocyclab {

/// Worker count used by ensemble loops. 0 means hardware concurrency.
void set_default_jobs(int jobs);
int default_jobs();

/// Runs body(i) for i in [0, count) over the default worker pool. Results
/// must be written by index; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, Fn&& fn)
{
    std::vector<T> out(count);
    parallel_for(count, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

} // namespace cocyclab
