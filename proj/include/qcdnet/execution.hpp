#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>

namespace qcdnet {

/// How an embarrassingly parallel episode loop is executed. `serial` is the
/// reference path kept for testing; both produce identical per-index
/// results because every index owns its random streams.
enum class Execution { serial, parallel };

int worker_threads();

/// Calls fn(i) for i in [0, count). The first exception thrown by any
/// index is rethrown after the loop completes.
template <class Fn>
void for_each_index(std::size_t count, Execution exec, Fn &&fn) {
    if (exec == Execution::serial) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::exception_ptr failure;
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(qcdnet_for_each_index)
            {
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace qcdnet
