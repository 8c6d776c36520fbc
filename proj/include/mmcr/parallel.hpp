#pragma once

#include "mmcr/linalg.hpp"

#include <cstddef>
#include <exception>
#include <vector>

namespace mmcr {

/// Runs f(i) for every i in [0, n), across OpenMP threads when `exec` is
/// parallel. Exceptions cannot cross an OpenMP region, so each iteration's
/// exception is captured and the one from the lowest index is rethrown after
/// the loop.
template <class F>
void parallel_for(std::size_t n, Exec exec, F&& f)
{
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel && count > 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

}  // namespace mmcr
