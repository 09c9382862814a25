#pragma once

#include <cstddef>
#include <vector>

namespace ccqm::detail {

/// Visits every point of an M^D row-major grid in flat order, passing the
/// flat index and the current multi-index.
template <typename Fn>
void for_each_point(std::size_t points_per_axis, std::size_t axes, Fn&& fn)
{
    std::size_t size = 1;
    for (std::size_t a = 0; a < axes; ++a) size *= points_per_axis;
    std::vector<std::size_t> idx(axes, 0);
    for (std::size_t flat = 0; flat < size; ++flat) {
        fn(flat, static_cast<const std::vector<std::size_t>&>(idx));
        for (std::size_t a = axes; a-- > 0;) {
            if (++idx[a] < points_per_axis) break;
            idx[a] = 0;
        }
    }
}

} // namespace ccqm::detail
