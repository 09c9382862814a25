#include "fft.hpp"

#include <mutex>

#include "ccqm/lattice.hpp"

namespace ccqm::detail {

namespace {
// FFTW's planner is not thread-safe; execution is.
std::mutex planner_mutex;
} // namespace

FftPlan::FftPlan(std::size_t points_per_axis, std::size_t axes)
{
    std::vector<int> dims(axes, static_cast<int>(points_per_axis));
    size_ = 1;
    for (std::size_t a = 0; a < axes; ++a) size_ *= points_per_axis;

    std::vector<std::complex<double>> scratch(size_);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex);
    forward_ = fftw_plan_dft(static_cast<int>(axes), dims.data(), buf, buf, FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft(static_cast<int>(axes), dims.data(), buf, buf, FFTW_BACKWARD, flags);
}

FftPlan::~FftPlan()
{
    std::lock_guard lock(planner_mutex);
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
}

void FftPlan::forward(std::complex<double>* data) const
{
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(forward_, buf, buf);
}

void FftPlan::backward(std::complex<double>* data) const
{
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(backward_, buf, buf);
}

double wavenumber(std::size_t i, std::size_t points, double length)
{
    const auto n = static_cast<double>(i < points / 2 ? static_cast<long>(i)
                                                      : static_cast<long>(i) - static_cast<long>(points));
    return kTwoPi * n / length;
}

} // namespace ccqm::detail
