#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <fftw3.h>

namespace ccqm::detail {

/// In-place forward/backward DFT over an M^D grid. Plans are made with
/// FFTW_ESTIMATE so that results are reproducible run to run.
class FftPlan {
public:
    FftPlan(std::size_t points_per_axis, std::size_t axes);
    ~FftPlan();
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    /// Unnormalized transforms.
    void forward(std::complex<double>* data) const;
    void backward(std::complex<double>* data) const;
    std::size_t size() const { return size_; }

private:
    std::size_t size_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// Angular wavenumber of DFT index i on an axis of M points and length L.
double wavenumber(std::size_t i, std::size_t points, double length);

} // namespace ccqm::detail
