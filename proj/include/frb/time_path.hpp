#pragma once

#include <cstddef>
#include <vector>

#include "frb/spectral.hpp"

namespace frb {

/// Fields on a uniform time grid t_n = t0 + n*dt, n = 0..size()-1, all on one spatial grid.
class TimePath {
public:
    TimePath(TorusGrid grid, double dt, std::size_t n_times, double t0 = 0.0);

    /// A path holding the same field at every time.
    static TimePath constant(const SpectralField& f, double dt, std::size_t n_times);

    const TorusGrid& grid() const noexcept { return grid_; }
    double dt() const noexcept { return dt_; }
    double t0() const noexcept { return t0_; }
    std::size_t size() const noexcept { return fields_.size(); }
    double time(std::size_t n) const noexcept { return t0_ + dt_ * static_cast<double>(n); }
    double horizon() const noexcept { return dt_ * static_cast<double>(fields_.size() - 1); }

    SpectralField& operator[](std::size_t n) { return fields_[n]; }
    const SpectralField& operator[](std::size_t n) const { return fields_[n]; }
    SpectralField& at(std::size_t n);
    const SpectralField& at(std::size_t n) const;
    const SpectralField& back() const { return fields_.back(); }

    /// Times first, first+1, ..., first+count-1 (time origin moves with the slice).
    TimePath slice(std::size_t first, std::size_t count) const;
    /// Every stride-th time, starting at 0.
    TimePath subsample(std::size_t stride) const;

    TimePath& operator+=(const TimePath& o);
    TimePath& operator-=(const TimePath& o);
    friend TimePath operator+(TimePath a, const TimePath& b) { return a += b; }
    friend TimePath operator-(TimePath a, const TimePath& b) { return a -= b; }

private:
    TorusGrid grid_;
    double dt_;
    double t0_;
    std::vector<SpectralField> fields_;
};

void require_aligned(const TimePath& a, const TimePath& b, const char* where);

/// sup_n ||a_n||_{H^s}
double sup_sobolev(const TimePath& a, double s);
/// sup_n ||a_n - b_n||_{L2}
double sup_l2_distance(const TimePath& a, const TimePath& b);

}  // namespace frb
