#include "frb/time_path.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace frb {

TimePath::TimePath(TorusGrid grid, double dt, std::size_t n_times, double t0)
    : grid_(grid), dt_(dt), t0_(t0), fields_(n_times, SpectralField(grid)) {
    require(dt > 0.0, ErrorKind::Domain, "TimePath: dt must be positive");
    require(n_times >= 1, ErrorKind::Domain, "TimePath: need at least one time");
}

TimePath TimePath::constant(const SpectralField& f, double dt, std::size_t n_times) {
    TimePath p(f.grid(), dt, n_times);
    for (auto& g : p.fields_) g = f;
    return p;
}

SpectralField& TimePath::at(std::size_t n) {
    require(n < fields_.size(), ErrorKind::OutOfRange, "TimePath: index " + std::to_string(n) + " out of range");
    return fields_[n];
}

const SpectralField& TimePath::at(std::size_t n) const {
    require(n < fields_.size(), ErrorKind::OutOfRange, "TimePath: index " + std::to_string(n) + " out of range");
    return fields_[n];
}

TimePath TimePath::slice(std::size_t first, std::size_t count) const {
    require(count >= 1 && first + count <= fields_.size(), ErrorKind::OutOfRange, "TimePath::slice out of range");
    TimePath p(grid_, dt_, count, time(first));
    std::copy_n(fields_.begin() + static_cast<std::ptrdiff_t>(first), count, p.fields_.begin());
    return p;
}

TimePath TimePath::subsample(std::size_t stride) const {
    require(stride >= 1, ErrorKind::Domain, "TimePath::subsample: stride must be >= 1");
    TimePath p(grid_, dt_ * static_cast<double>(stride), (fields_.size() - 1) / stride + 1, t0_);
    for (std::size_t n = 0; n < p.size(); ++n) p.fields_[n] = fields_[n * stride];
    return p;
}

void require_aligned(const TimePath& a, const TimePath& b, const char* where) {
    require(a.grid() == b.grid() && a.size() == b.size() && std::abs(a.dt() - b.dt()) <= 1e-12 * a.dt(),
            ErrorKind::Dimension, std::string(where) + ": paths are not aligned");
}

TimePath& TimePath::operator+=(const TimePath& o) {
    require_aligned(*this, o, "TimePath::operator+=");
    for (std::size_t n = 0; n < fields_.size(); ++n) fields_[n] += o.fields_[n];
    return *this;
}

TimePath& TimePath::operator-=(const TimePath& o) {
    require_aligned(*this, o, "TimePath::operator-=");
    for (std::size_t n = 0; n < fields_.size(); ++n) fields_[n] -= o.fields_[n];
    return *this;
}

double sup_sobolev(const TimePath& a, double s) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, sobolev_norm(a[n], s));
    return m;
}

double sup_l2_distance(const TimePath& a, const TimePath& b) {
    require_aligned(a, b, "sup_l2_distance");
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, l2_norm(a[n] - b[n]));
    return m;
}

}  // namespace frb
