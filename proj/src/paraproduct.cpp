#include "frb/paraproduct.hpp"

#include <cmath>

namespace frb {

namespace {

void accumulate_product(std::vector<double>& acc, const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t x = 0; x < acc.size(); ++x) acc[x] += a[x] * b[x];
}

void require_same_blocks(const BlockFields& f, const BlockFields& g, const char* where) {
    require(f.grid() == g.grid(), ErrorKind::Dimension, std::string(where) + ": grid mismatch");
}

}  // namespace

BlockFields::BlockFields(const SpectralField& f) : grid_(f.grid()), j_max_(frb::j_max(f.grid())) {
    blocks_.reserve(static_cast<std::size_t>(j_max_ + 2));
    for (int j = -1; j <= j_max_; ++j) blocks_.push_back(to_padded_physical(dyadic_block(f, j)));
}

SpectralField para_less(const BlockFields& f, const BlockFields& g) {
    require_same_blocks(f, g, "para_less");
    const auto m = static_cast<std::size_t>(padded_size(f.grid()));
    std::vector<double> low(m, 0.0), acc(m, 0.0);
    for (int j = 1; j <= g.j_max(); ++j) {
        const auto& add = f.block(j - 2);
        for (std::size_t x = 0; x < m; ++x) low[x] += add[x];
        accumulate_product(acc, low, g.block(j));
    }
    return from_padded_physical(f.grid(), acc);
}

SpectralField resonant(const BlockFields& f, const BlockFields& g) {
    require_same_blocks(f, g, "resonant");
    const auto m = static_cast<std::size_t>(padded_size(f.grid()));
    std::vector<double> near(m), acc(m, 0.0);
    const int jm = f.j_max();
    for (int j = -1; j <= jm; ++j) {
        std::fill(near.begin(), near.end(), 0.0);
        for (int i = std::max(-1, j - 1); i <= std::min(jm, j + 1); ++i) {
            const auto& b = f.block(i);
            for (std::size_t x = 0; x < m; ++x) near[x] += b[x];
        }
        accumulate_product(acc, near, g.block(j));
    }
    return from_padded_physical(f.grid(), acc);
}

SpectralField para_less(const SpectralField& f, const SpectralField& g) {
    require_same_grid(f, g, "para_less");
    return para_less(BlockFields(f), BlockFields(g));
}

SpectralField resonant(const SpectralField& f, const SpectralField& g) {
    require_same_grid(f, g, "resonant");
    return resonant(BlockFields(f), BlockFields(g));
}

SpectralField commutator_resonant(const SpectralField& f, const SpectralField& g, const SpectralField& h) {
    require_same_grid(f, g, "commutator_resonant");
    require_same_grid(f, h, "commutator_resonant");
    const BlockFields gb(g), hb(h);
    return resonant(BlockFields(para_less(BlockFields(f), gb)), hb) - dealiased_product(f, resonant(gb, hb));
}

//------------------------------------------------------------------------------
// Temporal mollifier
//------------------------------------------------------------------------------
double TemporalMollifier::profile(double t) {
    if (t <= 0.25 || t >= 0.75) return 0.0;
    const double s = 4.0 * (t - 0.5);
    const double b = 1.0 - s * s;
    return 3.75 * b * b;
}

double TemporalMollifier::profile_mass(int n_nodes) {
    require(n_nodes >= 2, ErrorKind::Domain, "profile_mass: need at least 2 nodes");
    const double h = 1.0 / (n_nodes - 1);
    double s = 0.0;
    for (int m = 0; m < n_nodes; ++m) s += profile(m * h) * ((m == 0 || m == n_nodes - 1) ? 0.5 : 1.0);
    return s * h;
}

double TemporalMollifier::scale(int i) const { return std::pow(2.0, -gamma * i); }

std::vector<double> TemporalMollifier::weights(int i, double dt) const {
    const double sc = scale(i);
    const auto n = static_cast<std::size_t>(std::ceil(0.75 * sc / dt)) + 1;
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t m = 0; m < n; ++m) total += (w[m] = profile(double(m) * dt / sc));
    require(total > 0.0, ErrorKind::InsufficientResolution,
            "TemporalMollifier: block " + std::to_string(i) + " has no quadrature node inside its window");
    for (auto& x : w) x /= total;
    return w;
}

//------------------------------------------------------------------------------
// f << g
//------------------------------------------------------------------------------
TimePath modified_para(const TimePath& f, const TimePath& g, const TemporalMollifier& moll) {
    require_aligned(f, g, "modified_para");
    const auto grid = f.grid();
    const auto& part = partition_for(grid);
    const int jm = part.j_max();
    const auto m = static_cast<std::size_t>(padded_size(grid));
    const std::size_t n_times = f.size();

    // Per block: the weights, or empty for the unmollified fallback.
    std::vector<std::vector<double>> w(static_cast<std::size_t>(jm + 1));
    for (int i = 1; i <= jm; ++i)
        if (moll.resolves(i, f.dt())) w[static_cast<std::size_t>(i)] = moll.weights(i, f.dt());

    // Cumulative weights of S_{i-1}, i.e. sum of blocks -1..i-2.
    std::vector<std::vector<double>> low_w(static_cast<std::size_t>(jm + 1));
    {
        std::vector<double> acc(static_cast<std::size_t>(grid.nyquist() + 1), 0.0);
        for (int i = 1; i <= jm; ++i) {
            const auto wi = part.weights(i - 2);
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += wi[k];
            low_w[static_cast<std::size_t>(i)] = acc;
        }
    }

    TimePath out(grid, f.dt(), n_times, f.t0());
    std::vector<double> acc(m);
    for (std::size_t n = 0; n < n_times; ++n) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = 1; i <= jm; ++i) {
            const auto& lw = low_w[static_cast<std::size_t>(i)];
            const int k_top = part.k_hi(i - 2);
            SpectralField q(grid);
            auto qh = q.half();
            const auto& wi = w[static_cast<std::size_t>(i)];
            if (wi.empty()) {
                const auto fh = f[n].half();
                for (int k = 0; k <= k_top; ++k) qh[k] = lw[k] * fh[k];
            } else {
                for (std::size_t lag = 0; lag < wi.size(); ++lag) {
                    if (wi[lag] == 0.0) continue;
                    const auto fh = f[n >= lag ? n - lag : 0].half();
                    for (int k = 0; k <= k_top; ++k) qh[k] += wi[lag] * fh[k];
                }
                for (int k = 0; k <= k_top; ++k) qh[k] *= lw[k];
            }
            qh[0] = qh[0].real();
            accumulate_product(acc, to_padded_physical(q), to_padded_physical(dyadic_block(g[n], i)));
        }
        out[n] = from_padded_physical(grid, acc);
    }
    return out;
}

TimePath discrete_heat_operator(const TimePath& F, double gamma) {
    require(F.size() >= 2, ErrorKind::InsufficientResolution, "discrete_heat_operator: need at least two times");
    TimePath out(F.grid(), F.dt(), F.size() - 1, F.t0());
    const double inv_dt = 1.0 / F.dt();
    for (std::size_t n = 0; n + 1 < F.size(); ++n) {
        out[n] = (F[n + 1] - F[n]) * inv_dt;
        out[n] += frac_laplacian(F[n], gamma) * -1.0;
    }
    return out;
}

TimePath commutator_heat(const TimePath& f, const TimePath& g, const TemporalMollifier& moll) {
    require_aligned(f, g, "commutator_heat");
    require(f.size() >= 3, ErrorKind::InsufficientResolution, "commutator_heat: need at least three times");
    require(moll.resolves(1, f.dt()), ErrorKind::InsufficientResolution,
            "commutator_heat: dt too coarse to mollify even the first block");
    auto lhs = discrete_heat_operator(modified_para(f, g, moll), moll.gamma);
    lhs -= modified_para(f.slice(0, f.size() - 1), discrete_heat_operator(g, moll.gamma), moll);
    return lhs;
}

}  // namespace frb
