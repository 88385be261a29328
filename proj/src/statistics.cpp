#include "mixscope/statistics.hpp"

#include <cmath>
#include <string>

#include "mixscope/error.hpp"

namespace mixscope {

InputMoments input_moments(const ObservationWindow& obs) {
    const Eigen::Index rho = obs.rounds();
    if (rho < 2) throw ValidationError("input moments need at least 2 rounds, got " + std::to_string(rho));
    const auto& u = obs.inputs();
    const double inv = 1.0 / static_cast<double>(rho);

    InputMoments mom;
    mom.mean = u.colwise().sum().transpose() * inv;
    const Eigen::ArrayXXd centered = u.array().rowwise() - mom.mean.array().transpose();
    const Eigen::ArrayXXd sq = centered.square();
    mom.m2 = sq.colwise().sum().transpose() * inv;
    mom.m3 = (sq * centered).colwise().sum().transpose() * inv;
    mom.m4 = sq.square().colwise().sum().transpose() * inv;
    return mom;
}

ProfileStats profile_stats(const ProfileMatrix& profile) {
    const auto& p = profile.values;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if ((p.row(i).array() < 0.0).any() || std::abs(p.row(i).sum() - 1.0) > 1e-9) {
            throw ValidationError("profile row " + std::to_string(i) + " is not a probability vector");
        }
    }
    ProfileStats out;
    out.s = (p.array() * (1.0 - p.array())).matrix();
    out.uniformity = out.s.rowwise().sum();
    return out;
}

}  // namespace mixscope
