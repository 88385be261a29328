#pragma once

#include <Eigen/Core>

#include "mixscope/mixer.hpp"
#include "mixscope/trace.hpp"

namespace mixscope {

/// Per-sender mean and central moments of the messages sent per round.
struct InputMoments {
    Eigen::VectorXd mean;  // mu(i)
    Eigen::VectorXd m2;    // mu_2(i), the variance
    Eigen::VectorXd m3;
    Eigen::VectorXd m4;

    Eigen::Index senders() const noexcept { return mean.size(); }
};

/// Sample moments of each column of U, normalized by rho (not rho - 1).
/// Throws ValidationError when rho < 2.
InputMoments input_moments(const ObservationWindow& obs);

struct ProfileStats {
    Eigen::MatrixXd s;           // N x M, s(i, j) = p(j|i) (1 - p(j|i))
    Eigen::VectorXd uniformity;  // u_i = 1 - sum_j p(j|i)^2 = sum_j s(i, j)
};

/// Requires a row-stochastic, non-negative profile (rows sum to 1 within 1e-9);
/// throws ValidationError otherwise.
ProfileStats profile_stats(const ProfileMatrix& profile);

}  // namespace mixscope
