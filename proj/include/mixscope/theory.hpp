#pragma once

#include <vector>

#include <Eigen/Core>

#include "mixscope/statistics.hpp"

namespace mixscope {

/// Everything the closed-form error predictions depend on.
struct TheoryInputs {
    InputMoments moments;
    ProfileStats stats;
    double rho = 0.0;
};

/// How the inverse input autocorrelation enters the predictions.
///
/// Dominant drops the rank-one Sherman-Morrison correction, which is accurate
/// when sum_{k != i} mu(k)^2 / mu_2(k) is large for every i (many active
/// senders); this is the published closed form. Full keeps the exact inverse
/// of mu mu^T + diag(mu_2) and is the better choice for small populations.
enum class Approximation { Dominant, Full };

/// Multinomial output model (each message picks its recipient independently):
///   MSE_i ~ 1/(rho mu_2(i)) * ( sum_k mu(k) u_k + mu_3(i)/mu_2(i) u_i ).
/// Senders with mu_2(i) == 0 get NaN.
Eigen::VectorXd mse_multinomial(const TheoryInputs& in, Approximation approx = Approximation::Dominant);

/// Maximum-variance output model (all of a sender's round messages go to one recipient):
///   MSE_i ~ 1/(rho mu_2(i)) * ( sum_k (mu(k)^2 + mu_2(k)) u_k + mu_4(i)/mu_2(i) u_i ).
/// Senders with mu_2(i) == 0 get NaN.
Eigen::VectorXd mse_maxvariance(const TheoryInputs& in, Approximation approx = Approximation::Dominant);

/// Indices whose prediction is undefined (mu_2 == 0).
std::vector<Eigen::Index> undefined_senders(const InputMoments& moments);

/// Approximate input autocorrelation R_x = mu mu^T + diag(mu_2).
Eigen::MatrixXd autocorrelation(const InputMoments& moments);

struct ShermanMorrisonInverse {
    double gamma = 0.0;       // 1 / (1 + mu^T diag(mu_2)^-1 mu)
    Eigen::MatrixXd inverse;  // diag(mu_2)^-1 (I - gamma mu mu^T diag(mu_2)^-1)
};

/// Closed-form inverse of autocorrelation(). Requires mu_2 > 0 elementwise.
ShermanMorrisonInverse autocorrelation_inverse(const InputMoments& moments);

enum class OutputModel { Multinomial, MaxVariance };

/// Covariance of the column estimate p_hat_j:
///   (1/rho) R^-1 R_mid R^-1,
/// with R_mid = c_j R_x + diag(mu_k) S_j, where c_j and the diagonal factor
/// are sum_k mu(k) s_{j,k} and mu_3 (multinomial) or sum_k (mu(k)^2 + mu_2(k)) s_{j,k}
/// and mu_4 (max variance). Under Approximation::Dominant the sandwich is first
/// reduced with R^-1 R_x R^-1 = R^-1 and R^-1 is then taken as diag(mu_2)^-1,
/// so summing the diagonal over j gives the closed forms above exactly.
/// Throws ValidationError if some mu_2 == 0 or j is out of range.
Eigen::MatrixXd profile_covariance(const TheoryInputs& in, Eigen::Index j, OutputModel model,
                                   Approximation approx = Approximation::Dominant);

inline Eigen::MatrixXd profile_covariance_multinomial(const TheoryInputs& in, Eigen::Index j,
                                                      Approximation approx = Approximation::Dominant) {
    return profile_covariance(in, j, OutputModel::Multinomial, approx);
}

}  // namespace mixscope
