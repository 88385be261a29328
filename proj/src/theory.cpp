#include "mixscope/theory.hpp"

#include <limits>
#include <string>

#include "mixscope/error.hpp"

namespace mixscope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const TheoryInputs& in) {
    const Eigen::Index n = in.moments.senders();
    if (in.moments.m2.size() != n || in.moments.m3.size() != n || in.moments.m4.size() != n ||
        in.stats.uniformity.size() != n || in.stats.s.rows() != n) {
        throw ShapeError("moments and profile statistics disagree on the number of senders");
    }
    if (!(in.rho > 0.0)) throw ValidationError("rho must be positive");
}

// Shared shape of both closed forms: `weight` multiplies u_k in the population
// sum (mu or mu^2 + mu_2), `tail` is the moment over mu_2 on the own-uniformity
// term (mu_3 or mu_4).
Eigen::VectorXd closed_form(const TheoryInputs& in, const Eigen::VectorXd& weight, const Eigen::VectorXd& tail,
                            Approximation approx) {
    check_shapes(in);
    const auto& mom = in.moments;
    const auto& u = in.stats.uniformity;
    const Eigen::Index n = mom.senders();
    const double population = weight.dot(u);
    Eigen::VectorXd out(n);

    if (approx == Approximation::Dominant) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = mom.m2(i);
            out(i) = v > 0.0 ? (population + tail(i) / v * u(i)) / (in.rho * v) : kNaN;
        }
        return out;
    }

    if ((mom.m2.array() <= 0.0).any()) {
        out.setConstant(kNaN);
        return out;
    }
    // Diagonal of R^-1 (population R_x + diag(tail u)) R^-1 with
    // R^-1 = diag(1/mu_2) - gamma a a^T, a = mu / mu_2.
    const Eigen::ArrayXd a = mom.mean.array() / mom.m2.array();
    const double gamma = 1.0 / (1.0 + (mom.mean.array() * a).sum());
    const Eigen::ArrayXd tail_u = tail.array() * u.array();
    const double tail_a2 = (tail_u * a.square()).sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double inv_v = 1.0 / mom.m2(i);
        const double rinv_ii = inv_v - gamma * a(i) * a(i);
        // sum_k (delta_ik / mu_2(i) - gamma a_i a_k)^2 tail_u_k
        const double cross = inv_v * inv_v * tail_u(i) - 2.0 * inv_v * gamma * a(i) * a(i) * tail_u(i) +
                             gamma * gamma * a(i) * a(i) * tail_a2;
        out(i) = (population * rinv_ii + cross) / in.rho;
    }
    return out;
}

}  // namespace

Eigen::VectorXd mse_multinomial(const TheoryInputs& in, Approximation approx) {
    return closed_form(in, in.moments.mean, in.moments.m3, approx);
}

Eigen::VectorXd mse_maxvariance(const TheoryInputs& in, Approximation approx) {
    const Eigen::VectorXd weight = (in.moments.mean.array().square() + in.moments.m2.array()).matrix();
    return closed_form(in, weight, in.moments.m4, approx);
}

std::vector<Eigen::Index> undefined_senders(const InputMoments& moments) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < moments.m2.size(); ++i)
        if (!(moments.m2(i) > 0.0)) out.push_back(i);
    return out;
}

Eigen::MatrixXd autocorrelation(const InputMoments& moments) {
    Eigen::MatrixXd r = moments.mean * moments.mean.transpose();
    r.diagonal() += moments.m2;
    return r;
}

ShermanMorrisonInverse autocorrelation_inverse(const InputMoments& moments) {
    if ((moments.m2.array() <= 0.0).any()) {
        throw ValidationError("autocorrelation inverse needs mu_2 > 0 for every sender");
    }
    const Eigen::VectorXd inv_v = moments.m2.cwiseInverse();
    const Eigen::VectorXd a = moments.mean.cwiseProduct(inv_v);
    ShermanMorrisonInverse out;
    out.gamma = 1.0 / (1.0 + moments.mean.dot(a));
    out.inverse = -out.gamma * a * a.transpose();
    out.inverse.diagonal() += inv_v;
    return out;
}

Eigen::MatrixXd profile_covariance(const TheoryInputs& in, Eigen::Index j, OutputModel model, Approximation approx) {
    check_shapes(in);
    const auto& mom = in.moments;
    if (j < 0 || j >= in.stats.s.cols()) throw ValidationError("receiver index out of range");
    if ((mom.m2.array() <= 0.0).any()) {
        throw ValidationError("profile covariance needs mu_2 > 0 for every sender");
    }

    const Eigen::VectorXd s_j = in.stats.s.col(j);
    const bool multinomial = model == OutputModel::Multinomial;
    const Eigen::VectorXd weight =
        multinomial ? mom.mean : Eigen::VectorXd(mom.mean.array().square() + mom.m2.array());
    const Eigen::VectorXd& tail = multinomial ? mom.m3 : mom.m4;
    const double c_j = weight.dot(s_j);

    if (approx == Approximation::Full) {
        const Eigen::MatrixXd rinv = autocorrelation_inverse(mom).inverse;
        Eigen::MatrixXd middle = c_j * autocorrelation(mom);
        middle.diagonal() += tail.cwiseProduct(s_j);
        return rinv * middle * rinv / in.rho;
    }

    // R^-1 (c_j R_x) R^-1 = c_j R^-1 holds exactly; the dominance step then
    // replaces R^-1 by diag(mu_2)^-1 in both remaining terms.
    const Eigen::VectorXd inv_v = mom.m2.cwiseInverse();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mom.senders(), mom.senders());
    cov.diagonal() = (c_j * inv_v + tail.cwiseProduct(s_j).cwiseProduct(inv_v).cwiseProduct(inv_v)) / in.rho;
    return cov;
}

}  // namespace mixscope
