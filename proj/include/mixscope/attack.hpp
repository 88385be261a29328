#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Core>
#include <Eigen/QR>

#include "mixscope/mixer.hpp"
#include "mixscope/trace.hpp"

namespace mixscope {

struct LsdaResult {
    ProfileMatrix estimate;          // kind == Estimate
    double condition_number = 0.0;   // of U^T U; +inf when singular
    Eigen::Index rank = 0;           // numerical rank of U
    bool rank_deficient = false;     // minimum-norm solution returned
};

/// Least Squares Disclosure Attack: P_hat = argmin ||U P - Y||_F.
///
/// Solved through a complete orthogonal decomposition of U, which gives the
/// normal-equations solution (U^T U)^-1 U^T Y when U has full column rank and
/// the minimum-norm least-squares solution otherwise. The factorization is
/// computed once and shared by every per-receiver solve.
class LsdaSolver {
public:
    /// `obs` must outlive the solver.
    explicit LsdaSolver(const ObservationWindow& obs);

    /// Estimate for receiver j alone (column j of P_hat).
    Eigen::VectorXd solve_column(Eigen::Index j) const;

    /// All columns. Columns are solved in fixed blocks that are independent of
    /// `threads`, so the result is bit-identical for any worker count.
    LsdaResult solve(unsigned threads = 1) const;

    double condition_number() const noexcept { return condition_; }
    Eigen::Index rank() const noexcept { return factorization_.rank(); }
    bool rank_deficient() const noexcept { return rank() < senders_; }

private:
    const Eigen::MatrixXd& outputs_;
    Eigen::Index senders_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> factorization_;
    double condition_;
};

LsdaResult lsda(const ObservationWindow& obs, unsigned threads = 1);

/// Throws ValidationError if j is out of range.
Eigen::VectorXd lsda_column(const ObservationWindow& obs, Eigen::Index j);

/// MSE_i = sum_j (p(j|i) - p_hat(j|i))^2 for every sender. Throws ShapeError on mismatch.
Eigen::VectorXd empirical_mse(const ProfileMatrix& truth, const ProfileMatrix& estimate);

/// Condition number of U^T U from its eigenvalues; +inf if the smallest is <= 0.
double gram_condition_number(const Eigen::MatrixXd& inputs);

/// Profile CSV: one sender per line, M comma-separated values with 17 significant digits.
void write_profile(std::ostream& out, const ProfileMatrix& profile);
void write_profile_file(const std::string& path, const ProfileMatrix& profile);
ProfileMatrix read_profile(std::istream& in, ProfileKind kind);

}  // namespace mixscope
