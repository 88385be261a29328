#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "mixscope/mixer.hpp"
#include "mixscope/trace.hpp"

namespace mixscope {

struct UserMse {
    Eigen::Index sender = 0;
    double mse = 0.0;
    double theory_min = 0.0;  // NaN when the sender's prefix variance is zero
    double theory_max = 0.0;
};

struct GridPoint {
    Eigen::Index rho = 0;
    double avg_mse = 0.0;
    double avg_theory_min = 0.0;
    double avg_theory_max = 0.0;
    double condition_number = 0.0;
    bool rank_deficient = false;
    std::size_t excluded = 0;  // selected users left out of the averages (zero prefix variance)
    std::vector<UserMse> per_user;
};

struct MseReport {
    std::vector<Eigen::Index> users;
    std::vector<GridPoint> grid;
};

struct EvaluationOptions {
    /// Fractions of the window length; realized as rounded round counts.
    std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    unsigned threads = 1;
};

/// For every grid point: attack the rho-round prefix, score the estimate
/// against `truth`, and evaluate both closed-form predictions with the
/// prefix's own sample moments. Averages run over `users` minus those whose
/// prefix variance is zero. Grid points with fewer than 2 rounds are skipped.
/// Throws ValidationError on empty `users` or shape mismatches.
MseReport run_evaluation(const ObservationWindow& obs, const ProfileMatrix& truth,
                         const std::vector<Eigen::Index>& users, const EvaluationOptions& options = {});

enum class ModelVerdict { MultinomialLike, MaxVarianceLike, Inconclusive };

struct ModelComparison {
    ModelVerdict verdict = ModelVerdict::Inconclusive;
    double error_min = 0.0;  // mean |log(empirical / theory_min)| over the last half of the grid
    double error_max = 0.0;
};

/// Picks the output model whose curve sits closer to the empirical one over
/// the last half of the grid; inconclusive when the two errors differ by less
/// than 10% of the larger one.
ModelComparison compare_models(const MseReport& report);

std::string to_string(ModelVerdict verdict);

nlohmann::json report_to_json(const MseReport& report, const std::vector<std::string>& sender_names = {});
MseReport report_from_json(const nlohmann::json& j);
/// Columns: rho,avg_mse,avg_mse_theory_min,avg_mse_theory_max,cond
void write_report_csv(std::ostream& out, const MseReport& report);

}  // namespace mixscope
