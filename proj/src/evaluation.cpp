#include "mixscope/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mixscope/attack.hpp"
#include "mixscope/error.hpp"
#include "mixscope/parallel.hpp"
#include "mixscope/statistics.hpp"
#include "mixscope/theory.hpp"

namespace mixscope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

GridPoint evaluate_prefix(const ObservationWindow& obs, const ProfileMatrix& truth, const ProfileStats& stats,
                          const std::vector<Eigen::Index>& users, Eigen::Index rho) {
    const auto window = obs.prefix(rho);
    const auto attack = lsda(window);
    const Eigen::VectorXd mse = empirical_mse(truth, attack.estimate);
    const TheoryInputs inputs{input_moments(window), stats, static_cast<double>(rho)};
    const Eigen::VectorXd lo = mse_multinomial(inputs);
    const Eigen::VectorXd hi = mse_maxvariance(inputs);

    GridPoint point;
    point.rho = rho;
    point.condition_number = attack.condition_number;
    point.rank_deficient = attack.rank_deficient;
    double sum = 0.0, sum_lo = 0.0, sum_hi = 0.0;
    std::size_t used = 0;
    for (Eigen::Index i : users) {
        point.per_user.push_back({i, mse(i), lo(i), hi(i)});
        if (std::isnan(lo(i))) {
            ++point.excluded;
            continue;
        }
        sum += mse(i);
        sum_lo += lo(i);
        sum_hi += hi(i);
        ++used;
    }
    const double denom = static_cast<double>(used);
    point.avg_mse = used ? sum / denom : kNaN;
    point.avg_theory_min = used ? sum_lo / denom : kNaN;
    point.avg_theory_max = used ? sum_hi / denom : kNaN;
    return point;
}

double number_or_nan(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : kNaN; }

}  // namespace

MseReport run_evaluation(const ObservationWindow& obs, const ProfileMatrix& truth,
                         const std::vector<Eigen::Index>& users, const EvaluationOptions& options) {
    if (users.empty()) throw ValidationError("evaluation needs at least one user");
    if (truth.senders() != obs.senders() || truth.receivers() != obs.receivers()) {
        throw ShapeError("ground truth is " + std::to_string(truth.senders()) + "x" +
                         std::to_string(truth.receivers()) + " but the window has " + std::to_string(obs.senders()) +
                         " senders and " + std::to_string(obs.receivers()) + " receivers");
    }
    for (Eigen::Index i : users) {
        if (i < 0 || i >= obs.senders()) throw ValidationError("user index " + std::to_string(i) + " out of range");
    }

    std::vector<Eigen::Index> rhos;
    const double rho_max = static_cast<double>(obs.rounds());
    for (double f : options.fractions) {
        const auto rho = static_cast<Eigen::Index>(std::llround(f * rho_max));
        if (rho < 2 || rho > obs.rounds()) continue;
        if (!rhos.empty() && rho <= rhos.back()) continue;
        rhos.push_back(rho);
    }

    const ProfileStats stats = profile_stats(truth);
    MseReport report;
    report.users = users;
    report.grid.resize(rhos.size());
    parallel_for(rhos.size(), options.threads,
                 [&](std::size_t g) { report.grid[g] = evaluate_prefix(obs, truth, stats, users, rhos[g]); });
    return report;
}

ModelComparison compare_models(const MseReport& report) {
    ModelComparison cmp;
    const std::size_t n = report.grid.size();
    double err_lo = 0.0, err_hi = 0.0;
    std::size_t used = 0;
    for (std::size_t g = n / 2; g < n; ++g) {
        const auto& p = report.grid[g];
        if (!(p.avg_mse > 0.0) || !(p.avg_theory_min > 0.0) || !(p.avg_theory_max > 0.0)) continue;
        err_lo += std::abs(std::log(p.avg_mse / p.avg_theory_min));
        err_hi += std::abs(std::log(p.avg_mse / p.avg_theory_max));
        ++used;
    }
    if (used == 0) return cmp;
    cmp.error_min = err_lo / static_cast<double>(used);
    cmp.error_max = err_hi / static_cast<double>(used);
    const double larger = std::max(cmp.error_min, cmp.error_max);
    if (std::abs(cmp.error_min - cmp.error_max) < 0.1 * larger || larger == 0.0) {
        cmp.verdict = ModelVerdict::Inconclusive;
    } else {
        cmp.verdict = cmp.error_min < cmp.error_max ? ModelVerdict::MultinomialLike : ModelVerdict::MaxVarianceLike;
    }
    return cmp;
}

std::string to_string(ModelVerdict verdict) {
    switch (verdict) {
        case ModelVerdict::MultinomialLike: return "multinomial-like";
        case ModelVerdict::MaxVarianceLike: return "maxvariance-like";
        case ModelVerdict::Inconclusive: break;
    }
    return "inconclusive";
}

nlohmann::json report_to_json(const MseReport& report, const std::vector<std::string>& sender_names) {
    using nlohmann::json;
    auto name_of = [&](Eigen::Index i) -> json {
        if (i >= 0 && static_cast<std::size_t>(i) < sender_names.size()) return sender_names[static_cast<std::size_t>(i)];
        return nullptr;
    };
    json users = json::array();
    for (auto i : report.users) users.push_back({{"index", i}, {"name", name_of(i)}});

    json grid = json::array();
    for (const auto& p : report.grid) {
        json per_user = json::array();
        for (const auto& u : p.per_user) {
            per_user.push_back({{"sender", u.sender},
                                {"mse", u.mse},
                                {"mse_theory_min", u.theory_min},
                                {"mse_theory_max", u.theory_max}});
        }
        grid.push_back({{"rho", p.rho},
                        {"avg_mse", p.avg_mse},
                        {"avg_mse_theory_min", p.avg_theory_min},
                        {"avg_mse_theory_max", p.avg_theory_max},
                        {"cond", p.condition_number},
                        {"rank_deficient", p.rank_deficient},
                        {"excluded", p.excluded},
                        {"per_user", std::move(per_user)}});
    }
    const auto cmp = compare_models(report);
    return {{"users", std::move(users)},
            {"grid", std::move(grid)},
            {"verdict", to_string(cmp.verdict)},
            {"verdict_error_min", cmp.error_min},
            {"verdict_error_max", cmp.error_max}};
}

MseReport report_from_json(const nlohmann::json& j) {
    MseReport report;
    for (const auto& u : j.at("users")) report.users.push_back(u.at("index").get<Eigen::Index>());
    for (const auto& g : j.at("grid")) {
        GridPoint p;
        p.rho = g.at("rho").get<Eigen::Index>();
        p.avg_mse = number_or_nan(g.at("avg_mse"));
        p.avg_theory_min = number_or_nan(g.at("avg_mse_theory_min"));
        p.avg_theory_max = number_or_nan(g.at("avg_mse_theory_max"));
        p.condition_number = g.at("cond").is_number() ? g["cond"].get<double>() : std::numeric_limits<double>::infinity();
        p.rank_deficient = g.at("rank_deficient").get<bool>();
        p.excluded = g.at("excluded").get<std::size_t>();
        for (const auto& u : g.at("per_user")) {
            p.per_user.push_back({u.at("sender").get<Eigen::Index>(), number_or_nan(u.at("mse")),
                                  number_or_nan(u.at("mse_theory_min")), number_or_nan(u.at("mse_theory_max"))});
        }
        report.grid.push_back(std::move(p));
    }
    return report;
}

void write_report_csv(std::ostream& out, const MseReport& report) {
    out << "rho,avg_mse,avg_mse_theory_min,avg_mse_theory_max,cond\n";
    const auto old_precision = out.precision(17);
    for (const auto& p : report.grid) {
        out << p.rho << ',' << p.avg_mse << ',' << p.avg_theory_min << ',' << p.avg_theory_max << ','
            << p.condition_number << '\n';
    }
    out.precision(old_precision);
}

}  // namespace mixscope
