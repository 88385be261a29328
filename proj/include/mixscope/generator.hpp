#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "mixscope/mixer.hpp"
#include "mixscope/statistics.hpp"
#include "mixscope/theory.hpp"
#include "mixscope/trace.hpp"

namespace mixscope {

/// Each sender i independently sends Poisson(rates[i]) messages per round.
struct PoissonInputs {
    Eigen::VectorXd rates;
};

/// Exactly t messages per round, split among senders by Multinomial(t, q).
struct MultinomialThresholdInputs {
    std::size_t t = 1;
    Eigen::VectorXd probabilities;
};

using InputProcess = std::variant<PoissonInputs, MultinomialThresholdInputs>;

/// A synthetic population with known ground truth.
struct PopulationSpec {
    ProfileMatrix profile;
    InputProcess inputs;
    OutputModel output_model = OutputModel::Multinomial;
    std::uint64_t seed = 0;
    std::vector<std::string> sender_names;    // optional; defaults to s0, s1, ...
    std::vector<std::string> receiver_names;  // optional; defaults to r0, r1, ...

    /// Throws ValidationError if the profile is not row-stochastic, rates are
    /// not positive, t == 0, q is off the simplex, or sizes disagree.
    void validate() const;
    Eigen::Index senders() const noexcept { return profile.senders(); }
    Eigen::Index receivers() const noexcept { return profile.receivers(); }
};

/// Messages one sender delivered to one receiver in one round.
struct Contribution {
    std::uint32_t sender = 0;
    std::uint32_t receiver = 0;
    std::uint32_t count = 0;
};

/// One generated round with per-sender detail.
struct RoundDraw {
    Eigen::VectorXd inputs;
    Eigen::VectorXd outputs;
    std::vector<Contribution> contributions;  // sender-major order

    bool empty() const { return inputs.sum() == 0.0; }
};

/// Draws round attempt `attempt` from the streams keyed by (seed, sender, attempt).
/// Pure: the same (spec, attempt) always yields the same draw.
RoundDraw draw_round(const PopulationSpec& spec, std::uint64_t attempt);

/// The first `rho` non-empty round attempts, in attempt order. Attempts that
/// draw zero messages are skipped. Output does not depend on `threads`.
std::vector<RoundDraw> generate_round_draws(const PopulationSpec& spec, std::size_t rho, unsigned threads = 1);

ObservationWindow generate_rounds(const PopulationSpec& spec, std::size_t rho, unsigned threads = 1);

/// Expands generated rounds into a trace: every message of output round r is
/// stamped r * period seconds, so a timed mix with tau = period recovers the rounds.
Trace synthesize_trace(const PopulationSpec& spec, std::size_t rho, double period = 1.0, unsigned threads = 1);

/// Analytic moments of the input process.
InputMoments exact_moments(const PopulationSpec& spec);

/// Random population: Dirichlet(alpha) profiles, Poisson rates uniform in
/// [rate_lo, rate_hi]. Deterministic in `seed`.
PopulationSpec random_poisson_population(Eigen::Index senders, Eigen::Index receivers, double rate_lo,
                                         double rate_hi, OutputModel model, std::uint64_t seed,
                                         double alpha = 1.0);

/// Reads the JSON population config. Relative profile_file paths resolve
/// against `base_dir`.
PopulationSpec population_from_json(const nlohmann::json& config, const std::string& base_dir = ".");
nlohmann::json population_to_json(const PopulationSpec& spec);

std::string to_string(OutputModel model);
OutputModel output_model_from_string(const std::string& name);

}  // namespace mixscope
