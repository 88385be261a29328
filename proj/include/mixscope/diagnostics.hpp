#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mixscope/mixer.hpp"
#include "mixscope/trace.hpp"

namespace mixscope {

/// The ten sample-covariance averages of the input process, in table order.
enum class CovarianceStat : std::size_t {
    VarK,            // |Cov(X_k, X_k)|
    CovKM,           // |Cov(X_k, X_m)|
    CovSqK_K,        // |Cov(X_k^2, X_k)|
    CovKM_K,         // |Cov(X_k X_m, X_k)|
    CovSqK_M,        // |Cov(X_k^2, X_m)|
    CovKM_N,         // |Cov(X_k X_m, X_n)|
    CovSqK_SqK,      // |Cov(X_k^2, X_k^2)|
    CovSqK_KM,       // |Cov(X_k^2, X_k X_m)|
    CovSqK_SqM,      // |Cov(X_k^2, X_m^2)|
    CovSqK_MN,       // |Cov(X_k^2, X_m X_n)|
};
inline constexpr std::size_t kCovarianceStatCount = 10;

std::string label(CovarianceStat stat);

struct CovarianceValue {
    double mean_abs = 0.0;       // average |covariance| over evaluated tuples
    std::size_t tuples = 0;      // tuples evaluated
    bool exhaustive = false;     // every tuple of the space was evaluated
    bool available = true;       // false when N is too small for the index pattern
};

/// Input-independence hypotheses: a cross statistic must be small relative to
/// the self statistic of the same order.
enum class Condition { Covariance, ThirdOrder, FourthOrder };

struct ConditionRatio {
    Condition condition;
    CovarianceStat cross;
    CovarianceStat self;
    // Ratios use the cross statistic's excess over its value under independent
    // senders. That value is zero except for Cov(X_k X_m, X_k) = mu_m Var(X_k)
    // and Cov(X_k^2, X_k X_m) = mu_m Cov(X_k^2, X_k).
    double mean_ratio = 0.0;  // mean |excess| / mean |self|
    double max_ratio = 0.0;   // worst tuple: |excess(k,...)| / |self(k)|
    bool violated = false;
};

struct CovarianceReport {
    std::array<CovarianceValue, kCovarianceStatCount> values{};
    std::vector<ConditionRatio> ratios;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    bool triples_skipped = false;  // N < 3

    const CovarianceValue& operator[](CovarianceStat s) const { return values[static_cast<std::size_t>(s)]; }
    bool any_violation() const;
    /// Violation flag of the named condition (any of its cross statistics).
    bool violated(Condition c) const;
    /// Largest mean ratio among the condition's cross statistics.
    double mean_ratio(Condition c) const;
    double max_ratio(Condition c) const;
};

struct CovarianceOptions {
    std::size_t budget = 100000;  // tuple samples per statistic
    std::uint64_t seed = 0;
    double mean_ratio_limit = 0.1;
    double max_ratio_limit = 0.5;
};

/// Sample covariances (1/rho normalization) averaged over index tuples with
/// distinct entries. Tuple spaces no larger than the budget are enumerated;
/// larger ones are sampled uniformly with replacement from a seeded stream.
/// Throws ValidationError when rho < 2.
CovarianceReport covariance_report(const ObservationWindow& obs, const CovarianceOptions& options = {});

/// Tally of X_i^r over every sender and round: bins 0..49 plus an overflow bin for >= 50.
struct InputHistogram {
    static constexpr std::size_t kBins = 50;
    std::array<std::size_t, kBins + 1> counts{};

    std::size_t total() const;
};

InputHistogram input_histogram(const ObservationWindow& obs);

enum class InputModel { Poisson, MultinomialThreshold };

/// pmf over {0..49, >= 50}. Poisson uses `param` as the rate; the binomial
/// marginal of a multinomial threshold mix uses `t` and `param` as q.
std::array<double, InputHistogram::kBins + 1> theoretical_input_pmf(InputModel model, double param,
                                                                     std::size_t t = 0);

/// Per-sender model fitted from the window's means and averaged over senders,
/// matching the aggregation of input_histogram.
std::array<double, InputHistogram::kBins + 1> fitted_input_pmf(const ObservationWindow& obs, InputModel model);

/// Average distinct recipients per (sender, round) for X_i in {2, 3, 4, 5, >= 6}.
struct RecipientSpread {
    static constexpr std::array<const char*, 5> kBinLabels = {"=2", "=3", "=4", "=5", ">=6"};
    std::array<double, 5> average{};       // NaN for empty bins
    std::array<std::size_t, 5> samples{};  // (sender, round) pairs per bin
    double average_contacts = 0.0;         // distinct receivers per sender over the trace
};

RecipientSpread recipient_spread(const Trace& trace, const std::vector<RoundSpan>& rounds);

struct UserSelection {
    std::vector<Eigen::Index> users;
    bool fallback = false;  // the three-way intersection was empty
};

/// Senders that are among the 40% most active (total messages), among the 40%
/// with the longest first-to-last active round span, and first active before
/// round 0.3 * rho_max. Ties at a cut-off are kept. An empty intersection
/// falls back to the early-participation filter alone.
UserSelection select_evaluation_users(const ObservationWindow& obs, Eigen::Index rho_max);

void write_covariance_csv(std::ostream& out, const CovarianceReport& report);
void write_histogram_csv(std::ostream& out, const InputHistogram& histogram,
                         const std::array<double, InputHistogram::kBins + 1>& pmf);
void write_recipient_spread_csv(std::ostream& out, const RecipientSpread& spread);

}  // namespace mixscope
