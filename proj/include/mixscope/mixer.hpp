#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mixscope/trace.hpp"

namespace mixscope {

enum class MixKind { Threshold, Timed };

/// Flushing rule of a mix that never delays messages across rounds.
class MixConfig {
public:
    /// Flush every `t` messages. Throws ValidationError if t == 0.
    static MixConfig threshold(std::size_t t);
    /// Flush every `tau` seconds. Throws ValidationError unless tau > 0 and finite.
    static MixConfig timed(double tau);

    MixKind kind() const noexcept { return kind_; }
    std::size_t t() const;    // Threshold only
    double tau() const;       // Timed only

private:
    MixConfig(MixKind kind, std::size_t t, double tau) : kind_(kind), t_(t), tau_(tau) {}

    MixKind kind_;
    std::size_t t_;
    double tau_;
};

/// The adversary's view: per-round input counts U (rounds x senders) and
/// output counts Y (rounds x receivers). Counts are stored as doubles holding
/// exact non-negative integers.
class ObservationWindow {
public:
    /// Throws ValidationError unless: rho >= 1, counts are non-negative
    /// integers, every round conserves messages and no round is empty.
    ObservationWindow(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs);

    const Eigen::MatrixXd& inputs() const noexcept { return inputs_; }
    const Eigen::MatrixXd& outputs() const noexcept { return outputs_; }

    Eigen::Index rounds() const noexcept { return inputs_.rows(); }
    Eigen::Index senders() const noexcept { return inputs_.cols(); }
    Eigen::Index receivers() const noexcept { return outputs_.cols(); }

    /// The first `rho` rounds (1 <= rho <= rounds()).
    ObservationWindow prefix(Eigen::Index rho) const;

private:
    Eigen::MatrixXd inputs_;
    Eigen::MatrixXd outputs_;
};

/// Half-open range of event indices [begin, end) flushed together.
struct RoundSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const RoundSpan&, const RoundSpan&) = default;
};

/// Partitions the trace's events into rounds.
///
/// Threshold: consecutive groups of exactly t events; a trailing partial group
/// is discarded. Throws EmptyObservationError if t exceeds the event count.
/// Timed: half-open windows [k*tau, (k+1)*tau) measured from the first event's
/// timestamp; empty windows are omitted.
std::vector<RoundSpan> partition_rounds(const Trace& trace, const MixConfig& config);

/// Tallies each round span into the observation matrices.
ObservationWindow tally_rounds(const Trace& trace, const std::vector<RoundSpan>& rounds);

/// partition_rounds followed by tally_rounds.
ObservationWindow anonymize(const Trace& trace, const MixConfig& config);

struct RoundStats {
    Eigen::Index rounds = 0;
    Eigen::Index senders = 0;
    Eigen::Index receivers = 0;
    double mean_messages = 0.0;
    double min_messages = 0.0;
    double max_messages = 0.0;
};

RoundStats round_stats(const ObservationWindow& obs);

/// Count matrix CSV: no header, one round per line, comma-separated integers.
void write_count_matrix(std::ostream& out, const Eigen::MatrixXd& counts);
Eigen::MatrixXd read_count_matrix(std::istream& in);

/// Writes `<dir>/U.csv` and `<dir>/Y.csv`.
void write_observation(const std::string& dir, const ObservationWindow& obs);
ObservationWindow read_observation(const std::string& u_path, const std::string& y_path);

}  // namespace mixscope
