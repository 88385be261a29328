#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mixscope {

using SenderId = std::uint32_t;
using ReceiverId = std::uint32_t;

struct TraceEvent {
    double timestamp = 0.0;  // seconds, finite and non-negative
    SenderId sender = 0;
    ReceiverId receiver = 0;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// A ground-truth communication stream: events in timestamp order plus the
/// name tables that intern senders and receivers to dense indices.
///
/// Sender and receiver namespaces are disjoint; the same string may appear
/// in both tables and denote two unrelated parties.
class Trace {
public:
    /// Validates every invariant and throws ValidationError on violation:
    /// non-decreasing finite timestamps, indices in range, unique names.
    Trace(std::vector<TraceEvent> events, std::vector<std::string> sender_names,
          std::vector<std::string> receiver_names);

    const std::vector<TraceEvent>& events() const noexcept { return events_; }
    const std::vector<std::string>& sender_names() const noexcept { return sender_names_; }
    const std::vector<std::string>& receiver_names() const noexcept { return receiver_names_; }

    std::size_t senders() const noexcept { return sender_names_.size(); }
    std::size_t receivers() const noexcept { return receiver_names_.size(); }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }

    /// Messages sent by each sender over the whole trace.
    std::vector<std::size_t> sender_counts() const;

    friend bool operator==(const Trace&, const Trace&) = default;

private:
    std::vector<TraceEvent> events_;
    std::vector<std::string> sender_names_;
    std::vector<std::string> receiver_names_;
};

enum class ProfileKind { GroundTruth, Estimate };

/// N x M matrix of transition probabilities p(j|i); row i is sender i's profile.
struct ProfileMatrix {
    Eigen::MatrixXd values;
    ProfileKind kind = ProfileKind::GroundTruth;

    Eigen::Index senders() const noexcept { return values.rows(); }
    Eigen::Index receivers() const noexcept { return values.cols(); }
};

/// Reads the trace-CSV format (header `timestamp,sender,receiver`).
/// Events are stably sorted by timestamp; names are interned in order of
/// first appearance in the sorted stream.
Trace parse_trace(std::istream& in);
Trace read_trace_file(const std::string& path);

/// Writes the trace-CSV format. Timestamps use the shortest representation
/// that round-trips exactly.
void write_trace(std::ostream& out, const Trace& trace);
void write_trace_file(const std::string& path, const Trace& trace);

/// Keeps the events of the k most active senders (ties: lower index first).
/// Retained senders keep their relative order; receivers are re-interned by
/// first appearance and unused ones dropped. k >= N returns the trace unchanged.
Trace restrict_to_top_senders(const Trace& trace, std::size_t k);

/// Empirical p(j|i) = messages(i -> j) / messages(i).
/// Throws UndefinedProfileError if some sender has no messages.
ProfileMatrix ground_truth_profiles(const Trace& trace);

/// Builds a trace from already-sorted events, interning names on the fly.
class TraceBuilder {
public:
    void add(double timestamp, const std::string& sender, const std::string& receiver);
    /// Stable-sorts by timestamp, then re-interns in sorted order.
    Trace build() &&;

private:
    struct RawEvent {
        double timestamp;
        std::string sender;
        std::string receiver;
    };
    std::vector<RawEvent> raw_;
};

}  // namespace mixscope
