#include "mixscope/mixer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "mixscope/error.hpp"

namespace mixscope {

MixConfig MixConfig::threshold(std::size_t t) {
    if (t == 0) throw ValidationError("threshold t must be >= 1");
    return MixConfig(MixKind::Threshold, t, 0.0);
}

MixConfig MixConfig::timed(double tau) {
    if (!std::isfinite(tau) || tau <= 0.0) throw ValidationError("timed tau must be a positive number of seconds");
    return MixConfig(MixKind::Timed, 0, tau);
}

std::size_t MixConfig::t() const {
    if (kind_ != MixKind::Threshold) throw ValidationError("t is only defined for a threshold mix");
    return t_;
}

double MixConfig::tau() const {
    if (kind_ != MixKind::Timed) throw ValidationError("tau is only defined for a timed mix");
    return tau_;
}

namespace {

void check_counts(const Eigen::MatrixXd& m, const char* name) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            if (!(v >= 0.0) || std::floor(v) != v) {
                throw ValidationError(std::string(name) + " round " + std::to_string(r) +
                                      ": counts must be non-negative integers");
            }
        }
    }
}

}  // namespace

ObservationWindow::ObservationWindow(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs)
    : inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
    if (inputs_.rows() < 1) throw EmptyObservationError("observation window has no rounds");
    if (inputs_.rows() != outputs_.rows()) {
        throw ShapeError("U has " + std::to_string(inputs_.rows()) + " rounds but Y has " +
                         std::to_string(outputs_.rows()));
    }
    if (inputs_.cols() < 1 || outputs_.cols() < 1) throw ShapeError("U and Y need at least one column");
    check_counts(inputs_, "U");
    check_counts(outputs_, "Y");
    for (Eigen::Index r = 0; r < inputs_.rows(); ++r) {
        const double in = inputs_.row(r).sum();
        const double out = outputs_.row(r).sum();
        if (in != out) {
            throw ValidationError("round " + std::to_string(r) + ": " + std::to_string(in) + " messages in but " +
                                  std::to_string(out) + " out");
        }
        if (in == 0.0) throw ValidationError("round " + std::to_string(r) + " is empty");
    }
}

ObservationWindow ObservationWindow::prefix(Eigen::Index rho) const {
    if (rho < 1 || rho > rounds()) throw ValidationError("prefix length out of range");
    return ObservationWindow(inputs_.topRows(rho), outputs_.topRows(rho));
}

std::vector<RoundSpan> partition_rounds(const Trace& trace, const MixConfig& config) {
    if (trace.empty()) throw EmptyTraceError("cannot anonymize an empty trace");
    const auto& events = trace.events();
    std::vector<RoundSpan> rounds;

    if (config.kind() == MixKind::Threshold) {
        const std::size_t t = config.t();
        if (t > events.size()) {
            throw EmptyObservationError("threshold t=" + std::to_string(t) + " exceeds the " +
                                        std::to_string(events.size()) + " events in the trace");
        }
        const std::size_t full = events.size() / t;
        rounds.reserve(full);
        for (std::size_t r = 0; r < full; ++r) rounds.push_back({r * t, (r + 1) * t});
        return rounds;
    }

    const double tau = config.tau();
    const double origin = events.front().timestamp;
    std::size_t begin = 0;
    auto window_of = [&](double ts) { return std::floor((ts - origin) / tau); };
    double current = window_of(events.front().timestamp);
    for (std::size_t e = 1; e < events.size(); ++e) {
        const double w = window_of(events[e].timestamp);
        if (w != current) {
            rounds.push_back({begin, e});
            begin = e;
            current = w;
        }
    }
    rounds.push_back({begin, events.size()});
    return rounds;
}

ObservationWindow tally_rounds(const Trace& trace, const std::vector<RoundSpan>& rounds) {
    const auto rho = static_cast<Eigen::Index>(rounds.size());
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(rho, static_cast<Eigen::Index>(trace.senders()));
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(rho, static_cast<Eigen::Index>(trace.receivers()));
    const auto& events = trace.events();
    for (Eigen::Index r = 0; r < rho; ++r) {
        const auto& span = rounds[static_cast<std::size_t>(r)];
        if (span.end > events.size() || span.begin > span.end) throw ValidationError("round span out of range");
        for (std::size_t e = span.begin; e < span.end; ++e) {
            u(r, events[e].sender) += 1.0;
            y(r, events[e].receiver) += 1.0;
        }
    }
    return ObservationWindow(std::move(u), std::move(y));
}

ObservationWindow anonymize(const Trace& trace, const MixConfig& config) {
    return tally_rounds(trace, partition_rounds(trace, config));
}

RoundStats round_stats(const ObservationWindow& obs) {
    const Eigen::VectorXd totals = obs.inputs().rowwise().sum();
    RoundStats s;
    s.rounds = obs.rounds();
    s.senders = obs.senders();
    s.receivers = obs.receivers();
    s.mean_messages = totals.mean();
    s.min_messages = totals.minCoeff();
    s.max_messages = totals.maxCoeff();
    return s;
}

void write_count_matrix(std::ostream& out, const Eigen::MatrixXd& counts) {
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
        for (Eigen::Index c = 0; c < counts.cols(); ++c) {
            if (c) out << ',';
            out << static_cast<long long>(counts(r, c));
        }
        out << '\n';
    }
}

Eigen::MatrixXd read_count_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            auto pos = line.find(',', start);
            if (pos == std::string::npos) pos = line.size();
            std::string_view field(line.data() + start, pos - start);
            long long v = 0;
            std::size_t used = 0;
            try {
                v = std::stoll(std::string(field), &used);
            } catch (const std::exception&) {
                throw ParseError(line_no, "non-integer count '" + std::string(field) + "'");
            }
            if (used != field.size() || v < 0) {
                throw ParseError(line_no, "invalid count '" + std::string(field) + "'");
            }
            row.push_back(static_cast<double>(v));
            start = pos + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(line_no, "expected " + std::to_string(rows.front().size()) + " columns, found " +
                                          std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw EmptyObservationError("count matrix has no rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

void write_observation(const std::string& dir, const ObservationWindow& obs) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    for (auto [name, mat] : {std::pair{"U.csv", &obs.inputs()}, std::pair{"Y.csv", &obs.outputs()}}) {
        const auto path = (fs::path(dir) / name).string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        write_count_matrix(out, *mat);
        if (!out) throw IoError("write failure on '" + path + "'");
    }
}

ObservationWindow read_observation(const std::string& u_path, const std::string& y_path) {
    auto load = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path + "'");
        try {
            return read_count_matrix(in);
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": " + e.what());
        }
    };
    return ObservationWindow(load(u_path), load(y_path));
}

}  // namespace mixscope
