#include "mixscope/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "mixscope/error.hpp"

namespace mixscope {

namespace {

constexpr std::string_view kHeader = "timestamp,sender,receiver";

void check_unique(const std::vector<std::string>& names, const char* what) {
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second) {
            throw ValidationError(std::string("duplicate ") + what + " name '" + n + "'");
        }
    }
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

}  // namespace

Trace::Trace(std::vector<TraceEvent> events, std::vector<std::string> sender_names,
             std::vector<std::string> receiver_names)
    : events_(std::move(events)),
      sender_names_(std::move(sender_names)),
      receiver_names_(std::move(receiver_names)) {
    check_unique(sender_names_, "sender");
    check_unique(receiver_names_, "receiver");
    double prev = 0.0;
    for (std::size_t e = 0; e < events_.size(); ++e) {
        const auto& ev = events_[e];
        if (!std::isfinite(ev.timestamp) || ev.timestamp < 0.0) {
            throw ValidationError("event " + std::to_string(e) + ": timestamp must be finite and non-negative");
        }
        if (e > 0 && ev.timestamp < prev) {
            throw ValidationError("event " + std::to_string(e) + ": timestamps must be non-decreasing");
        }
        if (ev.sender >= sender_names_.size() || ev.receiver >= receiver_names_.size()) {
            throw ValidationError("event " + std::to_string(e) + ": index out of range");
        }
        prev = ev.timestamp;
    }
}

std::vector<std::size_t> Trace::sender_counts() const {
    std::vector<std::size_t> counts(senders(), 0);
    for (const auto& ev : events_) ++counts[ev.sender];
    return counts;
}

void TraceBuilder::add(double timestamp, const std::string& sender, const std::string& receiver) {
    raw_.push_back({timestamp, sender, receiver});
}

Trace TraceBuilder::build() && {
    std::stable_sort(raw_.begin(), raw_.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });

    std::unordered_map<std::string, SenderId> sender_index;
    std::unordered_map<std::string, ReceiverId> receiver_index;
    std::vector<std::string> senders;
    std::vector<std::string> receivers;
    std::vector<TraceEvent> events;
    events.reserve(raw_.size());

    for (auto& r : raw_) {
        auto [s, s_new] = sender_index.try_emplace(r.sender, static_cast<SenderId>(senders.size()));
        if (s_new) senders.push_back(r.sender);
        auto [d, d_new] = receiver_index.try_emplace(r.receiver, static_cast<ReceiverId>(receivers.size()));
        if (d_new) receivers.push_back(r.receiver);
        events.push_back({r.timestamp, s->second, d->second});
    }
    raw_.clear();
    return Trace(std::move(events), std::move(senders), std::move(receivers));
}

Trace parse_trace(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw EmptyTraceError("trace is empty (missing header)");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) {
        throw ParseError(line_no, "expected header '" + std::string(kHeader) + "'");
    }

    TraceBuilder builder;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        auto fields = split_commas(line);
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 3 columns, found " + std::to_string(fields.size()));
        }
        double ts = 0.0;
        auto ts_field = fields[0];
        auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
        if (ec != std::errc() || ptr != ts_field.data() + ts_field.size()) {
            throw ParseError(line_no, "non-numeric timestamp '" + std::string(ts_field) + "'");
        }
        if (!std::isfinite(ts) || ts < 0.0) {
            throw ParseError(line_no, "timestamp must be finite and non-negative");
        }
        if (fields[1].empty() || fields[2].empty()) {
            throw ParseError(line_no, "empty sender or receiver name");
        }
        builder.add(ts, std::string(fields[1]), std::string(fields[2]));
        ++rows;
    }
    if (in.bad()) throw IoError("read failure while parsing trace");
    if (rows == 0) throw EmptyTraceError("trace has a header but no events");
    return std::move(builder).build();
}

Trace read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file '" + path + "'");
    return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
    out << kHeader << '\n';
    char buf[64];
    for (const auto& ev : trace.events()) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), ev.timestamp);
        out.write(buf, ptr - buf);
        out << ',' << trace.sender_names()[ev.sender] << ',' << trace.receiver_names()[ev.receiver] << '\n';
    }
}

void write_trace_file(const std::string& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_trace(out, trace);
    if (!out) throw IoError("write failure on '" + path + "'");
}

Trace restrict_to_top_senders(const Trace& trace, std::size_t k) {
    if (k == 0) throw ValidationError("top-senders k must be >= 1");
    const std::size_t n = trace.senders();
    if (k >= n) return trace;

    auto counts = trace.sender_counts();
    std::vector<SenderId> order(n);
    std::iota(order.begin(), order.end(), SenderId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](SenderId a, SenderId b) { return counts[a] > counts[b]; });

    std::vector<bool> keep(n, false);
    for (std::size_t r = 0; r < k; ++r) keep[order[r]] = true;

    std::vector<SenderId> sender_map(n, 0);
    std::vector<std::string> senders;
    for (SenderId s = 0; s < n; ++s) {
        if (keep[s]) {
            sender_map[s] = static_cast<SenderId>(senders.size());
            senders.push_back(trace.sender_names()[s]);
        }
    }

    constexpr auto kUnmapped = static_cast<ReceiverId>(-1);
    std::vector<ReceiverId> receiver_map(trace.receivers(), kUnmapped);
    std::vector<std::string> receivers;
    std::vector<TraceEvent> events;
    for (const auto& ev : trace.events()) {
        if (!keep[ev.sender]) continue;
        if (receiver_map[ev.receiver] == kUnmapped) {
            receiver_map[ev.receiver] = static_cast<ReceiverId>(receivers.size());
            receivers.push_back(trace.receiver_names()[ev.receiver]);
        }
        events.push_back({ev.timestamp, sender_map[ev.sender], receiver_map[ev.receiver]});
    }
    return Trace(std::move(events), std::move(senders), std::move(receivers));
}

ProfileMatrix ground_truth_profiles(const Trace& trace) {
    const auto n = static_cast<Eigen::Index>(trace.senders());
    const auto m = static_cast<Eigen::Index>(trace.receivers());
    Eigen::MatrixXd tally = Eigen::MatrixXd::Zero(n, m);
    for (const auto& ev : trace.events()) tally(ev.sender, ev.receiver) += 1.0;

    for (Eigen::Index i = 0; i < n; ++i) {
        const double total = tally.row(i).sum();
        if (total == 0.0) {
            throw UndefinedProfileError("sender '" + trace.sender_names()[static_cast<std::size_t>(i)] +
                                        "' has no messages; profile undefined");
        }
        tally.row(i) /= total;
    }
    return {std::move(tally), ProfileKind::GroundTruth};
}

}  // namespace mixscope
