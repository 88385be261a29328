#include "mixscope/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>

#include "mixscope/error.hpp"

namespace mixscope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Population covariance of two per-round series.
double cov(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    return (a * b).mean() - a.mean() * b.mean();
}

double tuple_ratio(double cross, double self) {
    cross = std::abs(cross);
    self = std::abs(self);
    if (self == 0.0) return cross == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return cross / self;
}

struct Tuple {
    Eigen::Index k, m, n;
};

// Enumerates (or samples) ordered index tuples of the given arity with
// distinct entries and hands each to `visit`.
std::mt19937_64 make_engine(std::uint64_t seed, std::size_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

class TupleSource {
public:
    TupleSource(Eigen::Index n, int arity, std::size_t budget, std::uint64_t seed, std::size_t stream)
        : n_(n), arity_(arity), budget_(budget), engine_(make_engine(seed, stream)) {}

    // Returns (tuples visited, exhaustive).
    std::pair<std::size_t, bool> run(const std::function<void(const Tuple&)>& visit) {
        const double space = space_size();
        if (space <= static_cast<double>(budget_)) {
            std::size_t count = 0;
            for (Eigen::Index k = 0; k < n_; ++k) {
                if (arity_ == 1) {
                    visit({k, 0, 0});
                    ++count;
                    continue;
                }
                for (Eigen::Index m = 0; m < n_; ++m) {
                    if (m == k) continue;
                    if (arity_ == 2) {
                        visit({k, m, 0});
                        ++count;
                        continue;
                    }
                    for (Eigen::Index q = 0; q < n_; ++q) {
                        if (q == k || q == m) continue;
                        visit({k, m, q});
                        ++count;
                    }
                }
            }
            return {count, true};
        }
        for (std::size_t s = 0; s < budget_; ++s) visit(sample());
        return {budget_, false};
    }

private:
    double space_size() const {
        const double n = static_cast<double>(n_);
        if (arity_ == 1) return n;
        if (arity_ == 2) return n * (n - 1);
        return n * (n - 1) * (n - 2);
    }

    Tuple sample() {
        std::uniform_int_distribution<Eigen::Index> pick_k(0, n_ - 1);
        Tuple t{pick_k(engine_), 0, 0};
        if (arity_ >= 2) {
            std::uniform_int_distribution<Eigen::Index> pick_m(0, n_ - 2);
            t.m = pick_m(engine_);
            if (t.m >= t.k) ++t.m;
        }
        if (arity_ == 3) {
            std::uniform_int_distribution<Eigen::Index> pick_n(0, n_ - 3);
            t.n = pick_n(engine_);
            const Eigen::Index lo = std::min(t.k, t.m);
            const Eigen::Index hi = std::max(t.k, t.m);
            if (t.n >= lo) ++t.n;
            if (t.n >= hi) ++t.n;
        }
        return t;
    }

    Eigen::Index n_;
    int arity_;
    std::size_t budget_;
    std::mt19937_64 engine_;
};

}  // namespace

std::string label(CovarianceStat stat) {
    static const std::array<const char*, kCovarianceStatCount> labels = {
        "|Cov(X_k,X_k)|",     "|Cov(X_k,X_m)|",       "|Cov(X_k^2,X_k)|",   "|Cov(X_kX_m,X_k)|",
        "|Cov(X_k^2,X_m)|",   "|Cov(X_kX_m,X_n)|",    "|Cov(X_k^2,X_k^2)|", "|Cov(X_k^2,X_kX_m)|",
        "|Cov(X_k^2,X_m^2)|", "|Cov(X_k^2,X_mX_n)|"};
    return labels[static_cast<std::size_t>(stat)];
}

bool CovarianceReport::any_violation() const {
    return std::any_of(ratios.begin(), ratios.end(), [](const ConditionRatio& r) { return r.violated; });
}

bool CovarianceReport::violated(Condition c) const {
    return std::any_of(ratios.begin(), ratios.end(),
                       [c](const ConditionRatio& r) { return r.condition == c && r.violated; });
}

double CovarianceReport::mean_ratio(Condition c) const {
    double worst = 0.0;
    for (const auto& r : ratios)
        if (r.condition == c) worst = std::max(worst, r.mean_ratio);
    return worst;
}

double CovarianceReport::max_ratio(Condition c) const {
    double worst = 0.0;
    for (const auto& r : ratios)
        if (r.condition == c) worst = std::max(worst, r.max_ratio);
    return worst;
}

CovarianceReport covariance_report(const ObservationWindow& obs, const CovarianceOptions& options) {
    if (obs.rounds() < 2) throw ValidationError("covariance diagnostics need at least 2 rounds");
    if (options.budget == 0) throw ValidationError("tuple budget must be positive");

    const Eigen::Index n = obs.senders();
    const Eigen::ArrayXXd x = obs.inputs().array();
    const Eigen::ArrayXXd x2 = x.square();

    // Self terms per sender, always exhaustive: the ratios need them for any k.
    Eigen::ArrayXd var(n), sq_k(n), sq_sq(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        var(k) = cov(x.col(k), x.col(k));
        sq_k(k) = cov(x2.col(k), x.col(k));
        sq_sq(k) = cov(x2.col(k), x2.col(k));
    }

    CovarianceReport report;
    report.budget = options.budget;
    report.seed = options.seed;
    report.triples_skipped = n < 3;

    auto set_self = [&](CovarianceStat s, const Eigen::ArrayXd& values) {
        auto& v = report.values[static_cast<std::size_t>(s)];
        v.mean_abs = values.abs().mean();
        v.tuples = static_cast<std::size_t>(n);
        v.exhaustive = true;
    };
    set_self(CovarianceStat::VarK, var);
    set_self(CovarianceStat::CovSqK_K, sq_k);
    set_self(CovarianceStat::CovSqK_SqK, sq_sq);

    struct CrossSpec {
        CovarianceStat stat;
        int arity;
        Condition condition;
        CovarianceStat self;
        const Eigen::ArrayXd* self_values;
        std::function<double(const Tuple&)> eval;
        // Value the statistic takes when the senders are independent; the
        // condition ratio measures the excess over it. Null means zero.
        std::function<double(const Tuple&)> independent = nullptr;
    };
    const Eigen::ArrayXd mean = x.colwise().mean().transpose();
    const std::vector<CrossSpec> crosses = {
        {CovarianceStat::CovKM, 2, Condition::Covariance, CovarianceStat::VarK, &var,
         [&](const Tuple& t) { return cov(x.col(t.k), x.col(t.m)); }},
        {CovarianceStat::CovKM_K, 2, Condition::ThirdOrder, CovarianceStat::CovSqK_K, &sq_k,
         [&](const Tuple& t) { return cov(x.col(t.k) * x.col(t.m), x.col(t.k)); },
         [&](const Tuple& t) { return mean(t.m) * var(t.k); }},
        {CovarianceStat::CovSqK_M, 2, Condition::ThirdOrder, CovarianceStat::CovSqK_K, &sq_k,
         [&](const Tuple& t) { return cov(x2.col(t.k), x.col(t.m)); }},
        {CovarianceStat::CovKM_N, 3, Condition::ThirdOrder, CovarianceStat::CovSqK_K, &sq_k,
         [&](const Tuple& t) { return cov(x.col(t.k) * x.col(t.m), x.col(t.n)); }},
        {CovarianceStat::CovSqK_KM, 2, Condition::FourthOrder, CovarianceStat::CovSqK_SqK, &sq_sq,
         [&](const Tuple& t) { return cov(x2.col(t.k), x.col(t.k) * x.col(t.m)); },
         [&](const Tuple& t) { return mean(t.m) * sq_k(t.k); }},
        {CovarianceStat::CovSqK_SqM, 2, Condition::FourthOrder, CovarianceStat::CovSqK_SqK, &sq_sq,
         [&](const Tuple& t) { return cov(x2.col(t.k), x2.col(t.m)); }},
        {CovarianceStat::CovSqK_MN, 3, Condition::FourthOrder, CovarianceStat::CovSqK_SqK, &sq_sq,
         [&](const Tuple& t) { return cov(x2.col(t.k), x.col(t.m) * x.col(t.n)); }},
    };

    for (const auto& spec : crosses) {
        auto& value = report.values[static_cast<std::size_t>(spec.stat)];
        if (n < spec.arity) {
            value.available = false;
            value.mean_abs = kNaN;
            continue;
        }
        double sum = 0.0;
        double excess_sum = 0.0;
        double worst = 0.0;
        TupleSource source(n, spec.arity, options.budget, options.seed, static_cast<std::size_t>(spec.stat));
        auto [count, exhaustive] = source.run([&](const Tuple& t) {
            const double c = spec.eval(t);
            const double excess = spec.independent ? c - spec.independent(t) : c;
            sum += std::abs(c);
            excess_sum += std::abs(excess);
            worst = std::max(worst, tuple_ratio(excess, (*spec.self_values)(t.k)));
        });
        value.mean_abs = sum / static_cast<double>(count);
        value.tuples = count;
        value.exhaustive = exhaustive;

        ConditionRatio ratio{spec.condition, spec.stat, spec.self};
        const double self_mean = report[spec.self].mean_abs;
        ratio.mean_ratio = tuple_ratio(excess_sum / static_cast<double>(count), self_mean);
        ratio.max_ratio = worst;
        ratio.violated = ratio.mean_ratio > options.mean_ratio_limit || ratio.max_ratio > options.max_ratio_limit;
        report.ratios.push_back(ratio);
    }
    return report;
}

std::size_t InputHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

InputHistogram input_histogram(const ObservationWindow& obs) {
    InputHistogram h;
    const auto& u = obs.inputs();
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        for (Eigen::Index i = 0; i < u.cols(); ++i) {
            const auto v = static_cast<std::size_t>(u(r, i));
            ++h.counts[std::min(v, InputHistogram::kBins)];
        }
    }
    return h;
}

std::array<double, InputHistogram::kBins + 1> theoretical_input_pmf(InputModel model, double param, std::size_t t) {
    std::array<double, InputHistogram::kBins + 1> pmf{};
    constexpr std::size_t bins = InputHistogram::kBins;
    if (model == InputModel::Poisson) {
        if (!(param >= 0.0) || !std::isfinite(param)) throw ValidationError("Poisson rate must be non-negative");
        for (std::size_t k = 0; k < bins; ++k) {
            const double kd = static_cast<double>(k);
            pmf[k] = param == 0.0 ? (k == 0 ? 1.0 : 0.0)
                                  : std::exp(kd * std::log(param) - param - std::lgamma(kd + 1.0));
        }
    } else {
        if (!(param >= 0.0 && param <= 1.0)) throw ValidationError("binomial q must lie in [0, 1]");
        const double td = static_cast<double>(t);
        for (std::size_t k = 0; k < bins; ++k) {
            if (k > t) break;
            const double kd = static_cast<double>(k);
            if (param == 0.0) {
                pmf[k] = k == 0 ? 1.0 : 0.0;
            } else if (param == 1.0) {
                pmf[k] = k == t ? 1.0 : 0.0;
            } else {
                pmf[k] = std::exp(std::lgamma(td + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(td - kd + 1.0) +
                                  kd * std::log(param) + (td - kd) * std::log1p(-param));
            }
        }
    }
    double head = 0.0;
    for (std::size_t k = 0; k < bins; ++k) head += pmf[k];
    pmf[bins] = std::max(0.0, 1.0 - head);
    return pmf;
}

std::array<double, InputHistogram::kBins + 1> fitted_input_pmf(const ObservationWindow& obs, InputModel model) {
    std::array<double, InputHistogram::kBins + 1> mix{};
    const Eigen::VectorXd mean = obs.inputs().colwise().mean().transpose();
    const double per_round = obs.inputs().sum() / static_cast<double>(obs.rounds());
    const auto t = static_cast<std::size_t>(std::llround(per_round));
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        const auto pmf = model == InputModel::Poisson
                             ? theoretical_input_pmf(InputModel::Poisson, mean(i))
                             : theoretical_input_pmf(InputModel::MultinomialThreshold,
                                                     t == 0 ? 0.0 : std::min(1.0, mean(i) / static_cast<double>(t)), t);
        for (std::size_t b = 0; b < mix.size(); ++b) mix[b] += pmf[b];
    }
    for (auto& v : mix) v /= static_cast<double>(mean.size());
    return mix;
}

RecipientSpread recipient_spread(const Trace& trace, const std::vector<RoundSpan>& rounds) {
    RecipientSpread out;
    std::array<double, 5> sums{};
    const auto& events = trace.events();

    std::vector<std::size_t> sent(trace.senders(), 0);
    std::vector<std::vector<ReceiverId>> seen(trace.senders());
    for (const auto& span : rounds) {
        if (span.end > events.size() || span.begin > span.end) throw ValidationError("round span out of range");
        std::vector<SenderId> active;
        for (std::size_t e = span.begin; e < span.end; ++e) {
            const auto& ev = events[e];
            if (sent[ev.sender]++ == 0) active.push_back(ev.sender);
            auto& list = seen[ev.sender];
            if (std::find(list.begin(), list.end(), ev.receiver) == list.end()) list.push_back(ev.receiver);
        }
        for (SenderId s : active) {
            const std::size_t x = sent[s];
            if (x >= 2) {
                const std::size_t bin = std::min<std::size_t>(x, 6) - 2;
                sums[bin] += static_cast<double>(seen[s].size());
                ++out.samples[bin];
            }
            sent[s] = 0;
            seen[s].clear();
        }
    }
    for (std::size_t b = 0; b < 5; ++b) {
        out.average[b] = out.samples[b] ? sums[b] / static_cast<double>(out.samples[b]) : kNaN;
    }

    std::vector<std::unordered_set<ReceiverId>> contacts(trace.senders());
    for (const auto& ev : events) contacts[ev.sender].insert(ev.receiver);
    std::size_t total = 0;
    std::size_t active_senders = 0;
    for (const auto& c : contacts) {
        if (c.empty()) continue;
        total += c.size();
        ++active_senders;
    }
    out.average_contacts = active_senders ? static_cast<double>(total) / static_cast<double>(active_senders) : 0.0;
    return out;
}

namespace {

// Indices whose score is at least the score ranked ceil(fraction * N)-th.
std::vector<bool> top_fraction(const Eigen::VectorXd& score, double fraction) {
    const auto n = static_cast<std::size_t>(score.size());
    std::vector<double> sorted(score.data(), score.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
    const double cut = sorted[std::min(keep, n) - 1];
    std::vector<bool> pass(n);
    for (std::size_t i = 0; i < n; ++i) pass[i] = score(static_cast<Eigen::Index>(i)) >= cut;
    return pass;
}

}  // namespace

UserSelection select_evaluation_users(const ObservationWindow& obs, Eigen::Index rho_max) {
    if (rho_max < 1 || rho_max > obs.rounds()) throw ValidationError("rho_max out of range");
    const Eigen::Index n = obs.senders();
    const auto u = obs.inputs().topRows(rho_max);

    Eigen::VectorXd activity = u.colwise().sum().transpose();
    Eigen::VectorXd span = Eigen::VectorXd::Constant(n, -1.0);
    std::vector<Eigen::Index> first(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index lo = -1, hi = -1;
        for (Eigen::Index r = 0; r < rho_max; ++r) {
            if (u(r, i) > 0.0) {
                if (lo < 0) lo = r;
                hi = r;
            }
        }
        first[static_cast<std::size_t>(i)] = lo;
        if (lo >= 0) span(i) = static_cast<double>(hi - lo);
    }

    const auto active = top_fraction(activity, 0.4);
    const auto lasting = top_fraction(span, 0.4);
    const double early_limit = 0.3 * static_cast<double>(rho_max);

    UserSelection sel;
    std::vector<Eigen::Index> early;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto f = first[static_cast<std::size_t>(i)];
        const bool is_early = f >= 0 && static_cast<double>(f) < early_limit;
        if (is_early) early.push_back(i);
        if (is_early && active[static_cast<std::size_t>(i)] && lasting[static_cast<std::size_t>(i)]) {
            sel.users.push_back(i);
        }
    }
    if (sel.users.empty()) {
        sel.users = std::move(early);
        sel.fallback = true;
    }
    return sel;
}

void write_covariance_csv(std::ostream& out, const CovarianceReport& report) {
    out << "statistic,mean_abs,tuples,exhaustive\n";
    for (std::size_t s = 0; s < kCovarianceStatCount; ++s) {
        const auto& v = report.values[s];
        out << '"' << label(static_cast<CovarianceStat>(s)) << "\"," << v.mean_abs << ',' << v.tuples << ','
            << (v.exhaustive ? 1 : 0) << '\n';
    }
    out << "\ncross,self,mean_ratio,max_ratio,violated\n";
    for (const auto& r : report.ratios) {
        out << '"' << label(r.cross) << "\",\"" << label(r.self) << "\"," << r.mean_ratio << ',' << r.max_ratio << ','
            << (r.violated ? 1 : 0) << '\n';
    }
}

void write_histogram_csv(std::ostream& out, const InputHistogram& histogram,
                         const std::array<double, InputHistogram::kBins + 1>& pmf) {
    out << "value,count,pmf_model\n";
    for (std::size_t b = 0; b <= InputHistogram::kBins; ++b) {
        if (b == InputHistogram::kBins) {
            out << ">=" << InputHistogram::kBins;
        } else {
            out << b;
        }
        out << ',' << histogram.counts[b] << ',' << pmf[b] << '\n';
    }
}

void write_recipient_spread_csv(std::ostream& out, const RecipientSpread& spread) {
    out << "messages,avg_recipients,samples\n";
    for (std::size_t b = 0; b < 5; ++b) {
        out << RecipientSpread::kBinLabels[b] << ',' << spread.average[b] << ',' << spread.samples[b] << '\n';
    }
    out << "contacts," << spread.average_contacts << ",\n";
}

}  // namespace mixscope
