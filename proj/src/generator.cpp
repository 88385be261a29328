#include "mixscope/generator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mixscope/attack.hpp"
#include "mixscope/error.hpp"
#include "mixscope/parallel.hpp"
#include "mixscope/random.hpp"

namespace mixscope {

namespace {

constexpr std::uint32_t kWholeRoundEntity = 0xFFFFFFFFu;

// Inverse-CDF categorical sampler over one profile row.
class Categorical {
public:
    explicit Categorical(const Eigen::RowVectorXd& probabilities) : cumulative_(probabilities.size()) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < probabilities.size(); ++j) {
            acc += probabilities(j);
            cumulative_[static_cast<std::size_t>(j)] = acc;
        }
    }

    std::uint32_t operator()(CounterStream& stream) const {
        const double target = stream.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        if (it == cumulative_.end()) --it;
        return static_cast<std::uint32_t>(it - cumulative_.begin());
    }

private:
    std::vector<double> cumulative_;
};

Eigen::VectorXd draw_inputs(const PopulationSpec& spec, std::uint64_t attempt) {
    const Eigen::Index n = spec.senders();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (const auto* poisson = std::get_if<PoissonInputs>(&spec.inputs)) {
        for (Eigen::Index k = 0; k < n; ++k) {
            CounterStream stream(spec.seed, static_cast<std::uint32_t>(k), attempt, StreamPurpose::Input);
            std::poisson_distribution<long long> dist(poisson->rates(k));
            x(k) = static_cast<double>(dist(stream));
        }
        return x;
    }
    const auto& multi = std::get<MultinomialThresholdInputs>(spec.inputs);
    CounterStream stream(spec.seed, kWholeRoundEntity, attempt, StreamPurpose::Input);
    long long remaining = static_cast<long long>(multi.t);
    double mass = 1.0;
    for (Eigen::Index k = 0; k < n && remaining > 0; ++k) {
        const double q = multi.probabilities(k);
        if (k == n - 1 || q >= mass) {
            x(k) = static_cast<double>(remaining);
            break;
        }
        std::binomial_distribution<long long> dist(remaining, std::clamp(q / mass, 0.0, 1.0));
        const long long draw = dist(stream);
        x(k) = static_cast<double>(draw);
        remaining -= draw;
        mass -= q;
    }
    return x;
}

std::string default_name(char prefix, Eigen::Index i) { return std::string(1, prefix) + std::to_string(i); }

}  // namespace

std::string to_string(OutputModel model) {
    return model == OutputModel::Multinomial ? "multinomial" : "maxvariance";
}

OutputModel output_model_from_string(const std::string& name) {
    if (name == "multinomial") return OutputModel::Multinomial;
    if (name == "maxvariance" || name == "max_variance") return OutputModel::MaxVariance;
    throw ValidationError("unknown output model '" + name + "' (expected multinomial or maxvariance)");
}

void PopulationSpec::validate() const {
    const Eigen::Index n = senders();
    if (n < 1 || receivers() < 1) throw ValidationError("population needs at least one sender and one receiver");
    profile_stats(profile);  // throws on a non-stochastic row
    if (const auto* poisson = std::get_if<PoissonInputs>(&inputs)) {
        if (poisson->rates.size() != n) throw ValidationError("need one Poisson rate per sender");
        if (!(poisson->rates.array() > 0.0).all() || !poisson->rates.allFinite()) {
            throw ValidationError("Poisson rates must be positive and finite");
        }
    } else {
        const auto& multi = std::get<MultinomialThresholdInputs>(inputs);
        if (multi.t < 1) throw ValidationError("threshold t must be >= 1");
        if (multi.probabilities.size() != n) throw ValidationError("need one sender probability per sender");
        if ((multi.probabilities.array() < 0.0).any() || std::abs(multi.probabilities.sum() - 1.0) > 1e-9) {
            throw ValidationError("sender probabilities must lie on the simplex");
        }
    }
    if (!sender_names.empty() && static_cast<Eigen::Index>(sender_names.size()) != n) {
        throw ValidationError("sender name count does not match the profile");
    }
    if (!receiver_names.empty() && static_cast<Eigen::Index>(receiver_names.size()) != receivers()) {
        throw ValidationError("receiver name count does not match the profile");
    }
}

RoundDraw draw_round(const PopulationSpec& spec, std::uint64_t attempt) {
    RoundDraw draw;
    draw.inputs = draw_inputs(spec, attempt);
    draw.outputs = Eigen::VectorXd::Zero(spec.receivers());
    for (Eigen::Index k = 0; k < spec.senders(); ++k) {
        const auto messages = static_cast<std::uint32_t>(draw.inputs(k));
        if (messages == 0) continue;
        const Categorical pick(spec.profile.values.row(k));
        CounterStream stream(spec.seed, static_cast<std::uint32_t>(k), attempt, StreamPurpose::Output);
        const auto sender = static_cast<std::uint32_t>(k);
        if (spec.output_model == OutputModel::MaxVariance) {
            const auto j = pick(stream);
            draw.outputs(j) += messages;
            draw.contributions.push_back({sender, j, messages});
            continue;
        }
        std::vector<std::uint32_t> tally;
        std::vector<std::uint32_t> hit;
        for (std::uint32_t m = 0; m < messages; ++m) {
            const auto j = pick(stream);
            auto pos = std::find(hit.begin(), hit.end(), j);
            if (pos == hit.end()) {
                hit.push_back(j);
                tally.push_back(1);
            } else {
                ++tally[static_cast<std::size_t>(pos - hit.begin())];
            }
        }
        for (std::size_t h = 0; h < hit.size(); ++h) {
            draw.outputs(hit[h]) += tally[h];
            draw.contributions.push_back({sender, hit[h], tally[h]});
        }
    }
    return draw;
}

std::vector<RoundDraw> generate_round_draws(const PopulationSpec& spec, std::size_t rho, unsigned threads) {
    spec.validate();
    std::vector<RoundDraw> rounds;
    rounds.reserve(rho);
    std::uint64_t next_attempt = 0;
    while (rounds.size() < rho) {
        const std::size_t batch = rho - rounds.size();
        std::vector<RoundDraw> drawn(batch);
        parallel_for(batch, threads, [&](std::size_t b) { drawn[b] = draw_round(spec, next_attempt + b); });
        next_attempt += batch;
        for (auto& d : drawn) {
            if (!d.empty()) rounds.push_back(std::move(d));
        }
    }
    return rounds;
}

ObservationWindow generate_rounds(const PopulationSpec& spec, std::size_t rho, unsigned threads) {
    if (rho < 1) throw ValidationError("rho must be >= 1");
    const auto draws = generate_round_draws(spec, rho, threads);
    Eigen::MatrixXd u(static_cast<Eigen::Index>(rho), spec.senders());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rho), spec.receivers());
    for (std::size_t r = 0; r < rho; ++r) {
        u.row(static_cast<Eigen::Index>(r)) = draws[r].inputs.transpose();
        y.row(static_cast<Eigen::Index>(r)) = draws[r].outputs.transpose();
    }
    return ObservationWindow(std::move(u), std::move(y));
}

Trace synthesize_trace(const PopulationSpec& spec, std::size_t rho, double period, unsigned threads) {
    if (rho < 1) throw ValidationError("rho must be >= 1");
    if (!(period > 0.0)) throw ValidationError("round period must be positive");
    const auto draws = generate_round_draws(spec, rho, threads);
    TraceBuilder builder;
    auto sender_name = [&](std::uint32_t k) {
        return spec.sender_names.empty() ? default_name('s', k) : spec.sender_names[k];
    };
    auto receiver_name = [&](std::uint32_t j) {
        return spec.receiver_names.empty() ? default_name('r', j) : spec.receiver_names[j];
    };
    for (std::size_t r = 0; r < draws.size(); ++r) {
        const double ts = static_cast<double>(r) * period;
        for (const auto& c : draws[r].contributions) {
            const auto s = sender_name(c.sender);
            const auto d = receiver_name(c.receiver);
            for (std::uint32_t m = 0; m < c.count; ++m) builder.add(ts, s, d);
        }
    }
    return std::move(builder).build();
}

InputMoments exact_moments(const PopulationSpec& spec) {
    InputMoments mom;
    if (const auto* poisson = std::get_if<PoissonInputs>(&spec.inputs)) {
        const Eigen::ArrayXd lam = poisson->rates.array();
        mom.mean = lam.matrix();
        mom.m2 = lam.matrix();
        mom.m3 = lam.matrix();
        mom.m4 = (3.0 * lam.square() + lam).matrix();
        return mom;
    }
    const auto& multi = std::get<MultinomialThresholdInputs>(spec.inputs);
    const double t = static_cast<double>(multi.t);
    const Eigen::ArrayXd q = multi.probabilities.array();
    const Eigen::ArrayXd var = t * q * (1.0 - q);
    mom.mean = (t * q).matrix();
    mom.m2 = var.matrix();
    mom.m3 = (var * (1.0 - 2.0 * q)).matrix();
    mom.m4 = (var * (1.0 + 3.0 * (t - 2.0) * q * (1.0 - q))).matrix();
    return mom;
}

PopulationSpec random_poisson_population(Eigen::Index senders, Eigen::Index receivers, double rate_lo,
                                         double rate_hi, OutputModel model, std::uint64_t seed, double alpha) {
    if (senders < 1 || receivers < 1) throw ValidationError("population needs senders and receivers");
    if (!(rate_lo > 0.0) || rate_hi < rate_lo) throw ValidationError("invalid rate range");
    if (!(alpha > 0.0)) throw ValidationError("Dirichlet alpha must be positive");

    PopulationSpec spec;
    spec.profile.values.resize(senders, receivers);
    spec.profile.kind = ProfileKind::GroundTruth;
    Eigen::VectorXd rates(senders);
    for (Eigen::Index k = 0; k < senders; ++k) {
        CounterStream stream(seed, static_cast<std::uint32_t>(k), 0, StreamPurpose::Sampling);
        std::gamma_distribution<double> gamma(alpha, 1.0);
        double total = 0.0;
        for (Eigen::Index j = 0; j < receivers; ++j) {
            const double g = gamma(stream);
            spec.profile.values(k, j) = g;
            total += g;
        }
        if (total <= 0.0) {
            spec.profile.values.row(k).setZero();
            spec.profile.values(k, 0) = 1.0;
        } else {
            spec.profile.values.row(k) /= total;
        }
        rates(k) = rate_lo + (rate_hi - rate_lo) * stream.uniform();
    }
    spec.inputs = PoissonInputs{std::move(rates)};
    spec.output_model = model;
    spec.seed = seed;
    return spec;
}

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError(std::string(what) + " must be an array of numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

}  // namespace

PopulationSpec population_from_json(const nlohmann::json& config, const std::string& base_dir) {
    if (!config.is_object()) throw ValidationError("population config must be a JSON object");
    static const std::vector<std::string> known = {"profile", "profile_file", "random_profile", "input",
                                                   "output_model", "seed", "senders", "receivers"};
    for (const auto& [key, value] : config.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("unknown population config key '" + key + "'");
        }
    }

    PopulationSpec spec;
    spec.seed = config.value("seed", std::uint64_t{0});
    spec.output_model = output_model_from_string(config.value("output_model", std::string("multinomial")));

    const auto& input = config.at("input");
    const std::string kind = input.value("kind", std::string());

    if (config.contains("random_profile")) {
        const auto& rp = config["random_profile"];
        const auto n = rp.at("senders").get<Eigen::Index>();
        const auto m = rp.at("receivers").get<Eigen::Index>();
        if (kind != "poisson" || !input.contains("rate_range")) {
            throw ValidationError("random_profile requires a poisson input with rate_range [lo, hi]");
        }
        const auto range = input.at("rate_range");
        auto rnd = random_poisson_population(n, m, range.at(0).get<double>(), range.at(1).get<double>(),
                                             spec.output_model, spec.seed, rp.value("alpha", 1.0));
        rnd.validate();
        return rnd;
    }

    if (config.contains("profile")) {
        const auto& rows = config["profile"];
        if (!rows.is_array() || rows.empty()) throw ValidationError("profile must be a non-empty array of rows");
        const auto m = static_cast<Eigen::Index>(rows[0].size());
        spec.profile.values.resize(static_cast<Eigen::Index>(rows.size()), m);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto row = vector_from_json(rows[i], "profile row");
            if (row.size() != m) throw ValidationError("profile rows must have equal length");
            spec.profile.values.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
    } else if (config.contains("profile_file")) {
        auto path = std::filesystem::path(config["profile_file"].get<std::string>());
        if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
        std::ifstream in(path);
        if (!in) throw IoError("cannot open profile file '" + path.string() + "'");
        spec.profile = read_profile(in, ProfileKind::GroundTruth);
    } else {
        throw ValidationError("population config needs one of profile, profile_file, random_profile");
    }
    spec.profile.kind = ProfileKind::GroundTruth;

    if (kind == "poisson") {
        spec.inputs = PoissonInputs{vector_from_json(input.at("rates"), "rates")};
    } else if (kind == "multinomial_threshold") {
        MultinomialThresholdInputs multi;
        multi.t = input.at("t").get<std::size_t>();
        multi.probabilities = vector_from_json(input.at("probabilities"), "probabilities");
        spec.inputs = std::move(multi);
    } else {
        throw ValidationError("input.kind must be poisson or multinomial_threshold");
    }
    if (config.contains("senders")) spec.sender_names = config["senders"].get<std::vector<std::string>>();
    if (config.contains("receivers")) spec.receiver_names = config["receivers"].get<std::vector<std::string>>();
    spec.validate();
    return spec;
}

nlohmann::json population_to_json(const PopulationSpec& spec) {
    nlohmann::json out;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < spec.senders(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < spec.receivers(); ++j) row.push_back(spec.profile.values(i, j));
        rows.push_back(std::move(row));
    }
    out["profile"] = std::move(rows);
    if (const auto* poisson = std::get_if<PoissonInputs>(&spec.inputs)) {
        out["input"] = {{"kind", "poisson"},
                        {"rates", std::vector<double>(poisson->rates.data(),
                                                      poisson->rates.data() + poisson->rates.size())}};
    } else {
        const auto& multi = std::get<MultinomialThresholdInputs>(spec.inputs);
        out["input"] = {{"kind", "multinomial_threshold"},
                        {"t", multi.t},
                        {"probabilities", std::vector<double>(multi.probabilities.data(),
                                                              multi.probabilities.data() + multi.probabilities.size())}};
    }
    out["output_model"] = to_string(spec.output_model);
    out["seed"] = spec.seed;
    if (!spec.sender_names.empty()) out["senders"] = spec.sender_names;
    if (!spec.receiver_names.empty()) out["receivers"] = spec.receiver_names;
    return out;
}

}  // namespace mixscope
