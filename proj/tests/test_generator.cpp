#include "doctest.h"

#include <cmath>
#include "mixscope/error.hpp"
#include "mixscope/generator.hpp"
#include "mixscope/random.hpp"
#include "approx.hpp"

using namespace mixscope;

namespace {

PopulationSpec small_population(OutputModel model, std::uint64_t seed) {
    PopulationSpec spec;
    Eigen::MatrixXd p(3, 4);
    p << 0.5, 0.5, 0, 0, 0.1, 0.2, 0.3, 0.4, 0, 0, 0, 1;
    spec.profile = {p, ProfileKind::GroundTruth};
    spec.inputs = PoissonInputs{Eigen::Vector3d(2, 5, 3)};
    spec.output_model = model;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using C = Philox4x32::Counter;
    CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("CounterStream uniforms look uniform") {
    CounterStream s(42, 3, 7, StreamPurpose::Sampling);
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sq += u * u;
    }
    CHECK(sum / n == rel(0.5, 0.01));
    CHECK(sq / n - (sum / n) * (sum / n) == rel(1.0 / 12, 0.02));
}

TEST_CASE("generation is deterministic in the seed and independent of threads") {
    const auto spec = random_poisson_population(10, 6, 1.0, 4.0, OutputModel::Multinomial, 123);
    const auto a = generate_rounds(spec, 800, 1);
    const auto b = generate_rounds(spec, 800, 3);
    CHECK(a.inputs() == b.inputs());
    CHECK(a.outputs() == b.outputs());
    auto other = spec;
    other.seed = 124;
    CHECK(generate_rounds(other, 800).inputs() != a.inputs());
}

TEST_CASE("generated rounds conserve messages and skip empty attempts") {
    PopulationSpec spec = small_population(OutputModel::Multinomial, 3);
    spec.inputs = PoissonInputs{Eigen::Vector3d(0.1, 0.2, 0.1)};
    const auto obs = generate_rounds(spec, 300);
    CHECK(obs.rounds() == 300);
    CHECK((obs.inputs().rowwise().sum().array() > 0).all());
    CHECK(obs.inputs().rowwise().sum() == obs.outputs().rowwise().sum());
}

TEST_CASE("basis-vector profile sends everything to one receiver") {
    auto spec = small_population(OutputModel::Multinomial, 8);
    const auto draws = generate_round_draws(spec, 200);
    for (const auto& d : draws) {
        for (const auto& c : d.contributions) {
            if (c.sender == 2) CHECK(c.receiver == 3);
            if (c.sender == 0) CHECK(c.receiver < 2);
        }
    }
}

TEST_CASE("max-variance output never splits a sender's round") {
    const auto spec = random_poisson_population(6, 5, 2.0, 8.0, OutputModel::MaxVariance, 19);
    for (const auto& d : generate_round_draws(spec, 500)) {
        std::vector<int> seen(6, 0);
        for (const auto& c : d.contributions) {
            ++seen[c.sender];
            CHECK(c.count == static_cast<std::uint32_t>(d.inputs(c.sender)));
        }
        for (int s : seen) CHECK(s <= 1);
    }
}

TEST_CASE("output model does not change the input draws") {
    const auto a = generate_rounds(small_population(OutputModel::Multinomial, 55), 400);
    const auto b = generate_rounds(small_population(OutputModel::MaxVariance, 55), 400);
    CHECK(a.inputs() == b.inputs());
    CHECK(a.outputs() != b.outputs());
}

TEST_CASE("empirical routing frequencies converge to the profile") {
    for (auto model : {OutputModel::Multinomial, OutputModel::MaxVariance}) {
        const auto spec = small_population(model, 77);
        Eigen::MatrixXd tally = Eigen::MatrixXd::Zero(3, 4);
        for (const auto& d : generate_round_draws(spec, 60000))
            for (const auto& c : d.contributions) tally(c.sender, c.receiver) += c.count;
        for (Eigen::Index i = 0; i < 3; ++i) {
            const Eigen::RowVectorXd freq = tally.row(i) / tally.row(i).sum();
            CHECK((freq - spec.profile.values.row(i)).cwiseAbs().maxCoeff() < 0.01);
        }
    }
}

TEST_CASE("exact moments") {
    PopulationSpec spec = small_population(OutputModel::Multinomial, 0);
    spec.inputs = PoissonInputs{Eigen::Vector3d(2, 5, 3)};
    auto m = exact_moments(spec);
    CHECK(m.m4(0) == rel(14.0));
    CHECK(m.m3(1) == 5.0);

    MultinomialThresholdInputs thr;
    thr.t = 10;
    thr.probabilities = Eigen::Vector3d(0.5, 0.3, 0.2);
    spec.inputs = thr;
    m = exact_moments(spec);
    CHECK(m.mean(0) == rel(5.0));
    CHECK(m.m2(0) == rel(2.5));
    CHECK(std::abs(m.m3(0)) < 1e-15);
    // Binomial(10, 0.5) fourth central moment by direct summation over the pmf.
    double direct = 0.0, pmf = std::pow(0.5, 10);
    for (int k = 0; k <= 10; ++k) {
        direct += pmf * std::pow(k - 5.0, 4);
        pmf *= (10.0 - k) / (k + 1.0);
    }
    CHECK(m.m4(0) == rel(direct, 1e-12));
}

TEST_CASE("sample moments agree with exact moments within 3 standard errors") {
    for (int kind = 0; kind < 2; ++kind) {
        PopulationSpec spec = small_population(OutputModel::Multinomial, 31 + static_cast<std::uint64_t>(kind));
        if (kind == 1) {
            MultinomialThresholdInputs thr;
            thr.t = 12;
            thr.probabilities = Eigen::Vector3d(0.2, 0.5, 0.3);
            spec.inputs = thr;
        }
        const Eigen::Index rho = 20000;
        const auto obs = generate_rounds(spec, static_cast<std::size_t>(rho));
        const auto exact = exact_moments(spec);
        for (Eigen::Index i = 0; i < 3; ++i) {
            const Eigen::ArrayXd x = obs.inputs().col(i).array();
            const double mean = x.mean();
            const double se_mean = std::sqrt(exact.m2(i) / static_cast<double>(rho));
            CHECK(std::abs(mean - exact.mean(i)) < 3 * se_mean);
            const double var = (x - mean).square().mean();
            const double se_var = std::sqrt((exact.m4(i) - exact.m2(i) * exact.m2(i)) / static_cast<double>(rho));
            CHECK(std::abs(var - exact.m2(i)) < 3 * se_var);
        }
    }
}

TEST_CASE("threshold inputs always sum to t") {
    PopulationSpec spec = small_population(OutputModel::Multinomial, 4);
    MultinomialThresholdInputs thr;
    thr.t = 7;
    thr.probabilities = Eigen::Vector3d(0.0, 0.9, 0.1);
    spec.inputs = thr;
    const auto obs = generate_rounds(spec, 500);
    CHECK((obs.inputs().rowwise().sum().array() == 7.0).all());
    CHECK(obs.inputs().col(0).sum() == 0.0);
}

TEST_CASE("population validation") {
    auto spec = small_population(OutputModel::Multinomial, 1);
    spec.inputs = PoissonInputs{Eigen::Vector3d(1, 0, 1)};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.inputs = PoissonInputs{Eigen::Vector2d(1, 1)};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = small_population(OutputModel::Multinomial, 1);
    spec.profile.values(0, 0) = 0.7;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("synthesized trace replays as the generated rounds") {
    const auto spec = small_population(OutputModel::Multinomial, 9);
    const auto obs = generate_rounds(spec, 150);
    const auto trace = synthesize_trace(spec, 150, 10.0);
    const auto replay = anonymize(trace, MixConfig::timed(10.0));
    REQUIRE(replay.rounds() == 150);
    // Interning is by first appearance in time; map columns back by name.
    for (std::size_t k = 0; k < trace.senders(); ++k) {
        const auto orig = std::stoi(trace.sender_names()[k].substr(1));
        CHECK(replay.inputs().col(static_cast<Eigen::Index>(k)) == obs.inputs().col(orig));
    }
    for (std::size_t j = 0; j < trace.receivers(); ++j) {
        const auto orig = std::stoi(trace.receiver_names()[j].substr(1));
        CHECK(replay.outputs().col(static_cast<Eigen::Index>(j)) == obs.outputs().col(orig));
    }
}

TEST_CASE("population JSON config") {
    const auto config = nlohmann::json::parse(R"({
        "profile": [[0.5, 0.5], [1.0, 0.0]],
        "input": {"kind": "poisson", "rates": [2.0, 3.5]},
        "output_model": "maxvariance",
        "seed": 17,
        "senders": ["alice", "bob"]
    })");
    const auto spec = population_from_json(config);
    CHECK(spec.seed == 17);
    CHECK(spec.output_model == OutputModel::MaxVariance);
    CHECK(std::get<PoissonInputs>(spec.inputs).rates(1) == 3.5);
    CHECK(spec.sender_names[1] == "bob");

    const auto again = population_from_json(population_to_json(spec));
    CHECK(again.profile.values == spec.profile.values);
    CHECK(again.seed == spec.seed);

    const auto random = population_from_json(nlohmann::json::parse(
        R"({"random_profile": {"senders": 5, "receivers": 3}, "input": {"kind": "poisson", "rate_range": [1, 2]}, "seed": 3})"));
    CHECK(random.senders() == 5);
    CHECK(random.profile.values == random_poisson_population(5, 3, 1, 2, OutputModel::Multinomial, 3).profile.values);

    auto bad = config;
    bad["typo"] = 1;
    CHECK_THROWS_AS(population_from_json(bad), ValidationError);
    bad = config;
    bad["input"]["kind"] = "uniform";
    CHECK_THROWS_AS(population_from_json(bad), ValidationError);
    bad = config;
    bad["output_model"] = "gaussian";
    CHECK_THROWS_AS(population_from_json(bad), ValidationError);
}
