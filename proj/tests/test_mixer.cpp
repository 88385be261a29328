#include "doctest.h"

#include <random>
#include <sstream>

#include "mixscope/error.hpp"
#include "mixscope/generator.hpp"
#include "mixscope/mixer.hpp"
#include "approx.hpp"

using namespace mixscope;

namespace {

Trace parse(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

Trace random_trace(std::uint64_t seed, int events) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> s(0, 7), d(0, 5);
    std::exponential_distribution<double> gap(0.01);
    TraceBuilder b;
    double t = 0.0;
    for (int e = 0; e < events; ++e) {
        t += gap(rng);
        b.add(t, "s" + std::to_string(s(rng)), "r" + std::to_string(d(rng)));
    }
    return std::move(b).build();
}

void check_conservation(const ObservationWindow& obs) {
    const Eigen::VectorXd in = obs.inputs().rowwise().sum();
    const Eigen::VectorXd out = obs.outputs().rowwise().sum();
    CHECK(in == out);
}

}  // namespace

TEST_CASE("MixConfig validation") {
    CHECK_THROWS_AS(MixConfig::threshold(0), ValidationError);
    CHECK_THROWS_AS(MixConfig::timed(0.0), ValidationError);
    CHECK_THROWS_AS(MixConfig::timed(-5.0), ValidationError);
    CHECK_THROWS_AS(MixConfig::threshold(3).tau(), ValidationError);
    CHECK(MixConfig::timed(2.5).tau() == 2.5);
}

TEST_CASE("threshold mix drops the trailing partial batch") {
    const auto trace = parse("timestamp,sender,receiver\n0,a,x\n1,b,y\n2,a,x\n");
    const auto obs = anonymize(trace, MixConfig::threshold(2));
    REQUIRE(obs.rounds() == 1);
    CHECK(obs.inputs()(0, 0) == 1);
    CHECK(obs.inputs()(0, 1) == 1);
    CHECK(obs.outputs()(0, 0) == 1);
    CHECK(obs.outputs()(0, 1) == 1);

    const auto s = round_stats(obs);
    CHECK(s.mean_messages == 2.0);
    CHECK(s.rounds == 1);
}

TEST_CASE("threshold larger than the trace is an empty observation") {
    const auto trace = parse("timestamp,sender,receiver\n0,a,x\n");
    CHECK_THROWS_AS(anonymize(trace, MixConfig::threshold(2)), EmptyObservationError);
}

TEST_CASE("timed mix buckets half-open windows from the first event") {
    const auto trace = parse("timestamp,sender,receiver\n600,a,x\n3000,a,y\n4800,b,x\n");
    const auto rounds = partition_rounds(trace, MixConfig::timed(3600));
    REQUIRE(rounds.size() == 2);
    CHECK(rounds[0].size() == 2);
    CHECK(rounds[1].size() == 1);

    SUBCASE("boundary event opens the next window") {
        const auto edge = parse("timestamp,sender,receiver\n0,a,x\n10,a,x\n");
        CHECK(partition_rounds(edge, MixConfig::timed(10)).size() == 2);
    }
    SUBCASE("empty windows are omitted") {
        const auto gap = parse("timestamp,sender,receiver\n0,a,x\n100,a,x\n");
        const auto obs = anonymize(gap, MixConfig::timed(10));
        CHECK(obs.rounds() == 2);
    }
}

TEST_CASE("mix invariants on random traces") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto trace = random_trace(seed, 503);
        const auto counts = trace.sender_counts();

        const auto thr = anonymize(trace, MixConfig::threshold(25));
        check_conservation(thr);
        CHECK(thr.rounds() == 20);
        CHECK((thr.inputs().rowwise().sum().array() == 25.0).all());
        // Column sums equal per-sender counts of the kept prefix (first 500 events).
        std::vector<double> prefix(trace.senders(), 0.0);
        for (std::size_t e = 0; e < 500; ++e) prefix[trace.events()[e].sender] += 1;
        for (std::size_t i = 0; i < trace.senders(); ++i) {
            CHECK(thr.inputs().col(static_cast<Eigen::Index>(i)).sum() == prefix[i]);
        }

        const auto timed = anonymize(trace, MixConfig::timed(500.0));
        check_conservation(timed);
        CHECK(timed.inputs().sum() == static_cast<double>(trace.size()));
        for (std::size_t i = 0; i < trace.senders(); ++i) {
            CHECK(timed.inputs().col(static_cast<Eigen::Index>(i)).sum() == static_cast<double>(counts[i]));
        }
    }
}

TEST_CASE("ObservationWindow validation") {
    Eigen::MatrixXd u(2, 1), y(2, 2);
    u << 2, 3;
    y << 2, 0, 3, 0;
    CHECK_NOTHROW(ObservationWindow(u, y));

    Eigen::MatrixXd bad_y = y;
    bad_y(1, 1) = 1;
    CHECK_THROWS_AS(ObservationWindow(u, bad_y), ValidationError);

    Eigen::MatrixXd zero_u = u, zero_y = y;
    zero_u(1, 0) = 0;
    zero_y.row(1).setZero();
    CHECK_THROWS_AS(ObservationWindow(zero_u, zero_y), ValidationError);

    Eigen::MatrixXd frac = u;
    frac(0, 0) = 1.5;
    CHECK_THROWS_AS(ObservationWindow(frac, y), ValidationError);
    CHECK_THROWS_AS(ObservationWindow(Eigen::MatrixXd(0, 1), Eigen::MatrixXd(0, 2)), EmptyObservationError);
    CHECK_THROWS_AS(ObservationWindow(u, Eigen::MatrixXd::Ones(3, 2)), ShapeError);
}

TEST_CASE("count matrix CSV round trip and errors") {
    Eigen::MatrixXd m(2, 3);
    m << 1, 0, 12, 7, 3, 0;
    std::ostringstream out;
    write_count_matrix(out, m);
    CHECK(out.str() == "1,0,12\n7,3,0\n");
    std::istringstream in(out.str());
    CHECK(read_count_matrix(in) == m);

    std::istringstream ragged("1,2\n3\n");
    CHECK_THROWS_AS(read_count_matrix(ragged), ParseError);
    std::istringstream neg("1,-2\n");
    CHECK_THROWS_AS(read_count_matrix(neg), ParseError);
    std::istringstream junk("1,x\n");
    CHECK_THROWS_AS(read_count_matrix(junk), ParseError);
}

TEST_CASE("synthetic Poisson trace: timed mean per round near total rate") {
    auto spec = random_poisson_population(12, 6, 2.0, 6.0, OutputModel::Multinomial, 17);
    const auto& rates = std::get<PoissonInputs>(spec.inputs).rates;
    const auto trace = synthesize_trace(spec, 4000, 60.0);
    const auto obs = anonymize(trace, MixConfig::timed(60.0));
    CHECK(obs.rounds() == 4000);
    const auto s = round_stats(obs);
    CHECK(s.mean_messages == rel(rates.sum(), 0.05));
}
