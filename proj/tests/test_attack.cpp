#include "doctest.h"

#include <Eigen/LU>
#include <random>
#include <sstream>

#include "mixscope/attack.hpp"
#include "mixscope/error.hpp"
#include "mixscope/generator.hpp"
#include "approx.hpp"
#include "oracles.hpp"

using namespace mixscope;

namespace {

oracle::Matrix to_rows(const Eigen::MatrixXd& m) {
    oracle::Matrix rows(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
    return rows;
}

ObservationWindow random_window(std::uint64_t seed, Eigen::Index n, Eigen::Index m, Eigen::Index rho) {
    auto spec = random_poisson_population(n, m, 1.0, 6.0, OutputModel::Multinomial, seed);
    return generate_rounds(spec, static_cast<std::size_t>(rho));
}

}  // namespace

TEST_CASE("LSDA exact fit for one sender") {
    Eigen::MatrixXd u(2, 1), y(2, 2);
    u << 2, 3;
    y << 2, 0, 3, 0;
    const ObservationWindow obs(u, y);
    const auto res = lsda(obs);
    CHECK(res.estimate.kind == ProfileKind::Estimate);
    CHECK(res.estimate.values(0, 0) == rel(1.0));
    CHECK(std::abs(res.estimate.values(0, 1)) < 1e-14);
    CHECK_FALSE(res.rank_deficient);

    CHECK(lsda_column(obs, 0)(0) == rel(1.0));
    CHECK(std::abs(lsda_column(obs, 1)(0)) < 1e-14);
    CHECK_THROWS_AS(lsda_column(obs, 2), ValidationError);
    CHECK_THROWS_AS(lsda_column(obs, -1), ValidationError);
}

TEST_CASE("LSDA decouples when each round has one active sender") {
    Eigen::MatrixXd u(3, 3), y(3, 2);
    u << 4, 0, 0, 0, 2, 0, 0, 0, 5;
    y << 3, 1, 0, 2, 5, 0;
    const auto res = lsda(ObservationWindow(u, y));
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            CHECK(std::abs(res.estimate.values(i, j) - y(i, j) / u(i, i)) <= 1e-14);
        }
    }
}

TEST_CASE("LSDA matches an independent Householder least-squares oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto obs = random_window(seed, 3, 2, 50);
        const auto res = lsda(obs);
        const auto expected = oracle::householder_least_squares(to_rows(obs.inputs()), to_rows(obs.outputs()));
        for (Eigen::Index i = 0; i < 3; ++i)
            for (Eigen::Index j = 0; j < 2; ++j)
                CHECK(std::abs(res.estimate.values(i, j) - expected[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) <
                      1e-9);
    }
}

TEST_CASE("LSDA agrees with the normal equations") {
    const auto obs = random_window(21, 6, 4, 300);
    const Eigen::MatrixXd& u = obs.inputs();
    const Eigen::MatrixXd normal = (u.transpose() * u).inverse() * u.transpose() * obs.outputs();
    CHECK((lsda(obs).estimate.values - normal).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("LSDA rows of a well-posed estimate sum to one") {
    const auto res = lsda(random_window(8, 7, 5, 400));
    for (Eigen::Index i = 0; i < res.estimate.senders(); ++i) CHECK(std::abs(res.estimate.values.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("LSDA column decoupling and thread independence") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const auto obs = random_window(seed, 5, 300, 120);
        const LsdaSolver solver(obs);
        const auto full = solver.solve(1);
        for (Eigen::Index j = 0; j < obs.receivers(); ++j) {
            CHECK((solver.solve_column(j) - full.estimate.values.col(j)).cwiseAbs().maxCoeff() < 1e-10);
        }
        const auto threaded = solver.solve(4);
        CHECK(threaded.estimate.values == full.estimate.values);
    }
}

TEST_CASE("LSDA is scale equivariant") {
    const auto obs = random_window(4, 5, 3, 200);
    const ObservationWindow scaled(obs.inputs() * 3.0, obs.outputs() * 3.0);
    CHECK((lsda(obs).estimate.values - lsda(scaled).estimate.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LSDA flags a singular system and returns the minimum-norm solution") {
    // Sender 1 never sends: column of zeros.
    Eigen::MatrixXd u(3, 2), y(3, 2);
    u << 1, 0, 2, 0, 3, 0;
    y << 1, 0, 1, 1, 2, 1;
    const auto res = lsda(ObservationWindow(u, y));
    CHECK(res.rank_deficient);
    CHECK(res.rank == 1);
    CHECK(std::isinf(res.condition_number));
    CHECK(res.estimate.values.row(1).norm() < 1e-12);
    // Sender 0's row is the ordinary one-variable fit.
    CHECK(res.estimate.values(0, 0) == rel((1 + 2 + 6) / 14.0));
}

TEST_CASE("condition number of U^T U") {
    Eigen::MatrixXd u(2, 2);
    u << 2, 0, 0, 1;
    CHECK(gram_condition_number(u) == rel(4.0));
}

TEST_CASE("empirical_mse") {
    ProfileMatrix truth{Eigen::MatrixXd(1, 2), ProfileKind::GroundTruth};
    truth.values << 1, 0;
    ProfileMatrix est{Eigen::MatrixXd(1, 2), ProfileKind::Estimate};
    est.values << 0.9, 0.1;
    CHECK(empirical_mse(truth, est)(0) == rel(0.02));
    CHECK(empirical_mse(truth, truth)(0) == 0.0);
    ProfileMatrix wrong{Eigen::MatrixXd::Zero(2, 2), ProfileKind::Estimate};
    CHECK_THROWS_AS(empirical_mse(truth, wrong), ShapeError);
}

TEST_CASE("mean MSE over synthetic trials matches a loop recomputation") {
    auto spec = random_poisson_population(4, 3, 2.0, 5.0, OutputModel::Multinomial, 99);
    double lib = 0.0, loop = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        spec.seed = 1000 + static_cast<std::uint64_t>(trial);
        const auto est = lsda(generate_rounds(spec, 60)).estimate;
        lib += empirical_mse(spec.profile, est).mean();
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j < 3; ++j) {
                const double d = spec.profile.values(i, j) - est.values(i, j);
                loop += d * d / 4.0;
            }
    }
    CHECK(lib / 200 == rel(loop / 200, 1e-12));
}

TEST_CASE("profile CSV keeps full precision") {
    ProfileMatrix p{Eigen::MatrixXd(2, 2), ProfileKind::Estimate};
    p.values << 0.1, 1.0 / 3.0, -2.5e-17, 0.9999999999999999;
    std::ostringstream out;
    write_profile(out, p);
    std::istringstream in(out.str());
    CHECK(read_profile(in, ProfileKind::Estimate).values == p.values);
}
