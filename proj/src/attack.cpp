#include "mixscope/attack.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mixscope/error.hpp"
#include "mixscope/parallel.hpp"

namespace mixscope {

namespace {

constexpr Eigen::Index kColumnBlock = 256;

}  // namespace

double gram_condition_number(const Eigen::MatrixXd& inputs) {
    const Eigen::MatrixXd gram = inputs.transpose() * inputs;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

LsdaSolver::LsdaSolver(const ObservationWindow& obs)
    : outputs_(obs.outputs()), senders_(obs.senders()), factorization_(obs.inputs()) {
    condition_ = rank_deficient() ? std::numeric_limits<double>::infinity() : gram_condition_number(obs.inputs());
}

Eigen::VectorXd LsdaSolver::solve_column(Eigen::Index j) const {
    if (j < 0 || j >= outputs_.cols()) {
        throw ValidationError("receiver index " + std::to_string(j) + " out of range [0, " +
                              std::to_string(outputs_.cols()) + ")");
    }
    return factorization_.solve(outputs_.col(j));
}

LsdaResult LsdaSolver::solve(unsigned threads) const {
    const Eigen::Index m = outputs_.cols();
    Eigen::MatrixXd estimate(senders_, m);
    const auto blocks = static_cast<std::size_t>((m + kColumnBlock - 1) / kColumnBlock);
    parallel_for(blocks, threads, [&](std::size_t b) {
        const Eigen::Index first = static_cast<Eigen::Index>(b) * kColumnBlock;
        const Eigen::Index width = std::min(kColumnBlock, m - first);
        estimate.middleCols(first, width) = factorization_.solve(outputs_.middleCols(first, width));
    });
    return {{std::move(estimate), ProfileKind::Estimate}, condition_, rank(), rank_deficient()};
}

LsdaResult lsda(const ObservationWindow& obs, unsigned threads) {
    return LsdaSolver(obs).solve(threads);
}

Eigen::VectorXd lsda_column(const ObservationWindow& obs, Eigen::Index j) {
    return LsdaSolver(obs).solve_column(j);
}

Eigen::VectorXd empirical_mse(const ProfileMatrix& truth, const ProfileMatrix& estimate) {
    if (truth.values.rows() != estimate.values.rows() || truth.values.cols() != estimate.values.cols()) {
        throw ShapeError("profile shapes differ: " + std::to_string(truth.values.rows()) + "x" +
                         std::to_string(truth.values.cols()) + " vs " + std::to_string(estimate.values.rows()) +
                         "x" + std::to_string(estimate.values.cols()));
    }
    return (truth.values - estimate.values).rowwise().squaredNorm();
}

void write_profile(std::ostream& out, const ProfileMatrix& profile) {
    char buf[64];
    const auto& p = profile.values;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (j) out << ',';
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), p(i, j), std::chars_format::general, 17);
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

void write_profile_file(const std::string& path, const ProfileMatrix& profile) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_profile(out, profile);
    if (!out) throw IoError("write failure on '" + path + "'");
}

ProfileMatrix read_profile(std::istream& in, ProfileKind kind) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (true) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc()) throw ParseError(line_no, "non-numeric profile entry");
            row.push_back(v);
            if (next == end) break;
            if (*next != ',') throw ParseError(line_no, "unexpected character in profile row");
            p = next + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(line_no, "ragged profile row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("profile matrix is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return {std::move(m), kind};
}

}  // namespace mixscope
