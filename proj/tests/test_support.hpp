#pragma once

// Independent reference implementations used as oracles by the unit and
// acceptance tests. They deliberately avoid the library's code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <random>
#include <string>
#include <vector>

#include "dart/image.hpp"
#include "dart/mdp.hpp"
#include "dart/trace.hpp"

namespace dart::test {

using Kernel3 = std::array<std::array<double, 3>, 3>;

inline constexpr Kernel3 kSobelX{{{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}}};
inline constexpr Kernel3 kSobelY{{{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}}};
inline constexpr Kernel3 kLaplacian{{{0, 1, 0}, {1, -4, 1}, {0, 1, 0}}};

/// Per-pixel 3x3 correlation with clamped coordinates.
inline Eigen::ArrayXXd brute_filter(const Eigen::ArrayXXd& img, const Kernel3& k) {
    const int h = static_cast<int>(img.rows());
    const int w = static_cast<int>(img.cols());
    Eigen::ArrayXXd out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    acc += k[dy + 1][dx + 1] * img(yy, xx);
                }
            out(y, x) = acc;
        }
    return out;
}

inline Eigen::ArrayXXd brute_sobel(const Eigen::ArrayXXd& img) {
    const auto gx = brute_filter(img, kSobelX);
    const auto gy = brute_filter(img, kSobelY);
    Eigen::ArrayXXd out(img.rows(), img.cols());
    for (Eigen::Index i = 0; i < img.size(); ++i)
        out(i) = std::sqrt(gx(i) * gx(i) + gy(i) * gy(i));
    return out;
}

inline double brute_gradient_complexity(const Eigen::ArrayXXd& img) {
    const auto lap = brute_filter(img, kLaplacian);
    double sum = 0;
    for (Eigen::Index i = 0; i < lap.size(); ++i)
        sum += std::abs(lap(i));
    return std::min(1.0, sum / static_cast<double>(lap.size()) / 4.0);
}

inline Eigen::ArrayXXd random_plane(std::mt19937_64& rng, int h, int w) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::ArrayXXd p(h, w);
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p(i) = u(rng);
    return p;
}

/// Exit index under the strict rule, walked with plain loops.
inline int oracle_exit(const std::vector<double>& conf, const std::vector<double>& tau) {
    for (std::size_t i = 0; i < tau.size(); ++i)
        if (conf[i] > tau[i])
            return static_cast<int>(i);
    return static_cast<int>(conf.size()) - 1;
}

/// Per-sample accumulation of correct - beta * cost, averaged.
inline double oracle_objective(const TraceSet& t, const std::vector<double>& tau, double beta) {
    const int n = t.num_exits();
    long double total = 0;
    for (const auto& s : t.samples) {
        std::vector<double> conf(s.confidences.data(), s.confidences.data() + n);
        const int e = oracle_exit(conf, tau);
        const bool correct = s.predictions(e) == *s.label;
        total += (correct ? 1.0L : 0.0L) - beta * (t.profile.cum_macs(e) / t.profile.cum_macs(n - 1));
    }
    return static_cast<double>(total / t.samples.size());
}

/// Sort-and-interpolate type-7 quantile.
inline double oracle_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size())
        return v.back();
    const double frac = pos - lo;
    return v[lo] * (1 - frac) + v[lo + 1] * frac;
}

inline std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dart_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

/// Fully supported MDP with random rewards and sparse stochastic transitions.
inline MdpModel random_mdp(std::mt19937_64& rng, int n, int ba, int bc) {
    std::uniform_real_distribution<double> u(0, 1);
    MdpModel m;
    m.num_exits = n;
    m.alpha_bins = ba;
    m.conf_bins = bc;
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd r(ba, bc);
        for (Eigen::Index k = 0; k < r.size(); ++k)
            r(k) = u(rng) - 0.3;
        m.exit_reward.push_back(r);
        m.supported.push_back(BoolArray::Constant(ba, bc, true));
    }
    for (int i = 0; i + 1 < n; ++i) {
        std::vector<Eigen::MatrixXd> per;
        for (int a = 0; a < ba; ++a) {
            Eigen::MatrixXd p(bc, bc);
            for (Eigen::Index k = 0; k < p.size(); ++k)
                p(k) = u(rng) < 0.3 ? 0.0 : u(rng);
            for (int c = 0; c < bc; ++c) {
                if (p.row(c).sum() == 0)
                    p(c, c) = 1;
                p.row(c) /= p.row(c).sum();
            }
            per.push_back(p);
        }
        m.transition.push_back(per);
    }
    m.alpha_frequency = Eigen::VectorXd::Constant(ba, 1.0 / ba);
    return m;
}

using CsvRow = std::map<std::string, std::string>;

/// Rows of a small CSV file keyed by header name; '#' lines are skipped.
inline std::vector<CsvRow> read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in)
        throw std::runtime_error("cannot open " + p.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        return cells;
    };
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line.front() == '#')
            continue;
        if (header.empty()) {
            header = split(line);
            continue;
        }
        const auto cells = split(line);
        CsvRow row;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i)
            row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(DART_TEST_DATA) / name;
}

} // namespace dart::test
