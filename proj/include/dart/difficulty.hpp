#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "dart/image.hpp"

namespace dart {

/// Fusion weights for the three difficulty components. Non-negative and
/// summing to one.
struct DifficultyWeights {
    double edge = 0.4;
    double variance = 0.3;
    double gradient = 0.3;

    void validate() const {
        if (edge < 0 || variance < 0 || gradient < 0)
            throw Error("difficulty weights must be non-negative");
        if (std::abs(edge + variance + gradient - 1.0) > 1e-9)
            throw Error("difficulty weights must sum to 1");
    }
};

struct DifficultyScore {
    double edge = 0;
    double variance = 0;
    double gradient = 0;
    double fused = 0;
};

struct DifficultyOptions {
    DifficultyWeights weights{};
    /// Edge threshold is mean + edge_sigma * stddev of the gradient field.
    double edge_sigma = 1.0;
};

namespace detail {

template <typename Scalar>
Plane<Scalar> replicate_pad(const Plane<Scalar>& p) {
    const auto h = p.rows();
    const auto w = p.cols();
    Plane<Scalar> out(h + 2, w + 2);
    out.block(1, 1, h, w) = p;
    out.block(0, 1, 1, w) = p.row(0);
    out.block(h + 1, 1, 1, w) = p.row(h - 1);
    out.col(0) = out.col(1);
    out.col(w + 1) = out.col(w);
    return out;
}

inline void require_gray(int channels) {
    if (channels != 1)
        throw Error("expected a single-channel image, got " + std::to_string(channels) + " channels");
}

} // namespace detail

/// Rec.601 luma. Single-channel input is returned unchanged.
template <typename Scalar>
ImagePlane<Scalar> to_grayscale(const ImagePlane<Scalar>& img) {
    if (img.channels() == 1)
        return img;
    const auto& r = img.channel(0);
    const auto& g = img.channel(1);
    const auto& b = img.channel(2);
    // Neutral pixels map to themselves exactly.
    Plane<Scalar> luma = ((r == g) && (g == b)).select(r, Scalar(0.299) * r + Scalar(0.587) * g + Scalar(0.114) * b);
    return ImagePlane<Scalar>::gray(luma.min(Scalar(1)).max(Scalar(0)));
}

/// Sobel gradient magnitude with clamp-to-edge borders; same size as input.
template <typename Scalar>
Plane<Scalar> sobel_magnitude(const ImagePlane<Scalar>& gray) {
    detail::require_gray(gray.channels());
    const Plane<Scalar> p = detail::replicate_pad(gray.channel(0));
    const auto h = gray.height();
    const auto w = gray.width();
    auto at = [&](int dy, int dx) { return p.block(1 + dy, 1 + dx, h, w); };
    const Plane<Scalar> gx = (at(-1, 1) - at(-1, -1)) + Scalar(2) * (at(0, 1) - at(0, -1)) + (at(1, 1) - at(1, -1));
    const Plane<Scalar> gy = (at(1, -1) - at(-1, -1)) + Scalar(2) * (at(1, 0) - at(-1, 0)) + (at(1, 1) - at(-1, 1));
    return (gx.square() + gy.square()).sqrt();
}

/// Fraction of pixels strictly above mean + edge_sigma * stddev of the field.
template <typename Derived>
double edge_density(const Eigen::ArrayBase<Derived>& gmag, double edge_sigma = 1.0) {
    if (gmag.size() == 0)
        throw Error("edge_density of an empty field");
    const Eigen::ArrayXd g = gmag.derived().template cast<double>().reshaped();
    if ((g < 0).any())
        throw Error("gradient magnitudes must be non-negative");
    if (g.maxCoeff() == g.minCoeff())
        return 0.0;
    const double mean = g.mean();
    const double stddev = std::sqrt((g - mean).square().mean());
    const double tau = mean + edge_sigma * stddev;
    return static_cast<double>((g > tau).count()) / static_cast<double>(g.size());
}

/// Population variance around per-channel means, scaled by 1/0.25 and clamped.
template <typename Scalar>
double pixel_variance(const ImagePlane<Scalar>& img) {
    double sum = 0;
    for (const auto& ch : img.planes()) {
        if (ch.maxCoeff() == ch.minCoeff())
            continue;
        const Eigen::ArrayXXd c = ch.template cast<double>();
        sum += (c - c.mean()).square().sum();
    }
    const double n = static_cast<double>(img.channels()) * img.width() * img.height();
    return std::min(sum / n / 0.25, 1.0);
}

/// Laplacian response field with clamp-to-edge borders.
template <typename Scalar>
Plane<Scalar> laplacian(const ImagePlane<Scalar>& gray) {
    detail::require_gray(gray.channels());
    const Plane<Scalar> p = detail::replicate_pad(gray.channel(0));
    const auto h = gray.height();
    const auto w = gray.width();
    auto at = [&](int dy, int dx) { return p.block(1 + dy, 1 + dx, h, w); };
    // Written as differences so flat regions give exactly zero.
    const auto centre = at(0, 0);
    return (at(-1, 0) - centre) + (at(1, 0) - centre) + (at(0, -1) - centre) + (at(0, 1) - centre);
}

/// Mean absolute Laplacian response divided by 4, clamped to [0,1].
template <typename Scalar>
double gradient_complexity(const ImagePlane<Scalar>& gray) {
    const Eigen::ArrayXXd lap = laplacian(gray).template cast<double>();
    return std::clamp(lap.abs().mean() / 4.0, 0.0, 1.0);
}

inline double fuse(const DifficultyWeights& w, double edge, double variance, double gradient) {
    return std::clamp(w.edge * edge + w.variance * variance + w.gradient * gradient, 0.0, 1.0);
}

/// Edge and gradient components use the grayscale conversion, the variance
/// component uses the original channels.
template <typename Scalar>
DifficultyScore difficulty(const ImagePlane<Scalar>& img, const DifficultyOptions& opts = {}) {
    opts.weights.validate();
    const auto gray = to_grayscale(img);
    DifficultyScore s;
    s.edge = edge_density(sobel_magnitude(gray), opts.edge_sigma);
    s.variance = pixel_variance(img);
    s.gradient = gradient_complexity(gray);
    s.fused = fuse(opts.weights, s.edge, s.variance, s.gradient);
    return s;
}

} // namespace dart
