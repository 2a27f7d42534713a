#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "dart/error.hpp"

namespace dart {

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A raster of 1 or 3 channels with intensities in [0,1]. Each channel is a
/// height x width array (row index = y, column index = x).
template <typename Scalar = double>
class ImagePlane {
public:
    ImagePlane() = default;

    explicit ImagePlane(std::vector<Plane<Scalar>> channels) : channels_(std::move(channels)) {
        if (channels_.size() != 1 && channels_.size() != 3)
            throw Error("unsupported channel count " + std::to_string(channels_.size()));
        const auto rows = channels_.front().rows();
        const auto cols = channels_.front().cols();
        if (rows < 1 || cols < 1)
            throw Error("image must be at least 1x1");
        for (const auto& ch : channels_) {
            if (ch.rows() != rows || ch.cols() != cols)
                throw Error("channel dimensions differ");
            if (!ch.allFinite() || (ch < Scalar(0)).any() || (ch > Scalar(1)).any())
                throw Error("intensity outside [0,1]");
        }
    }

    /// Builds an image from row-major, channel-last interleaved data.
    static ImagePlane from_interleaved(int width, int height, int channels, std::span<const Scalar> data) {
        if (width < 1 || height < 1)
            throw Error("image must be at least 1x1");
        if (channels != 1 && channels != 3)
            throw Error("unsupported channel count " + std::to_string(channels));
        const auto expected = static_cast<std::size_t>(width) * height * channels;
        if (data.size() != expected)
            throw Error("pixel data length " + std::to_string(data.size()) + " != " + std::to_string(expected));
        std::vector<Plane<Scalar>> planes(channels, Plane<Scalar>(height, width));
        std::size_t k = 0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < channels; ++c)
                    planes[c](y, x) = data[k++];
        return ImagePlane(std::move(planes));
    }

    static ImagePlane gray(Plane<Scalar> plane) { return ImagePlane(std::vector<Plane<Scalar>>{std::move(plane)}); }

    int width() const { return static_cast<int>(channels_.front().cols()); }
    int height() const { return static_cast<int>(channels_.front().rows()); }
    int channels() const { return static_cast<int>(channels_.size()); }

    const Plane<Scalar>& channel(int c) const { return channels_.at(c); }
    const std::vector<Plane<Scalar>>& planes() const { return channels_; }

    bool operator==(const ImagePlane& other) const {
        if (channels() != other.channels() || width() != other.width() || height() != other.height())
            return false;
        for (int c = 0; c < channels(); ++c)
            if ((channels_[c] != other.channels_[c]).any())
                return false;
        return true;
    }

private:
    std::vector<Plane<Scalar>> channels_{Plane<Scalar>::Zero(1, 1)};
};

/// Decodes binary PGM (P5), PPM (P6) or raw DIMG float tensors.
ImagePlane<double> load_image(const std::string& path);
ImagePlane<double> decode_image(std::span<const unsigned char> bytes);

} // namespace dart
