#include "dart/image.hpp"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dart {
namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    int next_int() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
            throw Error("malformed image header");
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > (1L << 30))
                throw Error("image header value too large");
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw Error("malformed image header");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 2;
};

std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

ImagePlane<double> decode_netpbm(std::span<const unsigned char> bytes, int channels) {
    HeaderReader header(bytes);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (maxval != 255)
        throw Error("unsupported maxval " + std::to_string(maxval) + " (expected 255)");
    const std::size_t offset = header.raster_offset();
    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < offset + n)
        throw Error("truncated pixel data");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i)
        data[i] = bytes[offset + i] / 255.0;
    return ImagePlane<double>::from_interleaved(width, height, channels, data);
}

ImagePlane<double> decode_dimg(std::span<const unsigned char> bytes) {
    if (bytes.size() < 16)
        throw Error("truncated DIMG header");
    const auto width = read_u32le(bytes.data() + 4);
    const auto height = read_u32le(bytes.data() + 8);
    const auto channels = read_u32le(bytes.data() + 12);
    if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20) || channels > 3)
        throw Error("invalid DIMG dimensions");
    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < 16 + 4 * n)
        throw Error("truncated pixel data");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = read_u32le(bytes.data() + 16 + 4 * i);
        data[i] = std::bit_cast<float>(bits);
    }
    return ImagePlane<double>::from_interleaved(static_cast<int>(width), static_cast<int>(height),
                                                static_cast<int>(channels), data);
}

} // namespace

ImagePlane<double> decode_image(std::span<const unsigned char> bytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "DIMG", 4) == 0)
        return decode_dimg(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
        return decode_netpbm(bytes, 1);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
        return decode_netpbm(bytes, 3);
    throw Error("unknown image magic");
}

ImagePlane<double> load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open image '" + path + "'");
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

} // namespace dart
