#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "optable/imaging.hpp"

namespace optable {

class ImageIoError : public std::runtime_error {
public:
    enum class Kind { missing_file, unsupported_format, corrupt_data, write_failed };

    ImageIoError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

const char* to_string(ImageIoError::Kind kind);

// 8-bit RGB PNG. Grayscale, palette and alpha inputs are converted to RGB.
RasterImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const RasterImage& img);

// 8-bit grayscale PNG, 0 = background, 255 = foreground; thresholded at 128 on load.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const BinaryMask& mask);

// 16-bit grayscale PNG, value = round(p * 65535).
void save_probability_map(const std::filesystem::path& path, const ProbabilityMap& map);
ProbabilityMap load_probability_map(const std::filesystem::path& path);

}  // namespace optable
