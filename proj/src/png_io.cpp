#include "optable/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace optable {

namespace {

enum class Target { rgb8, gray8, gray16 };

struct Decoded {
    int width{0};
    int height{0};
    std::vector<std::uint8_t> bytes;
};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorSink {
    char message[256] = {0};
};

void on_png_error(png_structp png, png_const_charp msg) {
    auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
    if (sink) {
        std::snprintf(sink->message, sizeof(sink->message), "%s", msg ? msg : "unknown libpng error");
    }
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void check_signature(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw ImageIoError(ImageIoError::Kind::missing_file, "file not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    std::array<unsigned char, 8> sig{};
    in.read(reinterpret_cast<char*>(sig.data()), sig.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) {
        throw ImageIoError(ImageIoError::Kind::corrupt_data, "empty file: " + path.string());
    }
    if (png_sig_cmp(sig.data(), 0, got) != 0) {
        throw ImageIoError(ImageIoError::Kind::unsupported_format, "not a PNG file: " + path.string());
    }
    if (got < sig.size()) {
        throw ImageIoError(ImageIoError::Kind::corrupt_data, "truncated PNG signature: " + path.string());
    }
}

// Every local touched after setjmp lives in `out`, `sink` or a heap row
// table owned by the caller, so a longjmp leaves nothing half-constructed.
bool decode_png(std::FILE* fp, Target target, Decoded& out, std::vector<png_bytep>& rows, ErrorSink& sink) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);

    const bool is_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
    int channels = 1;
    int bytes_per_sample = 1;
    switch (target) {
        case Target::rgb8:
            if (depth == 16) png_set_strip_16(png);
            if (is_gray) png_set_gray_to_rgb(png);
            channels = 3;
            break;
        case Target::gray8:
            if (depth == 16) png_set_strip_16(png);
            if (!is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
            break;
        case Target::gray16:
            if (depth < 16) png_set_expand_16(png);
            if (!is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
            bytes_per_sample = 2;
            break;
    }
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = static_cast<std::size_t>(out.width) * channels * bytes_per_sample;
    if (png_get_rowbytes(png, info) != stride) {
        std::snprintf(sink.message, sizeof(sink.message), "unexpected row layout");
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    out.bytes.resize(stride * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) {
        rows[static_cast<std::size_t>(y)] = out.bytes.data() + stride * static_cast<std::size_t>(y);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

Decoded read_png(const std::filesystem::path& path, Target target) {
    check_signature(path);
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) {
        throw ImageIoError(ImageIoError::Kind::missing_file, "cannot open: " + path.string());
    }
    Decoded out;
    std::vector<png_bytep> rows;
    ErrorSink sink;
    if (!decode_png(fp.get(), target, out, rows, sink) || out.width < 1 || out.height < 1) {
        throw ImageIoError(ImageIoError::Kind::corrupt_data,
                           "corrupt PNG " + path.string() + ": " + sink.message);
    }
    return out;
}

bool encode_png(std::FILE* fp, int width, int height, int color_type, int bit_depth,
                std::vector<png_bytep>& rows, ErrorSink& sink) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
               std::vector<std::uint8_t>& bytes) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw ImageIoError(ImageIoError::Kind::write_failed, "cannot open for writing: " + path.string());
    }
    const std::size_t stride = bytes.size() / static_cast<std::size_t>(height);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] = bytes.data() + stride * static_cast<std::size_t>(y);
    }
    ErrorSink sink;
    const bool ok = encode_png(fp.get(), width, height, color_type, bit_depth, rows, sink);
    const bool closed = std::fclose(fp.release()) == 0;
    if (!ok || !closed) {
        throw ImageIoError(ImageIoError::Kind::write_failed,
                           "failed writing " + path.string() + ": " + sink.message);
    }
}

void require_nonempty(int width, const std::filesystem::path& path) {
    if (width < 1) {
        throw ImageIoError(ImageIoError::Kind::write_failed, "refusing to write empty image: " + path.string());
    }
}

}  // namespace

const char* to_string(ImageIoError::Kind kind) {
    switch (kind) {
        case ImageIoError::Kind::missing_file: return "missing_file";
        case ImageIoError::Kind::unsupported_format: return "unsupported_format";
        case ImageIoError::Kind::corrupt_data: return "corrupt_data";
        case ImageIoError::Kind::write_failed: return "write_failed";
    }
    return "unknown";
}

RasterImage load_image(const std::filesystem::path& path) {
    Decoded d = read_png(path, Target::rgb8);
    std::vector<Rgb> px(static_cast<std::size_t>(d.width) * static_cast<std::size_t>(d.height));
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = Rgb{d.bytes[3 * i], d.bytes[3 * i + 1], d.bytes[3 * i + 2]};
    }
    return RasterImage(d.width, d.height, std::move(px));
}

void save_image(const std::filesystem::path& path, const RasterImage& img) {
    require_nonempty(img.width(), path);
    std::vector<std::uint8_t> bytes;
    bytes.reserve(img.size() * 3);
    for (const Rgb& p : img.values()) {
        bytes.push_back(p.r);
        bytes.push_back(p.g);
        bytes.push_back(p.b);
    }
    write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8, bytes);
}

BinaryMask load_mask(const std::filesystem::path& path) {
    Decoded d = read_png(path, Target::gray8);
    std::vector<std::uint8_t> bits(d.bytes.size());
    std::transform(d.bytes.begin(), d.bytes.end(), bits.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v >= 128 ? 1 : 0); });
    return BinaryMask(d.width, d.height, std::move(bits));
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    require_nonempty(mask.width(), path);
    std::vector<std::uint8_t> bytes(mask.size());
    std::transform(mask.values().begin(), mask.values().end(), bytes.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    write_png(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

void save_probability_map(const std::filesystem::path& path, const ProbabilityMap& map) {
    require_nonempty(map.width(), path);
    std::vector<std::uint8_t> bytes;
    bytes.reserve(map.size() * 2);
    for (double p : map.values()) {
        const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(p, 0.0, 1.0) * 65535.0));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    write_png(path, map.width(), map.height(), PNG_COLOR_TYPE_GRAY, 16, bytes);
}

ProbabilityMap load_probability_map(const std::filesystem::path& path) {
    Decoded d = read_png(path, Target::gray16);
    std::vector<double> values(static_cast<std::size_t>(d.width) * static_cast<std::size_t>(d.height));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const unsigned v = (static_cast<unsigned>(d.bytes[2 * i]) << 8) | d.bytes[2 * i + 1];
        values[i] = static_cast<double>(v) / 65535.0;
    }
    return ProbabilityMap(d.width, d.height, std::move(values));
}

}  // namespace optable
