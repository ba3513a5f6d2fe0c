#include "unifix/image_io.hpp"

#include "unifix/archive.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace unifix {

std::uint8_t to_byte(float v)
{
    const float c = std::clamp(v, -1.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround((c + 1.0f) * 127.5f));
}

float from_byte(std::uint8_t b)
{
    return static_cast<float>(b) / 127.5f - 1.0f;
}

Image quantize(const Image& image)
{
    Image out = image;
    out.data = image.data.unaryExpr([](float v) { return from_byte(to_byte(v)); });
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image)
{
    if (image.channels() != 3) throw InvalidShapeError("write_png: expected 3 channels, got " + shape_string(image));
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(image.pixels()) * 3);
    for (int p = 0; p < image.pixels(); ++p)
        for (int c = 0; c < 3; ++c) rgb[static_cast<std::size_t>(p) * 3 + c] = to_byte(image.data(c, p));

    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr))
        throw IoError("png encode failed for " + path.string() + ": " + img.message);
    std::string buffer(size, '\0');
    if (!png_image_write_to_memory(&img, buffer.data(), &size, 0, rgb.data(), 0, nullptr))
        throw IoError("png encode failed for " + path.string() + ": " + img.message);
    buffer.resize(size);
    write_text_file(path, buffer);
}

Image read_png(const std::filesystem::path& path)
{
    const std::string bytes = read_text_file(path);
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw IoError("cannot decode " + path.string() + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode " + path.string() + ": " + img.message);
    }
    Image out(3, static_cast<int>(img.height), static_cast<int>(img.width));
    for (int p = 0; p < out.pixels(); ++p)
        for (int c = 0; c < 3; ++c) out.data(c, p) = from_byte(rgb[static_cast<std::size_t>(p) * 3 + c]);
    return out;
}

} // namespace unifix
