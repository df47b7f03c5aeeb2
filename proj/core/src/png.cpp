#include <cstring>

#include <png.h>

#include "rest/errors.hpp"
#include "rest/heatmap.hpp"

namespace rest {

void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (width < 1 || height < 1) throw ValidationError("image must have positive size");
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
    throw ValidationError("pixel buffer size mismatch");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr))
    throw ValidationError("cannot write " + path.string() + ": " + image.message);
}

}  // namespace rest
