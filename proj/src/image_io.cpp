#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "spv/errors.hpp"
#include "spv/image_io.hpp"
#include "spv/kernels.hpp"

namespace spv {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void check_image(const GrayImage& image) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw IoError("invalid image dimensions");
  }
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

Frame to_frame(const GrayImage& image) {
  check_image(image);
  Frame f(image.width, image.height);
  kernels::u8_to_unit(image.pixels, f.values());
  return f;
}

GrayImage to_image(const Frame& frame) {
  GrayImage image{frame.width(), frame.height(), {}};
  image.pixels.resize(frame.size());
  kernels::unit_to_u8(frame.values(), image.pixels);
  return image;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("PNG decode failed: " + msg);
  }
  png.format = PNG_FORMAT_GRAY;
  GrayImage image{static_cast<int>(png.width), static_cast<int>(png.height), {}};
  image.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("PNG decode failed: " + msg);
  }
  check_image(image);
  return image;
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  check_image(image);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0,
                                 nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0,
                                 nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw IoError(std::string("PGM: expected ") + what);
    }
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 20) throw IoError(std::string("PGM: ") + what + " too large");
    }
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw IoError("PGM: expected P5 signature");
  }
  pos = 2;
  const int width = read_uint("width");
  const int height = read_uint("height");
  const int maxval = read_uint("maxval");
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw IoError("PGM: bad header values");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw IoError("PGM: missing separator after header");
  }
  ++pos;

  const std::size_t n = static_cast<std::size_t>(width) * height;
  const std::size_t sample = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos < n * sample) throw IoError("PGM: truncated pixel data");

  GrayImage image{width, height, std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = sample == 2 ? (bytes[pos + 2 * i] << 8u) | bytes[pos + 2 * i + 1]
                             : bytes[pos + i];
    v = std::min<unsigned>(v, static_cast<unsigned>(maxval));
    image.pixels[i] = maxval == 255
                          ? static_cast<std::uint8_t>(v)
                          : static_cast<std::uint8_t>((v * 255u + maxval / 2) / maxval);
  }
  return image;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  check_image(image);
  const std::string header = "P5\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  throw IoError(path.string() + ": not a PNG or binary PGM image");
}

void write_image(const std::filesystem::path& path, const GrayImage& image) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file(path, encode_png(image));
  } else if (ext == ".pgm") {
    write_file(path, encode_pgm(image));
  } else {
    throw IoError(path.string() + ": output extension must be .png or .pgm");
  }
}

GrayImage resize_nearest(const GrayImage& image, int width, int height) {
  check_image(image);
  GrayImage out{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * image.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * image.width / width);
      out.pixels[static_cast<std::size_t>(y) * width + x] =
          image.pixels[static_cast<std::size_t>(sy) * image.width + sx];
    }
  }
  return out;
}

GrayImage montage(std::span<const GrayImage> panels, int height, int gap) {
  std::vector<GrayImage> scaled;
  int total = 0;
  for (const auto& p : panels) {
    const int w = std::max(1, static_cast<int>(static_cast<long long>(p.width) * height / p.height));
    scaled.push_back(resize_nearest(p, w, height));
    total += w;
  }
  total += gap * static_cast<int>(panels.size() > 0 ? panels.size() - 1 : 0);
  GrayImage out{total, height, std::vector<std::uint8_t>(static_cast<std::size_t>(total) * height, 0)};
  int x0 = 0;
  for (const auto& p : scaled) {
    for (int y = 0; y < height; ++y) {
      std::copy_n(p.pixels.begin() + static_cast<std::ptrdiff_t>(y) * p.width, p.width,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * total + x0);
    }
    x0 += p.width + gap;
  }
  return out;
}

}  // namespace spv
