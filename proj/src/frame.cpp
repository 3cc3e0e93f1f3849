#include "spv/frame.hpp"

#include <cmath>
#include <string>

#include "spv/errors.hpp"

namespace spv {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw ValidationError("frame", "dimensions must be >= 1, got " +
                                       std::to_string(width) + "x" +
                                       std::to_string(height));
  }
}

}  // namespace

Frame::Frame(int width, int height, double fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Frame::Frame(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ValidationError("frame", "data length does not match dimensions");
  }
}

void validate(const Frame& f) {
  if (f.width() < 1 || f.height() < 1 ||
      f.size() != static_cast<std::size_t>(f.width()) * f.height()) {
    throw ValidationError("frame", "invalid frame dimensions");
  }
  for (double v : f.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("frame", "luminance outside [0, 1]");
    }
  }
}

}  // namespace spv
