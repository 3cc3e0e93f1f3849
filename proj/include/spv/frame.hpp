#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spv {

/// Row-major grayscale raster with luminance in [0, 1].
class Frame {
 public:
  Frame() = default;
  /// Throws ValidationError if width or height < 1.
  Frame(int width, int height, double fill = 0.0);
  /// Throws ValidationError on bad dimensions or data size.
  Frame(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(int x, int y) const { return data_[index(x, y)]; }
  double& at(int x, int y) { return data_[index(x, y)]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Checks dimensions and that every value is finite and within [0, 1].
void validate(const Frame& f);

}  // namespace spv
