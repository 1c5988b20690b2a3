#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace synood {

/// Axis-aligned box in pixels. Origin top-left, x grows right, y grows down.
struct Box {
  float x = 0.0f;
  float y = 0.0f;
  float w = 0.0f;
  float h = 0.0f;

  double area() const noexcept { return static_cast<double>(w) * static_cast<double>(h); }
  double right() const noexcept { return static_cast<double>(x) + w; }
  double bottom() const noexcept { return static_cast<double>(y) + h; }

  friend bool operator==(const Box&, const Box&) = default;
};

bool has_positive_extent(const Box& b) noexcept;

/// True when the box has positive extent and lies inside a width x height image.
bool fits_within(const Box& b, double width, double height) noexcept;

/// Grows the box by e*w on left/right and e*h on top/bottom, clipped to the image.
Box pad_box(const Box& box, double e, double image_w, double image_h);

/// Intersection over union; 0 for disjoint boxes.
double iou(const Box& a, const Box& b) noexcept;

/// Half-open pixel span [begin, end) covered by a box along one axis.
struct PixelSpan {
  int begin = 0;
  int end = 0;
};
PixelSpan pixel_columns(const Box& b, int image_w) noexcept;
PixelSpan pixel_rows(const Box& b, int image_h) noexcept;

/// Binary mask as uncompressed run-length counts in COCO order: column-major,
/// alternating background/foreground runs starting with background.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Throws ArgumentError unless sum(runs) == width * height.
void validate_mask(const Mask& mask);

std::size_t foreground_area(const Mask& mask);

/// Filled mask for the pixels covered by `box` (see pixel_columns/pixel_rows).
Mask box_to_mask(const Box& box, int width, int height);

/// Tightest box around the foreground, with pixel-inclusive extents.
/// Throws EmptyMaskError for an all-background mask.
Box mask_to_box(const Mask& mask);

}  // namespace synood
