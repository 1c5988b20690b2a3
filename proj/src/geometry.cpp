#include "synood/geometry.hpp"

#include "synood/errors.hpp"

#include <algorithm>
#include <cmath>

namespace synood {

bool has_positive_extent(const Box& b) noexcept {
  return std::isfinite(b.x) && std::isfinite(b.y) && b.w > 0.0f && b.h > 0.0f &&
         std::isfinite(b.w) && std::isfinite(b.h);
}

bool fits_within(const Box& b, double width, double height) noexcept {
  return has_positive_extent(b) && b.x >= 0.0f && b.y >= 0.0f && b.right() <= width &&
         b.bottom() <= height;
}

Box pad_box(const Box& box, double e, double image_w, double image_h) {
  if (!(e >= 0.0)) throw ArgumentError("padding must be non-negative");
  const double dx = e * box.w;
  const double dy = e * box.h;
  const double x0 = std::max(0.0, static_cast<double>(box.x) - dx);
  const double y0 = std::max(0.0, static_cast<double>(box.y) - dy);
  const double x1 = std::min(image_w, box.right() + dx);
  const double y1 = std::min(image_h, box.bottom() + dy);
  // Rounding to float must not push the far edge past the clip bound.
  auto extent = [](float origin, double end) {
    auto len = static_cast<float>(end - origin);
    while (len > 0.0f && static_cast<double>(origin) + len > end) len = std::nextafter(len, 0.0f);
    return len;
  };
  const auto fx = static_cast<float>(x0), fy = static_cast<float>(y0);
  return Box{fx, fy, extent(fx, x1), extent(fy, y1)};
}

double iou(const Box& a, const Box& b) noexcept {
  const double ix = std::min(a.right(), b.right()) - std::max<double>(a.x, b.x);
  const double iy = std::min(a.bottom(), b.bottom()) - std::max<double>(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

PixelSpan pixel_columns(const Box& b, int image_w) noexcept {
  const int begin = std::clamp(static_cast<int>(std::floor(b.x)), 0, image_w);
  const int end = std::clamp(static_cast<int>(std::ceil(b.right())), 0, image_w);
  return {begin, std::max(begin, end)};
}

PixelSpan pixel_rows(const Box& b, int image_h) noexcept {
  const int begin = std::clamp(static_cast<int>(std::floor(b.y)), 0, image_h);
  const int end = std::clamp(static_cast<int>(std::ceil(b.bottom())), 0, image_h);
  return {begin, std::max(begin, end)};
}

void validate_mask(const Mask& mask) {
  if (mask.width <= 0 || mask.height <= 0) throw ArgumentError("mask dimensions must be positive");
  std::uint64_t total = 0;
  for (auto r : mask.runs) total += r;
  const auto expected = static_cast<std::uint64_t>(mask.width) * static_cast<std::uint64_t>(mask.height);
  if (total != expected) {
    throw ArgumentError("mask run lengths sum to " + std::to_string(total) + ", expected " +
                        std::to_string(expected));
  }
}

std::size_t foreground_area(const Mask& mask) {
  std::size_t area = 0;
  for (std::size_t i = 1; i < mask.runs.size(); i += 2) area += mask.runs[i];
  return area;
}

Mask box_to_mask(const Box& box, int width, int height) {
  Mask mask{width, height, {}};
  const auto cols = pixel_columns(box, width);
  const auto rows = pixel_rows(box, height);
  const auto h = static_cast<std::uint32_t>(height);
  if (cols.begin == cols.end || rows.begin == rows.end) {
    mask.runs.push_back(static_cast<std::uint32_t>(width) * h);
    return mask;
  }
  const auto fg = static_cast<std::uint32_t>(rows.end - rows.begin);
  // Leading background: full columns before the box plus the top rows of its first column.
  std::uint32_t bg = static_cast<std::uint32_t>(cols.begin) * h + static_cast<std::uint32_t>(rows.begin);
  for (int c = cols.begin; c < cols.end; ++c) {
    mask.runs.push_back(bg);
    mask.runs.push_back(fg);
    bg = h - fg;  // bottom of this column + top of the next one
  }
  const std::uint32_t tail = (h - static_cast<std::uint32_t>(rows.end)) +
                             static_cast<std::uint32_t>(width - cols.end) * h;
  mask.runs.push_back(tail);
  return mask;
}

Box mask_to_box(const Mask& mask) {
  validate_mask(mask);
  const auto h = static_cast<std::uint64_t>(mask.height);
  std::uint64_t min_col = UINT64_MAX, max_col = 0, min_row = UINT64_MAX, max_row = 0;
  bool any = false;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < mask.runs.size(); ++i) {
    const std::uint64_t len = mask.runs[i];
    if (i % 2 == 1 && len > 0) {
      any = true;
      const std::uint64_t first = pos;
      const std::uint64_t last = pos + len - 1;
      const std::uint64_t c0 = first / h, c1 = last / h;
      min_col = std::min(min_col, c0);
      max_col = std::max(max_col, c1);
      if (c0 == c1) {
        min_row = std::min(min_row, first % h);
        max_row = std::max(max_row, last % h);
      } else {
        // A run crossing a column boundary touches both the last and the first row.
        min_row = 0;
        max_row = h - 1;
      }
    }
    pos += len;
  }
  if (!any) throw EmptyMaskError();
  return Box{static_cast<float>(min_col), static_cast<float>(min_row),
             static_cast<float>(max_col - min_col + 1), static_cast<float>(max_row - min_row + 1)};
}

}  // namespace synood
