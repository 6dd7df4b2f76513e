#pragma once

#include <string>
#include <string_view>

#include "strokeshift/geometry.hpp"

namespace strokeshift {

struct SvgStyle {
  /// Side of the square viewBox; canvas coordinates are scaled by this.
  int canvas_size = 512;
  std::string stroke_color = "black";
  bool white_background = true;
};

/// SVG 1.1 document, one `<path d="M p0 C p1 p2 p3">` per stroke in stroke order.
/// stroke-width is the full thickness (2 x half-width) in viewBox units.
std::string export_svg(const StrokeView<double>& strokes, const SvgStyle& style = {});

/// Reads back the paths written by export_svg. Throws ContractViolation on
/// paths that are not a single cubic segment.
StrokeSet<double> import_svg_strokes(std::string_view svg, const SvgStyle& style = {});

}  // namespace strokeshift
