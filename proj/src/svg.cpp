#include "strokeshift/svg.hpp"

#include <cstdio>
#include <regex>
#include <sstream>
#include <vector>

#include "strokeshift/errors.hpp"

namespace strokeshift {

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string attribute(const std::string& element, const std::string& name) {
  const std::regex pattern("\\b" + name + "=\"([^\"]*)\"");
  std::smatch match;
  if (!std::regex_search(element, match, pattern)) return {};
  return match[1];
}

}  // namespace

std::string export_svg(const StrokeView<double>& strokes, const SvgStyle& style) {
  const double scale = style.canvas_size;
  const std::string size = std::to_string(style.canvas_size);
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  if (style.white_background) {
    out << "  <rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
  }
  for (const auto& curve : strokes) {
    const auto& p = curve.points;
    out << "  <path d=\"M " << fixed4(p[0].x() * scale) << ' ' << fixed4(p[0].y() * scale)
        << " C";
    for (int i = 1; i < 4; ++i) {
      out << ' ' << fixed4(p[i].x() * scale) << ' ' << fixed4(p[i].y() * scale);
    }
    out << "\" fill=\"none\" stroke=\"" << style.stroke_color << "\" stroke-width=\""
        << fixed4(2.0 * curve.width * scale) << "\" stroke-opacity=\"" << fixed4(curve.opacity)
        << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

StrokeSet<double> import_svg_strokes(std::string_view svg, const SvgStyle& style) {
  const double scale = style.canvas_size;
  const std::string text(svg);
  const std::regex path_element("<path\\b[^>]*>");
  const std::regex number("[-+]?(?:\\d+\\.?\\d*|\\.\\d+)(?:[eE][-+]?\\d+)?");

  std::vector<CubicBezier<double>> strokes;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), path_element);
       it != std::sregex_iterator(); ++it) {
    const std::string element = it->str();
    const std::string d = attribute(element, "d");
    const std::regex shape("^\\s*M[^MC]*C[^MC]*$");
    if (!std::regex_match(d, shape)) {
      throw ContractViolation("import_svg_strokes: path is not a single M..C segment: " + d);
    }
    std::vector<double> values;
    for (auto n = std::sregex_iterator(d.begin(), d.end(), number); n != std::sregex_iterator();
         ++n) {
      values.push_back(std::stod(n->str()));
    }
    if (values.size() != 8) {
      throw ContractViolation("import_svg_strokes: expected 8 coordinates in " + d);
    }
    CubicBezier<double> curve;
    for (int i = 0; i < 4; ++i) curve.points[i] = {values[2 * i] / scale, values[2 * i + 1] / scale};
    if (const auto w = attribute(element, "stroke-width"); !w.empty()) {
      curve.width = std::stod(w) / (2.0 * scale);
    }
    if (const auto o = attribute(element, "stroke-opacity"); !o.empty()) {
      curve.opacity = std::stod(o);
    }
    strokes.push_back(curve);
  }
  return StrokeSet<double>(std::move(strokes));
}

}  // namespace strokeshift
