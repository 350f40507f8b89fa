// velochart: velocity-based channel charting with adaptive map matching
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "velochart/geometry.hpp"
#include "velochart/textio.hpp"

namespace velochart {

inline std::string svg_rgb(double r, double g, double b) {
  const auto ch = [](double v) {
    return std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255);
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", ch(r), ch(g), ch(b));
  return buf;
}

// Minimal scatter/line canvas over a world rectangle; y points up in world
// space and is flipped for the SVG pixel grid.
class SvgCanvas {
 public:
  SvgCanvas(const Rect& world, double px_per_unit = 40.0, double margin_px = 20.0)
      : world_(world), scale_(px_per_unit), margin_(margin_px) {}

  void rect(const Rect& r, const std::string& fill, double opacity = 1.0,
            const std::string& stroke = "none") {
    const Vec2 a = to_px({r.lo.x(), r.hi.y()});
    body_ << "<rect x=\"" << text::fmt_fixed(a.x(), 2) << "\" y=\""
          << text::fmt_fixed(a.y(), 2) << "\" width=\""
          << text::fmt_fixed(r.width() * scale_, 2) << "\" height=\""
          << text::fmt_fixed(r.height() * scale_, 2) << "\" fill=\"" << fill
          << "\" fill-opacity=\"" << text::fmt_fixed(opacity, 3)
          << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void circle(const Vec2& p, double radius_px, const std::string& fill,
              double opacity = 1.0) {
    const Vec2 c = to_px(p);
    body_ << "<circle cx=\"" << text::fmt_fixed(c.x(), 2) << "\" cy=\""
          << text::fmt_fixed(c.y(), 2) << "\" r=\"" << text::fmt_fixed(radius_px, 2)
          << "\" fill=\"" << fill << "\" fill-opacity=\""
          << text::fmt_fixed(opacity, 3) << "\"/>\n";
  }

  void line(const Vec2& a, const Vec2& b, const std::string& stroke,
            double width_px = 1.0) {
    const Vec2 pa = to_px(a);
    const Vec2 pb = to_px(b);
    body_ << "<line x1=\"" << text::fmt_fixed(pa.x(), 2) << "\" y1=\""
          << text::fmt_fixed(pa.y(), 2) << "\" x2=\"" << text::fmt_fixed(pb.x(), 2)
          << "\" y2=\"" << text::fmt_fixed(pb.y(), 2) << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << text::fmt_fixed(width_px, 2) << "\"/>\n";
  }

  void text(const Vec2& p, const std::string& s, int font_px = 12,
            const std::string& fill = "#222222") {
    const Vec2 c = to_px(p);
    body_ << "<text x=\"" << text::fmt_fixed(c.x(), 2) << "\" y=\""
          << text::fmt_fixed(c.y(), 2) << "\" font-size=\"" << font_px
          << "\" font-family=\"sans-serif\" fill=\"" << fill << "\">" << s
          << "</text>\n";
  }

  std::string str() const {
    const double w = world_.width() * scale_ + 2.0 * margin_;
    const double h = world_.height() * scale_ + 2.0 * margin_;
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
        << text::fmt_fixed(w, 1) << "\" height=\"" << text::fmt_fixed(h, 1)
        << "\" viewBox=\"0 0 " << text::fmt_fixed(w, 1) << " "
        << text::fmt_fixed(h, 1) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  Vec2 to_px(const Vec2& p) const {
    return {margin_ + (p.x() - world_.lo.x()) * scale_,
            margin_ + (world_.hi.y() - p.y()) * scale_};
  }

  Rect world_;
  double scale_;
  double margin_;
  std::ostringstream body_;
};

}  // namespace velochart
