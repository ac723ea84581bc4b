#pragma once

#include <string>
#include <vector>

#include "imbalab/linalg.hpp"

namespace imbalab::plot {

using imbalab::Vec2;

struct Bounds {
    double xmin = -2.0, xmax = 2.0;
    double ymin = -2.0, ymax = 2.0;

    void expand(double x, double y);
    void pad(double frac);
    static Bounds of_points(const std::vector<Vec2>& pts, double pad_frac = 0.08);
};

/// Fixed palette indexed by class; stable across runs.
const std::string& class_color(int cls);

/// Byte-deterministic SVG canvas with a data-to-pixel mapping and simple
/// primitives. y axis points up in data space.
class SvgCanvas {
public:
    SvgCanvas(int width_px, int height_px, const Bounds& bounds);

    void axes();
    void circle(double x, double y, double radius_px, const std::string& fill,
                double opacity = 1.0);
    void segment(double x1, double y1, double x2, double y2, const std::string& stroke,
                 double width_px, double opacity = 1.0);
    /// Quiver element: shaft from (x, y) along (dx, dy) in data units plus a
    /// triangular head.
    void arrow(double x, double y, double dx, double dy, const std::string& stroke,
               double width_px);
    void polyline(const std::vector<Vec2>& pts, const std::string& stroke, double width_px,
                  double opacity = 1.0);
    void bar(double x_px, double y_px, double w_px, double h_px, const std::string& fill);
    void text(double x_px, double y_px, const std::string& s, int size_px);

    std::string str() const;
    void save(const std::string& path) const;

    double to_px_x(double x) const;
    double to_px_y(double y) const;
    int width() const { return width_; }
    int height() const { return height_; }

private:
    int width_, height_;
    Bounds bounds_;
    std::string body_;
};

} // namespace imbalab::plot
