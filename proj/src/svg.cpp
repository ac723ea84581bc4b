#include "imbalab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "imbalab/errors.hpp"

namespace imbalab::plot {

void Bounds::expand(double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
}

void Bounds::pad(double frac) {
    const double dx = std::max(xmax - xmin, 1e-9) * frac;
    const double dy = std::max(ymax - ymin, 1e-9) * frac;
    xmin -= dx;
    xmax += dx;
    ymin -= dy;
    ymax += dy;
}

Bounds Bounds::of_points(const std::vector<Vec2>& pts, double pad_frac) {
    if (pts.empty()) return Bounds{};
    Bounds b{pts[0][0], pts[0][0], pts[0][1], pts[0][1]};
    for (const auto& p : pts) b.expand(p[0], p[1]);
    b.pad(pad_frac);
    return b;
}

const std::string& class_color(int cls) {
    static const std::vector<std::string> palette = {
        "#a0522d", // brown
        "#8a2be2", // purple
        "#ff8c00", // orange
        "#2e8b57", // green
        "#4169e1", // blue
        "#c71585", // magenta
    };
    return palette[static_cast<size_t>(cls < 0 ? 0 : cls) % palette.size()];
}

namespace {
std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}
std::string op(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}
} // namespace

SvgCanvas::SvgCanvas(int width_px, int height_px, const Bounds& bounds)
    : width_(width_px), height_(height_px), bounds_(bounds) {}

double SvgCanvas::to_px_x(double x) const {
    const double span = bounds_.xmax - bounds_.xmin;
    return (x - bounds_.xmin) / (span > 0 ? span : 1.0) * width_;
}

double SvgCanvas::to_px_y(double y) const {
    const double span = bounds_.ymax - bounds_.ymin;
    return height_ - (y - bounds_.ymin) / (span > 0 ? span : 1.0) * height_;
}

void SvgCanvas::axes() {
    // frame
    body_ += "<rect x=\"0\" y=\"0\" width=\"" + px(width_) + "\" height=\"" + px(height_) +
             "\" fill=\"white\" stroke=\"#404040\" stroke-width=\"1\"/>\n";
    // zero lines when inside the view
    if (bounds_.xmin < 0.0 && bounds_.xmax > 0.0)
        segment(0.0, bounds_.ymin, 0.0, bounds_.ymax, "#d0d0d0", 1.0);
    if (bounds_.ymin < 0.0 && bounds_.ymax > 0.0)
        segment(bounds_.xmin, 0.0, bounds_.xmax, 0.0, "#d0d0d0", 1.0);
}

void SvgCanvas::circle(double x, double y, double radius_px, const std::string& fill,
                       double opacity) {
    body_ += "<circle cx=\"" + px(to_px_x(x)) + "\" cy=\"" + px(to_px_y(y)) + "\" r=\"" +
             px(radius_px) + "\" fill=\"" + fill + "\" fill-opacity=\"" + op(opacity) + "\"/>\n";
}

void SvgCanvas::segment(double x1, double y1, double x2, double y2, const std::string& stroke,
                        double width_px, double opacity) {
    body_ += "<line x1=\"" + px(to_px_x(x1)) + "\" y1=\"" + px(to_px_y(y1)) + "\" x2=\"" +
             px(to_px_x(x2)) + "\" y2=\"" + px(to_px_y(y2)) + "\" stroke=\"" + stroke +
             "\" stroke-width=\"" + px(width_px) + "\" stroke-opacity=\"" + op(opacity) +
             "\"/>\n";
}

void SvgCanvas::arrow(double x, double y, double dx, double dy, const std::string& stroke,
                      double width_px) {
    const double x2 = x + dx, y2 = y + dy;
    segment(x, y, x2, y2, stroke, width_px);
    // head: two short strokes at +-30 degrees from the reversed direction
    const double px1 = to_px_x(x), py1 = to_px_y(y);
    const double px2 = to_px_x(x2), py2 = to_px_y(y2);
    const double ux = px2 - px1, uy = py2 - py1;
    const double len = std::sqrt(ux * ux + uy * uy);
    if (len < 1e-6) return;
    const double head = std::min(6.0, 0.4 * len);
    const double nx = ux / len, ny = uy / len;
    const double ca = std::cos(M_PI / 6.0), sa = std::sin(M_PI / 6.0);
    for (const double sgn : {1.0, -1.0}) {
        const double hx = -(nx * ca - sgn * ny * sa) * head;
        const double hy = -(sgn * nx * sa + ny * ca) * head;
        body_ += "<line x1=\"" + px(px2) + "\" y1=\"" + px(py2) + "\" x2=\"" + px(px2 + hx) +
                 "\" y2=\"" + px(py2 + hy) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
                 px(width_px) + "\"/>\n";
    }
}

void SvgCanvas::polyline(const std::vector<Vec2>& pts, const std::string& stroke, double width_px,
                         double opacity) {
    if (pts.size() < 2) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + px(width_px) +
             "\" stroke-opacity=\"" + op(opacity) + "\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) body_ += ' ';
        body_ += px(to_px_x(pts[i][0])) + "," + px(to_px_y(pts[i][1]));
    }
    body_ += "\"/>\n";
}

void SvgCanvas::bar(double x_px, double y_px, double w_px, double h_px, const std::string& fill) {
    body_ += "<rect x=\"" + px(x_px) + "\" y=\"" + px(y_px) + "\" width=\"" + px(w_px) +
             "\" height=\"" + px(h_px) + "\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::text(double x_px, double y_px, const std::string& s, int size_px) {
    body_ += "<text x=\"" + px(x_px) + "\" y=\"" + px(y_px) + "\" font-family=\"monospace\" " +
             "font-size=\"" + std::to_string(size_px) + "\" fill=\"#202020\">" + s + "</text>\n";
}

std::string SvgCanvas::str() const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width_) + "\" height=\"" + std::to_string(height_) +
                      "\" viewBox=\"0 0 " + std::to_string(width_) + " " +
                      std::to_string(height_) + "\">\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

void SvgCanvas::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write svg: " + path);
    out << str();
}

} // namespace imbalab::plot
