#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchnet/numerics.hpp"

namespace branchnet {

namespace svg_detail {
// fixed two decimals, locale independent, so outputs are byte-stable
inline std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}
}  // namespace svg_detail

/// Minimal SVG chart canvas: axes with ticks, polylines, scatter points and
/// a legend. World coordinates are mapped into a fixed margin box. No
/// timestamps or other non-deterministic metadata are ever written.
class SvgCanvas {
  public:
    SvgCanvas(double width = 640, double height = 480) : width_(width), height_(height) {}

    void set_view(double xmin, double xmax, double ymin, double ymax) {
        if (!(xmin < xmax)) xmax = xmin + 1.0;
        if (!(ymin < ymax)) ymax = ymin + 1.0;
        xmin_ = xmin; xmax_ = xmax; ymin_ = ymin; ymax_ = ymax;
    }

    void fit_view(const std::vector<std::pair<double, double>>& pts) {
        if (pts.empty()) { set_view(0, 1, 0, 1); return; }
        double xmin = pts[0].first, xmax = xmin, ymin = pts[0].second, ymax = ymin;
        for (const auto& [x, y] : pts) {
            xmin = std::min(xmin, x); xmax = std::max(xmax, x);
            ymin = std::min(ymin, y); ymax = std::max(ymax, y);
        }
        const double dx = (xmax - xmin) * 0.05 + 1e-12, dy = (ymax - ymin) * 0.05 + 1e-12;
        set_view(xmin - dx, xmax + dx, ymin - dy, ymax + dy);
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                  double stroke_width = 1.5) {
        if (pts.size() < 2) return;
        std::ostringstream s;
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << svg_detail::fmt(stroke_width) << "\" points=\"";
        for (const auto& [x, y] : pts) s << svg_detail::fmt(px(x)) << ',' << svg_detail::fmt(py(y)) << ' ';
        s << "\"/>\n";
        body_ += s.str();
    }

    void scatter(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                 double radius = 2.0, double opacity = 0.8) {
        std::ostringstream s;
        for (const auto& [x, y] : pts)
            s << "<circle cx=\"" << svg_detail::fmt(px(x)) << "\" cy=\"" << svg_detail::fmt(py(y))
              << "\" r=\"" << svg_detail::fmt(radius) << "\" fill=\"" << color
              << "\" fill-opacity=\"" << svg_detail::fmt(opacity) << "\"/>\n";
        body_ += s.str();
    }

    /// One filled cell; used by the heatmap writer.
    void rect(double x0, double y0, double x1, double y1, const std::string& color) {
        std::ostringstream s;
        s << "<rect x=\"" << svg_detail::fmt(px(x0)) << "\" y=\"" << svg_detail::fmt(py(y1))
          << "\" width=\"" << svg_detail::fmt(px(x1) - px(x0)) << "\" height=\""
          << svg_detail::fmt(py(y0) - py(y1)) << "\" fill=\"" << color << "\"/>\n";
        body_ += s.str();
    }

    void text(double x, double y, const std::string& label, int size = 12,
              const std::string& anchor = "start", double rotate_deg = 0.0) {
        std::ostringstream s;
        s << "<text x=\"" << svg_detail::fmt(px(x)) << "\" y=\"" << svg_detail::fmt(py(y))
          << "\" font-size=\"" << size << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor
          << '"';
        if (rotate_deg != 0.0)
            s << " transform=\"rotate(" << svg_detail::fmt(rotate_deg) << ' '
              << svg_detail::fmt(px(x)) << ' ' << svg_detail::fmt(py(y)) << ")\"";
        s << '>' << escape(label) << "</text>\n";
        body_ += s.str();
    }

    void axes(const std::string& x_label, const std::string& y_label, int ticks = 5) {
        std::ostringstream s;
        s << "<line x1=\"" << svg_detail::fmt(margin_) << "\" y1=\"" << svg_detail::fmt(height_ - margin_)
          << "\" x2=\"" << svg_detail::fmt(width_ - margin_) << "\" y2=\""
          << svg_detail::fmt(height_ - margin_) << "\" stroke=\"black\"/>\n";
        s << "<line x1=\"" << svg_detail::fmt(margin_) << "\" y1=\"" << svg_detail::fmt(margin_)
          << "\" x2=\"" << svg_detail::fmt(margin_) << "\" y2=\""
          << svg_detail::fmt(height_ - margin_) << "\" stroke=\"black\"/>\n";
        for (int i = 0; i <= ticks; ++i) {
            const double fx = xmin_ + (xmax_ - xmin_) * i / ticks;
            const double fy = ymin_ + (ymax_ - ymin_) * i / ticks;
            s << "<line x1=\"" << svg_detail::fmt(px(fx)) << "\" y1=\""
              << svg_detail::fmt(height_ - margin_) << "\" x2=\"" << svg_detail::fmt(px(fx))
              << "\" y2=\"" << svg_detail::fmt(height_ - margin_ + 4) << "\" stroke=\"black\"/>\n"
              << "<text x=\"" << svg_detail::fmt(px(fx)) << "\" y=\""
              << svg_detail::fmt(height_ - margin_ + 16)
              << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">"
              << tick_label(fx) << "</text>\n";
            s << "<line x1=\"" << svg_detail::fmt(margin_ - 4) << "\" y1=\""
              << svg_detail::fmt(py(fy)) << "\" x2=\"" << svg_detail::fmt(margin_) << "\" y2=\""
              << svg_detail::fmt(py(fy)) << "\" stroke=\"black\"/>\n"
              << "<text x=\"" << svg_detail::fmt(margin_ - 6) << "\" y=\""
              << svg_detail::fmt(py(fy) + 3)
              << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">"
              << tick_label(fy) << "</text>\n";
        }
        s << "<text x=\"" << svg_detail::fmt(width_ / 2) << "\" y=\"" << svg_detail::fmt(height_ - 6)
          << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">"
          << escape(x_label) << "</text>\n";
        s << "<text x=\"14\" y=\"" << svg_detail::fmt(height_ / 2)
          << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
          << svg_detail::fmt(height_ / 2) << ")\">" << escape(y_label) << "</text>\n";
        body_ += s.str();
    }

    void title(const std::string& t) {
        std::ostringstream s;
        s << "<text x=\"" << svg_detail::fmt(width_ / 2)
          << "\" y=\"18\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\">"
          << escape(t) << "</text>\n";
        body_ += s.str();
    }

    void legend(const std::vector<std::pair<std::string, std::string>>& entries) {
        double y = margin_ + 8;
        std::ostringstream s;
        for (const auto& [label, color] : entries) {
            s << "<rect x=\"" << svg_detail::fmt(width_ - margin_ - 120) << "\" y=\""
              << svg_detail::fmt(y - 8) << "\" width=\"10\" height=\"10\" fill=\"" << color
              << "\"/>\n";
            s << "<text x=\"" << svg_detail::fmt(width_ - margin_ - 106) << "\" y=\""
              << svg_detail::fmt(y + 1) << "\" font-size=\"11\" font-family=\"sans-serif\">"
              << escape(label) << "</text>\n";
            y += 16;
        }
        body_ += s.str();
    }

    std::string render() const {
        std::ostringstream s;
        s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_detail::fmt(width_)
          << "\" height=\"" << svg_detail::fmt(height_) << "\" viewBox=\"0 0 "
          << svg_detail::fmt(width_) << ' ' << svg_detail::fmt(height_) << "\">\n"
          << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
          << body_ << "</svg>\n";
        return s.str();
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << render();
        if (!out) throw std::runtime_error("write failed for " + path);
    }

    double width() const { return width_; }
    double height() const { return height_; }

  private:
    double px(double x) const {
        return margin_ + (x - xmin_) / (xmax_ - xmin_) * (width_ - 2 * margin_);
    }
    double py(double y) const {
        return height_ - margin_ - (y - ymin_) / (ymax_ - ymin_) * (height_ - 2 * margin_);
    }
    static std::string tick_label(double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
        return std::string(buf, res.ptr);
    }
    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else if (c == '&') out += "&amp;";
            else out += c;
        }
        return out;
    }

    double width_, height_;
    double margin_ = 48;
    double xmin_ = 0, xmax_ = 1, ymin_ = 0, ymax_ = 1;
    std::string body_;
};

/// Diverging blue-white-red scale over [-1, 1].
inline std::string correlation_color(double v) {
    v = std::clamp(v, -1.0, 1.0);
    const auto channel = [](double t) {
        return std::to_string(static_cast<int>(std::lround(t * 255.0)));
    };
    double r, g, b;
    if (v >= 0) { r = 1.0; g = 1.0 - v; b = 1.0 - v; }
    else { r = 1.0 + v; g = 1.0 + v; b = 1.0; }
    return "rgb(" + channel(r) + "," + channel(g) + "," + channel(b) + ")";
}

/// Correlation heatmap with labeled axes and a [-1,1] color bar.
inline void write_heatmap_svg(const std::string& path, const Matrix& corr,
                              const std::vector<std::string>& labels) {
    const std::size_t n = corr.rows;
    SvgCanvas canvas(120 + 40.0 * static_cast<double>(n) + 80, 110 + 40.0 * static_cast<double>(n));
    canvas.set_view(-3.0, static_cast<double>(n) + 2.0, -3.0, static_cast<double>(n) + 0.5);
    canvas.title("correlation");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = corr(i, j);
            const double x0 = static_cast<double>(j), y0 = static_cast<double>(n - 1 - i);
            canvas.rect(x0, y0, x0 + 1.0, y0 + 1.0, correlation_color(v));
            char buf[16];
            const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
            canvas.text(x0 + 0.5, y0 + 0.38, std::string(buf, res.ptr), 9, "middle");
        }
        canvas.text(-0.15, static_cast<double>(n - 1 - i) + 0.38, labels[i], 10, "end");
        canvas.text(static_cast<double>(i) + 0.5, -0.8, labels[i], 10, "end", 45.0);
    }
    // color bar spanning [-1, 1]
    const double bar_x = static_cast<double>(n) + 0.6;
    for (int k = 0; k < 40; ++k) {
        const double v = -1.0 + 2.0 * k / 39.0;
        const double y = static_cast<double>(n) * (k / 40.0);
        canvas.rect(bar_x, y, bar_x + 0.5, y + static_cast<double>(n) / 40.0,
                    correlation_color(v));
    }
    canvas.text(bar_x + 0.6, 0.0, "-1", 10);
    canvas.text(bar_x + 0.6, static_cast<double>(n) / 2.0, "0", 10);
    canvas.text(bar_x + 0.6, static_cast<double>(n) - 0.5, "+1", 10);
    canvas.write(path);
}

}  // namespace branchnet
