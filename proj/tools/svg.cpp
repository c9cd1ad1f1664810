#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace coverlab::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 50;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(lo <= hi)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    }
};

// Maps data coordinates into the plot area.
struct Frame {
    Range x, y;
    double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
    double py(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

void open(std::ostringstream& out, const Axes& axes) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(axes.title)
        << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Axes& axes, const Frame& f) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\""
        << y0 << "\"/><line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/></g>\n";
    for (int k = 0; k <= 5; ++k) {
        const double vx = f.x.lo + (f.x.hi - f.x.lo) * k / 5.0;
        const double vy = f.y.lo + (f.y.hi - f.y.lo) * k / 5.0;
        out << "<text x=\"" << num(f.px(vx)) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << tick_label(vx)
            << "</text>\n";
        out << "<text x=\"" << x0 - 6 << "\" y=\"" << num(f.py(vy) + 4) << "\" text-anchor=\"end\">" << tick_label(vy)
            << "</text>\n";
        out << "<line x1=\"" << x0 << "\" y1=\"" << num(f.py(vy)) << "\" x2=\"" << x1 << "\" y2=\"" << num(f.py(vy))
            << "\" stroke=\"#ddd\"/>\n";
    }
    out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
        << escape(axes.x_label) << "</text>\n";
    out << "<text transform=\"translate(18," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(axes.y_label) << "</text>\n";
}

}  // namespace

std::string line_plot(const Axes& axes, const std::vector<Series>& series) {
    Frame f;
    for (const auto& s : series) {
        for (double v : s.x) f.x.include(v);
        for (double v : s.y) f.y.include(v);
        for (double v : s.lo) f.y.include(v);
        for (double v : s.hi) f.y.include(v);
    }
    f.x.finish();
    f.y.finish();

    std::ostringstream out;
    open(out, axes);
    draw_axes(out, axes, f);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.lo.size() == n && s.hi.size() == n && n > 0) {
            out << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < n; ++i) out << num(f.px(s.x[i])) << ',' << num(f.py(s.hi[i])) << ' ';
            for (std::size_t i = n; i-- > 0;) out << num(f.px(s.x[i])) << ',' << num(f.py(s.lo[i])) << ' ';
            out << "\"/>\n";
        }
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < n; ++i) out << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << ' ';
        out << "\"/>\n";
        const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
        out << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 32
            << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"3\"/>";
        out << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string histogram(const Axes& axes, const std::vector<double>& values, int bins, const std::string& color) {
    bins = std::max(1, bins);
    Range r;
    for (double v : values) r.include(v);
    r.finish();
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        auto b = static_cast<int>((v - r.lo) / (r.hi - r.lo) * bins);
        ++counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))];
    }
    Frame f;
    f.x = r;
    f.y.include(0);
    f.y.include(*std::max_element(counts.begin(), counts.end()));
    f.y.finish();

    std::ostringstream out;
    open(out, axes);
    draw_axes(out, axes, f);
    const double width = (r.hi - r.lo) / bins;
    for (int b = 0; b < bins; ++b) {
        const double x0 = f.px(r.lo + width * b);
        const double x1 = f.px(r.lo + width * (b + 1));
        const double y = f.py(counts[static_cast<std::size_t>(b)]);
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\"" << num(std::max(0.0, x1 - x0 - 1))
            << "\" height=\"" << num(f.py(0) - y) << "\" fill=\"" << color << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string heatmap(const Axes& axes, const std::vector<std::vector<double>>& values,
                    const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels) {
    Range r;
    for (const auto& row : values)
        for (double v : row) r.include(v);
    r.finish();
    const double extent = std::max(std::abs(r.lo), std::abs(r.hi));
    const std::size_t rows = values.size();
    const std::size_t cols = rows == 0 ? 0 : values[0].size();
    const double cw = (kWidth - kLeft - kRight) / std::max<std::size_t>(cols, 1);
    const double ch = (kHeight - kTop - kBottom) / std::max<std::size_t>(rows, 1);

    std::ostringstream out;
    open(out, axes);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols && j < values[i].size(); ++j) {
            // Diverging scale: blue below zero, red above.
            const double t = extent > 0 ? values[i][j] / extent : 0.0;
            const int fade = static_cast<int>(255 * (1 - std::min(1.0, std::abs(t))));
            char fill[16];
            std::snprintf(fill, sizeof fill, "#%02x%02x%02x", t >= 0 ? 255 : fade, fade, t >= 0 ? fade : 255);
            const double x = kLeft + cw * static_cast<double>(j);
            const double y = kTop + ch * static_cast<double>(i);
            out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cw) << "\" height=\""
                << num(ch) << "\" fill=\"" << fill << "\" stroke=\"white\"/>";
            out << "<text x=\"" << num(x + cw / 2) << "\" y=\"" << num(y + ch / 2 + 4) << "\" text-anchor=\"middle\">"
                << tick_label(values[i][j]) << "</text>\n";
        }
        if (i < row_labels.size())
            out << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(kTop + ch * (static_cast<double>(i) + 0.5) + 4)
                << "\" text-anchor=\"end\">" << escape(row_labels[i]) << "</text>\n";
    }
    for (std::size_t j = 0; j < cols && j < col_labels.size(); ++j)
        out << "<text x=\"" << num(kLeft + cw * (static_cast<double>(j) + 0.5)) << "\" y=\"" << kHeight - kBottom + 16
            << "\" text-anchor=\"middle\">" << escape(col_labels[j]) << "</text>\n";
    out << "<text x=\"" << (kWidth - kRight + kLeft) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
        << escape(axes.x_label) << "</text>\n";
    out << "<text transform=\"translate(18," << (kHeight - kBottom + kTop) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(axes.y_label) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace coverlab::svg
