#include "pocr/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pocr {

namespace {

constexpr int kLeft = 44, kRight = 12, kTop = 12, kBottom = 24;

struct Color {
    float r, g, b;
};

const std::array<Color, 6> kPalette = {{{0.20f, 0.40f, 0.75f},
                                        {0.85f, 0.35f, 0.20f},
                                        {0.25f, 0.60f, 0.30f},
                                        {0.55f, 0.30f, 0.65f},
                                        {0.80f, 0.65f, 0.15f},
                                        {0.30f, 0.65f, 0.70f}}};

// 3x5 glyphs for tick labels
const char* glyph(char c) {
    switch (c) {
        case '0': return "111101101101111";
        case '1': return "010110010010111";
        case '2': return "111001111100111";
        case '3': return "111001111001111";
        case '4': return "101101111001001";
        case '5': return "111100111001111";
        case '6': return "111100111101111";
        case '7': return "111001001001001";
        case '8': return "111101111101111";
        case '9': return "111101111001111";
        case '.': return "000000000000010";
        case '-': return "000000111000000";
        default: return "000000000000000";
    }
}

class Canvas {
public:
    Canvas(int w, int h) : img(w, h, 1.0f) {}
    void px(int x, int y, Color c) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
        img.set_pixel(x, y, c.r, c.g, c.b);
    }
    void rect(int x0, int y0, int x1, int y1, Color c) {
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) px(x, y, c);
    }
    void line(int x0, int y0, int x1, int y1, Color c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            px(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) { err += dy; x0 += sx; }
            if (e2 <= dx) { err += dx; y0 += sy; }
        }
    }
    void text(int x, int y, const std::string& s, Color c) {
        for (char ch : s) {
            const char* g = glyph(ch);
            for (int r = 0; r < 5; ++r)
                for (int q = 0; q < 3; ++q)
                    if (g[r * 3 + q] == '1') px(x + q, y + r, c);
            x += 4;
        }
    }
    Image img;
};

struct Frame {
    int x0, y0, x1, y1;
    double lo, hi;
    int ymap(double v) const {
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        return y1 - static_cast<int>(std::lround(t * (y1 - y0)));
    }
};

Frame axes(Canvas& cv, const PlotOptions& o) {
    if (o.width < kLeft + kRight + 10 || o.height < kTop + kBottom + 10) throw std::invalid_argument("plot: canvas too small");
    if (!(o.y_max > o.y_min)) throw std::invalid_argument("plot: empty y range");
    Frame f{kLeft, kTop, o.width - kRight, o.height - kBottom, o.y_min, o.y_max};
    const Color grid{0.88f, 0.88f, 0.88f}, ink{0.1f, 0.1f, 0.1f};
    for (int i = 0; i <= 10; ++i) {
        const double v = o.y_min + (o.y_max - o.y_min) * i / 10.0;
        const int y = f.ymap(v);
        cv.line(f.x0, y, f.x1, y, grid);
        if (i % 2 == 0) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", v);
            cv.text(4, y - 2, buf, ink);
        }
    }
    cv.line(f.x0, f.y0, f.x0, f.y1, ink);
    cv.line(f.x0, f.y1, f.x1, f.y1, ink);
    return f;
}

}  // namespace

Image render_bar_chart(const BarSeries& s, const PlotOptions& opts) {
    if (s.values.empty()) throw std::invalid_argument("bar chart: no values");
    if (!s.errors.empty() && s.errors.size() != s.values.size()) throw std::invalid_argument("bar chart: errors misaligned");
    if (!s.labels.empty() && s.labels.size() != s.values.size()) throw std::invalid_argument("bar chart: labels misaligned");
    Canvas cv(opts.width, opts.height);
    const Frame f = axes(cv, opts);
    const int n = static_cast<int>(s.values.size());
    const double slot = static_cast<double>(f.x1 - f.x0) / n;
    const Color ink{0.1f, 0.1f, 0.1f};
    for (int i = 0; i < n; ++i) {
        const int bx0 = f.x0 + static_cast<int>(slot * (i + 0.2)), bx1 = f.x0 + static_cast<int>(slot * (i + 0.8));
        cv.rect(bx0, f.ymap(s.values[i]), bx1, f.y1 - 1, kPalette[i % kPalette.size()]);
        if (!s.errors.empty() && s.errors[i] > 0) {
            const int cx = (bx0 + bx1) / 2;
            const int ya = f.ymap(s.values[i] - s.errors[i]), yb = f.ymap(s.values[i] + s.errors[i]);
            cv.line(cx, ya, cx, yb, ink);
            cv.line(cx - 3, ya, cx + 3, ya, ink);
            cv.line(cx - 3, yb, cx + 3, yb, ink);
        }
        char buf[16];
        std::snprintf(buf, sizeof buf, "%d", i + 1);
        cv.text((bx0 + bx1) / 2 - 2, f.y1 + 6, buf, ink);
    }
    return cv.img;
}

Image render_line_chart(const std::vector<LineSeries>& series, const PlotOptions& opts) {
    if (series.empty()) throw std::invalid_argument("line chart: no series");
    double xlo = INFINITY, xhi = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty()) throw std::invalid_argument("line chart: x/y misaligned");
        if (!s.errors.empty() && s.errors.size() != s.y.size()) throw std::invalid_argument("line chart: errors misaligned");
        for (double x : s.x) xlo = std::min(xlo, x), xhi = std::max(xhi, x);
    }
    if (xhi == xlo) xhi = xlo + 1.0;
    Canvas cv(opts.width, opts.height);
    const Frame f = axes(cv, opts);
    const auto xmap = [&](double x) { return f.x0 + 8 + static_cast<int>(std::lround((x - xlo) / (xhi - xlo) * (f.x1 - f.x0 - 16))); };
    for (size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const Color c = kPalette[k % kPalette.size()];
        for (size_t i = 0; i + 1 < s.x.size(); ++i) cv.line(xmap(s.x[i]), f.ymap(s.y[i]), xmap(s.x[i + 1]), f.ymap(s.y[i + 1]), c);
        for (size_t i = 0; i < s.x.size(); ++i) {
            const int x = xmap(s.x[i]), y = f.ymap(s.y[i]);
            if (!s.errors.empty()) cv.line(x, f.ymap(s.y[i] - s.errors[i]), x, f.ymap(s.y[i] + s.errors[i]), c);
            cv.rect(x - 2, y - 2, x + 2, y + 2, c);
        }
    }
    return cv.img;
}

}  // namespace pocr
