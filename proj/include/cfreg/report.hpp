/*
Copyright 2026 the cfreg contributors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "cfreg/errors.hpp"
#include "cfreg/raw_io.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
};

inline Rgb plot_color(size_t i) {
    static const Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                  {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

/// Tiny RGB raster with just enough drawing for plots: pixels, lines,
/// rectangles, and a 5x7 bitmap font (lowercase maps to uppercase).
class Canvas {
  public:
    Canvas(int w, int h, Rgb bg = {255, 255, 255}) : w_(w), h_(h), px_(size_t(w) * h * 3) {
        if (w < 8 || h < 8) throw ConfigError("canvas: size too small");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) set(x, y, bg);
    }

    int width() const { return w_; }
    int height() const { return h_; }

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        uint8_t* p = px_.data() + 3 * (size_t(y) * w_ + x);
        p[0] = c.r, p[1] = c.g, p[2] = c.b;
    }

    void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) set(x, y, c);
    }

    void line(int x0, int y0, int x1, int y1, Rgb c) {
        int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) err += dy, x0 += sx;
            if (e2 <= dx) err += dx, y0 += sy;
        }
    }

    void text(int x, int y, const std::string& s, Rgb c) {
        for (char ch : s) {
            draw_glyph(x, y, ch, c);
            x += 6;
        }
    }

    static int text_width(const std::string& s) { return 6 * static_cast<int>(s.size()); }

    /// Writes a 24-bit uncompressed BMP (bottom-up rows, 4-byte padded).
    void save_bmp(const std::string& path) const {
        const int row_bytes = (3 * w_ + 3) & ~3;
        const uint32_t data_size = uint32_t(row_bytes) * h_;
        const uint32_t file_size = 54 + data_size;
        std::vector<char> out(file_size, 0);
        auto put16 = [&](size_t o, uint16_t v) { std::memcpy(&out[o], &v, 2); };
        auto put32 = [&](size_t o, uint32_t v) { std::memcpy(&out[o], &v, 4); };
        out[0] = 'B', out[1] = 'M';
        put32(2, file_size);
        put32(10, 54);
        put32(14, 40);
        put32(18, uint32_t(w_));
        put32(22, uint32_t(h_));
        put16(26, 1);
        put16(28, 24);
        put32(34, data_size);
        put32(38, 2835), put32(42, 2835); // 72 dpi
        for (int y = 0; y < h_; ++y) {
            char* row = out.data() + 54 + size_t(row_bytes) * (h_ - 1 - y);
            const uint8_t* src = px_.data() + 3 * size_t(y) * w_;
            for (int x = 0; x < w_; ++x) { // RGB -> BGR
                row[3 * x + 0] = char(src[3 * x + 2]);
                row[3 * x + 1] = char(src[3 * x + 1]);
                row[3 * x + 2] = char(src[3 * x + 0]);
            }
        }
        detail::atomic_write(path, out.data(), out.size());
    }

  private:
    void draw_glyph(int x, int y, char ch, Rgb c) {
        const uint8_t* rows = glyph(ch);
        for (int r = 0; r < 7; ++r)
            for (int k = 0; k < 5; ++k)
                if (rows[r] & (1u << (4 - k))) set(x + k, y + r, c);
    }

    static const uint8_t* glyph(char ch) {
        struct Glyph {
            char ch;
            uint8_t rows[7];
        };
        static const Glyph table[] = {
            {' ', {0, 0, 0, 0, 0, 0, 0}},
            {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
            {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
            {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
            {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
            {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
            {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
            {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
            {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
            {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
            {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
            {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
            {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
            {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
            {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
            {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
            {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
            {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
            {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
            {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
            {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
            {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
            {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
            {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
            {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
            {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
            {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
            {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
            {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
            {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
            {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
            {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
            {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
            {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
            {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
            {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
            {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
            {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},
            {',', {0, 0, 0, 0, 0, 0x04, 0x08}},
            {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
            {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},
            {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
            {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},
            {'%', {0x19, 0x1A, 0x02, 0x04, 0x08, 0x0B, 0x13}},
            {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
            {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
            {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
            {'_', {0, 0, 0, 0, 0, 0, 0x1F}},
        };
        if (ch >= 'a' && ch <= 'z') ch = char(ch - 'a' + 'A');
        for (const auto& g : table)
            if (g.ch == ch) return g.rows;
        return table[0].rows;
    }

    int w_, h_;
    std::vector<uint8_t> px_;
};

struct Series {
    std::string label;
    std::vector<double> x, y;
};

namespace detail {

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

inline void plot_range(const std::vector<double>& vals, double& lo, double& hi) {
    lo = 1e300, hi = -1e300;
    for (double v : vals)
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    if (lo > hi) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
        const double pad = std::abs(hi) * 0.1 + 1e-6;
        lo -= pad, hi += pad;
    } else {
        const double pad = (hi - lo) * 0.05;
        lo -= pad, hi += pad;
    }
}

} // namespace detail

/// Renders line series with axes, ticks, and a legend into a canvas.
inline Canvas plot_lines(const std::vector<Series>& series, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel, int w = 640,
                         int h = 400) {
    if (series.empty()) throw ConfigError("plot: no series");
    std::vector<double> all_x, all_y;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ShapeError("plot: x/y size mismatch");
        all_x.insert(all_x.end(), s.x.begin(), s.x.end());
        all_y.insert(all_y.end(), s.y.begin(), s.y.end());
    }
    double x_lo, x_hi, y_lo, y_hi;
    detail::plot_range(all_x, x_lo, x_hi);
    detail::plot_range(all_y, y_lo, y_hi);

    Canvas cv(w, h);
    const Rgb black{0, 0, 0}, grey{210, 210, 210};
    const int ml = 56, mr = 12, mt = 22, mb = 34;
    const int px0 = ml, px1 = w - mr, py0 = mt, py1 = h - mb;
    auto sx = [&](double x) {
        return px0 + int(std::lround((x - x_lo) / (x_hi - x_lo) * (px1 - px0)));
    };
    auto sy = [&](double y) {
        return py1 - int(std::lround((y - y_lo) / (y_hi - y_lo) * (py1 - py0)));
    };

    for (int t = 0; t <= 4; ++t) { // ticks and gridlines
        const double xv = x_lo + (x_hi - x_lo) * t / 4;
        const double yv = y_lo + (y_hi - y_lo) * t / 4;
        cv.line(sx(xv), py0, sx(xv), py1, grey);
        cv.line(px0, sy(yv), px1, sy(yv), grey);
        const std::string xs = detail::fmt_tick(xv), ys = detail::fmt_tick(yv);
        cv.text(sx(xv) - Canvas::text_width(xs) / 2, py1 + 6, xs, black);
        cv.text(px0 - Canvas::text_width(ys) - 4, sy(yv) - 3, ys, black);
    }
    cv.line(px0, py0, px0, py1, black);
    cv.line(px0, py1, px1, py1, black);
    cv.text((px0 + px1) / 2 - Canvas::text_width(title) / 2, 6, title, black);
    cv.text((px0 + px1) / 2 - Canvas::text_width(xlabel) / 2, h - 12, xlabel, black);
    cv.text(2, py0 - 14, ylabel, black);

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Rgb c = plot_color(si);
        for (size_t i = 1; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i - 1]) && std::isfinite(s.y[i]))
                cv.line(sx(s.x[i - 1]), sy(s.y[i - 1]), sx(s.x[i]), sy(s.y[i]), c);
        const int ly = py0 + 4 + 10 * int(si);
        cv.fill_rect(px1 - 110, ly, px1 - 102, ly + 6, c);
        cv.text(px1 - 98, ly, s.label, black);
    }
    return cv;
}

/// Renders a labeled bar chart (one bar per category).
inline Canvas plot_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                        const std::string& title, const std::string& ylabel, int w = 640,
                        int h = 400) {
    if (labels.size() != values.size() || labels.empty())
        throw ConfigError("plot: labels/values mismatch");
    double y_lo, y_hi;
    detail::plot_range(values, y_lo, y_hi);
    y_lo = std::min(y_lo, 0.0);

    Canvas cv(w, h);
    const Rgb black{0, 0, 0};
    const int ml = 56, mr = 12, mt = 22, mb = 34;
    const int px0 = ml, px1 = w - mr, py0 = mt, py1 = h - mb;
    auto sy = [&](double y) {
        return py1 - int(std::lround((y - y_lo) / (y_hi - y_lo) * (py1 - py0)));
    };
    for (int t = 0; t <= 4; ++t) {
        const double yv = y_lo + (y_hi - y_lo) * t / 4;
        const std::string ys = detail::fmt_tick(yv);
        cv.line(px0, sy(yv), px1, sy(yv), {210, 210, 210});
        cv.text(px0 - Canvas::text_width(ys) - 4, sy(yv) - 3, ys, black);
    }
    const int n = static_cast<int>(labels.size());
    const int slot = (px1 - px0) / n;
    for (int i = 0; i < n; ++i) {
        const int bx0 = px0 + i * slot + slot / 5;
        const int bx1 = px0 + (i + 1) * slot - slot / 5;
        cv.fill_rect(bx0, std::min(sy(values[i]), sy(0.0)), bx1,
                     std::max(sy(values[i]), sy(0.0)), plot_color(i));
        cv.text((bx0 + bx1) / 2 - Canvas::text_width(labels[i]) / 2, py1 + 6, labels[i], black);
    }
    cv.line(px0, py0, px0, py1, black);
    cv.line(px0, py1, px1, py1, black);
    cv.text((px0 + px1) / 2 - Canvas::text_width(title) / 2, 6, title, black);
    cv.text(2, py0 - 14, ylabel, black);
    return cv;
}

/// Renders the central z-slice of a volume as a grayscale panel
/// (intensities clamped to [0, 1]).
template <typename T>
Canvas slice_canvas(const Volume<T>& vol, int scale = 3) {
    require_volume(vol, "slice");
    const int z = vol.depth() / 2;
    Canvas cv(vol.width() * scale, vol.height() * scale);
    for (int y = 0; y < vol.height(); ++y)
        for (int x = 0; x < vol.width(); ++x) {
            const double v = std::clamp(double(vol.at(0, z, y, x)), 0.0, 1.0);
            const auto g = uint8_t(std::lround(v * 255));
            cv.fill_rect(x * scale, y * scale, (x + 1) * scale - 1, (y + 1) * scale - 1,
                         {g, g, g});
        }
    return cv;
}

} // namespace cfreg
