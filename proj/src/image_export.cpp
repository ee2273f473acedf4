#include "svfbp/image_export.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "svfbp/error.hpp"

namespace svfbp::io {

namespace {

struct PngFile {
    FILE* f = nullptr;
    explicit PngFile(const fs::path& p) : f(std::fopen(p.string().c_str(), "wb")) {}
    ~PngFile() {
        if (f) std::fclose(f);
    }
};

void write_png(const fs::path& path, std::size_t width, std::size_t height, int color_type,
               const unsigned char* data, std::size_t stride) {
    PngFile file(path);
    if (!file.f) fail_io("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail_io("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail_io("libpng write failed for " + path.string());
    }
    png_init_io(png, file.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (std::size_t r = 0; r < height; ++r)
        rows[r] = const_cast<png_bytep>(data + r * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// 5x7 glyphs for range labels: digits, minus, plus, dot, 'e'.
struct Glyph {
    char ch;
    const char* rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {"01110", "10001", "10011", "10101", "11001", "10001", "01110"}},
    {'1', {"00100", "01100", "00100", "00100", "00100", "00100", "01110"}},
    {'2', {"01110", "10001", "00001", "00010", "00100", "01000", "11111"}},
    {'3', {"11110", "00001", "00001", "01110", "00001", "00001", "11110"}},
    {'4', {"00010", "00110", "01010", "10010", "11111", "00010", "00010"}},
    {'5', {"11111", "10000", "11110", "00001", "00001", "10001", "01110"}},
    {'6', {"00110", "01000", "10000", "11110", "10001", "10001", "01110"}},
    {'7', {"11111", "00001", "00010", "00100", "01000", "01000", "01000"}},
    {'8', {"01110", "10001", "10001", "01110", "10001", "10001", "01110"}},
    {'9', {"01110", "10001", "10001", "01111", "00001", "00010", "01100"}},
    {'-', {"00000", "00000", "00000", "11111", "00000", "00000", "00000"}},
    {'+', {"00000", "00100", "00100", "11111", "00100", "00100", "00000"}},
    {'.', {"00000", "00000", "00000", "00000", "00000", "01100", "01100"}},
    {'e', {"00000", "00000", "01110", "10001", "11111", "10000", "01110"}},
};

void draw_text(std::vector<unsigned char>& rgb, std::size_t width, std::size_t height,
               std::size_t x0, std::size_t y0, const std::string& text) {
    std::size_t x = x0;
    for (char c : text) {
        for (const auto& g : kFont) {
            if (g.ch != c) continue;
            for (int r = 0; r < 7; ++r)
                for (int col = 0; col < 5; ++col)
                    if (g.rows[r][col] == '1') {
                        std::size_t px = x + col, py = y0 + r;
                        if (px < width && py < height) {
                            std::size_t o = (py * width + px) * 3;
                            rgb[o] = rgb[o + 1] = rgb[o + 2] = 255;
                        }
                    }
            break;
        }
        x += 6;
    }
}

std::string format_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// Compact perceptual-ish colormap (dark blue -> teal -> yellow),
// piecewise-linear between anchors.
void colormap(double t, unsigned char& r, unsigned char& g, unsigned char& b) {
    static const double anchors[][3] = {
        {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
        {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
        {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.478, 0.821, 0.318},
        {0.741, 0.873, 0.150}, {0.993, 0.906, 0.144},
    };
    constexpr int n = 11;
    t = std::clamp(t, 0.0, 1.0) * (n - 1);
    int i = std::min(n - 2, static_cast<int>(t));
    double f = t - i;
    r = static_cast<unsigned char>(255.0 * (anchors[i][0] + f * (anchors[i + 1][0] - anchors[i][0])));
    g = static_cast<unsigned char>(255.0 * (anchors[i][1] + f * (anchors[i + 1][1] - anchors[i][1])));
    b = static_cast<unsigned char>(255.0 * (anchors[i][2] + f * (anchors[i + 1][2] - anchors[i][2])));
}

Array2D<unsigned char> to_gray(const Array2D<double>& img, double lo, double hi, int scale) {
    double inv = hi > lo ? 1.0 / (hi - lo) : 0.0;
    Array2D<unsigned char> out(img.rows() * scale, img.cols() * scale);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) {
            double v = (img(r / scale, c / scale) - lo) * inv;
            out(r, c) = static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
        }
    return out;
}

}  // namespace

void write_png_gray(const fs::path& path, const Array2D<unsigned char>& img) {
    write_png(path, img.cols(), img.rows(), PNG_COLOR_TYPE_GRAY, img.data(), img.cols());
}

void write_png_rgb(const fs::path& path, std::size_t width, std::size_t height,
                   const std::vector<unsigned char>& rgb) {
    write_png(path, width, height, PNG_COLOR_TYPE_RGB, rgb.data(), width * 3);
}

template <typename T>
void export_central_slices(const fs::path& out_dir, const std::string& stem, const Volume<T>& vol,
                           Window window, int scale) {
    const auto& d = vol.data;
    auto grab = [&](int axis) {
        Array2D<double> img;
        if (axis == 0) {
            img = Array2D<double>(d.n1(), d.n2());
            std::size_t z = d.n0() / 2;
            for (std::size_t y = 0; y < d.n1(); ++y)
                for (std::size_t x = 0; x < d.n2(); ++x) img(y, x) = d(z, y, x);
        } else if (axis == 1) {
            img = Array2D<double>(d.n0(), d.n2());
            std::size_t y = d.n1() / 2;
            for (std::size_t z = 0; z < d.n0(); ++z)
                for (std::size_t x = 0; x < d.n2(); ++x) img(z, x) = d(z, y, x);
        } else {
            img = Array2D<double>(d.n0(), d.n1());
            std::size_t x = d.n2() / 2;
            for (std::size_t z = 0; z < d.n0(); ++z)
                for (std::size_t y = 0; y < d.n1(); ++y) img(z, y) = d(z, y, x);
        }
        return img;
    };
    double lo = window.lo, hi = window.hi;
    if (!window.fixed) {
        auto [vlo, vhi] = min_max(d);
        lo = vlo;
        hi = vhi;
    }
    const char* names[3] = {"axial", "coronal", "sagittal"};
    for (int axis = 0; axis < 3; ++axis) {
        Array2D<double> img = grab(axis);
        write_png_gray(out_dir / (stem + "_" + names[axis] + ".png"), to_gray(img, lo, hi, scale));
    }
}

template <typename T>
void export_heatmap(const fs::path& path, const Array2D<T>& values, double lo, double hi, int scale) {
    const std::size_t bar_w = 24, pad = 8, label_h = 10;
    std::size_t w = values.cols() * scale + pad + bar_w + 4 + 6 * 10;
    std::size_t h = std::max<std::size_t>(values.rows() * scale, 64) + label_h;
    std::vector<unsigned char> rgb(w * h * 3, 0);
    double inv = hi > lo ? 1.0 / (hi - lo) : 0.0;
    for (std::size_t r = 0; r < values.rows() * scale; ++r) {
        for (std::size_t c = 0; c < values.cols() * scale; ++c) {
            double t = (static_cast<double>(values(r / scale, c / scale)) - lo) * inv;
            std::size_t o = (r * w + c) * 3;
            colormap(t, rgb[o], rgb[o + 1], rgb[o + 2]);
        }
    }
    std::size_t bar_x = values.cols() * scale + pad;
    std::size_t bar_h = h - label_h - 2;
    for (std::size_t r = 0; r < bar_h; ++r) {
        double t = 1.0 - static_cast<double>(r) / static_cast<double>(bar_h - 1);
        for (std::size_t c = 0; c < bar_w; ++c) {
            std::size_t o = (r * w + bar_x + c) * 3;
            colormap(t, rgb[o], rgb[o + 1], rgb[o + 2]);
        }
    }
    draw_text(rgb, w, h, bar_x + bar_w + 4, 0, format_label(hi));
    draw_text(rgb, w, h, bar_x + bar_w + 4, bar_h - 7, format_label(lo));
    write_png_rgb(path, w, h, rgb);
}

void export_loss_plot(const fs::path& path, const std::vector<double>& train_loss,
                      const std::vector<double>& val_loss) {
    const std::size_t w = 640, h = 420, ml = 56, mr = 12, mt = 12, mb = 32;
    std::vector<unsigned char> rgb(w * h * 3, 16);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* v : {&train_loss, &val_loss})
        for (double x : *v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (!std::isfinite(lo) || hi <= lo) {
        lo = 0.0;
        hi = 1.0;
    }
    std::size_t pw = w - ml - mr, ph = h - mt - mb;
    auto put = [&](std::size_t x, std::size_t y, unsigned char r, unsigned char g, unsigned char b) {
        if (x < w && y < h) {
            std::size_t o = (y * w + x) * 3;
            rgb[o] = r;
            rgb[o + 1] = g;
            rgb[o + 2] = b;
        }
    };
    for (std::size_t x = 0; x < pw; ++x) {
        put(ml + x, mt, 70, 70, 70);
        put(ml + x, mt + ph, 70, 70, 70);
    }
    for (std::size_t y = 0; y < ph; ++y) {
        put(ml, mt + y, 70, 70, 70);
        put(ml + pw, mt + y, 70, 70, 70);
    }
    auto draw_series = [&](const std::vector<double>& s, unsigned char r, unsigned char g,
                           unsigned char b) {
        if (s.size() < 2) return;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            double x0 = ml + static_cast<double>(i) / (s.size() - 1) * pw;
            double x1 = ml + static_cast<double>(i + 1) / (s.size() - 1) * pw;
            double y0 = mt + (1.0 - (s[i] - lo) / (hi - lo)) * ph;
            double y1 = mt + (1.0 - (s[i + 1] - lo) / (hi - lo)) * ph;
            int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
            for (int t = 0; t <= steps; ++t) {
                double f = static_cast<double>(t) / steps;
                put(static_cast<std::size_t>(x0 + f * (x1 - x0)),
                    static_cast<std::size_t>(y0 + f * (y1 - y0)), r, g, b);
            }
        }
    };
    draw_series(train_loss, 120, 180, 255);
    draw_series(val_loss, 255, 170, 80);
    draw_text(rgb, w, h, ml, h - mb + 6, format_label(lo));
    draw_text(rgb, w, h, 2, mt, format_label(hi));
    write_png_rgb(path, w, h, rgb);
}

template void export_central_slices<float>(const fs::path&, const std::string&, const Volume<float>&,
                                           Window, int);
template void export_central_slices<double>(const fs::path&, const std::string&,
                                            const Volume<double>&, Window, int);
template void export_heatmap<float>(const fs::path&, const Array2D<float>&, double, double, int);
template void export_heatmap<double>(const fs::path&, const Array2D<double>&, double, double, int);

}  // namespace svfbp::io
