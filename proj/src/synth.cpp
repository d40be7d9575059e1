#include "hgin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "hgin/pnm.hpp"
#include "hgin/rng.hpp"

namespace hgin {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Tensor64 synth_image(int size, std::uint64_t seed) {
    if (size < 2) throw std::invalid_argument("synth_image: size must be at least 2");
    Rng rng(seed);
    Tensor64 img({size, size, 3});
    const double span = size - 1.0;

    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.uniform01();
        c1[c] = rng.uniform01();
    }
    const double grad_angle = rng.uniform(0.0, 2.0 * kPi);
    const double gx = std::cos(grad_angle), gy = std::sin(grad_angle);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            // projection mapped from [-span, span] to [0,1]
            const double t = ((x * gx + y * gy) / span + 1.0) * 0.5;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = c0[c] + (c1[c] - c0[c]) * t;
        }

    const int blobs = rng.uniform_int(1, 4);
    for (int b = 0; b < blobs; ++b) {
        const double bx = rng.uniform(0.0, span), by = rng.uniform(0.0, span);
        const double sigma = rng.uniform(size / 12.0, size / 4.0);
        const double alpha = rng.uniform(0.4, 1.0);
        double col[3];
        for (int c = 0; c < 3; ++c) col[c] = rng.uniform01();
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                const double a = alpha * std::exp(-d2 / (2.0 * sigma * sigma));
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) += (col[c] - img.at(y, x, c)) * a;
            }
    }

    if (rng.uniform01() < 0.7) {
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        const double sx = std::cos(angle), sy = std::sin(angle);
        const double freq = rng.uniform(2.0, 6.0);
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        const double amp = rng.uniform(0.1, 0.3);
        double wch[3];
        for (int c = 0; c < 3; ++c) wch[c] = rng.uniform01();
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double proj = (x * sx + y * sy) / span;
                const double s = amp * std::sin(2.0 * kPi * freq * proj + phase);
                for (int c = 0; c < 3; ++c) img.at(y, x, c) += s * wch[c];
            }
    }

    if (rng.uniform01() < 0.3) {
        const int cell = rng.uniform_int(2, std::max(2, size / 4));
        const double alpha = rng.uniform(0.5, 1.0);
        double ca[3], cb[3];
        for (int c = 0; c < 3; ++c) {
            ca[c] = rng.uniform01();
            cb[c] = rng.uniform01();
        }
        const int x0 = rng.uniform_int(0, size / 2), y0 = rng.uniform_int(0, size / 2);
        const int x1 = rng.uniform_int(x0 + size / 4, size), y1 = rng.uniform_int(y0 + size / 4, size);
        for (int y = y0; y < std::min(y1, size); ++y)
            for (int x = x0; x < std::min(x1, size); ++x) {
                const double* col = ((x / cell) + (y / cell)) % 2 ? ca : cb;
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) += (col[c] - img.at(y, x, c)) * alpha;
            }
    }

    // contrast-stretch so every image (and thus the corpus histogram)
    // spans the full unit range
    double lo = img[0], hi = img[0];
    for (std::int64_t i = 0; i < img.size(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    const double scale = hi - lo > 1e-6 ? 1.0 / (hi - lo) : 1.0;
    for (std::int64_t i = 0; i < img.size(); ++i)
        img[i] = std::clamp((img[i] - lo) * scale, 0.0, 1.0);
    return img;
}

void write_synth_corpus(const std::string& dir, int count, int size, std::uint64_t seed) {
    if (count < 1 || count > 9999)
        throw std::invalid_argument("write_synth_corpus: count must be in [1, 9999]");
    std::filesystem::create_directories(dir);
    for (int k = 0; k < count; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04d.ppm", k);
        const Tensor64 img = synth_image(size, mix_seed(seed, "synth.image", k));
        write_pnm((std::filesystem::path(dir) / name).string(), img);
    }
}

Tensor64 flip_horizontal(const Tensor64& img) {
    if (img.rank() != 3) throw std::invalid_argument("flip_horizontal: expected [h,w,c]");
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    Tensor64 out({h, w, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) out.at(y, x, k) = img.at(y, w - 1 - x, k);
    return out;
}

Tensor64 rotate90(const Tensor64& img, int k) {
    if (img.rank() != 3) throw std::invalid_argument("rotate90: expected [h,w,c]");
    k = ((k % 4) + 4) % 4;
    if (k == 0) return img;
    Tensor64 rot = rotate90(img, k - 1);
    const int h = rot.dim(0), w = rot.dim(1), c = rot.dim(2);
    Tensor64 out({w, h, c});  // quarter turn counterclockwise
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) out.at(w - 1 - x, y, ch) = rot.at(y, x, ch);
    return out;
}

}  // namespace hgin
