#include "hgin/masks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hgin/rng.hpp"

namespace hgin {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Marks every pixel within radius r of the segment (x0,y0)-(x1,y1); a
// zero-length segment stamps a disk.
void stamp_capsule(Tensor64& m, double x0, double y0, double x1, double y1, double r) {
    const int size = m.dim(0);
    const int ylo = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - r)));
    const int yhi = std::min(size - 1, static_cast<int>(std::ceil(std::max(y0, y1) + r)));
    const int xlo = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - r)));
    const int xhi = std::min(size - 1, static_cast<int>(std::ceil(std::max(x0, x1) + r)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = ylo; y <= yhi; ++y) {
        for (int x = xlo; x <= xhi; ++x) {
            double t = 0.0;
            if (len2 > 0.0) {
                t = std::clamp(((x - x0) * dx + (y - y0) * dy) / len2, 0.0, 1.0);
            }
            const double px = x0 + t * dx, py = y0 + t * dy;
            const double ddx = x - px, ddy = y - py;
            if (ddx * ddx + ddy * ddy <= r * r) m.at(y, x, 0) = 1.0;
        }
    }
}

void draw_stroke(Tensor64& m, Rng& rng, const MaskSpec& spec, double width_scale) {
    const int size = spec.image_size;
    const BrushParams& b = spec.brush;
    const double width = rng.uniform(b.width_min, b.width_max) * size * width_scale;
    const double r = std::max(0.5, 0.5 * width);
    const int segments = rng.uniform_int(b.verts_min, b.verts_max);
    double x = rng.uniform(0.0, size - 1.0);
    double y = rng.uniform(0.0, size - 1.0);
    stamp_capsule(m, x, y, x, y, r);
    double angle = rng.uniform(0.0, 2.0 * kPi);
    for (int s = 0; s < segments; ++s) {
        angle += rng.uniform(-b.angle_jitter, b.angle_jitter);
        const double len = rng.uniform(size / 16.0, size / 4.0);
        const double nx = std::clamp(x + len * std::cos(angle), 0.0, size - 1.0);
        const double ny = std::clamp(y + len * std::sin(angle), 0.0, size - 1.0);
        stamp_capsule(m, x, y, nx, ny, r);
        x = nx;
        y = ny;
    }
}

void check_brush_spec(const MaskSpec& spec) {
    const BrushParams& b = spec.brush;
    std::ostringstream bad;
    if (spec.image_size <= 0)
        bad << "image_size must be positive, got " << spec.image_size;
    else if (!(spec.ratio_lo > 0.0 && spec.ratio_lo < spec.ratio_hi && spec.ratio_hi < 1.0))
        bad << "ratio range must satisfy 0 < lo < hi < 1, got [" << spec.ratio_lo << ", "
            << spec.ratio_hi << "]";
    else if (b.strokes_min < 1 || b.strokes_max < b.strokes_min)
        bad << "stroke count range invalid";
    else if (!(b.width_min > 0.0 && b.width_max >= b.width_min && b.width_max < 1.0))
        bad << "stroke width range invalid";
    else if (b.verts_min < 0 || b.verts_max < b.verts_min)
        bad << "vertex count range invalid";
    else if (!(b.angle_jitter >= 0.0))
        bad << "angle jitter must be nonnegative";
    if (!bad.str().empty()) throw std::invalid_argument("brush mask spec: " + bad.str());
}

}  // namespace

Tensor64 gen_center_mask(int size) {
    if (size <= 0 || size % 2 != 0)
        throw std::invalid_argument("center mask needs a positive even size, got " +
                                    std::to_string(size));
    Tensor64 m({size, size, 1});
    const int lo = size / 4, hi = 3 * size / 4;
    for (int y = lo; y < hi; ++y)
        for (int x = lo; x < hi; ++x) m.at(y, x, 0) = 1.0;
    return m;
}

Tensor64 gen_brush_mask(const MaskSpec& spec) {
    check_brush_spec(spec);
    const int size = spec.image_size;
    const int attempts = 64;
    double closest = 0.0;

    for (int attempt = 0; attempt < attempts; ++attempt) {
        Rng rng(mix_seed(spec.seed, "brush.attempt", static_cast<std::uint64_t>(attempt)));
        Tensor64 m({size, size, 1});
        double ratio = 0.0;
        double width_scale = 1.0;
        int rejected = 0;

        const int base = rng.uniform_int(spec.brush.strokes_min, spec.brush.strokes_max);
        for (int s = 0; s < base && ratio < spec.ratio_lo; ++s) {
            draw_stroke(m, rng, spec, width_scale);
            ratio = hole_ratio(m);
        }
        // keep adding strokes until the hole is big enough; roll back any
        // stroke that overshoots and try again with a narrower brush
        for (int guard = 0; ratio < spec.ratio_lo && guard < 500 && rejected < 60; ++guard) {
            Tensor64 snapshot = m;
            const double before = ratio;
            draw_stroke(m, rng, spec, width_scale);
            ratio = hole_ratio(m);
            if (ratio > spec.ratio_hi) {
                m = std::move(snapshot);
                ratio = before;
                width_scale *= 0.6;
                ++rejected;
            }
        }
        if (ratio >= spec.ratio_lo && ratio <= spec.ratio_hi) return m;
        if (std::abs(ratio - spec.ratio_lo) < std::abs(closest - spec.ratio_lo)) closest = ratio;
    }

    std::ostringstream msg;
    msg << "brush mask: could not hit hole ratio [" << spec.ratio_lo << ", " << spec.ratio_hi
        << "] in " << attempts << " attempts; closest achieved ratio " << closest;
    throw std::runtime_error(msg.str());
}

Tensor64 gen_mask(const MaskSpec& spec) {
    if (spec.kind == MaskSpec::Kind::center) return gen_center_mask(spec.image_size);
    return gen_brush_mask(spec);
}

double hole_ratio(const Tensor64& mask) {
    if (mask.size() == 0) throw std::invalid_argument("hole_ratio: empty mask");
    double count = 0.0;
    for (std::int64_t i = 0; i < mask.size(); ++i) count += mask[i];
    return count / static_cast<double>(mask.size());
}

void validate_schedule(const IncrementalSchedule& s) {
    if (s.stages.empty()) throw std::invalid_argument("schedule needs at least one stage");
    for (std::size_t i = 0; i < s.stages.size(); ++i) {
        const ScheduleStage& st = s.stages[i];
        if (st.iterations < 1)
            throw std::invalid_argument("schedule stage " + std::to_string(i) +
                                        ": iterations must be >= 1");
        if (!(st.lo > 0.0 && st.lo < st.hi && st.hi < 1.0))
            throw std::invalid_argument("schedule stage " + std::to_string(i) +
                                        ": ratio range must satisfy 0 < lo < hi < 1");
        if (i > 0 && (st.lo < s.stages[i - 1].lo || st.hi < s.stages[i - 1].hi))
            throw std::invalid_argument("schedule stage " + std::to_string(i) +
                                        ": ratio range shrinks below the previous stage");
    }
}

std::pair<double, double> schedule_step(const IncrementalSchedule& s, std::uint64_t iteration) {
    if (s.stages.empty()) throw std::invalid_argument("schedule needs at least one stage");
    std::uint64_t cum = 0;
    for (const ScheduleStage& st : s.stages) {
        cum += static_cast<std::uint64_t>(st.iterations);
        if (iteration < cum) return {st.lo, st.hi};
    }
    return {s.stages.back().lo, s.stages.back().hi};
}

}  // namespace hgin
