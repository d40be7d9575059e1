#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hgin/tensor.hpp"

namespace hgin {

struct BrushParams {
    int strokes_min = 1;  // strokes drawn before the ratio check starts adding more
    int strokes_max = 4;
    double width_min = 0.03;  // stroke diameter as a fraction of image size
    double width_max = 0.12;
    int verts_min = 0;  // zero segments degenerates to a stamped spot
    int verts_max = 8;
    double angle_jitter = 0.7;  // radians of heading change per segment
};

struct MaskSpec {
    enum class Kind { center, brush };
    Kind kind = Kind::brush;
    int image_size = 0;
    double ratio_lo = 0.1;
    double ratio_hi = 0.2;
    BrushParams brush;
    std::uint64_t seed = 0;
};

// [size,size,1], 1 marks the hole; centered square covering exactly a quarter
// of the pixels. Throws on odd or nonpositive size.
Tensor64 gen_center_mask(int size);

// Free-form mask from random-walk capsule strokes and stamped spots. Strokes
// accumulate until the hole ratio reaches ratio_lo; overshooting ratio_hi
// rolls the stroke back and shrinks the brush. Deterministic per seed.
// Throws (reporting the closest achieved ratio) when retries run out.
Tensor64 gen_brush_mask(const MaskSpec& spec);

Tensor64 gen_mask(const MaskSpec& spec);

double hole_ratio(const Tensor64& mask);

struct ScheduleStage {
    std::int64_t iterations = 0;
    double lo = 0.0;
    double hi = 0.0;
};

// Hole-ratio curriculum: each stage holds its ratio range for `iterations`
// steps; past the end the last stage applies forever.
struct IncrementalSchedule {
    std::vector<ScheduleStage> stages;
};

// Rejects empty schedules, stages shorter than one iteration, ranges outside
// (0,1), and ratio ranges that shrink from one stage to the next.
void validate_schedule(const IncrementalSchedule& s);

std::pair<double, double> schedule_step(const IncrementalSchedule& s, std::uint64_t iteration);

}  // namespace hgin
