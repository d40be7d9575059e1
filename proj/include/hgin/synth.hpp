#pragma once

#include <cstdint>
#include <string>

#include "hgin/tensor.hpp"

namespace hgin {

// Seeded composition of a linear gradient, Gaussian blobs, stripes, and an
// occasional checker patch, contrast-stretched to span [0,1]. [size,size,3].
Tensor64 synth_image(int size, std::uint64_t seed);

// Writes count images as dir/img_0000.ppm ... (count < 10000). Image k uses
// a seed derived from (seed, k), so corpora are reproducible and extendable.
void write_synth_corpus(const std::string& dir, int count, int size, std::uint64_t seed);

// [h,w,c] helpers used for data augmentation; k is quarter turns.
Tensor64 flip_horizontal(const Tensor64& img);
Tensor64 rotate90(const Tensor64& img, int k);

}  // namespace hgin
