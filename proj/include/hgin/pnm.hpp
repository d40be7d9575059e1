#pragma once

#include <string>
#include <vector>

#include "hgin/tensor.hpp"

namespace hgin {

// Binary netpbm only, maxval 255: P5 -> [h,w,1], P6 -> [h,w,3], values v/255.
// Throws on other magics, other maxvals, malformed headers, short payloads.
Tensor64 read_pnm(const std::string& path);

// [h,w] or [h,w,1] writes P5, [h,w,3] writes P6; pixels round(v*255)
// clamped to [0,255]. Non-finite pixels throw.
void write_pnm(const std::string& path, const Tensor64& img);

// P5 mask: bytes >= 128 read as hole (1.0), the rest as 0.0. Shape [h,w,1].
// Masks write through write_pnm, where 1.0 lands on byte 255.
Tensor64 read_mask_pgm(const std::string& path);

// Sorted regular-file names (not paths) in dir with one of the extensions.
std::vector<std::string> list_files(const std::string& dir,
                                    const std::vector<std::string>& extensions);

// Every .ppm/.pgm in dir, sorted by name, each required to be
// size x size x channels. Throws on an empty directory or a misfit image.
std::vector<Tensor64> load_corpus(const std::string& dir, int size, int channels);

}  // namespace hgin
