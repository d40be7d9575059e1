#include "hgin/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace hgin {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error("pnm " + path + ": " + what);
}

// next header integer, skipping whitespace and # comments
int next_int(std::istream& in, const std::string& path, const char* field) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) fail(path, std::string("malformed header: expected ") + field);
    long v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        if (v > 1 << 30) fail(path, std::string(field) + " out of range");
        ch = in.get();
    }
    if (ch != EOF) in.unget();
    return static_cast<int>(v);
}

}  // namespace

Tensor64 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || (m1 != '5' && m1 != '6'))
        fail(path, "unsupported magic (binary P5/P6 only)");
    const int channels = m1 == '5' ? 1 : 3;

    const int w = next_int(in, path, "width");
    const int h = next_int(in, path, "height");
    const int maxval = next_int(in, path, "maxval");
    if (w <= 0 || h <= 0) fail(path, "nonpositive dimensions");
    if (maxval != 255) fail(path, "unsupported maxval " + std::to_string(maxval));
    in.get();  // the single whitespace byte before the payload

    const std::size_t n = static_cast<std::size_t>(w) * h * channels;
    std::vector<unsigned char> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        fail(path, "truncated payload: wanted " + std::to_string(n) + " bytes, got " +
                       std::to_string(in.gcount()));

    Tensor64 img({h, w, channels});
    for (std::size_t i = 0; i < n; ++i) img[static_cast<std::int64_t>(i)] = bytes[i] / 255.0;
    return img;
}

void write_pnm(const std::string& path, const Tensor64& img) {
    Tensor64 src = img;
    if (src.rank() == 2) src = src.reshaped({src.dim(0), src.dim(1), 1});
    if (src.rank() != 3 || (src.dim(2) != 1 && src.dim(2) != 3))
        throw std::invalid_argument("write_pnm " + path + ": expected [h,w], [h,w,1], or [h,w,3], got " +
                                    img.shape_str());
    const int h = src.dim(0), w = src.dim(1), c = src.dim(2);

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << '\n' << 255 << '\n';

    std::vector<unsigned char> bytes(static_cast<std::size_t>(h) * w * c);
    for (std::int64_t i = 0; i < src.size(); ++i) {
        const double v = src[i];
        if (!std::isfinite(v))
            throw std::invalid_argument("write_pnm " + path + ": non-finite pixel at index " +
                                        std::to_string(i));
        const long q = std::lround(v * 255.0);
        bytes[static_cast<std::size_t>(i)] =
            static_cast<unsigned char>(std::clamp(q, 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(path, "write failed");
}

Tensor64 read_mask_pgm(const std::string& path) {
    Tensor64 img = read_pnm(path);
    if (img.dim(2) != 1) fail(path, "mask must be single-channel P5");
    const double threshold = 128.0 / 255.0;
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = img[i] >= threshold ? 1.0 : 0.0;
    return img;
}

std::vector<Tensor64> load_corpus(const std::string& dir, int size, int channels) {
    namespace fs = std::filesystem;
    const auto names = list_files(dir, {".ppm", ".pgm"});
    if (names.empty()) throw std::runtime_error("no .ppm/.pgm images in " + dir);
    std::vector<Tensor64> corpus;
    corpus.reserve(names.size());
    for (const std::string& name : names) {
        Tensor64 img = read_pnm((fs::path(dir) / name).string());
        if (img.dim(0) != size || img.dim(1) != size || img.dim(2) != channels)
            throw std::runtime_error("corpus image " + name + " is " + img.shape_str() +
                                     ", expected [" + std::to_string(size) + "," +
                                     std::to_string(size) + "," + std::to_string(channels) +
                                     "]");
        corpus.push_back(std::move(img));
    }
    return corpus;
}

std::vector<std::string> list_files(const std::string& dir,
                                    const std::vector<std::string>& extensions) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end())
            names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace hgin
