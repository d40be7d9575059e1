#include "hgin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

namespace hgin {

namespace {

void require_same_shape(const Tensor64& a, const Tensor64& b, const char* who) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(who) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    if (a.size() == 0) throw std::invalid_argument(std::string(who) + ": empty input");
}

double mse(const Tensor64& a, const Tensor64& b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

// channel-mean grayscale [h,w] from [h,w], [h,w,c], or [1,h,w,c]
Tensor64 to_gray(const Tensor64& img, const char* who) {
    if (img.rank() == 2) return img;
    Tensor64 src = img;
    if (src.rank() == 4) {
        if (src.dim(0) != 1)
            throw std::invalid_argument(std::string(who) + ": batch dimension must be 1, got " +
                                        src.shape_str());
        src = src.reshaped({src.dim(1), src.dim(2), src.dim(3)});
    }
    if (src.rank() != 3)
        throw std::invalid_argument(std::string(who) + ": expected rank 2, 3, or 4, got " +
                                    src.shape_str());
    const int h = src.dim(0), w = src.dim(1), c = src.dim(2);
    Tensor64 gray({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < c; ++k) acc += src.at(y, x, k);
            gray.at(y, x) = acc / c;
        }
    return gray;
}

constexpr int kWin = 11;

// normalized 11x11 Gaussian, sigma 1.5
const double* ssim_window() {
    static double w[kWin * kWin];
    static bool ready = false;
    if (!ready) {
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j) {
                const double dy = i - kWin / 2, dx = j - kWin / 2;
                w[i * kWin + j] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                sum += w[i * kWin + j];
            }
        for (double& v : w) v /= sum;
        ready = true;
    }
    return w;
}

}  // namespace

double psnr(const Tensor64& a, const Tensor64& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Tensor64& a, const Tensor64& b) {
    require_same_shape(a, b, "ssim");
    const Tensor64 ga = to_gray(a, "ssim");
    const Tensor64 gb = to_gray(b, "ssim");
    const int h = ga.dim(0), w = ga.dim(1);
    if (h < kWin || w < kWin)
        throw std::invalid_argument("ssim: image " + std::to_string(h) + "x" +
                                    std::to_string(w) + " is smaller than the 11x11 window");

    const double* win = ssim_window();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double acc = 0.0;
    std::int64_t count = 0;
    for (int y = 0; y + kWin <= h; ++y) {
        for (int x = 0; x + kWin <= w; ++x) {
            double mu_a = 0.0, mu_b = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    mu_a += win[i * kWin + j] * ga.at(y + i, x + j);
                    mu_b += win[i * kWin + j] * gb.at(y + i, x + j);
                }
            double va = 0.0, vb = 0.0, vab = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double da = ga.at(y + i, x + j) - mu_a;
                    const double db = gb.at(y + i, x + j) - mu_b;
                    const double wt = win[i * kWin + j];
                    va += wt * da * da;
                    vb += wt * db * db;
                    vab += wt * da * db;
                }
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * vab + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2);
            acc += num / den;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

double l1_percent(const Tensor64& a, const Tensor64& b) {
    require_same_shape(a, b, "l1_percent");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size()) * 100.0;
}

double l2_percent(const Tensor64& a, const Tensor64& b) {
    require_same_shape(a, b, "l2_percent");
    return mse(a, b) * 100.0;
}

std::string bucket_label(double ratio) {
    int decile = static_cast<int>(std::floor(ratio * 10.0));
    decile = std::clamp(decile, 0, 9);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f-%.1f", decile / 10.0, (decile + 1) / 10.0);
    return buf;
}

std::vector<EvalRow> EvalReport::bucket_means() const {
    std::map<std::string, std::vector<const EvalRow*>> groups;
    for (const EvalRow& r : rows) groups[r.bucket].push_back(&r);
    std::vector<EvalRow> means;
    for (const auto& [bucket, members] : groups) {
        EvalRow m;
        m.id = "mean";
        m.bucket = bucket;
        for (const EvalRow* r : members) {
            m.psnr += r->psnr;
            m.ssim += r->ssim;
            m.l1 += r->l1;
            m.l2 += r->l2;
        }
        const double n = static_cast<double>(members.size());
        m.psnr /= n;
        m.ssim /= n;
        m.l1 /= n;
        m.l2 /= n;
        means.push_back(std::move(m));
    }
    return means;
}

void EvalReport::write_csv(std::ostream& os) const {
    std::vector<const EvalRow*> sorted;
    sorted.reserve(rows.size());
    for (const EvalRow& r : rows) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const EvalRow* a, const EvalRow* b) { return a->id < b->id; });

    auto emit = [&os](const EvalRow& r) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", r.psnr, r.ssim, r.l1, r.l2);
        os << r.id << ',' << r.bucket << ',' << buf << '\n';
    };
    os << "id,bucket,psnr_db,ssim,l1_percent,l2_percent\n";
    for (const EvalRow* r : sorted) emit(*r);
    for (const EvalRow& m : bucket_means()) emit(m);
}

}  // namespace hgin
