#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgin/adam.hpp"
#include "hgin/params.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

namespace detail {

// Checkpoints are little-endian on every host, so all multi-byte values go
// through these explicit byte packers.
struct ByteWriter {
    std::string buf;

    void put_bytes(const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    }
    void put_u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_scalar(double v) { put_f64(v); }
    void put_scalar(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
    void put_string(const std::string& s) {
        put_u64(s.size());
        buf.append(s);
    }
};

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    explicit ByteReader(const std::string& b) : buf(b) {}

    void need(std::size_t n) const {
        // written as a subtraction so absurd n from corrupt headers can't overflow
        if (n > buf.size() - pos) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint8_t get_u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
    double get_f64() { return std::bit_cast<double>(get_u64()); }
    void get_scalar(double& v) { v = get_f64(); }
    void get_scalar(float& v) { v = std::bit_cast<float>(get_u32()); }
    std::string get_string() {
        const std::uint64_t n = get_u64();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

template <typename T>
void put_tensor_values(ByteWriter& w, const Tensor<T>& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) w.put_scalar(t[i]);
}

template <typename T>
void get_tensor_values(ByteReader& r, Tensor<T>& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) r.get_scalar(t[i]);
}

template <typename T>
void put_params(ByteWriter& w, const ParamStore<T>& ps) {
    w.put_u32(static_cast<std::uint32_t>(ps.count()));
    for (const Parameter<T>* p : ps.all()) {
        w.put_string(p->name);
        const auto& shape = p->value.shape();
        w.put_u32(static_cast<std::uint32_t>(shape.size()));
        for (int d : shape) w.put_i32(d);
        put_tensor_values(w, p->value);
    }
}

template <typename T>
void get_params(ByteReader& r, ParamStore<T>& ps, const char* section) {
    const std::uint32_t count = r.get_u32();
    if (count != ps.count())
        throw std::runtime_error("checkpoint: " + std::string(section) + " section has " +
                                 std::to_string(count) + " parameters, the network has " +
                                 std::to_string(ps.count()));
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::string name = r.get_string();
        Parameter<T>* p = ps.find(name);
        if (!p)
            throw std::runtime_error("checkpoint: parameter '" + name +
                                     "' does not exist in the network");
        const std::uint32_t rank = r.get_u32();
        std::vector<int> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = r.get_i32();
        if (shape != p->value.shape())
            throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " +
                                     shape_to_string(shape) + ", the network expects " +
                                     p->value.shape_str());
        get_tensor_values(r, p->value);
    }
}

template <typename T>
void put_optimizer(ByteWriter& w, const AdamOptimizer<T>& opt) {
    w.put_f64(opt.lr);
    w.put_f64(opt.beta1);
    w.put_f64(opt.beta2);
    w.put_f64(opt.eps);
    w.put_u64(opt.t);
    w.put_u8(opt.m.empty() ? 0 : 1);
    if (!opt.m.empty()) {
        for (const Tensor<T>& t : opt.m) put_tensor_values(w, t);
        for (const Tensor<T>& t : opt.v) put_tensor_values(w, t);
    }
}

template <typename T>
void get_optimizer(ByteReader& r, AdamOptimizer<T>& opt, const ParamStore<T>& ps) {
    opt.lr = r.get_f64();
    opt.beta1 = r.get_f64();
    opt.beta2 = r.get_f64();
    opt.eps = r.get_f64();
    opt.t = r.get_u64();
    opt.m.clear();
    opt.v.clear();
    if (r.get_u8()) {
        opt.ensure_state(ps);
        for (Tensor<T>& t : opt.m) get_tensor_values(r, t);
        for (Tensor<T>& t : opt.v) get_tensor_values(r, t);
    }
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'H', 'G', 'I', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainMeta {
    std::uint64_t iteration = 0;
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
};

struct CheckpointInfo {
    std::uint32_t version = 0;
    int dtype_bits = 0;
    std::string config_text;
};

template <typename T>
void save_checkpoint(const std::string& path, const std::string& config_text,
                     const ParamStore<T>& gen, const ParamStore<T>& disc,
                     const AdamOptimizer<T>& gen_opt, const AdamOptimizer<T>& disc_opt,
                     const TrainMeta& meta) {
    detail::ByteWriter w;
    w.put_bytes(kCheckpointMagic, 4);
    w.put_u32(kCheckpointVersion);
    w.put_u32(static_cast<std::uint32_t>(sizeof(T) * 8));
    w.put_string(config_text);
    detail::put_params(w, gen);
    detail::put_params(w, disc);
    w.put_u64(meta.iteration);
    w.put_u64(meta.epoch);
    w.put_u64(meta.seed);
    detail::put_optimizer(w, gen_opt);
    detail::put_optimizer(w, disc_opt);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

namespace detail {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

inline void check_header(ByteReader& r, const std::string& path) {
    r.need(4);
    for (char c : kCheckpointMagic)
        if (r.buf[r.pos++] != c)
            throw std::runtime_error("checkpoint " + path + ": bad magic, not a checkpoint");
    const std::uint32_t version = r.get_u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint " + path + ": unknown version " +
                                 std::to_string(version) + ", this build reads version " +
                                 std::to_string(kCheckpointVersion));
}

}  // namespace detail

inline CheckpointInfo read_checkpoint_info(const std::string& path) {
    const std::string buf = detail::slurp(path);
    detail::ByteReader r(buf);
    detail::check_header(r, path);
    CheckpointInfo info;
    info.version = kCheckpointVersion;
    info.dtype_bits = static_cast<int>(r.get_u32());
    info.config_text = r.get_string();
    return info;
}

template <typename T>
TrainMeta load_checkpoint(const std::string& path, ParamStore<T>& gen, ParamStore<T>& disc,
                          AdamOptimizer<T>& gen_opt, AdamOptimizer<T>& disc_opt,
                          std::string* config_text_out = nullptr) {
    const std::string buf = detail::slurp(path);
    detail::ByteReader r(buf);
    detail::check_header(r, path);
    const std::uint32_t bits = r.get_u32();
    if (bits != sizeof(T) * 8)
        throw std::runtime_error("checkpoint " + path + ": stores f" + std::to_string(bits) +
                                 " parameters, this run uses f" +
                                 std::to_string(sizeof(T) * 8));
    const std::string config_text = r.get_string();
    if (config_text_out) *config_text_out = config_text;
    detail::get_params(r, gen, "generator");
    detail::get_params(r, disc, "discriminator");
    TrainMeta meta;
    meta.iteration = r.get_u64();
    meta.epoch = r.get_u64();
    meta.seed = r.get_u64();
    detail::get_optimizer(r, gen_opt, gen);
    detail::get_optimizer(r, disc_opt, disc);
    if (r.pos != buf.size())
        throw std::runtime_error("checkpoint " + path + ": trailing bytes after payload");
    return meta;
}

}  // namespace hgin
