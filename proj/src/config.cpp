#include "hgin/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hgin {

namespace {

[[noreturn]] void bad(const std::string& what) {
    throw std::invalid_argument("config: " + what);
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        bad(key + ": expected a number, got '" + v + "'");
    }
    if (pos != v.size()) bad(key + ": trailing characters in '" + v + "'");
    return d;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long i = 0;
    try {
        i = std::stoll(v, &pos);
    } catch (const std::exception&) {
        bad(key + ": expected an integer, got '" + v + "'");
    }
    if (pos != v.size()) bad(key + ": trailing characters in '" + v + "'");
    return i;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long i = 0;
    try {
        i = std::stoull(v, &pos);
    } catch (const std::exception&) {
        bad(key + ": expected an unsigned integer, got '" + v + "'");
    }
    if (pos != v.size() || (!v.empty() && v[0] == '-'))
        bad(key + ": expected an unsigned integer, got '" + v + "'");
    return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key + ": expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void validate(const RunConfig& c) {
    if (c.image_size <= 0 || c.image_size % 4 != 0)
        bad("image_size must be a positive multiple of 4, got " + std::to_string(c.image_size));
    if (c.image_channels < 1) bad("image_channels must be at least 1");
    if (c.base_channels < 1) bad("base_channels must be at least 1");
    if (c.hg_edges < 0 || c.hg_embed < 0) bad("hg_edges/hg_embed must be nonnegative");
    if (c.hg_window < 1 || c.hg_window % 2 == 0)
        bad("hg_window must be a positive odd number, got " + std::to_string(c.hg_window));
    if (!(c.hg_epsilon > 0.0)) bad("hg_epsilon must be positive");
    try {
        validate_weights(c.weights);
    } catch (const std::invalid_argument& e) {
        bad(std::string("loss weights: ") + e.what());
    }
    if (!(c.lr > 0.0)) bad("lr must be positive");
    if (!(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0))
        bad("beta1/beta2 must lie in (0,1)");
    if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) bad("lr_decay must lie in (0,1]");
    if (c.batch_size < 1) bad("batch_size must be at least 1");
    if (c.train_steps < 1) bad("train_steps must be at least 1");
    if (c.checkpoint_every < 1) bad("checkpoint_every must be at least 1");
    if (c.mask_kind != "center" && c.mask_kind != "brush")
        bad("mask_kind must be center or brush, got '" + c.mask_kind + "'");
    parse_schedule(c.schedule);
    if (!c.coarse_layers.empty()) parse_layer_table(c.coarse_layers, Act::elu);
    if (!c.refine_layers.empty()) parse_layer_table(c.refine_layers, Act::elu);
    if (!c.disc_layers.empty()) parse_layer_table(c.disc_layers, Act::leaky_relu);
    MaskSpec probe = mask_spec_from(c, 0.1, 0.2, 0);
    if (probe.brush.strokes_min < 1 || probe.brush.strokes_max < probe.brush.strokes_min)
        bad("brush stroke count range invalid");
    if (!(probe.brush.width_min > 0.0 && probe.brush.width_max >= probe.brush.width_min &&
          probe.brush.width_max < 1.0))
        bad("brush width range invalid");
    if (probe.brush.verts_min < 0 || probe.brush.verts_max < probe.brush.verts_min)
        bad("brush vertex range invalid");
    if (!(probe.brush.angle_jitter >= 0.0)) bad("brush_angle_jitter must be nonnegative");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
        {"dtype",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "f32")
                 c.dtype = ConfigDtype::f32;
             else if (v == "f64")
                 c.dtype = ConfigDtype::f64;
             else
                 bad(k + ": expected f32 or f64, got '" + v + "'");
         }},
        {"image_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.image_size = static_cast<int>(parse_int(k, v)); }},
        {"image_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.image_channels = static_cast<int>(parse_int(k, v)); }},
        {"base_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.base_channels = static_cast<int>(parse_int(k, v)); }},
        {"use_hypergraph", [](RunConfig& c, const std::string& k, const std::string& v) { c.use_hypergraph = parse_bool(k, v); }},
        {"gated_discriminator", [](RunConfig& c, const std::string& k, const std::string& v) { c.gated_discriminator = parse_bool(k, v); }},
        {"hg_edges", [](RunConfig& c, const std::string& k, const std::string& v) { c.hg_edges = static_cast<int>(parse_int(k, v)); }},
        {"hg_embed", [](RunConfig& c, const std::string& k, const std::string& v) { c.hg_embed = static_cast<int>(parse_int(k, v)); }},
        {"hg_window", [](RunConfig& c, const std::string& k, const std::string& v) { c.hg_window = static_cast<int>(parse_int(k, v)); }},
        {"hg_epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.hg_epsilon = parse_double(k, v); }},
        {"coarse_layers", [](RunConfig& c, const std::string&, const std::string& v) { c.coarse_layers = v; }},
        {"refine_layers", [](RunConfig& c, const std::string&, const std::string& v) { c.refine_layers = v; }},
        {"disc_layers", [](RunConfig& c, const std::string&, const std::string& v) { c.disc_layers = v; }},
        {"loss_hole", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.hole = parse_double(k, v); }},
        {"loss_valid", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.valid = parse_double(k, v); }},
        {"loss_adv", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.adv = parse_double(k, v); }},
        {"loss_perceptual", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.perceptual = parse_double(k, v); }},
        {"loss_edge", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.edge = parse_double(k, v); }},
        {"hinge_gan", [](RunConfig& c, const std::string& k, const std::string& v) { c.hinge_gan = parse_bool(k, v); }},
        {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr = parse_double(k, v); }},
        {"beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta1 = parse_double(k, v); }},
        {"beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta2 = parse_double(k, v); }},
        {"lr_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr_decay = parse_double(k, v); }},
        {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = static_cast<int>(parse_int(k, v)); }},
        {"train_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train_steps = parse_int(k, v); }},
        {"checkpoint_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every = parse_int(k, v); }},
        {"schedule", [](RunConfig& c, const std::string&, const std::string& v) { c.schedule = v; }},
        {"augment", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment = parse_bool(k, v); }},
        {"mask_kind", [](RunConfig& c, const std::string&, const std::string& v) { c.mask_kind = v; }},
        {"brush_strokes_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_strokes_min = static_cast<int>(parse_int(k, v)); }},
        {"brush_strokes_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_strokes_max = static_cast<int>(parse_int(k, v)); }},
        {"brush_width_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_width_min = parse_double(k, v); }},
        {"brush_width_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_width_max = parse_double(k, v); }},
        {"brush_verts_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_verts_min = static_cast<int>(parse_int(k, v)); }},
        {"brush_verts_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_verts_max = static_cast<int>(parse_int(k, v)); }},
        {"brush_angle_jitter", [](RunConfig& c, const std::string& k, const std::string& v) { c.brush_angle_jitter = parse_double(k, v); }},
        {"data_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }},
        {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
    };
    return table;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            bad("line " + std::to_string(lineno) + ": expected key=value, got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            bad("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            bad("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        seen.push_back(key);
        it->second(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const RunConfig& c) {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(c.seed);
    kv["dtype"] = c.dtype == ConfigDtype::f32 ? "f32" : "f64";
    kv["image_size"] = std::to_string(c.image_size);
    kv["image_channels"] = std::to_string(c.image_channels);
    kv["base_channels"] = std::to_string(c.base_channels);
    kv["use_hypergraph"] = c.use_hypergraph ? "true" : "false";
    kv["gated_discriminator"] = c.gated_discriminator ? "true" : "false";
    kv["hg_edges"] = std::to_string(c.hg_edges);
    kv["hg_embed"] = std::to_string(c.hg_embed);
    kv["hg_window"] = std::to_string(c.hg_window);
    kv["hg_epsilon"] = fmt_double(c.hg_epsilon);
    kv["coarse_layers"] = c.coarse_layers;
    kv["refine_layers"] = c.refine_layers;
    kv["disc_layers"] = c.disc_layers;
    kv["loss_hole"] = fmt_double(c.weights.hole);
    kv["loss_valid"] = fmt_double(c.weights.valid);
    kv["loss_adv"] = fmt_double(c.weights.adv);
    kv["loss_perceptual"] = fmt_double(c.weights.perceptual);
    kv["loss_edge"] = fmt_double(c.weights.edge);
    kv["hinge_gan"] = c.hinge_gan ? "true" : "false";
    kv["lr"] = fmt_double(c.lr);
    kv["beta1"] = fmt_double(c.beta1);
    kv["beta2"] = fmt_double(c.beta2);
    kv["lr_decay"] = fmt_double(c.lr_decay);
    kv["batch_size"] = std::to_string(c.batch_size);
    kv["train_steps"] = std::to_string(c.train_steps);
    kv["checkpoint_every"] = std::to_string(c.checkpoint_every);
    kv["schedule"] = c.schedule;
    kv["augment"] = c.augment ? "true" : "false";
    kv["mask_kind"] = c.mask_kind;
    kv["brush_strokes_min"] = std::to_string(c.brush_strokes_min);
    kv["brush_strokes_max"] = std::to_string(c.brush_strokes_max);
    kv["brush_width_min"] = fmt_double(c.brush_width_min);
    kv["brush_width_max"] = fmt_double(c.brush_width_max);
    kv["brush_verts_min"] = std::to_string(c.brush_verts_min);
    kv["brush_verts_max"] = std::to_string(c.brush_verts_max);
    kv["brush_angle_jitter"] = fmt_double(c.brush_angle_jitter);
    kv["data_dir"] = c.data_dir;
    kv["out_dir"] = c.out_dir;

    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    return out.str();
}

IncrementalSchedule parse_schedule(const std::string& text) {
    IncrementalSchedule sched;
    std::istringstream in(text);
    std::string entry;
    while (std::getline(in, entry, ',')) {
        entry = trim(entry);
        if (entry.empty()) bad("schedule: empty stage in '" + text + "'");
        const std::size_t colon = entry.find(':');
        const std::size_t dash = entry.find('-', colon == std::string::npos ? 0 : colon);
        if (colon == std::string::npos || dash == std::string::npos)
            bad("schedule: stage '" + entry + "' is not K:lo-hi");
        ScheduleStage st;
        st.iterations = parse_int("schedule K", trim(entry.substr(0, colon)));
        st.lo = parse_double("schedule lo", trim(entry.substr(colon + 1, dash - colon - 1)));
        st.hi = parse_double("schedule hi", trim(entry.substr(dash + 1)));
        sched.stages.push_back(st);
    }
    try {
        validate_schedule(sched);
    } catch (const std::invalid_argument& e) {
        bad(std::string("schedule '") + text + "': " + e.what());
    }
    return sched;
}

std::vector<GatedConvSpec> parse_layer_table(const std::string& text, Act act) {
    std::vector<GatedConvSpec> table;
    std::istringstream in(text);
    std::string entry;
    while (std::getline(in, entry, ',')) {
        entry = trim(entry);
        if (entry.empty()) bad("layer table: empty entry in '" + text + "'");
        GatedConvSpec spec;
        spec.act = act;
        std::size_t i = 0;
        if (entry[i] == 'U') {
            spec.upsample_before = true;
            ++i;
        }
        auto field = [&](char tag) {
            if (i >= entry.size() || entry[i] != tag)
                bad("layer table entry '" + entry + "': expected '" + std::string(1, tag) +
                    "' at position " + std::to_string(i));
            ++i;
            if (i >= entry.size() || !std::isdigit(static_cast<unsigned char>(entry[i])))
                bad("layer table entry '" + entry + "': expected digits after '" +
                    std::string(1, tag) + "'");
            int v = 0;
            while (i < entry.size() && std::isdigit(static_cast<unsigned char>(entry[i]))) {
                v = v * 10 + (entry[i] - '0');
                if (v > 1 << 20) bad("layer table entry '" + entry + "': value out of range");
                ++i;
            }
            return v;
        };
        spec.kernel = field('k');
        spec.stride = field('s');
        spec.dilation = field('d');
        spec.c_out = field('c');
        if (i != entry.size()) bad("layer table entry '" + entry + "': trailing characters");
        if (spec.kernel % 2 == 0)
            bad("layer table entry '" + entry + "': kernel must be odd");
        if (spec.kernel < 1 || spec.stride < 1 || spec.dilation < 1 || spec.c_out < 1)
            bad("layer table entry '" + entry + "': fields must be positive");
        table.push_back(spec);
    }
    if (table.empty()) bad("layer table '" + text + "' is empty");
    return table;
}

NetworkConfig network_config_from(const RunConfig& c) {
    NetworkConfig net;
    net.base_channels = c.base_channels;
    net.input_resolution = c.image_size;
    net.image_channels = c.image_channels;
    net.use_hypergraph = c.use_hypergraph;
    net.gated_discriminator = c.gated_discriminator;
    net.hypergraph.hyperedges = c.hg_edges;
    net.hypergraph.embed_channels = c.hg_embed;
    net.hypergraph.window = c.hg_window;
    net.hypergraph.epsilon = c.hg_epsilon;
    if (!c.coarse_layers.empty()) net.coarse_layers = parse_layer_table(c.coarse_layers, Act::elu);
    if (!c.refine_layers.empty()) net.refine_layers = parse_layer_table(c.refine_layers, Act::elu);
    if (!c.disc_layers.empty()) net.disc_layers = parse_layer_table(c.disc_layers, Act::leaky_relu);
    return net;
}

MaskSpec mask_spec_from(const RunConfig& c, double lo, double hi, std::uint64_t seed) {
    MaskSpec spec;
    spec.kind = c.mask_kind == "center" ? MaskSpec::Kind::center : MaskSpec::Kind::brush;
    spec.image_size = c.image_size;
    spec.ratio_lo = lo;
    spec.ratio_hi = hi;
    spec.seed = seed;
    spec.brush.strokes_min = c.brush_strokes_min;
    spec.brush.strokes_max = c.brush_strokes_max;
    spec.brush.width_min = c.brush_width_min;
    spec.brush.width_max = c.brush_width_max;
    spec.brush.verts_min = c.brush_verts_min;
    spec.brush.verts_max = c.brush_verts_max;
    spec.brush.angle_jitter = c.brush_angle_jitter;
    return spec;
}

}  // namespace hgin
