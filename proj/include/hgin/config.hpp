#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgin/losses.hpp"
#include "hgin/masks.hpp"
#include "hgin/network.hpp"

namespace hgin {

enum class ConfigDtype { f32, f64 };

// Flat key=value run configuration. Every field has a default; the parser
// rejects unknown and duplicate keys. Layer tables and the schedule stay in
// their string grammar here so a config echoes back exactly.
struct RunConfig {
    std::uint64_t seed = 1;
    ConfigDtype dtype = ConfigDtype::f64;

    int image_size = 32;
    int image_channels = 3;
    int base_channels = 32;
    bool use_hypergraph = true;
    bool gated_discriminator = true;
    int hg_edges = 0;   // 0 = derive from vertex count
    int hg_embed = 0;   // 0 = derive from channel count
    int hg_window = 7;
    double hg_epsilon = 1e-6;
    std::string coarse_layers;  // e.g. "k3s1d1c32, Uk3s1d1c64"; empty = built-in table
    std::string refine_layers;
    std::string disc_layers;

    LossWeights weights;
    bool hinge_gan = false;

    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lr_decay = 0.96;

    int batch_size = 1;
    std::int64_t train_steps = 500;
    std::int64_t checkpoint_every = 250;
    std::string schedule = "2000:0.02-0.1,2000:0.1-0.2,2000:0.2-0.3,2000:0.3-0.4";
    bool augment = true;

    std::string mask_kind = "brush";  // center|brush
    int brush_strokes_min = 1;
    int brush_strokes_max = 4;
    double brush_width_min = 0.03;
    double brush_width_max = 0.12;
    int brush_verts_min = 0;
    int brush_verts_max = 8;
    double brush_angle_jitter = 0.7;

    std::string data_dir = "data";
    std::string out_dir = "out";
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical form: every key, sorted, doubles in round-trip precision.
std::string serialize_config(const RunConfig& cfg);

// "K:lo-hi,K:lo-hi,..." -> validated schedule
IncrementalSchedule parse_schedule(const std::string& text);

// "k3s1d1c32, Uk5s1d2c16" -> layer specs; U means upsample before the conv
std::vector<GatedConvSpec> parse_layer_table(const std::string& text, Act act);

NetworkConfig network_config_from(const RunConfig& cfg);

// Mask spec for one draw; ratio range comes from the schedule stage.
MaskSpec mask_spec_from(const RunConfig& cfg, double lo, double hi, std::uint64_t seed);

}  // namespace hgin
