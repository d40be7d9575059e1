// Command-line front end: train, inpaint, eval, gradcheck, make-masks,
// synth-data. Exit codes: 0 success, 1 validation failure, 2 usage error.
// Diagnostics go to standard error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "hgin/checkpoint.hpp"
#include "hgin/config.hpp"
#include "hgin/gradcheck_suites.hpp"
#include "hgin/masks.hpp"
#include "hgin/metrics.hpp"
#include "hgin/network.hpp"
#include "hgin/pnm.hpp"
#include "hgin/synth.hpp"
#include "hgin/trainer.hpp"

namespace fs = std::filesystem;
using namespace hgin;

namespace {

// Caller mistakes that the flag parser cannot catch (exit 2, like parse
// errors), as opposed to validation failures in otherwise well-formed
// requests (exit 1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadedNets {
    ParamStore<double> gen_ps, disc_ps;
    Generator<double> gen;
    Discriminator<double> disc;
    TrainMeta meta;

    LoadedNets(const RunConfig& cfg, const std::string& ckpt_path)
        : gen(make_generator(gen_ps, network_config_from(cfg))),
          disc(make_discriminator(disc_ps, network_config_from(cfg))) {
        AdamOptimizer<double> gen_opt, disc_opt;
        meta = load_checkpoint<double>(ckpt_path, gen_ps, disc_ps, gen_opt, disc_opt);
    }
};

RunConfig config_of_checkpoint(const std::string& ckpt_path) {
    return parse_config_text(read_checkpoint_info(ckpt_path).config_text);
}

// Forward pass on one [h,w,c] image with an [h,w,1] mask; returns the
// blended completion and the coarse pass, both [h,w,c].
std::pair<Tensor64, Tensor64> complete_one(const LoadedNets& nets, const Tensor64& gt_or_input,
                                           const Tensor64& mask) {
    const int h = gt_or_input.dim(0), w = gt_or_input.dim(1), c = gt_or_input.dim(2);
    Tensor64 masked({1, h, w, c}), m4({1, h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            m4.at(0, y, x, 0) = mask.at(y, x, 0);
            for (int k = 0; k < c; ++k)
                masked.at(0, y, x, k) = gt_or_input.at(y, x, k) * (1.0 - mask.at(y, x, 0));
        }
    Tape64 t;
    GeneratorOut<double> out =
        generator_forward(t, t.constant(masked), t.constant(m4), nets.gen);
    Tensor64 blended = t.value(out.blended);
    Tensor64 coarse = t.value(out.coarse);
    return {blended.reshaped({h, w, c}), coarse.reshaped({h, w, c})};
}

template <typename T>
int run_train(const RunConfig& cfg, const std::string& resume_path) {
    std::vector<Tensor64> corpus =
        load_corpus(cfg.data_dir, cfg.image_size, cfg.image_channels);
    std::cerr << "loaded " << corpus.size() << " images from " << cfg.data_dir << "\n";
    Trainer<T> tr(cfg, std::move(corpus));
    if (!resume_path.empty()) {
        tr.resume(resume_path);
        std::cerr << "resumed from " << resume_path << " at iteration " << tr.meta.iteration
                  << "\n";
    }
    fs::create_directories(cfg.out_dir);
    const fs::path csv_path = fs::path(cfg.out_dir) / "train_log.csv";
    const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
    if (fresh) csv << step_csv_header() << '\n';
    tr.run(csv);
    std::cerr << "finished at iteration " << tr.meta.iteration << "; log " << csv_path.string()
              << ", final checkpoint " << (fs::path(cfg.out_dir) / "ckpt_final.hgin").string()
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume_path) {
    RunConfig cfg = parse_config_file(config_path);
    if (cfg.dtype == ConfigDtype::f32) return run_train<float>(cfg, resume_path);
    return run_train<double>(cfg, resume_path);
}

int cmd_inpaint(const std::string& ckpt, const std::string& image_path,
                const std::string& mask_path, const std::string& out_path, bool emit_coarse) {
    Tensor64 image = read_pnm(image_path);
    Tensor64 mask = read_mask_pgm(mask_path);
    if (image.dim(0) != mask.dim(0) || image.dim(1) != mask.dim(1))
        throw UsageError("image " + image_path + " is " + image.shape_str() + " but mask " +
                         mask_path + " is " + mask.shape_str() +
                         "; their sizes must agree");
    RunConfig cfg = config_of_checkpoint(ckpt);
    if (image.dim(2) != cfg.image_channels)
        throw std::runtime_error("checkpoint expects " + std::to_string(cfg.image_channels) +
                                 "-channel images, got " + image.shape_str());
    LoadedNets nets(cfg, ckpt);
    auto [blended, coarse] = complete_one(nets, image, mask);
    write_pnm(out_path, blended);
    std::cerr << "wrote " << out_path << "\n";
    if (emit_coarse) {
        fs::path p(out_path);
        fs::path coarse_path = p.parent_path() / (p.stem().string() + "_coarse" +
                                                  p.extension().string());
        write_pnm(coarse_path.string(), coarse);
        std::cerr << "wrote " << coarse_path.string() << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& images_dir,
             const std::string& masks_dir, const std::string& report_path) {
    std::vector<std::string> images = list_files(images_dir, {".ppm", ".pgm"});
    std::vector<std::string> masks = list_files(masks_dir, {".pgm"});
    if (images.empty()) throw std::runtime_error("no images found in " + images_dir);
    if (images.size() != masks.size())
        throw std::runtime_error("image/mask count mismatch: " + std::to_string(images.size()) +
                                 " images in " + images_dir + ", " +
                                 std::to_string(masks.size()) + " masks in " + masks_dir +
                                 " (pairs are matched in sorted order)");

    RunConfig cfg = config_of_checkpoint(ckpt);
    LoadedNets nets(cfg, ckpt);

    EvalReport report;
    for (std::size_t i = 0; i < images.size(); ++i) {
        Tensor64 gt = read_pnm((fs::path(images_dir) / images[i]).string());
        Tensor64 mask = read_mask_pgm((fs::path(masks_dir) / masks[i]).string());
        if (gt.dim(0) != mask.dim(0) || gt.dim(1) != mask.dim(1))
            throw std::runtime_error("pair " + images[i] + " / " + masks[i] +
                                     " disagrees in size: " + gt.shape_str() + " vs " +
                                     mask.shape_str());
        auto [blended, coarse] = complete_one(nets, gt, mask);
        (void)coarse;
        EvalRow row;
        row.id = fs::path(images[i]).stem().string();
        row.bucket = bucket_label(hole_ratio(mask));
        row.psnr = psnr(blended, gt);
        row.ssim = ssim(blended, gt);
        row.l1 = l1_percent(blended, gt);
        row.l2 = l2_percent(blended, gt);
        report.rows.push_back(std::move(row));
    }

    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot open " + report_path + " for writing");
    report.write_csv(out);
    std::cerr << "wrote " << report.rows.size() << " rows to " << report_path << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& module) {
    std::vector<SuiteResult> results = run_gradcheck_suites(module);
    bool ok = true;
    for (const SuiteResult& r : results) {
        std::cout << format_suite_result(r) << "\n";
        ok = ok && r.passed();
    }
    if (!ok) std::cerr << "gradient check failed\n";
    return ok ? 0 : 1;
}

int cmd_make_masks(const std::string& kind, const std::string& ratio, int n,
                   std::uint64_t seed, const std::string& out_dir, int size) {
    const std::size_t colon = ratio.find(':');
    if (colon == std::string::npos)
        throw UsageError("--ratio wants lo:hi, got '" + ratio + "'");
    double lo = 0, hi = 0;
    try {
        lo = std::stod(ratio.substr(0, colon));
        hi = std::stod(ratio.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("--ratio wants numeric lo:hi, got '" + ratio + "'");
    }
    fs::create_directories(out_dir);
    for (int k = 0; k < n; ++k) {
        MaskSpec spec;
        spec.kind = kind == "center" ? MaskSpec::Kind::center : MaskSpec::Kind::brush;
        spec.image_size = size;
        spec.ratio_lo = lo;
        spec.ratio_hi = hi;
        spec.seed = mix_seed(seed, "cli.mask", static_cast<std::uint64_t>(k));
        Tensor64 m = gen_mask(spec);
        char name[32];
        std::snprintf(name, sizeof(name), "mask_%04d.pgm", k);
        write_pnm((fs::path(out_dir) / name).string(), m);
    }
    std::cerr << "wrote " << n << " " << kind << " masks to " << out_dir << "\n";
    return 0;
}

int cmd_synth_data(int n, int size, std::uint64_t seed, const std::string& out_dir) {
    write_synth_corpus(out_dir, n, size, seed);
    std::cerr << "wrote " << n << " synthetic images to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypergraph-convolution image inpainting"};
    app.require_subcommand(1);

    std::string config_path, resume_path;
    auto* train = app.add_subcommand("train", "run curriculum training from a config file");
    train->add_option("--config", config_path, "key=value run configuration")->required();
    train->add_option("--resume", resume_path, "checkpoint to continue from");

    std::string ckpt, image_path, mask_path, out_path;
    bool emit_coarse = false;
    auto* inpaint = app.add_subcommand("inpaint", "complete one masked image");
    inpaint->add_option("--ckpt", ckpt, "trained checkpoint")->required();
    inpaint->add_option("--image", image_path, "input image (PPM/PGM)")->required();
    inpaint->add_option("--mask", mask_path, "hole mask (PGM, hole >= 128)")->required();
    inpaint->add_option("--out", out_path, "output image path")->required();
    inpaint->add_flag("--emit-coarse", emit_coarse, "also write the coarse pass");

    std::string images_dir, masks_dir, report_path;
    auto* eval = app.add_subcommand("eval", "score a directory of image/mask pairs");
    eval->add_option("--ckpt", ckpt, "trained checkpoint")->required();
    eval->add_option("--images", images_dir, "directory of ground-truth images")->required();
    eval->add_option("--masks", masks_dir, "directory of masks, paired in sorted order")
        ->required();
    eval->add_option("--report", report_path, "CSV report to write")->required();

    std::string module = "all";
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    gradcheck->add_option("--module", module, "which suite to run")
        ->check(CLI::IsMember({"all", "hypergraph", "gated", "losses"}));

    std::string kind, ratio = "0.1:0.2", masks_out;
    int n = 1, size = 32;
    std::uint64_t seed = 1;
    auto* make_masks = app.add_subcommand("make-masks", "generate hole masks");
    make_masks->add_option("--kind", kind, "mask family")
        ->required()
        ->check(CLI::IsMember({"center", "brush"}));
    make_masks->add_option("--ratio", ratio, "target hole ratio window lo:hi");
    make_masks->add_option("--n", n, "how many masks")->required();
    make_masks->add_option("--seed", seed, "base seed");
    make_masks->add_option("--out", masks_out, "output directory")->required();
    make_masks->add_option("--size", size, "mask side length");

    int sd_n = 1, sd_size = 32;
    std::uint64_t sd_seed = 1;
    std::string sd_out;
    auto* synth = app.add_subcommand("synth-data", "generate a synthetic training corpus");
    synth->add_option("--n", sd_n, "how many images")->required();
    synth->add_option("--size", sd_size, "image side length");
    synth->add_option("--seed", sd_seed, "base seed");
    synth->add_option("--out", sd_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(train)) return cmd_train(config_path, resume_path);
        if (app.got_subcommand(inpaint))
            return cmd_inpaint(ckpt, image_path, mask_path, out_path, emit_coarse);
        if (app.got_subcommand(eval))
            return cmd_eval(ckpt, images_dir, masks_dir, report_path);
        if (app.got_subcommand(gradcheck)) return cmd_gradcheck(module);
        if (app.got_subcommand(make_masks))
            return cmd_make_masks(kind, ratio, n, seed, masks_out, size);
        if (app.got_subcommand(synth)) return cmd_synth_data(sd_n, sd_size, sd_seed, sd_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
