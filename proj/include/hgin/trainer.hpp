#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hgin/adam.hpp"
#include "hgin/checkpoint.hpp"
#include "hgin/config.hpp"
#include "hgin/losses.hpp"
#include "hgin/masks.hpp"
#include "hgin/network.hpp"
#include "hgin/params.hpp"
#include "hgin/rng.hpp"
#include "hgin/synth.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

struct StepRecord {
    std::uint64_t iteration = 0;
    double hole = 0, valid = 0, adv = 0, perceptual = 0, edge = 0, total = 0;
    double d_loss = 0;
    double lr = 0;
    double hole_ratio = 0;
    double g_grad_norm = 0, d_grad_norm = 0;
};

inline std::string step_csv_header() {
    return "iteration,hole,valid,adv,perceptual,edge,total,d_loss,lr,hole_ratio,"
           "g_grad_norm,d_grad_norm";
}

inline std::string step_csv_row(const StepRecord& r) {
    char buf[480];
    std::snprintf(buf, sizeof(buf),
                  "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                  static_cast<unsigned long long>(r.iteration), r.hole, r.valid, r.adv,
                  r.perceptual, r.edge, r.total, r.d_loss, r.lr, r.hole_ratio, r.g_grad_norm,
                  r.d_grad_norm);
    return buf;
}

// Resuming requires the same run configuration except for keys that only
// extend or relocate the run. Throws naming the first differing key.
inline void check_resume_config(const std::string& checkpoint_cfg, const std::string& current_cfg) {
    auto to_map = [](const std::string& text) {
        std::map<std::string, std::string> kv;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            const std::size_t eq = line.find('=');
            if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        return kv;
    };
    static const char* ignored[] = {"train_steps", "checkpoint_every", "out_dir"};
    std::map<std::string, std::string> a = to_map(checkpoint_cfg), b = to_map(current_cfg);
    for (const char* k : ignored) {
        a.erase(k);
        b.erase(k);
    }
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        if (it == b.end() || it->second != v)
            throw std::runtime_error(
                "resume: checkpoint was written with a different configuration (key '" + k +
                "': checkpoint has '" + v + "', current run has '" +
                (it == b.end() ? std::string("<missing>") : it->second) + "')");
    }
    for (const auto& [k, v] : b)
        if (!a.count(k))
            throw std::runtime_error("resume: current configuration adds key '" + k +
                                     "' that the checkpoint lacks");
}

template <typename T>
struct Trainer {
    RunConfig cfg;
    std::string config_text;
    IncrementalSchedule schedule;
    std::vector<Tensor64> corpus;

    ParamStore<T> gen_ps, disc_ps;
    Generator<T> gen;
    Discriminator<T> disc;
    AdamOptimizer<T> gen_opt, disc_opt;
    FeatureExtractor<T> features;
    TrainMeta meta;

    Trainer(const RunConfig& config, std::vector<Tensor64> images)
        : cfg(config),
          config_text(serialize_config(config)),
          schedule(parse_schedule(config.schedule)),
          corpus(std::move(images)),
          gen(make_generator(gen_ps, network_config_from(config))),
          disc(make_discriminator(disc_ps, network_config_from(config))),
          features(FeatureExtractor<T>::seeded(config.image_channels,
                                               mix_seed(config.seed, "perceptual"))) {
        if (corpus.empty()) throw std::invalid_argument("trainer: empty corpus");
        for (std::size_t i = 0; i < corpus.size(); ++i)
            if (corpus[i].rank() != 3 || corpus[i].dim(0) != cfg.image_size ||
                corpus[i].dim(1) != cfg.image_size || corpus[i].dim(2) != cfg.image_channels)
                throw std::invalid_argument("trainer: corpus image " + std::to_string(i) +
                                            " is " + corpus[i].shape_str() + ", expected [" +
                                            std::to_string(cfg.image_size) + "," +
                                            std::to_string(cfg.image_size) + "," +
                                            std::to_string(cfg.image_channels) + "]");
        init_params(gen_ps, mix_seed(cfg.seed, "init.gen"));
        init_params(disc_ps, mix_seed(cfg.seed, "init.disc"));
        gen_opt.lr = disc_opt.lr = cfg.lr;
        gen_opt.beta1 = disc_opt.beta1 = cfg.beta1;
        gen_opt.beta2 = disc_opt.beta2 = cfg.beta2;
        meta.seed = cfg.seed;
    }

    void resume(const std::string& checkpoint_path) {
        std::string saved_cfg;
        meta = load_checkpoint<T>(checkpoint_path, gen_ps, disc_ps, gen_opt, disc_opt,
                                  &saved_cfg);
        check_resume_config(saved_cfg, config_text);
    }

    // Ground truth, mask, and zero-filled input for one batch slot. All
    // randomness is keyed on (seed, stream, draw index), so any step can be
    // reproduced in isolation and resumed runs replay the identical data.
    void draw_sample(std::uint64_t draw, double lo, double hi, Tensor64& gt, Tensor64& mask) {
        Rng pick(mix_seed(cfg.seed, "data.pick", draw));
        gt = corpus[static_cast<std::size_t>(
            pick.uniform_int(0, static_cast<int>(corpus.size()) - 1))];
        if (cfg.augment) {
            Rng aug(mix_seed(cfg.seed, "data.aug", draw));
            if (aug.uniform01() < 0.5) gt = flip_horizontal(gt);
            const int quarter_turns = aug.uniform_int(0, 3);
            if (quarter_turns) gt = rotate90(gt, quarter_turns);
        }
        mask = gen_mask(mask_spec_from(cfg, lo, hi, mix_seed(cfg.seed, "mask", draw)));
    }

    StepRecord step() {
        const std::uint64_t iteration = meta.iteration;
        const auto [lo, hi] = schedule_step(schedule, iteration);
        const int b = cfg.batch_size;
        const int s = cfg.image_size;
        const int ch = cfg.image_channels;

        Tensor64 gt_b({b, s, s, ch}), mask_b({b, s, s, 1}), masked_b({b, s, s, ch});
        double ratio_sum = 0.0;
        for (int k = 0; k < b; ++k) {
            Tensor64 gt, mask;
            draw_sample(iteration * static_cast<std::uint64_t>(b) + k, lo, hi, gt, mask);
            ratio_sum += hole_ratio(mask);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    mask_b.at(k, y, x, 0) = mask.at(y, x, 0);
                    for (int c = 0; c < ch; ++c) {
                        gt_b.at(k, y, x, c) = gt.at(y, x, c);
                        masked_b.at(k, y, x, c) = gt.at(y, x, c) * (1.0 - mask.at(y, x, 0));
                    }
                }
        }

        const Tensor<T> gt_t = gt_b.template cast<T>();
        const Tensor<T> mask_t = mask_b.template cast<T>();
        const Tensor<T> masked_t = masked_b.template cast<T>();

        // generator forward first; its refine output, detached, is the
        // discriminator's fake
        Tape<T> tg;
        Value v_masked = tg.constant(masked_t);
        Value v_mask = tg.constant(mask_t);
        Value v_gt = tg.constant(gt_t);
        GeneratorOut<T> out = generator_forward(tg, v_masked, v_mask, gen);
        const Tensor<T> fake = tg.value(out.refine);

        StepRecord rec;
        rec.iteration = iteration;
        rec.lr = gen_opt.lr;
        rec.hole_ratio = ratio_sum / b;

        {
            Tape<T> td;
            Value d_real = discriminator_forward(td, td.constant(gt_t), td.constant(mask_t), disc);
            Value d_fake = discriminator_forward(td, td.constant(fake), td.constant(mask_t), disc);
            Value dl = gan_loss_d(td, d_real, d_fake, cfg.hinge_gan);
            rec.d_loss = static_cast<double>(td.value(dl)[0]);
            abort_unless_finite(iteration, {{"d_loss", rec.d_loss}});
            disc_ps.zero_grads();
            td.backward(dl);
            rec.d_grad_norm = grad_norm(disc_ps);
            disc_opt.step(disc_ps);
        }

        // generator update against the just-updated discriminator
        Value g_logits = discriminator_forward(tg, out.refine, v_mask, disc);
        Value adv = gan_loss_g(tg, g_logits, cfg.hinge_gan);
        auto [hole, valid] = content_loss(tg, out.coarse, out.refine, v_gt, v_mask);
        Value comp = blend(tg, v_gt, out.refine, v_mask);
        Value perc = perceptual_loss(tg, out.refine, comp, v_gt, features);
        Value edge = edge_loss(tg, out.refine, v_gt);
        LossBreakdown lb = total_loss(tg, hole, valid, adv, perc, edge, cfg.weights);

        rec.hole = static_cast<double>(tg.value(lb.hole)[0]);
        rec.valid = static_cast<double>(tg.value(lb.valid)[0]);
        rec.adv = static_cast<double>(tg.value(lb.adv)[0]);
        rec.perceptual = static_cast<double>(tg.value(lb.perceptual)[0]);
        rec.edge = static_cast<double>(tg.value(lb.edge)[0]);
        rec.total = static_cast<double>(tg.value(lb.total)[0]);
        abort_unless_finite(iteration, {{"hole", rec.hole},
                                        {"valid", rec.valid},
                                        {"adv", rec.adv},
                                        {"perceptual", rec.perceptual},
                                        {"edge", rec.edge},
                                        {"total", rec.total}});

        gen_ps.zero_grads();
        tg.backward(lb.total);
        rec.g_grad_norm = grad_norm(gen_ps);
        gen_opt.step(gen_ps);

        ++meta.iteration;
        const std::uint64_t images_seen = meta.iteration * static_cast<std::uint64_t>(b);
        const std::uint64_t epoch_now = images_seen / corpus.size();
        while (meta.epoch < epoch_now) {
            gen_opt.decay_lr(cfg.lr_decay);
            disc_opt.decay_lr(cfg.lr_decay);
            ++meta.epoch;
        }
        return rec;
    }

    // Steps until cfg.train_steps, appending CSV rows and checkpointing on
    // the configured cadence plus once at the end.
    void run(std::ostream& csv) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        while (meta.iteration < static_cast<std::uint64_t>(cfg.train_steps)) {
            StepRecord rec = step();
            csv << step_csv_row(rec) << '\n';
            csv.flush();
            if (meta.iteration % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0)
                save(checkpoint_path(meta.iteration));
        }
        save((fs::path(cfg.out_dir) / "ckpt_final.hgin").string());
    }

    std::string checkpoint_path(std::uint64_t iteration) const {
        char name[40];
        std::snprintf(name, sizeof(name), "ckpt_%06llu.hgin",
                      static_cast<unsigned long long>(iteration));
        return (std::filesystem::path(cfg.out_dir) / name).string();
    }

    void save(const std::string& path) const {
        save_checkpoint<T>(path, config_text, gen_ps, disc_ps, gen_opt, disc_opt, meta);
    }

    static double grad_norm(const ParamStore<T>& ps) {
        double acc = 0.0;
        for (const Parameter<T>* p : ps.all())
            for (std::int64_t i = 0; i < p->grad.size(); ++i) {
                const double g = static_cast<double>(p->grad[i]);
                acc += g * g;
            }
        return std::sqrt(acc);
    }

    static void abort_unless_finite(std::uint64_t iteration,
                                    std::initializer_list<std::pair<const char*, double>> terms) {
        for (const auto& [name, value] : terms) {
            if (std::isfinite(value)) continue;
            std::ostringstream msg;
            msg << "training step " << iteration << ": loss term '" << name
                << "' is non-finite; full dump:";
            for (const auto& [n2, v2] : terms) msg << ' ' << n2 << '=' << v2;
            throw std::runtime_error(msg.str());
        }
    }
};

}  // namespace hgin
