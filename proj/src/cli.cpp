#include "foct/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "foct/checkpoint.hpp"
#include "foct/config.hpp"
#include "foct/data.hpp"
#include "foct/geometry.hpp"
#include "foct/metrics.hpp"
#include "foct/png_io.hpp"
#include "foct/probe.hpp"
#include "foct/trainer.hpp"

namespace foct {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersionString = "foct 1.0.0";

// Flag combinations that CLI11 cannot reject on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string iso_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fnv_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& run_id, const json& resolved) {
    fs::create_directories(out_dir);
    json m;
    m["run_id"] = run_id;
    m["command"] = command;
    m["config"] = resolved;
    m["version"] = kVersionString;
    m["created_utc"] = iso_utc_now();
    std::ofstream out(out_dir + "/manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/manifest.json");
    out << m.dump(2) << "\n";
}

void append_eval_csv(const std::string& path, const std::string& run_id, const std::string& split,
                     const ConfusionCounts& c, const MetricsReport& m) {
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (fresh) out << "run_id,split,tp,fp,fn,tn,precision,recall,f1,iou\n";
    char line[512];
    std::snprintf(line, sizeof(line), "%s,%s,%lld,%lld,%lld,%lld,%.17g,%.17g,%.17g,%.17g\n",
                  run_id.c_str(), split.c_str(), c.tp, c.fp, c.fn, c.tn, m.precision, m.recall,
                  m.f1, m.iou);
    out << line;
}

void print_metrics(const std::string& split, const ConfusionCounts& c, const MetricsReport& m) {
    std::printf("split=%s tp=%lld fp=%lld fn=%lld tn=%lld\n", split.c_str(), c.tp, c.fp, c.fn,
                c.tn);
    std::printf("precision=%.6f recall=%.6f f1=%.6f iou=%.6f degenerate=%d\n", m.precision,
                m.recall, m.f1, m.iou, m.degenerate ? 1 : 0);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0;
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenOpts {
    std::string out;
    int n = 660;
    int val = 100;
    int test = 150;
    double resolution = 1.0;
    std::string ratio = "1:10";
    std::uint64_t seed = 0;
    int patch_size = 128;
    int buildings_min = 3;
    int buildings_max = 7;
    double side_min = 10.0;
    double side_max = 20.0;
    double contrast = 0.35;
    double noise_std = 0.10;
    double shadow = 0.45;
    bool composite = false;
};

int cmd_gen_data(const GenOpts& o) {
    SyntheticSceneSpec spec;
    spec.resolution = o.resolution;
    spec.patch_size = o.patch_size;
    spec.buildings_min = o.buildings_min;
    spec.buildings_max = o.buildings_max;
    spec.side_min_m = o.side_min;
    spec.side_max_m = o.side_max;
    spec.intensity_contrast = o.contrast;
    spec.background_noise_std = o.noise_std;
    spec.shadow_strength = o.shadow;
    spec.composite = o.composite;
    spec.seed = o.seed;
    spec.validate();
    const SplitRatio ratio = parse_ratio(o.ratio);
    const DatasetSplit split = write_dataset(o.out, spec, o.n, o.val, o.test, ratio, o.seed);
    std::printf("out=%s patches=%d patch_size=%d resolution=%g ratio=%s\n", o.out.c_str(),
                o.n + o.val + o.test, o.patch_size, o.resolution, ratio.tag().c_str());
    std::printf("labeled=%zu unlabeled=%zu val=%zu test=%zu\n", split.labeled.size(),
                split.unlabeled.size(), split.val.size(), split.test.size());
    return 0;
}

// ---------------------------------------------------------------------------
// depth
// ---------------------------------------------------------------------------

struct DepthOpts {
    std::string masks;
    double l_min = -1;
    double l_max = -1;
    double resolution = -1;
    int max_depth = 0;
};

// Component statistics over every *.png in a flat directory (sizes may vary).
BuildingLengthStats stats_from_flat_dir(const std::string& dir, double r) {
    double sum_min = 0, sum_max = 0;
    long count = 0;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("depth: no .png masks in " + dir);
    for (const fs::path& p : files) {
        PngImage img = read_png(p.string());
        if (img.channels != 1)
            throw std::runtime_error("depth: mask " + p.string() + " is not grayscale");
        std::vector<std::uint8_t> bin(img.data.size());
        for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = img.data[i] >= 128 ? 1 : 0;
        for (const ComponentBox& b : component_boxes(bin.data(), img.height, img.width)) {
            const double a = b.height_px() * r;
            const double bb = b.width_px() * r;
            sum_min += std::min(a, bb);
            sum_max += std::max(a, bb);
            ++count;
        }
    }
    if (count == 0) throw std::runtime_error("depth: no foreground component in any mask");
    return {sum_min / count, sum_max / count, count};
}

int cmd_depth(const DepthOpts& o) {
    const bool direct = o.l_min >= 0 || o.l_max >= 0;
    if (direct && !o.masks.empty())
        throw UsageError("depth: --masks conflicts with --l-min/--l-max");
    if (!direct && o.masks.empty())
        throw UsageError("depth: give --masks <dir> or both --l-min and --l-max");

    BuildingLengthStats stats;
    double r = o.resolution;
    if (direct) {
        if (o.l_min < 0 || o.l_max < 0)
            throw UsageError("depth: --l-min and --l-max must be given together");
        if (r <= 0) throw UsageError("depth: --resolution is required with --l-min/--l-max");
        stats = {o.l_min, o.l_max, 1};
    } else if (fs::exists(fs::path(o.masks) / "manifest.json")) {
        Dataset data = Dataset::load(o.masks);
        if (r <= 0) r = data.resolution();
        stats = building_length_stats(data.mask_batch(data.split().labeled),
                                      ResolutionSpec{r});
    } else {
        if (r <= 0) throw UsageError("depth: --resolution is required for a plain mask directory");
        stats = stats_from_flat_dir(o.masks, r);
    }

    const DepthSelection sel = select_perturbation_depth(ResolutionSpec{r}, stats, o.max_depth);
    std::printf("depth=%d\n", sel.depth);
    std::printf("log2_value=%.17g\n", sel.log2_value);
    std::printf("l_min_mean=%.17g\n", stats.l_min_mean);
    std::printf("l_max_mean=%.17g\n", stats.l_max_mean);
    std::printf("resolution=%.17g\n", r);
    if (!direct) std::printf("building_count=%ld\n", stats.building_count);
    std::printf("clamped=%d\n", sel.clamped ? 1 : 0);
    const double frac = sel.log2_value - std::floor(sel.log2_value);
    if (frac >= 0.9)
        std::printf("note=log2 value %.3f sits just under the next integer; injecting one level "
                    "deeper (depth %d) can perform better in practice\n",
                    sel.log2_value, static_cast<int>(std::floor(sel.log2_value)) + 1);
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string config;
    std::string data;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int total_iters = -1;
    std::string mode;
    int batch_size = -1;
    int perturb_depth = 0;
    bool depth_set = false;
};

TrainConfig resolve_train_config(const TrainOpts& o) {
    TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
    if (o.seed_set) cfg.seed = o.seed;
    if (o.total_iters >= 0) cfg.total_iters = o.total_iters;
    if (!o.mode.empty()) cfg.mode = mode_from_string(o.mode);
    if (o.batch_size >= 1) cfg.batch_size = o.batch_size;
    if (o.depth_set) cfg.perturb_depth = o.perturb_depth;
    cfg.validate();
    return cfg;
}

int cmd_train(const TrainOpts& o) {
    const TrainConfig cfg = resolve_train_config(o);
    Dataset data = Dataset::load(o.data);
    Trainer trainer(cfg, data);

    const std::string run_id = config_digest(cfg);
    json resolved = json::parse(train_config_to_json_text(cfg));
    resolved["data"] = o.data;
    resolved["resolved_perturb_depth"] = trainer.perturb_depth();
    write_manifest(o.out, "train", run_id, resolved);

    const TrainResult res = trainer.run(o.out);
    std::printf("run_id=%s\n", run_id.c_str());
    std::printf("mode=%s seed=%llu iters=%d perturb_depth=%d\n", to_string(cfg.mode),
                static_cast<unsigned long long>(cfg.seed), cfg.total_iters, res.perturb_depth);
    if (!res.history.empty()) {
        const LossBreakdown& last = res.history.back();
        std::printf("final_l_s=%.6g final_l_cons=%.6g final_total=%.6g\n", last.l_s, last.l_cons,
                    last.total);
    }
    for (const char* split : {"val", "test"}) {
        const ConfusionCounts c = evaluate_confusion(trainer.model(), data,
                                                     split_indices(data, split), cfg.batch_size);
        const MetricsReport m = report(c);
        print_metrics(split, c, m);
        append_eval_csv(o.out + "/eval.csv", run_id, split, c, m);
    }
    std::printf("checkpoint=%s\n", res.checkpoint_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::string out;
    int batch_size = 4;
};

int cmd_eval(const EvalOpts& o) {
    CheckpointRecord rec = load_checkpoint(o.checkpoint);
    Dataset data = Dataset::load(o.data);
    if (rec.config.model.in_channels != 3)
        throw std::runtime_error("eval: checkpoint expects " +
                                 std::to_string(rec.config.model.in_channels) +
                                 " input channels, dataset provides 3");
    if (data.patch_size() % (1 << rec.config.model.depth) != 0)
        throw std::runtime_error("eval: patch size " + std::to_string(data.patch_size()) +
                                 " not divisible by 2^" + std::to_string(rec.config.model.depth));
    const ConfusionCounts c =
        evaluate_confusion(rec.model, data, split_indices(data, o.split), o.batch_size);
    const MetricsReport m = report(c);
    const std::string run_id = config_digest(rec.config);
    std::printf("run_id=%s checkpoint_iteration=%d\n", run_id.c_str(), rec.iteration);
    print_metrics(o.split, c, m);
    if (!o.out.empty()) {
        json resolved;
        resolved["checkpoint"] = o.checkpoint;
        resolved["data"] = o.data;
        resolved["split"] = o.split;
        write_manifest(o.out, "eval", run_id, resolved);
        append_eval_csv(o.out + "/eval.csv", run_id, o.split, c, m);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeOpts {
    std::string data;
    std::string out;
    std::string checkpoint;
    std::string split = "val";
    int depth = 0;
    int limit = 0;
    std::uint64_t seed = 0;
    int band_radius = 2;
};

int cmd_probe(const ProbeOpts& o) {
    Dataset data = Dataset::load(o.data);
    Model<float> model;
    if (!o.checkpoint.empty()) {
        CheckpointRecord rec = load_checkpoint(o.checkpoint);
        model = std::move(rec.model);
    } else {
        model = Model<float>(ModelConfig{});
        model.init(o.seed);
    }
    if (o.depth < 0 || o.depth > model.config().depth)
        throw UsageError("probe: --depth must be in [0, " +
                         std::to_string(model.config().depth) + "]");

    std::vector<int> indices = split_indices(data, o.split);
    if (o.limit > 0 && static_cast<int>(indices.size()) > o.limit) indices.resize(o.limit);

    json resolved;
    resolved["data"] = o.data;
    resolved["split"] = o.split;
    resolved["depth"] = o.depth;
    resolved["checkpoint"] = o.checkpoint;
    resolved["seed"] = o.seed;
    resolved["limit"] = o.limit;
    resolved["band_radius"] = o.band_radius;
    write_manifest(o.out, "probe", fnv_hex("probe" + resolved.dump()), resolved);

    std::ofstream csv(o.out + "/probe.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + o.out + "/probe.csv");
    csv << "id,boundary_mean,interior_mean,boundary_px,interior_px\n";

    const int ps = data.patch_size();
    double sum_boundary = 0, sum_interior = 0;
    for (int i : indices) {
        Tensor<float> x = data.image_batch({i});
        Tensor<float> var;
        if (o.depth == 0) {
            var = local_variation_map(x, ps, ps);
        } else {
            EncoderPass<float> enc;
            model.encoder.forward(x, enc);
            var = local_variation_map(enc.act(o.depth), ps, ps);
        }
        // min-max normalized grayscale heatmap
        const float* v = var.channel(0, 0);
        const std::size_t plane = static_cast<std::size_t>(ps) * ps;
        float lo = v[0], hi = v[0];
        for (std::size_t p = 1; p < plane; ++p) {
            lo = std::min(lo, v[p]);
            hi = std::max(hi, v[p]);
        }
        const float scale = hi > lo ? 255.f / (hi - lo) : 0.f;
        std::vector<std::uint8_t> gray(plane);
        for (std::size_t p = 0; p < plane; ++p)
            gray[p] = static_cast<std::uint8_t>(std::lround((v[p] - lo) * scale));
        write_png_gray8(o.out + "/heatmap_" + data.id(i) + ".png", ps, ps, gray.data());

        const ProbeBandStats s = band_stats(v, data.mask(i).data(), ps, ps, o.band_radius);
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%ld,%ld\n", data.id(i).c_str(),
                      s.boundary_mean, s.interior_mean, s.boundary_px, s.interior_px);
        csv << line;
        sum_boundary += s.boundary_mean;
        sum_interior += s.interior_mean;
    }
    const double n = static_cast<double>(indices.size());
    std::printf("patches=%zu depth=%d\n", indices.size(), o.depth);
    if (!indices.empty())
        std::printf("mean_boundary_variation=%.6g mean_interior_variation=%.6g\n",
                    sum_boundary / n, sum_interior / n);
    return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateOpts {
    std::string config;
    std::string data;
    std::string out;
    std::string seeds = "0,1,2";
    int total_iters = -1;
    int batch_size = -1;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> seeds;
    std::size_t at = 0;
    while (at <= s.size()) {
        const std::size_t comma = std::min(s.find(',', at), s.size());
        const std::string tok = s.substr(at, comma - at);
        if (tok.empty()) throw UsageError("ablate: bad --seeds list \"" + s + "\"");
        try {
            seeds.push_back(std::stoull(tok));
        } catch (const std::exception&) {
            throw UsageError("ablate: bad seed \"" + tok + "\"");
        }
        at = comma + 1;
    }
    if (seeds.empty()) throw UsageError("ablate: --seeds is empty");
    return seeds;
}

int cmd_ablate(const AblateOpts& o) {
    TrainConfig base = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
    if (o.total_iters >= 0) base.total_iters = o.total_iters;
    if (o.batch_size >= 1) base.batch_size = o.batch_size;
    const std::vector<std::uint64_t> seeds = parse_seed_list(o.seeds);
    Dataset data = Dataset::load(o.data);
    fs::create_directories(o.out);

    json resolved = json::parse(train_config_to_json_text(base));
    resolved["data"] = o.data;
    resolved["seeds"] = seeds;
    write_manifest(o.out, "ablate", fnv_hex("ablate" + resolved.dump()), resolved);

    std::ofstream csv(o.out + "/comparison.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + o.out + "/comparison.csv");
    csv << "mode,seed,run_id,split,tp,fp,fn,tn,precision,recall,f1,iou,seconds\n";

    const Mode modes[] = {Mode::semi, Mode::supervised_only, Mode::output_only_consistency,
                          Mode::no_aux_decoder};
    std::map<std::string, std::vector<double>> mode_ious;
    for (const Mode mode : modes) {
        for (const std::uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.mode = mode;
            cfg.seed = seed;
            cfg.validate();
            const std::string run_dir =
                o.out + "/" + to_string(mode) + "_s" + std::to_string(seed);
            const std::string run_id = config_digest(cfg);

            const auto t0 = std::chrono::steady_clock::now();
            Trainer trainer(cfg, data);
            json run_resolved = json::parse(train_config_to_json_text(cfg));
            run_resolved["data"] = o.data;
            run_resolved["resolved_perturb_depth"] = trainer.perturb_depth();
            write_manifest(run_dir, "train", run_id, run_resolved);
            trainer.run(run_dir);
            const ConfusionCounts c = evaluate_confusion(trainer.model(), data,
                                                         data.split().test, cfg.batch_size);
            const MetricsReport m = report(c);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            char line[512];
            std::snprintf(line, sizeof(line),
                          "%s,%llu,%s,test,%lld,%lld,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                          to_string(mode), static_cast<unsigned long long>(seed), run_id.c_str(),
                          c.tp, c.fp, c.fn, c.tn, m.precision, m.recall, m.f1, m.iou, seconds);
            csv << line << std::flush;
            mode_ious[to_string(mode)].push_back(m.iou);
            std::printf("mode=%s seed=%llu test_iou=%.6f seconds=%.1f\n", to_string(mode),
                        static_cast<unsigned long long>(seed), m.iou, seconds);
            std::fflush(stdout);
        }
    }

    std::ofstream summary(o.out + "/summary.csv", std::ios::trunc);
    if (!summary) throw std::runtime_error("cannot write " + o.out + "/summary.csv");
    summary << "mode,median_test_iou\n";
    for (const Mode mode : modes) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.17g\n", to_string(mode),
                      median(mode_ious[to_string(mode)]));
        summary << line;
    }
    const double semi_med = median(mode_ious["semi"]);
    const double sup_med = median(mode_ious["supervised_only"]);
    std::printf("median_semi_iou=%.6f median_supervised_iou=%.6f median_gain=%.6f\n", semi_med,
                sup_med, semi_med - sup_med);
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Consistency-trained binary segmentation on synthetic building footprints"};
    app.require_subcommand(1);

    GenOpts gen;
    CLI::App* g = app.add_subcommand("gen-data", "Generate a synthetic patch dataset");
    g->add_option("--out", gen.out, "Output dataset directory")->required();
    g->add_option("--n", gen.n, "Training-pool patch count (split labeled:unlabeled by --ratio)");
    g->add_option("--val", gen.val, "Validation patch count");
    g->add_option("--test", gen.test, "Test patch count");
    g->add_option("--resolution", gen.resolution, "Meters per pixel");
    g->add_option("--ratio", gen.ratio, "labeled:unlabeled ratio, e.g. 1:10");
    g->add_option("--seed", gen.seed, "Generator seed");
    g->add_option("--patch-size", gen.patch_size, "Patch side length in pixels");
    g->add_option("--buildings-min", gen.buildings_min, "Min buildings per patch");
    g->add_option("--buildings-max", gen.buildings_max, "Max buildings per patch");
    g->add_option("--side-min", gen.side_min, "Min building side, meters");
    g->add_option("--side-max", gen.side_max, "Max building side, meters");
    g->add_option("--contrast", gen.contrast, "Building/background intensity contrast");
    g->add_option("--noise-std", gen.noise_std, "Background noise standard deviation");
    g->add_option("--shadow", gen.shadow, "Depth of smooth illumination blobs");
    g->add_flag("--composite", gen.composite, "Union-of-two-rectangles building shapes");

    DepthOpts dep;
    CLI::App* d = app.add_subcommand("depth", "Select the perturbation injection depth");
    d->add_option("--masks", dep.masks, "Dataset directory or directory of mask PNGs");
    d->add_option("--l-min", dep.l_min, "Mean shorter building side, meters");
    d->add_option("--l-max", dep.l_max, "Mean longer building side, meters");
    d->add_option("--resolution", dep.resolution, "Meters per pixel");
    d->add_option("--max-depth", dep.max_depth, "Clamp result to [1, max-depth]");

    TrainOpts tr;
    CLI::App* t = app.add_subcommand("train", "Train a model");
    t->add_option("--config", tr.config, "JSON config file");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--out", tr.out, "Run output directory")->required();
    CLI::Option* t_seed = t->add_option("--seed", tr.seed, "Override config seed");
    t->add_option("--total-iters", tr.total_iters, "Override iteration count");
    t->add_option("--mode", tr.mode,
                  "Override mode: semi|supervised_only|output_only_consistency|no_aux_decoder");
    t->add_option("--batch-size", tr.batch_size, "Override batch size");
    CLI::Option* t_depth = t->add_option("--perturb-depth", tr.perturb_depth,
                                         "Override injection depth (-1 = auto)");

    EvalOpts ev;
    CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--split", ev.split, "labeled|unlabeled|val|test");
    e->add_option("--out", ev.out, "Optional output directory for eval.csv");
    e->add_option("--batch-size", ev.batch_size, "Inference batch size");

    ProbeOpts pr;
    CLI::App* p = app.add_subcommand("probe", "Local-variation maps of encoder features");
    p->add_option("--data", pr.data, "Dataset directory")->required();
    p->add_option("--out", pr.out, "Output directory")->required();
    p->add_option("--depth", pr.depth, "Encoder depth (0 = raw image)")->required();
    p->add_option("--checkpoint", pr.checkpoint, "Checkpoint file (default: fresh init)");
    p->add_option("--split", pr.split, "Split to probe");
    p->add_option("--limit", pr.limit, "Probe only the first N patches");
    p->add_option("--seed", pr.seed, "Init seed when no checkpoint is given");
    p->add_option("--band-radius", pr.band_radius, "Boundary band radius, pixels");

    AblateOpts ab;
    CLI::App* a = app.add_subcommand("ablate", "Train and compare all four modes");
    a->add_option("--config", ab.config, "JSON config file");
    a->add_option("--data", ab.data, "Dataset directory")->required();
    a->add_option("--out", ab.out, "Output directory")->required();
    a->add_option("--seeds", ab.seeds, "Comma-separated seed list shared across modes");
    a->add_option("--total-iters", ab.total_iters, "Override iteration count");
    a->add_option("--batch-size", ab.batch_size, "Override batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << "error: " << err.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        tr.seed_set = t_seed->count() > 0;
        tr.depth_set = t_depth->count() > 0;
        if (g->parsed()) return cmd_gen_data(gen);
        if (d->parsed()) return cmd_depth(dep);
        if (t->parsed()) return cmd_train(tr);
        if (e->parsed()) return cmd_eval(ev);
        if (p->parsed()) return cmd_probe(pr);
        if (a->parsed()) return cmd_ablate(ab);
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n\n" << app.help() << std::flush;
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    std::cerr << "error: no subcommand given\n\n" << app.help() << std::flush;
    return 1;
}

}  // namespace foct
