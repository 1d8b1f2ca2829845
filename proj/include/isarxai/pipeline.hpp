#pragma once
// End-to-end commands behind the CLI subcommands: simulate, train, evaluate,
// explain, angle, embed, report. Each command returns its in-memory result
// and registers every file it writes with a guard that deletes partial
// outputs if a later step throws.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "isarxai/angle.hpp"
#include "isarxai/config.hpp"
#include "isarxai/imaging.hpp"
#include "isarxai/io.hpp"
#include "isarxai/lrp.hpp"
#include "isarxai/nn.hpp"
#include "isarxai/scene.hpp"
#include "isarxai/tsne.hpp"

namespace isarxai {

// Deletes every tracked path on destruction unless disarmed.
class OutputGuard {
  public:
    OutputGuard() = default;
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;
    ~OutputGuard() {
        if (!armed_) return;
        for (const auto& p : paths_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }
    const std::string& track(const std::string& path) {
        paths_.push_back(path);
        return paths_.back();
    }
    void disarm() { armed_ = false; }

  private:
    std::vector<std::string> paths_;
    bool armed_ = true;
};

namespace detail {

// Shortest decimal digits that round-trip the exact value.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt(float v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }

inline std::string zero_pad(std::size_t v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

inline void ensure_parent_dir(const std::string& path) {
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError(parent.string() + ": cannot create directory");
}

}  // namespace detail

// ---- simulate --------------------------------------------------------------------

struct SimulateResult {
    std::vector<std::size_t> per_class;
    std::size_t total = 0;
};

// Dataset construction without the file write: echoes, back projection,
// peak normalization, bilinear resampling to the classifier input size.
inline StoredDataset build_dataset(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<TargetModel> targets = cfg.targets();

    StoredDataset ds;
    ds.height = cfg.image_size;
    ds.width = cfg.image_size;
    for (const auto& t : targets) ds.class_names.push_back(t.name);
    ds.class_ids.reserve(targets.size() * cfg.per_class);
    ds.pixels.reserve(targets.size() * cfg.per_class * cfg.image_size * cfg.image_size);

    generate_dataset(targets, cfg.motion(), cfg.chirp, cfg.n_pulses, cfg.per_class,
                     cfg.angle_policy(), cfg.snr_db, cfg.simulate_seed,
                     [&](DatasetItem&& item) {
                         IsarImage img = back_projection(item.echoes, cfg.grid);
                         normalize(img);
                         IsarImage small = resample_to(img, cfg.image_size, cfg.image_size);
                         ds.class_ids.push_back(item.class_id);
                         ds.initial_angles.push_back(item.initial_angle);
                         ds.bandwidths.push_back(cfg.chirp.bandwidth());
                         ds.pixels.insert(ds.pixels.end(), small.pixels.begin(),
                                          small.pixels.end());
                     });
    ds.validate();
    return ds;
}

inline SimulateResult cmd_simulate(const ExperimentConfig& cfg, const std::string& out_path,
                                   std::ostream& log) {
    StoredDataset ds = build_dataset(cfg);
    OutputGuard guard;
    detail::ensure_parent_dir(out_path);
    write_dataset(guard.track(out_path), ds);
    guard.disarm();

    SimulateResult res;
    res.per_class.assign(ds.class_names.size(), 0);
    for (int id : ds.class_ids) ++res.per_class[static_cast<std::size_t>(id)];
    res.total = ds.count();
    for (std::size_t c = 0; c < ds.class_names.size(); ++c)
        log << ds.class_names[c] << ": " << res.per_class[c] << " images\n";
    log << "wrote " << res.total << " images to " << out_path << "\n";
    return res;
}

// ---- train -----------------------------------------------------------------------

struct SplitSets {
    ImageSet train;
    ImageSet test;
};

// Deterministic split by file order: per class, the first train_per_class
// items train and the next test_per_class are held out.
inline SplitSets split_dataset(const StoredDataset& ds, std::size_t train_per_class,
                               std::size_t test_per_class, std::size_t n_classes) {
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < ds.count(); ++i) {
        int id = ds.class_ids[i];
        require_param(id >= 0 && static_cast<std::size_t>(id) < n_classes,
                      "split_dataset: class id out of range");
        by_class[static_cast<std::size_t>(id)].push_back(i);
    }
    SplitSets s;
    s.train.height = s.test.height = ds.height;
    s.train.width = s.test.width = ds.width;
    for (std::size_t c = 0; c < n_classes; ++c) {
        require_param(by_class[c].size() >= train_per_class + test_per_class,
                      "split_dataset: class " + std::to_string(c) + " has too few items");
        for (std::size_t k = 0; k < train_per_class; ++k)
            s.train.add(ds.image(by_class[c][k]), static_cast<int>(c));
        for (std::size_t k = 0; k < test_per_class; ++k)
            s.test.add(ds.image(by_class[c][train_per_class + k]), static_cast<int>(c));
    }
    return s;
}

struct TrainOutcome {
    TrainHistory history;
    double final_test_accuracy = 0.0;
};

inline TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::string& dataset_path,
                              const std::string& checkpoint_path, const std::string& history_path,
                              std::ostream& log) {
    cfg.validate();
    StoredDataset ds = read_dataset(dataset_path);
    NetworkSpec spec = cfg.network_spec();
    require_param(ds.height == spec.input_h && ds.width == spec.input_w,
                  "cmd_train: dataset image size does not match the configured input size");
    SplitSets sets = split_dataset(ds, cfg.train_per_class, cfg.test_per_class, spec.n_classes());
    log << "train " << sets.train.size() << " / test " << sets.test.size() << " images\n";

    NetworkState<float> net = initialize_network<float>(spec, cfg.train.seed);
    TrainHistory hist =
        train(net, sets.train, sets.test, cfg.train, [&](std::size_t epoch, const EpochStats& es) {
            log << "epoch " << epoch + 1 << " loss " << detail::fmt(es.train_loss) << " acc "
                << detail::fmt(es.train_accuracy);
            if (es.evaluated) log << " test_acc " << detail::fmt(es.test_accuracy);
            log << "\n";
        });

    OutputGuard guard;
    detail::ensure_parent_dir(checkpoint_path);
    detail::ensure_parent_dir(history_path);
    Checkpoint ck;
    ck.net = std::move(net);
    ck.training_seed = cfg.train.seed;
    ck.epoch = cfg.train.epochs;
    write_checkpoint(guard.track(checkpoint_path), ck);

    CsvTable t;
    t.header = {"epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"};
    for (std::size_t e = 0; e < hist.epochs.size(); ++e) {
        const EpochStats& es = hist.epochs[e];
        t.rows.push_back({detail::fmt(e + 1), detail::fmt(es.train_loss),
                          detail::fmt(es.train_accuracy),
                          es.evaluated ? detail::fmt(es.test_loss) : "",
                          es.evaluated ? detail::fmt(es.test_accuracy) : ""});
    }
    write_csv(guard.track(history_path), t);
    guard.disarm();

    TrainOutcome out;
    out.final_test_accuracy = hist.epochs.back().test_accuracy;
    out.history = std::move(hist);
    log << "final test accuracy " << detail::fmt(out.final_test_accuracy) << "\n";
    return out;
}

// ---- evaluate --------------------------------------------------------------------

inline EvalResult cmd_evaluate(const std::string& checkpoint_path,
                               const std::string& dataset_path, const std::string& csv_path,
                               std::ostream& log) {
    Checkpoint ck = read_checkpoint(checkpoint_path);
    StoredDataset ds = read_dataset(dataset_path);
    require_param(ds.height == ck.net.spec.input_h && ds.width == ck.net.spec.input_w,
                  "cmd_evaluate: dataset image size does not match the checkpoint");
    ImageSet set;
    set.height = ds.height;
    set.width = ds.width;
    for (std::size_t i = 0; i < ds.count(); ++i) set.add(ds.image(i), ds.class_ids[i]);

    EvalResult ev = evaluate(ck.net, set);
    std::size_t k = ck.net.spec.n_classes();

    CsvTable t;
    t.header = {"kind", "true_class", "predicted_class", "value"};
    t.rows.push_back({"accuracy", "", "", detail::fmt(ev.accuracy)});
    t.rows.push_back({"loss", "", "", detail::fmt(ev.loss)});
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            t.rows.push_back({"confusion", detail::fmt(i), detail::fmt(j),
                              detail::fmt(ev.confusion[i * k + j])});
    OutputGuard guard;
    detail::ensure_parent_dir(csv_path);
    write_csv(guard.track(csv_path), t);
    guard.disarm();

    log << "accuracy " << detail::fmt(ev.accuracy) << " over " << set.size() << " images\n";
    return ev;
}

// ---- explain ---------------------------------------------------------------------

struct ExplainRow {
    std::size_t index = 0;
    int true_class = -1;
    int predicted = -1;
    double probability = 0.0;
    double seed_logit = 0.0;
    double relevance_sum = 0.0;
    int reinjected = -1;
    double reinjected_probability = 0.0;
};

// Explains each requested image with the predicted class as the seed, writes
// the input/heatmap rasters plus a combined view, and one CSV row per image
// covering conservation and reinjection.
inline std::vector<ExplainRow> cmd_explain(const std::string& checkpoint_path,
                                           const std::string& dataset_path,
                                           std::vector<std::size_t> indices,
                                           const std::string& out_dir, const LrpConfig& lrp_cfg,
                                           std::ostream& log) {
    lrp_cfg.validate();
    Checkpoint ck = read_checkpoint(checkpoint_path);
    StoredDataset ds = read_dataset(dataset_path);
    require_param(ds.height == ck.net.spec.input_h && ds.width == ck.net.spec.input_w,
                  "cmd_explain: dataset image size does not match the checkpoint");
    if (indices.empty())
        for (std::size_t i = 0; i < ds.count(); ++i) indices.push_back(i);
    for (std::size_t idx : indices)
        require_param(idx < ds.count(), "cmd_explain: image index out of range");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir + ": cannot create directory");

    OutputGuard guard;
    std::vector<ExplainRow> rows;
    CsvTable t;
    t.header = {"index",      "true_class",    "predicted_class",  "probability",
                "seed_logit", "relevance_sum", "reinjected_class", "reinjected_probability"};
    for (std::size_t idx : indices) {
        const float* image = ds.image(idx);
        Tensor<float> logits = forward(ck.net, image);
        std::vector<float> probs(logits.numel());
        softmax(logits, probs.data());

        RelevanceMap map = explain(ck.net, image, lrp_cfg);
        ReinjectResult rj = reinject(ck.net, map);

        ExplainRow row;
        row.index = idx;
        row.true_class = ds.class_ids[idx];
        row.predicted = map.target_class;
        row.probability = static_cast<double>(probs[static_cast<std::size_t>(row.predicted)]);
        row.seed_logit = map.seed_logit;
        for (double v : map.values) row.relevance_sum += v;
        row.reinjected = rj.predicted;
        row.reinjected_probability = rj.probability;
        rows.push_back(row);
        t.rows.push_back({detail::fmt(row.index), detail::fmt(row.true_class),
                          detail::fmt(row.predicted), detail::fmt(row.probability),
                          detail::fmt(row.seed_logit), detail::fmt(row.relevance_sum),
                          detail::fmt(row.reinjected), detail::fmt(row.reinjected_probability)});

        IsarImage gray_img;
        gray_img.height = ds.height;
        gray_img.width = ds.width;
        gray_img.pixels.assign(image, image + ds.height * ds.width);
        std::vector<std::uint8_t> gray = quantize_gray(gray_img);
        RgbImage heat = render_heatmap(map);
        std::string stem = (std::filesystem::path(out_dir) /
                            ("explain_" + detail::zero_pad(idx, 4)))
                               .string();
        write_pgm(guard.track(stem + ".pgm"), gray, ds.height, ds.width);
        write_ppm(guard.track(stem + "_heat.ppm"), heat);
        write_ppm(guard.track(stem + "_pair.ppm"), side_by_side(gray, heat));
    }
    write_csv(guard.track((std::filesystem::path(out_dir) / "explain.csv").string()), t);
    guard.disarm();

    log << "explained " << rows.size() << " images into " << out_dir << "\n";
    return rows;
}

// ---- angle -----------------------------------------------------------------------

struct AngleOutcome {
    AngleRangeReport report;
    std::vector<AngleMark> marks;
    std::vector<double> true_angles_deg;
};

// Builds the reference library for one target, images it at n random poses,
// marks every capture's angle, classifies every image, and writes the
// per-angle-range accuracy table.
inline AngleOutcome cmd_angle(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                              std::size_t target_index, std::size_t n_images,
                              const std::vector<std::pair<double, double>>& ranges,
                              const std::string& csv_path, std::ostream& log) {
    cfg.validate();
    require_param(n_images >= 1, "cmd_angle: n_images must be positive");
    std::vector<TargetModel> targets = cfg.targets();
    require_param(target_index < targets.size(), "cmd_angle: target index out of range");
    const TargetModel& target = targets[target_index];

    Checkpoint ck = read_checkpoint(checkpoint_path);
    require_param(cfg.image_size == ck.net.spec.input_h,
                  "cmd_angle: configured image size does not match the checkpoint");

    HrrpLibrary lib = build_library(target, cfg.chirp, cfg.standoff_range);

    AngleOutcome out;
    std::vector<std::pair<int, int>> predictions;
    Rng base(cfg.simulate_seed);
    for (std::size_t i = 0; i < n_images; ++i) {
        Rng item = base.derive(i);
        double theta0 = item.uniform(0.0, 2.0 * kPi);
        MotionState ms = cfg.motion();
        ms.initial_angle = theta0;
        EchoMatrix echoes = synthesize_echoes(target, ms, cfg.chirp, cfg.n_pulses, cfg.snr_db,
                                              item.next_u64());
        out.marks.push_back(mark_angle(echoes.row_series(0), lib, cfg.chirp));
        out.true_angles_deg.push_back(rad_to_deg(theta0));

        IsarImage img = back_projection(echoes, cfg.grid);
        normalize(img);
        IsarImage small = resample_to(img, cfg.image_size, cfg.image_size);
        Tensor<float> logits = forward(ck.net, small.pixels.data());
        predictions.emplace_back(target.class_id, predicted_class(logits));
    }

    out.report = angle_range_report(out.marks, predictions, ranges);

    CsvTable t;
    t.header = {"lo_deg", "hi_deg", "samples", "errors", "accuracy",
                "dense",  "reliable", "multi"};
    for (const AngleRangeRow& row : out.report.rows)
        t.rows.push_back({detail::fmt(row.lo_deg), detail::fmt(row.hi_deg),
                          detail::fmt(row.total), detail::fmt(row.errors),
                          row.accuracy ? detail::fmt(*row.accuracy) : "",
                          row.dense ? "1" : "0", row.reliable ? "1" : "0",
                          row.multi ? "1" : "0"});
    t.rows.push_back({"", "", detail::fmt(n_images), "",
                      detail::fmt(out.report.overall_accuracy), "", "", ""});
    OutputGuard guard;
    detail::ensure_parent_dir(csv_path);
    write_csv(guard.track(csv_path), t);
    guard.disarm();

    log << "marked " << n_images << " captures of " << target.name << ", overall accuracy "
        << detail::fmt(out.report.overall_accuracy) << "\n";
    return out;
}

// ---- embed -----------------------------------------------------------------------

struct EmbedOutcome {
    Embedding embedding;
    std::vector<std::size_t> dataset_tag;  // source dataset ordinal per point
    std::vector<std::size_t> item_index;   // index within its source dataset
};

// Recognizable fill colors for up to three classes; points from later
// datasets use a darker shade of the same hue.
inline RgbImage scatter_raster(const EmbedOutcome& out, std::size_t side = 512) {
    require_param(out.embedding.size() >= 1, "scatter_raster: empty embedding");
    require_param(side >= 64, "scatter_raster: raster too small");
    double lo_x = out.embedding.points[0], hi_x = lo_x;
    double lo_y = out.embedding.points[1], hi_y = lo_y;
    for (std::size_t i = 0; i < out.embedding.size(); ++i) {
        lo_x = std::min(lo_x, out.embedding.points[2 * i]);
        hi_x = std::max(hi_x, out.embedding.points[2 * i]);
        lo_y = std::min(lo_y, out.embedding.points[2 * i + 1]);
        hi_y = std::max(hi_y, out.embedding.points[2 * i + 1]);
    }
    double span_x = hi_x > lo_x ? hi_x - lo_x : 1.0;
    double span_y = hi_y > lo_y ? hi_y - lo_y : 1.0;

    RgbImage img;
    img.height = img.width = side;
    img.pixels.assign(3 * side * side, 0);
    const std::uint8_t palette[3][3] = {{255, 80, 80}, {80, 255, 80}, {110, 110, 255}};
    const double margin = 12.0;
    const double usable = static_cast<double>(side) - 2.0 * margin;
    for (std::size_t i = 0; i < out.embedding.size(); ++i) {
        double fx = (out.embedding.points[2 * i] - lo_x) / span_x;
        double fy = (out.embedding.points[2 * i + 1] - lo_y) / span_y;
        long cx = std::lround(margin + fx * usable);
        long cy = std::lround(margin + (1.0 - fy) * usable);
        int cls = out.embedding.labels[i];
        std::uint8_t rgb[3] = {128, 128, 128};
        if (cls >= 0 && cls < 3)
            for (int ch = 0; ch < 3; ++ch) {
                double shade = out.dataset_tag[i] == 0 ? 1.0 : 0.55;
                rgb[ch] = static_cast<std::uint8_t>(palette[cls][ch] * shade);
            }
        for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
                long x = cx + dx, y = cy + dy;
                if (x < 0 || y < 0 || x >= static_cast<long>(side) ||
                    y >= static_cast<long>(side))
                    continue;
                std::size_t at = 3 * (static_cast<std::size_t>(y) * side +
                                      static_cast<std::size_t>(x));
                img.pixels[at] = rgb[0];
                img.pixels[at + 1] = rgb[1];
                img.pixels[at + 2] = rgb[2];
            }
    }
    return img;
}

// Runs the classifier over every dataset, embeds the output-layer features in
// 2-D, and writes one CSV row per image plus a scatter raster.
inline EmbedOutcome cmd_embed(const std::string& checkpoint_path,
                              const std::vector<std::string>& dataset_paths,
                              const TsneConfig& tsne_cfg, const std::string& csv_path,
                              const std::string& raster_path, std::ostream& log) {
    require_param(!dataset_paths.empty(), "cmd_embed: no datasets given");
    Checkpoint ck = read_checkpoint(checkpoint_path);

    EmbedOutcome out;
    std::vector<double> features;
    std::vector<int> labels;
    for (std::size_t d = 0; d < dataset_paths.size(); ++d) {
        StoredDataset ds = read_dataset(dataset_paths[d]);
        require_param(ds.height == ck.net.spec.input_h && ds.width == ck.net.spec.input_w,
                      "cmd_embed: dataset image size does not match the checkpoint");
        ImageSet set;
        set.height = ds.height;
        set.width = ds.width;
        for (std::size_t i = 0; i < ds.count(); ++i) set.add(ds.image(i), ds.class_ids[i]);
        std::vector<double> f = extract_output_features(ck.net, set);
        features.insert(features.end(), f.begin(), f.end());
        for (std::size_t i = 0; i < ds.count(); ++i) {
            labels.push_back(ds.class_ids[i]);
            out.dataset_tag.push_back(d);
            out.item_index.push_back(i);
        }
    }

    std::size_t n = labels.size();
    out.embedding = tsne(features, n, ck.net.spec.n_classes(), tsne_cfg, labels);

    CsvTable t;
    t.header = {"dataset", "index", "class_id", "x", "y"};
    for (std::size_t i = 0; i < n; ++i)
        t.rows.push_back({detail::fmt(out.dataset_tag[i]), detail::fmt(out.item_index[i]),
                          detail::fmt(out.embedding.labels[i]),
                          detail::fmt(out.embedding.points[2 * i]),
                          detail::fmt(out.embedding.points[2 * i + 1])});
    OutputGuard guard;
    detail::ensure_parent_dir(csv_path);
    detail::ensure_parent_dir(raster_path);
    write_csv(guard.track(csv_path), t);
    write_ppm(guard.track(raster_path), scatter_raster(out));
    guard.disarm();

    log << "embedded " << n << " images from " << dataset_paths.size() << " datasets\n";
    return out;
}

// ---- report ----------------------------------------------------------------------

// Summarizes whichever known artifacts exist in a directory into report.txt.
// Missing files are skipped; an empty directory still yields a valid report.
inline std::string cmd_report(const std::string& dir, std::ostream& log) {
    namespace fs = std::filesystem;
    std::string text = "artifact summary for " + dir + "\n";

    auto file = [&](const char* name) { return (fs::path(dir) / name).string(); };
    if (fs::exists(file("history.csv"))) {
        CsvTable t = read_csv(file("history.csv"));
        text += "training: " + std::to_string(t.rows.size()) + " epochs";
        if (!t.rows.empty() && t.rows.back().size() >= 5 && !t.rows.back()[4].empty())
            text += ", final test accuracy " + t.rows.back()[4];
        text += "\n";
    }
    if (fs::exists(file("evaluation.csv"))) {
        CsvTable t = read_csv(file("evaluation.csv"));
        for (const auto& row : t.rows)
            if (row.size() >= 4 && row[0] == "accuracy")
                text += "evaluation: accuracy " + row[3] + "\n";
    }
    if (fs::exists(file("explain.csv"))) {
        CsvTable t = read_csv(file("explain.csv"));
        std::size_t kept = 0;
        for (const auto& row : t.rows)
            if (row.size() >= 8 && row[2] == row[6]) ++kept;
        text += "explanations: " + std::to_string(t.rows.size()) + " images, " +
                std::to_string(kept) + " keep their class under reinjection\n";
    }
    if (fs::exists(file("angle.csv"))) {
        CsvTable t = read_csv(file("angle.csv"));
        if (!t.rows.empty() && t.rows.back().size() >= 5)
            text += "angle study: overall accuracy " + t.rows.back()[4] + "\n";
    }
    if (fs::exists(file("embed.csv"))) {
        CsvTable t = read_csv(file("embed.csv"));
        text += "embedding: " + std::to_string(t.rows.size()) + " points\n";
    }

    OutputGuard guard;
    detail::ensure_parent_dir(file("report.txt"));
    detail::write_file(guard.track(file("report.txt")), text);
    guard.disarm();
    log << text;
    return text;
}

}  // namespace isarxai
