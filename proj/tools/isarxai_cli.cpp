// Command line front end. Subcommands map one-to-one onto the pipeline
// commands; every parameter can come from a config file, and any key can be
// overridden on the command line with --set section.key=value.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "isarxai/config.hpp"
#include "isarxai/parallel.hpp"
#include "isarxai/pipeline.hpp"

namespace {

using namespace isarxai;

ExperimentConfig resolve_config(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = load_config_file(config_path);
    }
    for (const std::string& item : overrides) {
        std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects section.key=value, got '" + item + "'");
        apply_config_entry(cfg, item.substr(0, eq), item.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::string in_output_dir(const ExperimentConfig& cfg, const std::string& explicit_path,
                          const char* default_name) {
    if (!explicit_path.empty()) return explicit_path;
    return (std::filesystem::path(cfg.output_dir) / default_name).string();
}

std::vector<std::pair<double, double>> parse_ranges(const std::string& text) {
    std::vector<std::pair<double, double>> ranges;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
        pos = comma == std::string::npos ? text.size() : comma + 1;
        std::size_t colon = part.find(':');
        if (colon == std::string::npos)
            throw ConfigError("--ranges expects lo:hi pairs, got '" + part + "'");
        ranges.emplace_back(detail::config_double("ranges", part.substr(0, colon)),
                            detail::config_double("ranges", part.substr(colon + 1)));
    }
    if (ranges.empty()) throw ConfigError("--ranges is empty");
    return ranges;
}

std::size_t target_index_of(const std::string& name) {
    if (name == "uav" || name == "0") return 0;
    if (name == "plane" || name == "1") return 1;
    if (name == "y20" || name == "2") return 2;
    throw ConfigError("--target expects uav, plane, or y20");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ISAR imaging, classification, and explanation toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (env ISARXAI_THREADS as fallback)");

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "Experiment config file");
    app.add_option("--set", overrides, "Override a config key: section.key=value");

    auto* sim = app.add_subcommand("simulate", "Generate an image dataset");
    std::string sim_out;
    sim->add_option("--out", sim_out, "Dataset file to write");

    auto* tr = app.add_subcommand("train", "Train the classifier on a dataset");
    std::string tr_dataset, tr_checkpoint, tr_history;
    tr->add_option("--dataset", tr_dataset, "Dataset file")->required();
    tr->add_option("--checkpoint", tr_checkpoint, "Checkpoint file to write");
    tr->add_option("--history", tr_history, "Per-epoch metrics CSV to write");

    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    std::string ev_checkpoint, ev_dataset, ev_out;
    ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint file")->required();
    ev->add_option("--dataset", ev_dataset, "Dataset file")->required();
    ev->add_option("--out", ev_out, "Accuracy and confusion CSV to write");

    auto* ex = app.add_subcommand("explain", "Relevance heatmaps for dataset images");
    std::string ex_checkpoint, ex_dataset, ex_dir;
    std::vector<std::size_t> ex_indices;
    ex->add_option("--checkpoint", ex_checkpoint, "Checkpoint file")->required();
    ex->add_option("--dataset", ex_dataset, "Dataset file")->required();
    ex->add_option("--indices", ex_indices, "Image indices (default: all)")->delimiter(',');
    ex->add_option("--out-dir", ex_dir, "Directory for rasters and the CSV");

    auto* an = app.add_subcommand("angle", "Imaging-angle marking study");
    std::string an_checkpoint, an_target = "uav", an_ranges = "0:90,90:180,180:270,270:360";
    std::string an_out;
    std::size_t an_n = 100;
    an->add_option("--checkpoint", an_checkpoint, "Checkpoint file")->required();
    an->add_option("--target", an_target, "Target to image: uav, plane, or y20");
    an->add_option("--count", an_n, "Number of captures");
    an->add_option("--ranges", an_ranges, "Angle ranges in degrees, lo:hi comma-separated");
    an->add_option("--out", an_out, "Range report CSV to write");

    auto* em = app.add_subcommand("embed", "2-D embedding of classifier outputs");
    std::string em_checkpoint, em_out, em_raster;
    std::vector<std::string> em_datasets;
    em->add_option("--checkpoint", em_checkpoint, "Checkpoint file")->required();
    em->add_option("--dataset", em_datasets, "Dataset files (repeatable)")->required();
    em->add_option("--out", em_out, "Embedding CSV to write");
    em->add_option("--raster", em_raster, "Scatter raster to write");

    auto* rp = app.add_subcommand("report", "Summarize artifacts in a directory");
    std::string rp_dir;
    rp->add_option("--dir", rp_dir, "Artifact directory (default: configured output dir)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) set_thread_count(threads);

        ExperimentConfig cfg = resolve_config(config_path, overrides);
        std::ostream& log = std::cout;

        if (sim->parsed()) {
            cmd_simulate(cfg, in_output_dir(cfg, sim_out, "dataset.ds"), log);
        } else if (tr->parsed()) {
            cmd_train(cfg, tr_dataset, in_output_dir(cfg, tr_checkpoint, "model.ck"),
                      in_output_dir(cfg, tr_history, "history.csv"), log);
        } else if (ev->parsed()) {
            cmd_evaluate(ev_checkpoint, ev_dataset, in_output_dir(cfg, ev_out, "evaluation.csv"),
                         log);
        } else if (ex->parsed()) {
            cmd_explain(ex_checkpoint, ex_dataset, ex_indices,
                        ex_dir.empty() ? cfg.output_dir : ex_dir, cfg.lrp, log);
        } else if (an->parsed()) {
            cmd_angle(cfg, an_checkpoint, target_index_of(an_target), an_n,
                      parse_ranges(an_ranges), in_output_dir(cfg, an_out, "angle.csv"), log);
        } else if (em->parsed()) {
            cmd_embed(em_checkpoint, em_datasets, cfg.tsne,
                      in_output_dir(cfg, em_out, "embed.csv"),
                      in_output_dir(cfg, em_raster, "embed.ppm"), log);
        } else if (rp->parsed()) {
            cmd_report(rp_dir.empty() ? cfg.output_dir : rp_dir, log);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
