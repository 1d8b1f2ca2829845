#pragma once
// Experiment configuration: a sectioned key/value text format mapped onto the
// library's parameter structs. The loader is strict: unknown keys, duplicate
// keys, and malformed values are errors, and every seed has an explicit value
// so reruns never depend on the clock.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isarxai/angle.hpp"
#include "isarxai/common.hpp"
#include "isarxai/imaging.hpp"
#include "isarxai/io.hpp"
#include "isarxai/lrp.hpp"
#include "isarxai/nn.hpp"
#include "isarxai/scene.hpp"
#include "isarxai/tsne.hpp"
#include "isarxai/waveform.hpp"

namespace isarxai {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t lo = s.find_first_not_of(" \t\r");
    if (lo == std::string::npos) return "";
    std::size_t hi = s.find_last_not_of(" \t\r");
    return s.substr(lo, hi - lo + 1);
}

inline double config_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    return v;
}

inline std::uint64_t config_uint(const std::string& key, const std::string& value) {
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    try {
        return std::stoull(value);
    } catch (const std::exception&) {
        throw ConfigError(key + ": integer out of range: '" + value + "'");
    }
}

inline std::size_t config_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(config_uint(key, value));
}

}  // namespace detail

// Lines are `key = value` grouped under `[section]` headers; blank lines and
// lines starting with '#' or ';' are ignored. Returns "section.key" -> value.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos
                                                                     : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        std::string where = "config line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError(where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (section.empty()) throw ConfigError(where + ": key before any [section]");
        std::string full = section + "." + key;
        if (!out.emplace(full, value).second)
            throw ConfigError(where + ": duplicate key " + full);
    }
    return out;
}

// Full parameter set for one experiment. Defaults reproduce the standard
// wideband setup; every field is reachable from the config file.
struct ExperimentConfig {
    ChirpSpec chirp;

    // scene
    double target_scale = 0.8;
    double rotation_rate = 4.0 * kPi;  // rad/s
    double standoff_range = 5.0;       // m
    std::size_t n_pulses = 64;
    std::optional<double> snr_db;  // unset runs noise-free

    ImageGrid grid;

    // dataset
    std::size_t per_class = 100;
    std::size_t image_size = 128;  // square classifier input after resampling
    std::uint64_t simulate_seed = 1;
    AnglePolicy::Kind angle_kind = AnglePolicy::Kind::Random;
    double angle_value_deg = 0.0;  // Fixed: the angle. Sweep: per-item step.

    // training
    TrainConfig train;
    std::size_t train_per_class = 50;
    std::size_t test_per_class = 50;

    LrpConfig lrp;
    TsneConfig tsne;

    std::string output_dir = "out";

    AnglePolicy angle_policy() const {
        switch (angle_kind) {
            case AnglePolicy::Kind::Fixed:
                return AnglePolicy::fixed(deg_to_rad(angle_value_deg));
            case AnglePolicy::Kind::Sweep:
                return AnglePolicy::sweep(deg_to_rad(angle_value_deg));
            default: return AnglePolicy::random();
        }
    }

    std::vector<TargetModel> targets() const {
        return {make_archetype(ArchetypeKind::Uav, target_scale),
                make_archetype(ArchetypeKind::Plane, target_scale),
                make_archetype(ArchetypeKind::Y20, target_scale)};
    }

    MotionState motion() const {
        MotionState m;
        m.rotation_rate = rotation_rate;
        m.standoff_range = standoff_range;
        return m;
    }

    NetworkSpec network_spec() const {
        NetworkSpec spec;
        spec.input_h = image_size;
        spec.input_w = image_size;
        return spec;
    }

    void validate() const {
        chirp.validate();
        require_param(target_scale > 0.0, "ExperimentConfig: target_scale must be positive");
        require_param(n_pulses >= 1, "ExperimentConfig: n_pulses must be positive");
        require_param(per_class >= 1, "ExperimentConfig: per_class must be positive");
        require_param(train_per_class + test_per_class <= per_class,
                      "ExperimentConfig: train + test split exceeds per_class");
        require_param(!output_dir.empty(), "ExperimentConfig: output_dir must not be empty");
        for (const auto& t : targets()) motion().validate(t.extent_radius());
        grid.validate(range_resolution(chirp.bandwidth()));
        network_spec().validate();
        train.validate();
        lrp.validate();
    }
};

// Applies one "section.key" assignment. Unknown keys are errors so typos
// cannot silently fall back to defaults.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::config_double;
    using detail::config_size;
    using detail::config_uint;

    if (key == "chirp.f_start") cfg.chirp.f_start = config_double(key, value);
    else if (key == "chirp.f_stop") cfg.chirp.f_stop = config_double(key, value);
    else if (key == "chirp.pulse_width") cfg.chirp.pulse_width = config_double(key, value);
    else if (key == "chirp.pri") cfg.chirp.pri = config_double(key, value);
    else if (key == "chirp.sample_rate") cfg.chirp.sample_rate = config_double(key, value);

    else if (key == "scene.target_scale") cfg.target_scale = config_double(key, value);
    else if (key == "scene.rotation_rate") cfg.rotation_rate = config_double(key, value);
    else if (key == "scene.standoff_range") cfg.standoff_range = config_double(key, value);
    else if (key == "scene.n_pulses") cfg.n_pulses = config_size(key, value);
    else if (key == "scene.snr_db") {
        if (value == "none") cfg.snr_db.reset();
        else cfg.snr_db = config_double(key, value);
    }

    else if (key == "grid.n_x") cfg.grid.n_x = config_size(key, value);
    else if (key == "grid.n_y") cfg.grid.n_y = config_size(key, value);
    else if (key == "grid.pixel_spacing") cfg.grid.pixel_spacing = config_double(key, value);
    else if (key == "grid.center_x") cfg.grid.center_x = config_double(key, value);
    else if (key == "grid.center_y") cfg.grid.center_y = config_double(key, value);

    else if (key == "dataset.per_class") cfg.per_class = config_size(key, value);
    else if (key == "dataset.image_size") cfg.image_size = config_size(key, value);
    else if (key == "dataset.seed") cfg.simulate_seed = config_uint(key, value);
    else if (key == "dataset.angle_policy") {
        if (value == "random") cfg.angle_kind = AnglePolicy::Kind::Random;
        else if (value == "fixed") cfg.angle_kind = AnglePolicy::Kind::Fixed;
        else if (value == "sweep") cfg.angle_kind = AnglePolicy::Kind::Sweep;
        else throw ConfigError(key + ": expected random, fixed, or sweep");
    } else if (key == "dataset.angle_value_deg") {
        cfg.angle_value_deg = config_double(key, value);
    }

    else if (key == "train.batch_size") cfg.train.batch_size = config_size(key, value);
    else if (key == "train.epochs") cfg.train.epochs = config_size(key, value);
    else if (key == "train.learning_rate") cfg.train.learning_rate = config_double(key, value);
    else if (key == "train.l1_lambda") cfg.train.l1_lambda = config_double(key, value);
    else if (key == "train.seed") cfg.train.seed = config_uint(key, value);
    else if (key == "train.eval_every") cfg.train.eval_every = config_size(key, value);
    else if (key == "train.train_per_class") cfg.train_per_class = config_size(key, value);
    else if (key == "train.test_per_class") cfg.test_per_class = config_size(key, value);

    else if (key == "lrp.epsilon") cfg.lrp.epsilon = config_double(key, value);

    else if (key == "tsne.perplexity") cfg.tsne.perplexity = config_double(key, value);
    else if (key == "tsne.n_iter") cfg.tsne.n_iter = config_size(key, value);
    else if (key == "tsne.learning_rate") cfg.tsne.learning_rate = config_double(key, value);
    else if (key == "tsne.seed") cfg.tsne.rng_seed = config_uint(key, value);

    else if (key == "output.dir") cfg.output_dir = value;

    else throw ConfigError("unknown config key: " + key);
}

inline ExperimentConfig load_config_text(const std::string& text) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : parse_config_text(text)) apply_config_entry(cfg, key, value);
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    return load_config_text(detail::read_file(path));
}

}  // namespace isarxai
