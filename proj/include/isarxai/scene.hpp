#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/rng.hpp"
#include "isarxai/waveform.hpp"

namespace isarxai {

// Ideal point scatterer in the target body frame. x is slant range (toward the
// radar at angle 0), y is cross range, both in meters.
struct Scatterer {
    double x = 0.0;
    double y = 0.0;
    double amplitude = 1.0;
};

struct TargetModel {
    std::string name;
    int class_id = 0;
    std::vector<Scatterer> scatterers;

    double extent_radius() const {
        double r = 0.0;
        for (const auto& s : scatterers) r = std::max(r, std::hypot(s.x, s.y));
        return r;
    }

    void validate() const {
        require_param(!scatterers.empty(), "TargetModel: no scatterers");
        for (const auto& s : scatterers)
            require_param(s.amplitude >= 0.0, "TargetModel: negative amplitude");
    }
};

enum class ArchetypeKind { Uav, Plane, Y20 };

// Fixed point-scatterer layouts for the three target classes, scaled to fit a
// scale x scale bounding box. The quadcopter's corner returns are deliberately
// unequal; with four identical corners the layout is invariant under 90-degree
// rotations and aspect angles could not be told apart from range profiles.
inline TargetModel make_archetype(ArchetypeKind kind, double scale) {
    require_param(scale > 0.0, "make_archetype: scale must be positive");
    TargetModel t;
    const double s = scale;
    switch (kind) {
        case ArchetypeKind::Uav: {
            t.name = "uav";
            t.class_id = 0;
            t.scatterers = {
                {0.0, 0.0, 1.3},
                {0.35 * s, 0.35 * s, 1.0},
                {-0.35 * s, 0.35 * s, 0.85},
                {-0.35 * s, -0.35 * s, 1.15},
                {0.35 * s, -0.35 * s, 0.7},
            };
            break;
        }
        case ArchetypeKind::Plane: {
            t.name = "plane";
            t.class_id = 1;
            // Triangle outline: nose, leading edges, wingtips, trailing edge.
            std::vector<Scatterer> pts = {
                {0.40 * s, 0.0, 1.2},
                {0.25 * s, 0.07 * s, 1.0},  {0.25 * s, -0.07 * s, 1.0},
                {0.10 * s, 0.14 * s, 1.0},  {0.10 * s, -0.14 * s, 1.0},
                {-0.05 * s, 0.21 * s, 1.0}, {-0.05 * s, -0.21 * s, 1.0},
                {-0.20 * s, 0.28 * s, 1.0}, {-0.20 * s, -0.28 * s, 1.0},
                {-0.35 * s, 0.35 * s, 1.0}, {-0.35 * s, -0.35 * s, 1.0},
                {-0.35 * s, 0.175 * s, 1.0}, {-0.35 * s, -0.175 * s, 1.0},
                {-0.35 * s, 0.0, 1.0},
            };
            // Shift so the point centroid sits exactly at the rotation center.
            double mx = 0.0, my = 0.0;
            for (const auto& p : pts) { mx += p.x; my += p.y; }
            mx /= static_cast<double>(pts.size());
            my /= static_cast<double>(pts.size());
            for (auto& p : pts) { p.x -= mx; p.y -= my; }
            t.scatterers = std::move(pts);
            break;
        }
        case ArchetypeKind::Y20: {
            t.name = "y20";
            t.class_id = 2;
            t.scatterers = {
                // fuselage nose to tail
                {0.45 * s, 0.0, 1.2},
                {0.30 * s, 0.0, 1.0}, {0.15 * s, 0.0, 1.0}, {0.0, 0.0, 1.0},
                {-0.15 * s, 0.0, 1.0}, {-0.30 * s, 0.0, 1.0}, {-0.45 * s, 0.0, 1.0},
                // swept wings
                {0.0, 0.12 * s, 1.0}, {0.0, -0.12 * s, 1.0},
                {-0.10 * s, 0.24 * s, 1.0}, {-0.10 * s, -0.24 * s, 1.0},
                {-0.20 * s, 0.36 * s, 1.0}, {-0.20 * s, -0.36 * s, 1.0},
                {-0.30 * s, 0.48 * s, 1.0}, {-0.30 * s, -0.48 * s, 1.0},
                // tailplane
                {-0.42 * s, 0.12 * s, 1.0}, {-0.42 * s, -0.12 * s, 1.0},
            };
            break;
        }
    }
    return t;
}

inline std::vector<Scatterer> rotate(const std::vector<Scatterer>& pts, double angle_rad) {
    double c = std::cos(angle_rad), sn = std::sin(angle_rad);
    std::vector<Scatterer> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        out[i].x = pts[i].x * c - pts[i].y * sn;
        out[i].y = pts[i].x * sn + pts[i].y * c;
        out[i].amplitude = pts[i].amplitude;
    }
    return out;
}

// Uniform rotation about the body origin, observed from standoff_range along
// the -x axis of the angle-0 frame. Stop-and-hop: geometry is frozen per pulse.
struct MotionState {
    double rotation_rate = 4.0 * kPi;  // rad/s
    double initial_angle = 0.0;        // rad
    double standoff_range = 5.0;       // m

    void validate(double target_extent) const {
        require_param(standoff_range > 0.0, "MotionState: standoff_range must be positive");
        require_param(standoff_range > target_extent,
                      "MotionState: standoff_range must exceed the target extent");
    }
};

// Fast-time sampling window shared by every pulse. start is receiver time of
// sample 0 measured from each pulse's own transmit instant.
struct ReceiveWindow {
    double start = 0.0;
    size_t n_samples = 0;
};

struct EchoMatrix {
    std::vector<cd> data;  // n_pulses rows, n_samples columns, row-major
    size_t n_pulses = 0;
    size_t n_samples = 0;
    double window_start = 0.0;
    ChirpSpec chirp;
    MotionState motion;
    std::vector<double> pulse_angles;  // rad, absolute body angle per pulse

    std::span<const cd> row(size_t p) const {
        return {data.data() + p * n_samples, n_samples};
    }
    std::span<cd> row(size_t p) { return {data.data() + p * n_samples, n_samples}; }

    ComplexSeries row_series(size_t p) const {
        auto r = row(p);
        return ComplexSeries{{r.begin(), r.end()}, chirp.sample_rate, window_start};
    }
};

// Window that covers every possible scatterer delay plus the full pulse, with
// an 8-sample guard, snapped to the sample grid so window_start*fs is integral.
inline ReceiveWindow default_receive_window(const TargetModel& target, const MotionState& motion,
                                            const ChirpSpec& chirp) {
    double ext = target.extent_radius();
    double tau_min = 2.0 * (motion.standoff_range - ext) / kSpeedOfLight;
    double tau_max = 2.0 * (motion.standoff_range + ext) / kSpeedOfLight;
    double fs = chirp.sample_rate;
    double start = (std::floor(tau_min * fs) - 8.0) / fs;
    double stop = tau_max + chirp.pulse_width;
    size_t n = static_cast<size_t>(std::ceil(stop * fs) - std::floor(tau_min * fs)) + 16;
    return ReceiveWindow{start, n};
}

namespace detail {

// Accumulates amp * chirp(t - tau) * exp(-j*2*pi*fc*tau) into row for the
// window time grid t_n = t0 + n/fs. Uses the split
//   chirp(t - tau) = q(t) * exp(-j*2*pi*K*tau*(t - Tp/2)) * exp(j*pi*K*tau^2)
// where q(t) = chirp(t) recentered, precomputed once per matrix. The middle
// factor is geometric in n and advances by one complex multiply per sample;
// it is re-anchored with exact trig every 1024 steps to stop drift.
inline void add_scatterer_echo(std::span<cd> row, const std::vector<cd>& q, double t0, double fs,
                               const ChirpSpec& chirp, double tau, double amp) {
    const double k = chirp.chirp_rate();
    const double tp = chirp.pulse_width;
    const double fc = chirp.center_frequency();
    ptrdiff_t n0 = static_cast<ptrdiff_t>(std::ceil((tau - t0) * fs - 1e-9));
    ptrdiff_t n1 = static_cast<ptrdiff_t>(std::ceil((tau + tp - t0) * fs - 1e-9));
    n0 = std::max<ptrdiff_t>(n0, 0);
    n1 = std::min<ptrdiff_t>(n1, static_cast<ptrdiff_t>(row.size()));
    if (n0 >= n1) return;

    double const_ph = kPi * k * tau * tau - 2.0 * kPi * fc * tau;
    cd a = amp * cd(std::cos(const_ph), std::sin(const_ph));
    double step_ph = -2.0 * kPi * k * tau / fs;
    cd ratio(std::cos(step_ph), std::sin(step_ph));
    auto anchor = [&](ptrdiff_t n) {
        double u = t0 + static_cast<double>(n) / fs - 0.5 * tp;
        double ph = -2.0 * kPi * k * tau * u;
        return cd(std::cos(ph), std::sin(ph));
    };
    cd g = anchor(n0);
    for (ptrdiff_t n = n0; n < n1; ++n) {
        row[static_cast<size_t>(n)] += a * q[static_cast<size_t>(n)] * g;
        g *= ratio;
        if (((n - n0) & 1023) == 1023) g = anchor(n + 1);
    }
}

}  // namespace detail

// Raw slow-time/fast-time echo matrix for a rotating target. Geometry is
// far-field planar: round-trip delay of a scatterer rotated to x' is
// 2*(R0 + x')/c. Optional complex white Gaussian noise at snr_db relative to
// the mean per-sample signal power; one derived stream per pulse keeps the
// result identical no matter how rows are processed.
inline EchoMatrix synthesize_echoes(const TargetModel& target, const MotionState& motion,
                                    const ChirpSpec& chirp, size_t n_pulses,
                                    std::optional<double> snr_db, uint64_t rng_seed,
                                    std::optional<ReceiveWindow> window = std::nullopt) {
    chirp.validate();
    target.validate();
    motion.validate(target.extent_radius());
    require_param(n_pulses >= 1, "synthesize_echoes: need at least one pulse");

    ReceiveWindow win = window ? *window : default_receive_window(target, motion, chirp);
    require_param(win.n_samples >= 2, "synthesize_echoes: receive window too short");

    EchoMatrix m;
    m.n_pulses = n_pulses;
    m.n_samples = win.n_samples;
    m.window_start = win.start;
    m.chirp = chirp;
    m.motion = motion;
    m.data.assign(n_pulses * win.n_samples, cd{});
    m.pulse_angles.resize(n_pulses);

    const double fs = chirp.sample_rate;
    const double k = chirp.chirp_rate();
    const double tp = chirp.pulse_width;
    // Recentered transmit chirp evaluated on the window grid (support ignored;
    // add_scatterer_echo indexes only the samples inside each echo's support).
    std::vector<cd> q(win.n_samples);
    for (size_t n = 0; n < win.n_samples; ++n) {
        double u = win.start + static_cast<double>(n) / fs - 0.5 * tp;
        double ph = kPi * k * u * u;
        q[n] = cd(std::cos(ph), std::sin(ph));
    }

    const double angle_step = motion.rotation_rate * chirp.pri;
    for (size_t p = 0; p < n_pulses; ++p) {
        double theta = motion.initial_angle + angle_step * static_cast<double>(p);
        m.pulse_angles[p] = theta;
        double c = std::cos(theta), sn = std::sin(theta);
        auto row = m.row(p);
        for (const auto& sc : target.scatterers) {
            double xr = sc.x * c - sc.y * sn;
            double tau = 2.0 * (motion.standoff_range + xr) / kSpeedOfLight;
            detail::add_scatterer_echo(row, q, win.start, fs, chirp, tau, sc.amplitude);
        }
    }

    if (snr_db) {
        double power = 0.0;
        for (const cd& v : m.data) power += std::norm(v);
        power /= static_cast<double>(m.data.size());
        double sigma2 = power * std::pow(10.0, -(*snr_db) / 10.0);
        double s = std::sqrt(0.5 * sigma2);
        Rng base(rng_seed);
        for (size_t p = 0; p < n_pulses; ++p) {
            Rng rp = base.derive(p);
            auto row = m.row(p);
            for (auto& v : row) {
                double z0, z1;
                rp.normal_pair(z0, z1);
                v += cd(s * z0, s * z1);
            }
        }
    }
    return m;
}

// Initial-aspect policy for dataset generation.
struct AnglePolicy {
    enum class Kind { Random, Fixed, Sweep };
    Kind kind = Kind::Random;
    double value = 0.0;  // Fixed: the angle (rad). Sweep: per-item increment (rad).

    static AnglePolicy random() { return {Kind::Random, 0.0}; }
    static AnglePolicy fixed(double angle_rad) { return {Kind::Fixed, angle_rad}; }
    static AnglePolicy sweep(double step_rad) { return {Kind::Sweep, step_rad}; }
};

struct DatasetItem {
    EchoMatrix echoes;
    int class_id = 0;
    double initial_angle = 0.0;
    size_t index = 0;  // position within the dataset
};

// Streams n_per_target echo matrices per target to the sink in a fixed order
// (targets outer, items inner). Every random draw comes from a per-item stream
// derived from seed and the item's global index, so any subset of items can be
// regenerated independently and the output never depends on scheduling.
inline void generate_dataset(const std::vector<TargetModel>& targets, const MotionState& motion,
                             const ChirpSpec& chirp, size_t n_pulses, size_t n_per_target,
                             AnglePolicy policy, std::optional<double> snr_db, uint64_t seed,
                             const std::function<void(DatasetItem&&)>& sink) {
    require_param(!targets.empty(), "generate_dataset: no targets");
    require_param(n_per_target >= 1, "generate_dataset: n_per_target must be positive");
    Rng base(seed);
    for (size_t t = 0; t < targets.size(); ++t) {
        for (size_t i = 0; i < n_per_target; ++i) {
            size_t idx = t * n_per_target + i;
            Rng item_rng = base.derive(idx);
            double theta0 = 0.0;
            switch (policy.kind) {
                case AnglePolicy::Kind::Random: theta0 = item_rng.uniform(0.0, 2.0 * kPi); break;
                case AnglePolicy::Kind::Fixed: theta0 = policy.value; break;
                case AnglePolicy::Kind::Sweep: theta0 = policy.value * static_cast<double>(i); break;
            }
            MotionState ms = motion;
            ms.initial_angle = theta0;
            uint64_t echo_seed = item_rng.next_u64();
            DatasetItem item;
            item.echoes = synthesize_echoes(targets[t], ms, chirp, n_pulses, snr_db, echo_seed);
            item.class_id = targets[t].class_id;
            item.initial_angle = theta0;
            item.index = idx;
            sink(std::move(item));
        }
    }
}

inline std::vector<DatasetItem> generate_dataset(const std::vector<TargetModel>& targets,
                                                 const MotionState& motion, const ChirpSpec& chirp,
                                                 size_t n_pulses, size_t n_per_target,
                                                 AnglePolicy policy, std::optional<double> snr_db,
                                                 uint64_t seed) {
    std::vector<DatasetItem> out;
    out.reserve(targets.size() * n_per_target);
    generate_dataset(targets, motion, chirp, n_pulses, n_per_target, policy, snr_db, seed,
                     [&](DatasetItem&& item) { out.push_back(std::move(item)); });
    return out;
}

}  // namespace isarxai
