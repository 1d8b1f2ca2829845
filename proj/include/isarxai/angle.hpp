#pragma once
// Imaging-angle marking: match a query range profile against a library of
// static-pose profiles on a 1.25 degree grid and report accuracy per angle
// range.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/imaging.hpp"
#include "isarxai/scene.hpp"
#include "isarxai/waveform.hpp"

namespace isarxai {

constexpr std::size_t kAngleGridSize = 288;
constexpr double kAngleGridStepDeg = 360.0 / static_cast<double>(kAngleGridSize);

// Static-pose range profiles over the full angle grid. Entries are cropped to
// the shared range window [range_lo, range_hi] around the target and
// L2-normalized, so queries must be cropped the same way before comparison.
struct HrrpLibrary {
    std::vector<Hrrp> entries;
    std::vector<double> angles_deg;
    std::string target_name;
    double standoff_range = 0.0;
    double range_lo = 0.0;
    double range_hi = 0.0;

    void validate() const {
        require_param(entries.size() == kAngleGridSize && angles_deg.size() == kAngleGridSize,
                      "HrrpLibrary: expected one entry per grid angle");
        for (std::size_t i = 0; i < angles_deg.size(); ++i) {
            double want = kAngleGridStepDeg * static_cast<double>(i);
            require_param(std::abs(angles_deg[i] - want) < 1e-9,
                          "HrrpLibrary: angles must follow the 1.25 degree grid");
        }
        for (const Hrrp& h : entries)
            require_param(h.bin_spacing == entries[0].bin_spacing &&
                              h.magnitudes.size() == entries[0].magnitudes.size(),
                          "HrrpLibrary: entries must share bin spacing and length");
    }
};

struct AngleMark {
    double angle_deg = 0.0;
    double rmse = 0.0;
    double xcoeff = 0.0;
};

namespace detail {

inline std::vector<double> l2_normalized(const std::vector<double>& v, const char* who) {
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    require_param(norm2 > 0.0, std::string(who) + ": zero-energy profile");
    double inv = 1.0 / std::sqrt(norm2);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
    return out;
}

}  // namespace detail

// Root mean square difference of the two magnitude profiles, each
// L2-normalized first so overall amplitude drops out.
inline double hrrp_rmse(const Hrrp& a, const Hrrp& b) {
    require_param(a.magnitudes.size() == b.magnitudes.size(), "hrrp_rmse: length mismatch");
    std::vector<double> an = detail::l2_normalized(a.magnitudes, "hrrp_rmse");
    std::vector<double> bn = detail::l2_normalized(b.magnitudes, "hrrp_rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < an.size(); ++i) {
        double d = an[i] - bn[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(an.size()));
}

// Peak normalized cross-correlation of the mean-removed magnitude profiles,
// searched over every linear lag. The lag with the largest |correlation| wins
// and its signed value is returned, so an inverted profile reports -1.
inline double xcorr_coeff(const Hrrp& a, const Hrrp& b) {
    require_param(!a.magnitudes.empty() && !b.magnitudes.empty(), "xcorr_coeff: empty profile");
    auto centered = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
        return out;
    };
    std::vector<double> u = centered(a.magnitudes);
    std::vector<double> v = centered(b.magnitudes);
    double eu = 0.0, ev = 0.0, ra = 0.0, rb = 0.0;
    for (double x : u) eu += x * x;
    for (double x : v) ev += x * x;
    for (double x : a.magnitudes) ra += x * x;
    for (double x : b.magnitudes) rb += x * x;
    // Relative floor: mean removal of a constant profile leaves rounding
    // residue, which must still count as zero energy.
    require_param(eu > 1e-24 * ra && ev > 1e-24 * rb,
                  "xcorr_coeff: profile has no structure after mean removal");
    double inv = 1.0 / std::sqrt(eu * ev);

    std::ptrdiff_t nu = static_cast<std::ptrdiff_t>(u.size());
    std::ptrdiff_t nv = static_cast<std::ptrdiff_t>(v.size());
    double best = 0.0;
    double best_abs = -1.0;
    for (std::ptrdiff_t lag = -(nv - 1); lag < nu; ++lag) {
        double acc = 0.0;
        std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, lag);
        std::ptrdiff_t i1 = std::min(nu, nv + lag);
        for (std::ptrdiff_t i = i0; i < i1; ++i) acc += u[i] * v[i - lag];
        double rho = acc * inv;
        if (std::abs(rho) > best_abs) {
            best_abs = std::abs(rho);
            best = rho;
        }
    }
    return std::clamp(best, -1.0, 1.0);
}

// Builds the static-pose reference library: one noise-free pulse per grid
// angle with the target frozen, compressed to a range profile, cropped to the
// target's range span, and L2-normalized.
inline HrrpLibrary build_library(const TargetModel& target, const ChirpSpec& chirp,
                                 double standoff_range = 5.0) {
    target.validate();
    chirp.validate();

    HrrpLibrary lib;
    lib.target_name = target.name;
    lib.standoff_range = standoff_range;
    double spacing = kSpeedOfLight / (2.0 * chirp.sample_rate);
    double reach = target.extent_radius() + 8.0 * spacing;
    lib.range_lo = -reach;
    lib.range_hi = reach;

    lib.entries.reserve(kAngleGridSize);
    lib.angles_deg.reserve(kAngleGridSize);
    for (std::size_t i = 0; i < kAngleGridSize; ++i) {
        double angle = kAngleGridStepDeg * static_cast<double>(i);
        MotionState at_rest;
        at_rest.rotation_rate = 0.0;
        at_rest.initial_angle = deg_to_rad(angle);
        at_rest.standoff_range = standoff_range;
        EchoMatrix m = synthesize_echoes(target, at_rest, chirp, 1, std::nullopt, 0);
        Hrrp h = crop_hrrp(form_hrrp(m.row_series(0), chirp, standoff_range), lib.range_lo,
                           lib.range_hi);
        std::vector<double> norm = detail::l2_normalized(h.magnitudes, "build_library");
        h.magnitudes = std::move(norm);
        lib.entries.push_back(std::move(h));
        lib.angles_deg.push_back(angle);
    }
    lib.validate();
    return lib;
}

// Marks one capture with the grid angle whose library profile has the lowest
// RMSE against the capture's first-echo profile; ties go to the smallest
// angle. The echo must cover the library's range window.
inline AngleMark mark_angle(const ComplexSeries& first_echo, const HrrpLibrary& library,
                            const ChirpSpec& chirp) {
    require_param(!first_echo.samples.empty(), "mark_angle: empty echo");
    library.validate();

    Hrrp query = crop_hrrp(form_hrrp(first_echo, chirp, library.standoff_range), library.range_lo,
                           library.range_hi);
    query.magnitudes = detail::l2_normalized(query.magnitudes, "mark_angle");

    std::size_t best = 0;
    double best_rmse = hrrp_rmse(query, library.entries[0]);
    for (std::size_t i = 1; i < library.entries.size(); ++i) {
        double r = hrrp_rmse(query, library.entries[i]);
        if (r < best_rmse) {
            best_rmse = r;
            best = i;
        }
    }

    AngleMark mark;
    mark.angle_deg = library.angles_deg[best];
    mark.rmse = best_rmse;
    mark.xcoeff = xcorr_coeff(query, library.entries[best]);
    return mark;
}

// One row of the per-angle-range accuracy table. Ranges are half-open
// [lo_deg, hi_deg). accuracy is empty when no sample falls in the range.
struct AngleRangeRow {
    double lo_deg = 0.0;
    double hi_deg = 0.0;
    std::size_t errors = 0;
    std::size_t total = 0;
    std::optional<double> accuracy;
    bool dense = false;     // consecutive marked angles differ by at most one grid step
    bool reliable = false;  // accuracy strictly above the overall accuracy
    bool multi = false;     // every marked angle in the range occurs more than once
};

struct AngleRangeReport {
    std::vector<AngleRangeRow> rows;
    double overall_accuracy = 0.0;
};

// Splits classification results by marked imaging angle. predictions holds
// (true label, predicted label) aligned with marks.
inline AngleRangeReport angle_range_report(const std::vector<AngleMark>& marks,
                                           const std::vector<std::pair<int, int>>& predictions,
                                           const std::vector<std::pair<double, double>>& ranges) {
    require_param(marks.size() == predictions.size(),
                  "angle_range_report: marks and predictions must align");
    require_param(!marks.empty(), "angle_range_report: no samples");
    for (const auto& r : ranges)
        require_param(r.first < r.second, "angle_range_report: empty range");
    std::vector<std::pair<double, double>> sorted = ranges;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i)
        require_param(sorted[i].first >= sorted[i - 1].second,
                      "angle_range_report: ranges overlap");

    std::size_t correct = 0;
    for (const auto& pr : predictions)
        if (pr.first == pr.second) ++correct;
    AngleRangeReport report;
    report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(marks.size());

    for (const auto& range : ranges) {
        AngleRangeRow row;
        row.lo_deg = range.first;
        row.hi_deg = range.second;
        std::vector<double> angles;
        for (std::size_t i = 0; i < marks.size(); ++i) {
            double a = marks[i].angle_deg;
            if (a < range.first || a >= range.second) continue;
            ++row.total;
            if (predictions[i].first != predictions[i].second) ++row.errors;
            angles.push_back(a);
        }
        if (row.total > 0) {
            row.accuracy = static_cast<double>(row.total - row.errors) /
                           static_cast<double>(row.total);
            row.reliable = *row.accuracy > report.overall_accuracy;
            std::sort(angles.begin(), angles.end());
            row.dense = true;
            for (std::size_t i = 1; i < angles.size(); ++i)
                if (angles[i] - angles[i - 1] > kAngleGridStepDeg + 1e-9) row.dense = false;
            row.multi = true;
            for (std::size_t i = 0; i < angles.size();) {
                std::size_t j = i;
                while (j < angles.size() && angles[j] == angles[i]) ++j;
                if (j - i < 2) row.multi = false;
                i = j;
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace isarxai
