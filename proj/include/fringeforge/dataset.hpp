#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fringeforge/phase.hpp"
#include "fringeforge/tensor.hpp"
#include "fringeforge/threading.hpp"
#include "fringeforge/unwrap.hpp"

namespace fringeforge {

/// Clamp to [0, phase_max] and divide by phase_max.
inline Tensor normalize_phase(const PhaseMap& p, double phase_max = 12.0) {
    Tensor t = grid_to_tensor(p.grid);
    double* d = t.mut();
    for (std::int64_t i = 0; i < t.numel(); ++i) d[i] = std::clamp(d[i], 0.0, phase_max) / phase_max;
    return t;
}

/// Inverse of normalize_phase on the [0,1] domain.
inline PhaseMap denormalize_phase(const Tensor& t, double phase_max = 12.0) {
    PhaseMap p{tensor_to_grid(t), false};
    for (double& v : p.grid.v) v *= phase_max;
    return p;
}

/// Peak signal-to-noise ratio on the normalized [0,1] domain (peak 1).
/// A zero-MSE match reports the 99 dB sentinel.
inline double psnr(const Tensor& pred, const Tensor& gt) {
    check_same_shape(pred, gt, "psnr");
    double acc = 0.0;
    const double* a = pred.data();
    const double* b = gt.data();
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    const double mse_v = acc / static_cast<double>(pred.numel());
    if (mse_v <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse_v));
}

/// PSNR restricted to the interior after dropping a border margin.
inline double psnr_interior(const Grid& pred, const Grid& gt, std::int64_t margin, double peak) {
    if (pred.h != gt.h || pred.w != gt.w) throw std::invalid_argument("psnr_interior: shape mismatch");
    double acc = 0.0;
    std::int64_t n = 0;
    for (std::int64_t y = margin; y < pred.h - margin; ++y) {
        for (std::int64_t x = margin; x < pred.w - margin; ++x) {
            const double d = pred.at(y, x) - gt.at(y, x);
            acc += d * d;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("psnr_interior: margin leaves no pixels");
    const double mse_v = acc / static_cast<double>(n);
    if (mse_v <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / mse_v));
}

enum class LabelMode {
    Analytic,  // ground truth is the synthetic phase itself
    Classical  // ground truth recovered by demodulate + unwrap + compensate
};

/// Interferogram / normalized-phase pairs with disjoint covering splits.
struct Dataset {
    std::vector<std::pair<Tensor, Tensor>> pairs;  // (interferogram, gt in [0,1])
    std::vector<int> train_idx, val_idx, test_idx;
    double phase_max = 12.0;
    FringeSpec fringe;
    AberrationSpec aberration;

    std::int64_t image_size() const { return pairs.empty() ? 0 : pairs.front().first.shape().h(); }
};

struct DatasetParams {
    int count = 48;
    std::int64_t size = 64;
    FringeSpec fringe{};
    AberrationSpec aberration{};
    std::uint64_t seed = 1;
    std::array<double, 3> split{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
    LabelMode labels = LabelMode::Analytic;
    double phase_max = 12.0;
    int min_blobs = 3;
    int max_blobs = 8;
    double demod_radius = 0.0;  // classical labels; 0 = default mask
};

/// One synthetic pair: blob phase, fringe rendering, normalized label.
inline std::pair<Tensor, Tensor> make_pair(const DatasetParams& p, std::uint64_t image_seed,
                                           const PhaseMap* calibration) {
    Rng rng(derive_seed(image_seed, 0xda7a));
    const int blobs = p.min_blobs +
                      static_cast<int>(rng.next_u64() %
                                       static_cast<std::uint64_t>(p.max_blobs - p.min_blobs + 1));
    PhaseMap phi = synth_phase(p.size, p.size, blobs, p.phase_max, image_seed);
    Interferogram ig = render_interferogram(phi, p.aberration, p.fringe, image_seed);

    Tensor label;
    if (p.labels == LabelMode::Analytic) {
        label = normalize_phase(phi, p.phase_max);
    } else {
        PhaseMap wrapped = fourier_demodulate(ig, p.fringe, p.demod_radius);
        PhaseMap unwrapped = unwrap(wrapped, goldstein_branch_cuts(detect_residues(wrapped)));
        label = normalize_phase(compensate(unwrapped, *calibration), p.phase_max);
    }
    return {grid_to_tensor(ig.grid), label};
}

inline Dataset make_dataset(const DatasetParams& p) {
    if (p.count < 3) throw std::invalid_argument("make_dataset: need at least 3 pairs to split");
    if (std::abs(p.split[0] + p.split[1] + p.split[2] - 1.0) > 1e-9)
        throw std::invalid_argument("make_dataset: split fractions must sum to 1");
    p.fringe.validate(p.size, p.size);

    Dataset ds;
    ds.phase_max = p.phase_max;
    ds.fringe = p.fringe;
    ds.aberration = p.aberration;
    ds.pairs.resize(static_cast<std::size_t>(p.count));

    // For classical labels the sample-free calibration frame is demodulated
    // and unwrapped once, then subtracted from every sample.
    PhaseMap calibration;
    if (p.labels == LabelMode::Classical) {
        PhaseMap flat = synth_phase(p.size, p.size, 0, p.phase_max, p.seed);
        Interferogram calib_ig = render_interferogram(flat, p.aberration, p.fringe, derive_seed(p.seed, 0xca1b));
        PhaseMap wrapped = fourier_demodulate(calib_ig, p.fringe, p.demod_radius);
        calibration = unwrap(wrapped, goldstein_branch_cuts(detect_residues(wrapped)));
    }

    parallel_for(p.count, [&](std::int64_t i) {
        ds.pairs[static_cast<std::size_t>(i)] =
            make_pair(p, derive_seed(p.seed, static_cast<std::uint64_t>(i)),
                      p.labels == LabelMode::Classical ? &calibration : nullptr);
    });

    const int n_train = static_cast<int>(std::floor(p.split[0] * p.count));
    const int n_val = static_cast<int>(std::floor(p.split[1] * p.count));
    for (int i = 0; i < p.count; ++i) {
        if (i < n_train)
            ds.train_idx.push_back(i);
        else if (i < n_train + n_val)
            ds.val_idx.push_back(i);
        else
            ds.test_idx.push_back(i);
    }
    return ds;
}

}  // namespace fringeforge
