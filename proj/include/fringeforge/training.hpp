#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fringeforge/adam.hpp"
#include "fringeforge/dataset.hpp"
#include "fringeforge/model_io.hpp"
#include "fringeforge/nas.hpp"
#include "fringeforge/search.hpp"

namespace fringeforge {

struct Metrics {
    double psnr_db = 0.0;
    double mixge = 0.0;
    double latency_ms = 0.0;
};

struct TrainResult {
    Checkpoint best;
    int best_epoch = 0;
    double best_psnr = -std::numeric_limits<double>::infinity();
    std::vector<EpochRecord> history;  // weights empty for plain networks
};

/// Reconstruction-only training of a materialized network (the searched
/// protocol without gate or sparsity terms). Best validation PSNR wins.
inline TrainResult train(PhaseRetrievalNet& net, const Dataset& data, int epochs, double lr,
                         std::uint64_t seed = 1, double mixge_lambda = 1.0) {
    if (data.pairs.empty() || data.train_idx.empty()) throw std::invalid_argument("train: empty training split");
    if (data.val_idx.empty()) throw std::invalid_argument("train: empty validation split");
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

    Adam adam;
    adam.set_lr(lr);
    std::vector<Parameter*> params = net.parameters();

    TrainResult res;
    res.best = snapshot_model(net, &adam, {{"epoch", "0"}});

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        double sum_loss = 0.0;
        for (int idx : detail::epoch_order(data.train_idx, seed, epoch)) {
            const auto& [ig, gt] = data.pairs[static_cast<std::size_t>(idx)];
            Tape tape;
            Tensor pred = net.forward(ig, &tape, /*training=*/true);
            Tensor loss = mixge(pred, gt, mixge_lambda);
            tape.backward(loss);
            adam.step(params);
            sum_loss += loss.item();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = sum_loss / static_cast<double>(data.train_idx.size());
        rec.train_recon = rec.train_loss;
        rec.val_psnr = detail::mean_val_psnr(net, data);
        res.history.push_back(rec);

        if (rec.val_psnr > res.best_psnr) {
            res.best_psnr = rec.val_psnr;
            res.best_epoch = epoch;
            res.best = snapshot_model(net, &adam,
                                      {{"epoch", std::to_string(epoch)},
                                       {"val_psnr", detail::fmt_double(rec.val_psnr)}});
        }
    }
    return res;
}

struct EvalReport {
    Metrics mean;
    std::vector<Metrics> per_image;
};

/// Mean PSNR and reconstruction loss over the test split, inference mode.
inline EvalReport evaluate(PhaseRetrievalNet& net, const Dataset& data, double mixge_lambda = 1.0) {
    if (data.test_idx.empty()) throw std::invalid_argument("evaluate: empty test split");
    EvalReport rep;
    rep.per_image.resize(data.test_idx.size());
    for (std::size_t k = 0; k < data.test_idx.size(); ++k) {
        const auto& [ig, gt] = data.pairs[static_cast<std::size_t>(data.test_idx[k])];
        Tensor pred = net.forward(ig);
        rep.per_image[k].psnr_db = psnr(pred, gt);
        rep.per_image[k].mixge = mixge(pred, gt, mixge_lambda).item();
    }
    for (const Metrics& m : rep.per_image) {
        rep.mean.psnr_db += m.psnr_db;
        rep.mean.mixge += m.mixge;
    }
    rep.mean.psnr_db /= static_cast<double>(rep.per_image.size());
    rep.mean.mixge /= static_cast<double>(rep.per_image.size());
    return rep;
}

/// Median wall-clock of single-image forward passes after one warm-up.
inline double measure_latency(PhaseRetrievalNet& net, std::int64_t size, int repeats) {
    if (repeats < 3) throw std::invalid_argument("measure_latency: repeats must be >= 3");
    if (size != net.config().input_h || size != net.config().input_w)
        throw std::invalid_argument("measure_latency: size " + std::to_string(size) +
                                    " does not match the network input geometry");
    Rng rng(0xbe7c);
    Tensor img = rng.uniform_tensor(Shape{1, 1, size, size}, 0.0, 1.0);
    net.forward(img);  // warm-up

    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        Tensor out = net.forward(img);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace fringeforge
