#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "fringeforge/adam.hpp"
#include "fringeforge/dataset.hpp"
#include "fringeforge/model_io.hpp"
#include "fringeforge/nas.hpp"
#include "fringeforge/supernet.hpp"

namespace fringeforge {

struct SearchSchedule {
    int pretrain_epochs = 30;  // paper-scale value: 100
    int joint_epochs = 60;     // paper-scale value: 200
    double learning_rate = 0.008;
    AdamConfig adam{};
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;   // objective actually optimized that epoch
    double train_recon = 0.0;  // reconstruction component
    double val_psnr = 0.0;
    std::vector<double> weights;  // gate weights after the epoch
};

struct SearchResult {
    Checkpoint best;
    int best_epoch = 0;
    double best_psnr = -std::numeric_limits<double>::infinity();
    std::vector<EpochRecord> history;
};

namespace detail {

inline std::vector<int> epoch_order(const std::vector<int>& idx, std::uint64_t seed, int epoch) {
    std::vector<int> order = idx;
    std::mt19937_64 rng(derive_seed(seed, 0x5a5a0000ull + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

inline double mean_val_psnr(PhaseRetrievalNet& net, const Dataset& data) {
    double acc = 0.0;
    for (int idx : data.val_idx) {
        const auto& [ig, gt] = data.pairs[static_cast<std::size_t>(idx)];
        acc += psnr(net.forward(ig), gt);
    }
    return acc / static_cast<double>(data.val_idx.size());
}

}  // namespace detail

/// Two-phase connectivity search. Phase one pretrains the features with the
/// reconstruction loss only, thetas frozen at zero (all gates 0.5); phase two
/// optimizes the synthesized loss over parameters and thetas jointly. After
/// every epoch the validation PSNR is measured and the best snapshot kept.
inline SearchResult search(PhaseRetrievalNet& net, const Dataset& data, const SearchSchedule& sched,
                           const LossConfig& loss_cfg, std::uint64_t seed = 1) {
    if (net.fusion_mode() != FusionMode::Weighted)
        throw std::invalid_argument("search: needs a weighted super-network");
    if (data.pairs.empty() || data.train_idx.empty()) throw std::invalid_argument("search: empty dataset");
    if (data.val_idx.empty()) throw std::invalid_argument("search: empty validation split");
    if (sched.pretrain_epochs < 0 || sched.joint_epochs < 0)
        throw std::invalid_argument("search: epoch counts must be >= 0");
    loss_cfg.validate();

    Adam adam(sched.adam);
    adam.set_lr(sched.learning_rate);
    std::vector<Parameter*> params = net.parameters();
    std::vector<Parameter*> thetas = net.thetas();

    SearchResult res;
    res.best = snapshot_model(net, &adam, {{"epoch", "0"}});
    const int total = sched.pretrain_epochs + sched.joint_epochs;

    for (int epoch = 1; epoch <= total; ++epoch) {
        const bool joint = epoch > sched.pretrain_epochs;
        double sum_loss = 0.0, sum_recon = 0.0;
        for (int idx : detail::epoch_order(data.train_idx, seed, epoch)) {
            const auto& [ig, gt] = data.pairs[static_cast<std::size_t>(idx)];
            Tape tape;
            Tensor pred = net.forward(ig, &tape, /*training=*/true, /*track_thetas=*/joint);
            Tensor recon = mixge(pred, gt, loss_cfg.mixge_lambda);
            Tensor loss = recon;
            if (joint) {
                std::vector<Tensor> gates;
                gates.reserve(thetas.size());
                for (Parameter* th : thetas) gates.push_back(sigmoid(tape.watch(*th)));
                if (loss_cfg.alpha != 0.0)
                    loss = add(loss, scale(binary_loss(gates, loss_cfg.clamp_eps), loss_cfg.alpha));
                if (loss_cfg.beta != 0.0) loss = add(loss, scale(sparsity_loss(gates), loss_cfg.beta));
            }
            tape.backward(loss);
            adam.step(params);
            if (joint) adam.step(thetas);
            sum_loss += loss.item();
            sum_recon += recon.item();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = sum_loss / static_cast<double>(data.train_idx.size());
        rec.train_recon = sum_recon / static_cast<double>(data.train_idx.size());
        rec.val_psnr = detail::mean_val_psnr(net, data);
        rec.weights = net.connections().weights();
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

}  // namespace fringeforge
