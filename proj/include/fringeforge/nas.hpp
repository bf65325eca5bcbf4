#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fringeforge/ops.hpp"
#include "fringeforge/supernet.hpp"

namespace fringeforge {

struct LossConfig {
    double alpha = 5e-3;        // weight-binary ratio
    double beta = 5e-4;         // sparsity ratio
    double mixge_lambda = 1.0;  // gradient-term weight
    double clamp_eps = 1e-7;    // log safety clamp

    void validate() const {
        if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("loss config: ratios must be >= 0");
        if (!(clamp_eps > 0.0 && clamp_eps < 0.5))
            throw std::invalid_argument("loss config: clamp epsilon must lie in (0, 0.5)");
    }
};

/// Mixed gradient error: image MSE plus lambda-weighted MSE of the
/// forward-difference spatial gradients.
inline Tensor mixge(const Tensor& pred, const Tensor& gt, double lambda) {
    check_same_shape(pred, gt, "mixge");
    Tensor loss = mse(pred, gt);
    if (lambda != 0.0) {
        Tensor gx = mse(diff_x(pred), diff_x(gt));
        Tensor gy = mse(diff_y(pred), diff_y(gt));
        loss = add(loss, scale(add(gx, gy), lambda));
    }
    return loss;
}

/// Binary entropy pressure: mean of -w*log(w) - (1-w)*log(1-w), maximal at
/// w = 0.5 and vanishing toward the clamped endpoints.
inline Tensor binary_loss(const std::vector<Tensor>& weights, double clamp_eps = 1e-7) {
    if (weights.empty()) throw std::invalid_argument("binary_loss: empty weight set");
    Tensor acc;
    for (const Tensor& w : weights) {
        Tensor wc = clamp(w, clamp_eps, 1.0 - clamp_eps);
        Tensor one_minus = affine(wc, -1.0, 1.0);
        Tensor term = neg(add(mul(wc, log(wc)), mul(one_minus, log(one_minus))));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return scale(acc, 1.0 / static_cast<double>(weights.size()));
}

/// Global sparsity pressure: plain mean of all connection weights.
inline Tensor sparsity_loss(const std::vector<Tensor>& weights) {
    if (weights.empty()) throw std::invalid_argument("sparsity_loss: empty weight set");
    Tensor acc;
    for (const Tensor& w : weights) acc = acc.defined() ? add(acc, w) : w;
    return scale(acc, 1.0 / static_cast<double>(weights.size()));
}

/// Search loss: reconstruction + alpha * binary + beta * sparsity, one scalar
/// on the shared tape so backward reaches network parameters and thetas alike.
inline Tensor synthesized_loss(const Tensor& pred, const Tensor& gt, const std::vector<Tensor>& weights,
                               const LossConfig& cfg) {
    cfg.validate();
    Tensor loss = mixge(pred, gt, cfg.mixge_lambda);
    if (cfg.alpha != 0.0) loss = add(loss, scale(binary_loss(weights, cfg.clamp_eps), cfg.alpha));
    if (cfg.beta != 0.0) loss = add(loss, scale(sparsity_loss(weights), cfg.beta));
    return loss;
}

/// Pruned connectivity: the kept edges plus the decoder stages that survive.
struct Architecture {
    int stages = 0;  // L of the parent super-network
    std::vector<Edge> kept_edges;
    std::vector<int> kept_stages;
    double sigma = 0.5;
    std::string source_checkpoint;

    /// Throws when the structural invariants do not hold.
    void validate() const {
        if (stages < 1) throw std::invalid_argument("architecture: missing stage count");
        std::set<int> stage_set(kept_stages.begin(), kept_stages.end());
        if (!stage_set.count(1)) throw std::invalid_argument("architecture collapsed: stage D1 not kept");
        std::vector<int> inputs(static_cast<std::size_t>(stages) + 1, 0);
        std::vector<int> consumers(static_cast<std::size_t>(stages) + 1, 0);
        for (const Edge& e : kept_edges) {
            if (e.target < 1 || e.target > stages)
                throw std::invalid_argument("architecture: target out of range in " + e.name());
            if (!stage_set.count(e.target))
                throw std::invalid_argument("architecture: edge targets dropped stage: " + e.name());
            if (e.src.kind == NodeRef::Kind::Decoder) {
                if (e.src.index <= e.target)
                    throw std::invalid_argument("acyclicity violated: " + e.name());
                if (e.src.index > stages)
                    throw std::invalid_argument("architecture: source out of range in " + e.name());
                if (!stage_set.count(e.src.index))
                    throw std::invalid_argument("architecture: edge sources dropped stage: " + e.name());
                consumers[static_cast<std::size_t>(e.src.index)]++;
            }
            if (e.src.kind == NodeRef::Kind::Encoder && (e.src.index < 1 || e.src.index > stages))
                throw std::invalid_argument("architecture: source out of range in " + e.name());
            inputs[static_cast<std::size_t>(e.target)]++;
        }
        for (int s : kept_stages) {
            if (inputs[static_cast<std::size_t>(s)] == 0)
                throw std::invalid_argument(s == 1 ? "architecture collapsed: stage D1 has no inputs"
                                                   : "architecture: stage D" + std::to_string(s) +
                                                         " kept without inputs");
            if (s != 1 && consumers[static_cast<std::size_t>(s)] == 0)
                throw std::invalid_argument("architecture: stage D" + std::to_string(s) +
                                            " kept without consumers");
        }
    }
};

/// Threshold the gate weights and drop dead decoder stages to a fixpoint:
/// (i) drop edges with w < sigma; then repeatedly (ii) drop stages without
/// inputs and (iii) drop stages nothing consumes (stage 1 exempt, the
/// regression head consumes it), removing their incident edges.
inline Architecture prune(const ConnectionSet& conns, double sigma,
                          const std::string& source_checkpoint = "") {
    if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("prune: sigma must lie in (0,1)");
    int stages = 0;
    for (const Edge& e : conns.edges) stages = std::max({stages, e.target,
                                                         e.src.kind == NodeRef::Kind::Decoder ? e.src.index : 0});

    std::vector<Edge> edges;
    for (std::size_t i = 0; i < conns.edges.size(); ++i)
        if (conns.weight(i) >= sigma) edges.push_back(conns.edges[i]);

    std::vector<bool> live(static_cast<std::size_t>(stages) + 1, true);
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int> inputs(static_cast<std::size_t>(stages) + 1, 0);
        std::vector<int> consumers(static_cast<std::size_t>(stages) + 1, 0);
        for (const Edge& e : edges) {
            inputs[static_cast<std::size_t>(e.target)]++;
            if (e.src.kind == NodeRef::Kind::Decoder) consumers[static_cast<std::size_t>(e.src.index)]++;
        }
        for (int s = 1; s <= stages; ++s) {
            if (!live[static_cast<std::size_t>(s)]) continue;
            const bool no_inputs = inputs[static_cast<std::size_t>(s)] == 0;
            const bool unused = s != 1 && consumers[static_cast<std::size_t>(s)] == 0;
            if (no_inputs || unused) {
                if (s == 1) throw std::invalid_argument("architecture collapsed: stage D1 has no inputs");
                live[static_cast<std::size_t>(s)] = false;
                changed = true;
            }
        }
        std::erase_if(edges, [&](const Edge& e) {
            if (!live[static_cast<std::size_t>(e.target)]) return true;
            return e.src.kind == NodeRef::Kind::Decoder && !live[static_cast<std::size_t>(e.src.index)];
        });
    }
    if (edges.empty()) throw std::invalid_argument("architecture collapsed: stage D1 has no inputs");

    Architecture arch;
    arch.stages = stages;
    arch.kept_edges = std::move(edges);
    std::sort(arch.kept_edges.begin(), arch.kept_edges.end());
    for (int s = 1; s <= stages; ++s)
        if (live[static_cast<std::size_t>(s)]) arch.kept_stages.push_back(s);
    arch.sigma = sigma;
    arch.source_checkpoint = source_checkpoint;
    arch.validate();
    return arch;
}

/// Line-oriented text form: a header with the stage count, one `edge SRC DST`
/// line per kept edge, provenance as comments. import_architecture inverts it.
inline std::string export_architecture(const Architecture& arch) {
    std::ostringstream os;
    os << "# pruned connectivity (sigma " << arch.sigma << ")\n";
    if (!arch.source_checkpoint.empty()) os << "# source " << arch.source_checkpoint << "\n";
    os << "stages " << arch.stages << "\n";
    for (const Edge& e : arch.kept_edges) os << "edge " << e.src.name() << " D" << e.target << "\n";
    return os.str();
}

inline Architecture import_architecture(const std::string& text) {
    Architecture arch;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("architecture line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "stages") {
            if (!(ls >> arch.stages) || arch.stages < 1) fail("bad stage count");
            continue;
        }
        if (tok != "edge") fail("unknown directive '" + tok + "'");
        std::string s_src, s_dst, extra;
        if (!(ls >> s_src >> s_dst) || (ls >> extra)) fail("expected 'edge SRC DST'");
        auto src = NodeRef::parse(s_src);
        if (!src) fail("bad source '" + s_src + "'");
        auto dst = NodeRef::parse(s_dst);
        if (!dst || dst->kind != NodeRef::Kind::Decoder) fail("bad target '" + s_dst + "'");
        if (src->kind == NodeRef::Kind::Decoder && src->index <= dst->index)
            fail("acyclicity violated: " + s_src + " -> " + s_dst);
        arch.kept_edges.push_back({*src, dst->index});
    }
    if (arch.kept_edges.empty()) throw std::invalid_argument("architecture collapsed: no edges");
    if (arch.stages == 0)
        for (const Edge& e : arch.kept_edges)
            arch.stages = std::max({arch.stages, e.target,
                                    e.src.kind == NodeRef::Kind::Decoder ? e.src.index : 0});

    std::set<int> stage_set{1};
    for (const Edge& e : arch.kept_edges) {
        stage_set.insert(e.target);
        if (e.src.kind == NodeRef::Kind::Decoder) stage_set.insert(e.src.index);
    }
    arch.kept_stages.assign(stage_set.begin(), stage_set.end());
    std::sort(arch.kept_edges.begin(), arch.kept_edges.end());
    arch.validate();
    return arch;
}

/// Build the searched network: the super-network restricted to the kept
/// connectivity, fused without gates or per-branch batch norm, parameters
/// freshly initialized.
inline PhaseRetrievalNet materialize(const Architecture& arch, const SuperNetConfig& cfg,
                                     std::uint64_t seed) {
    arch.validate();
    if (arch.stages != cfg.stages)
        throw std::invalid_argument("materialize: architecture has " + std::to_string(arch.stages) +
                                    " stages but config has " + std::to_string(cfg.stages));
    return PhaseRetrievalNet(cfg, arch.kept_edges, arch.kept_stages, FusionMode::Plain, seed);
}

}  // namespace fringeforge
