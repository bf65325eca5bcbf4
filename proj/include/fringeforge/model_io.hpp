#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fringeforge/adam.hpp"
#include "fringeforge/checkpoint.hpp"
#include "fringeforge/nas.hpp"
#include "fringeforge/supernet.hpp"

namespace fringeforge {

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace detail

inline std::string encode_edges(const std::vector<Edge>& edges) {
    std::string s;
    for (const Edge& e : edges) {
        if (!s.empty()) s.push_back(';');
        s += e.src.name() + ":D" + std::to_string(e.target);
    }
    return s;
}

inline std::vector<Edge> decode_edges(const std::string& s) {
    std::vector<Edge> out;
    for (const std::string& item : detail::split_on(s, ';')) {
        auto parts = detail::split_on(item, ':');
        if (parts.size() != 2) throw std::runtime_error("checkpoint: bad edge entry '" + item + "'");
        auto src = NodeRef::parse(parts[0]);
        auto dst = NodeRef::parse(parts[1]);
        if (!src || !dst || dst->kind != NodeRef::Kind::Decoder)
            throw std::runtime_error("checkpoint: bad edge entry '" + item + "'");
        out.push_back({*src, dst->index});
    }
    return out;
}

/// Full model snapshot: config metadata, connectivity, every state tensor,
/// and (optionally) the optimizer moments.
inline Checkpoint snapshot_model(PhaseRetrievalNet& net, const Adam* adam = nullptr,
                                 std::map<std::string, std::string> extra_meta = {}) {
    Checkpoint ck;
    const SuperNetConfig& cfg = net.config();
    ck.meta["fusion"] = net.fusion_mode() == FusionMode::Weighted ? "weighted" : "plain";
    ck.meta["l_stages"] = std::to_string(cfg.stages);
    ck.meta["input_h"] = std::to_string(cfg.input_h);
    ck.meta["input_w"] = std::to_string(cfg.input_w);
    {
        std::string depths;
        for (int l = 1; l <= cfg.stages; ++l) {
            if (!depths.empty()) depths.push_back(',');
            depths += std::to_string(cfg.encoder_depth(l));
        }
        ck.meta["encoder_depths"] = depths;
    }
    ck.meta["depth_cap"] = std::to_string(cfg.decoder_depth_cap);
    ck.meta["depth_slope"] = std::to_string(cfg.decoder_depth_slope);
    ck.meta["ground_pool"] = std::to_string(cfg.ground_pool);
    ck.meta["bn_eps"] = detail::fmt_double(cfg.bn_eps);
    ck.meta["bn_momentum"] = detail::fmt_double(cfg.bn_momentum);
    ck.meta["edges"] = encode_edges(net.edges());
    {
        std::string stages;
        for (int s : net.kept_stages()) {
            if (!stages.empty()) stages.push_back(',');
            stages += std::to_string(s);
        }
        ck.meta["kept_stages"] = stages;
    }
    for (auto& [k, v] : extra_meta) ck.meta[k] = v;

    for (auto& [name, tensor] : net.named_state()) ck.tensors.emplace_back(name, tensor->clone());
    if (adam != nullptr)
        for (auto& [name, tensor] : adam->named_state()) ck.tensors.emplace_back(name, tensor);
    return ck;
}

/// Assign checkpoint tensors into an already-built network, shape-checked.
inline void load_model_state(PhaseRetrievalNet& net, const Checkpoint& ck) {
    for (auto& [name, slot] : net.named_state()) {
        const Tensor* stored = ck.find(name);
        if (stored == nullptr) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        if (!(stored->shape() == slot->shape()))
            throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                                     stored->shape().str() + ", expected " + slot->shape().str());
        *slot = stored->clone();
    }
}

inline SuperNetConfig config_from_checkpoint(const Checkpoint& ck) {
    SuperNetConfig cfg;
    cfg.stages = std::stoi(ck.meta_or("l_stages", "4"));
    cfg.input_h = std::stoll(ck.meta_or("input_h", "64"));
    cfg.input_w = std::stoll(ck.meta_or("input_w", "64"));
    cfg.encoder_depths.clear();
    for (const std::string& d : detail::split_on(ck.meta_or("encoder_depths", "8,16,24,32"), ','))
        cfg.encoder_depths.push_back(std::stoll(d));
    cfg.decoder_depth_cap = std::stoll(ck.meta_or("depth_cap", "64"));
    cfg.decoder_depth_slope = std::stoll(ck.meta_or("depth_slope", "8"));
    cfg.ground_pool = std::stoll(ck.meta_or("ground_pool", "3"));
    cfg.bn_eps = std::stod(ck.meta_or("bn_eps", "1e-5"));
    cfg.bn_momentum = std::stod(ck.meta_or("bn_momentum", "0.1"));
    return cfg;
}

/// Rebuild the network a checkpoint describes and load its state.
inline PhaseRetrievalNet net_from_checkpoint(const Checkpoint& ck) {
    SuperNetConfig cfg = config_from_checkpoint(ck);
    const FusionMode mode =
        ck.meta_or("fusion", "weighted") == "weighted" ? FusionMode::Weighted : FusionMode::Plain;
    std::vector<Edge> edges = decode_edges(ck.meta_or("edges", ""));
    std::vector<int> stages;
    for (const std::string& s : detail::split_on(ck.meta_or("kept_stages", ""), ','))
        stages.push_back(std::stoi(s));
    PhaseRetrievalNet net(cfg, edges, stages, mode, 0);
    load_model_state(net, ck);
    return net;
}

/// Reconstruct the gate weights stored in a search checkpoint.
inline ConnectionSet connections_from_checkpoint(const Checkpoint& ck) {
    ConnectionSet conns;
    conns.edges = decode_edges(ck.meta_or("edges", ""));
    conns.thetas.reserve(conns.edges.size());
    for (const Edge& e : conns.edges) {
        const std::string name = "theta." + e.name();
        const Tensor* t = ck.find(name);
        if (t == nullptr) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        conns.thetas.emplace_back(name, t->clone());
    }
    return conns;
}

}  // namespace fringeforge
