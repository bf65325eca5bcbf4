#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fringeforge/autodiff.hpp"
#include "fringeforge/ops.hpp"
#include "fringeforge/random.hpp"

namespace fringeforge {

/// One endpoint of a candidate connection: an encoder stage, the pooled
/// ground feature, or a decoder stage.
struct NodeRef {
    enum class Kind { Encoder, Ground, Decoder };
    Kind kind = Kind::Encoder;
    int index = 0;  // 1-based stage; unused for Ground

    std::string name() const {
        switch (kind) {
            case Kind::Encoder: return "E" + std::to_string(index);
            case Kind::Ground: return "G";
            case Kind::Decoder: return "D" + std::to_string(index);
        }
        return "?";
    }

    static NodeRef encoder(int i) { return {Kind::Encoder, i}; }
    static NodeRef ground() { return {Kind::Ground, 0}; }
    static NodeRef decoder(int i) { return {Kind::Decoder, i}; }

    static std::optional<NodeRef> parse(const std::string& s) {
        if (s == "G") return ground();
        if (s.size() < 2) return std::nullopt;
        int idx = 0;
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            idx = idx * 10 + (s[i] - '0');
        }
        if (idx < 1) return std::nullopt;
        if (s[0] == 'E') return encoder(idx);
        if (s[0] == 'D') return decoder(idx);
        return std::nullopt;
    }

    auto operator<=>(const NodeRef&) const = default;
};

/// Candidate connection src -> D_target.
struct Edge {
    NodeRef src;
    int target = 1;

    std::string name() const { return src.name() + "-D" + std::to_string(target); }
    auto operator<=>(const Edge&) const = default;
};

/// Closed form of the candidate edge count: L encoder sources plus G feed all
/// L stages, and decoder stages feed every lower stage.
inline std::int64_t count_candidate_connections(int stages) {
    if (stages < 1) throw std::invalid_argument("count_candidate_connections: stage count must be >= 1");
    const std::int64_t L = stages;
    return L * (L + 1) + L * (L - 1) / 2;
}

/// The full candidate set in canonical order: for each target stage,
/// E_1..E_L, then G, then D_{l+1}..D_L.
inline std::vector<Edge> candidate_edges(int stages) {
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(count_candidate_connections(stages)));
    for (int l = 1; l <= stages; ++l) {
        for (int i = 1; i <= stages; ++i) edges.push_back({NodeRef::encoder(i), l});
        edges.push_back({NodeRef::ground(), l});
        for (int j = l + 1; j <= stages; ++j) edges.push_back({NodeRef::decoder(j), l});
    }
    return edges;
}

/// Latent connection parameters; each edge carries one theta and the gate
/// weight is sigmoid(theta). Thetas start at zero, so every weight starts at
/// the undecided 0.5.
struct ConnectionSet {
    std::vector<Edge> edges;
    std::vector<Parameter> thetas;

    static ConnectionSet full(int stages) {
        ConnectionSet c;
        c.edges = candidate_edges(stages);
        c.thetas.reserve(c.edges.size());
        for (const Edge& e : c.edges)
            c.thetas.emplace_back("theta." + e.name(), Tensor::scalar(0.0));
        return c;
    }

    std::size_t size() const { return edges.size(); }

    double weight(std::size_t i) const { return sigmoid(thetas[i].value.item()); }

    std::vector<double> weights() const {
        std::vector<double> w(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) w[i] = weight(i);
        return w;
    }
};

struct SuperNetConfig {
    int stages = 4;  // L
    std::int64_t input_h = 64, input_w = 64;
    std::vector<std::int64_t> encoder_depths = {8, 16, 24, 32, 48, 64, 96, 160};
    std::int64_t decoder_depth_cap = 64;  // paper-scale value: 256
    std::int64_t decoder_depth_slope = 8;
    std::int64_t ground_pool = 3;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    std::int64_t decoder_depth(int l) const {
        return std::min(decoder_depth_cap, decoder_depth_slope * static_cast<std::int64_t>(l));
    }

    std::int64_t stage_h(int l) const { return input_h >> l; }
    std::int64_t stage_w(int l) const { return input_w >> l; }

    std::int64_t encoder_depth(int l) const { return encoder_depths[static_cast<std::size_t>(l - 1)]; }

    void validate() const {
        if (stages < 2) throw std::invalid_argument("config: stage count must be >= 2");
        if (static_cast<int>(encoder_depths.size()) < stages)
            throw std::invalid_argument("config: need an encoder depth per stage");
        const std::int64_t div = std::int64_t{1} << stages;
        if (input_h % div != 0 || input_w % div != 0)
            throw std::invalid_argument("config: input " + std::to_string(input_h) + "x" +
                                        std::to_string(input_w) + " not divisible by 2^" +
                                        std::to_string(stages));
        if (stage_h(stages) < ground_pool || stage_w(stages) < ground_pool)
            throw std::invalid_argument("config: deepest stage smaller than the ground pool window");
        for (int l = 1; l <= stages; ++l)
            if (decoder_depth(l) < 1 || encoder_depth(l) < 1)
                throw std::invalid_argument("config: feature depths must be positive");
    }

    /// Paper-scale preset: L = 8, depth rule min(256, 8l).
    static SuperNetConfig paper_scale(std::int64_t input = 1024) {
        SuperNetConfig c;
        c.stages = 8;
        c.input_h = c.input_w = input;
        c.decoder_depth_cap = 256;
        return c;
    }
};

/// Encoder pyramid plus ground feature plus computed decoder stages.
/// D is filled high-index-first while decoding.
struct StageFeatures {
    std::vector<Tensor> E;  // E[l-1], spatial size input / 2^l
    Tensor G;               // pooled from E_L
    std::vector<Tensor> D;  // D[l-1], same spatial size as E_l
};

enum class FusionMode {
    Weighted,  // sigmoid-gated branches with per-branch batch norm
    Plain      // unweighted, no fusion batch norm
};

namespace detail {

inline Tensor use(Parameter& p, Tape* tape) { return tape ? tape->watch(p) : p.value.detached(); }

struct ConvLayer {
    Parameter kernel, bias;
    int stride = 1;

    ConvLayer() = default;
    ConvLayer(const std::string& name, std::int64_t c_out, std::int64_t c_in, int s, Rng& rng)
        : kernel(name + ".kernel", rng.conv_kernel(c_out, c_in)),
          bias(name + ".bias", Tensor::zeros(Shape{1, c_out, 1, 1})),
          stride(s) {}

    Tensor apply(const Tensor& x, Tape* tape) {
        return conv2d(x, use(kernel, tape), use(bias, tape), stride);
    }
};

struct NormLayer {
    Parameter gamma, beta;
    BatchNormStats stats;
    double eps = 1e-5;

    NormLayer() : stats(1) {}
    NormLayer(const std::string& name, std::int64_t channels, double e, double momentum)
        : gamma(name + ".gamma", Tensor::ones(Shape{1, channels, 1, 1})),
          beta(name + ".beta", Tensor::zeros(Shape{1, channels, 1, 1})),
          stats(channels, momentum),
          eps(e) {}

    Tensor apply(const Tensor& x, Tape* tape, bool training) {
        return batch_norm(x, use(gamma, tape), use(beta, tape), &stats, training, eps);
    }
};

}  // namespace detail

/// Encoder-decoder phase retrieval network over a candidate edge set. With
/// FusionMode::Weighted and the full edge set this is the dense super-network;
/// with FusionMode::Plain and a pruned edge set it is the searched network.
class PhaseRetrievalNet {
public:
    PhaseRetrievalNet(SuperNetConfig cfg, std::vector<Edge> edges, std::vector<int> kept_stages,
                      FusionMode mode, std::uint64_t seed)
        : cfg_(std::move(cfg)), mode_(mode) {
        cfg_.validate();
        for (int s : kept_stages)
            if (s < 1 || s > cfg_.stages) throw std::invalid_argument("network: stage index out of range");
        stage_kept_.assign(static_cast<std::size_t>(cfg_.stages) + 1, false);
        for (int s : kept_stages) stage_kept_[static_cast<std::size_t>(s)] = true;
        if (!stage_kept_[1]) throw std::invalid_argument("network: decoder stage 1 must be kept");

        Rng rng(seed);
        // encoder chain
        std::int64_t prev_c = 1;
        for (int l = 1; l <= cfg_.stages; ++l) {
            const std::string base = "enc" + std::to_string(l);
            encoder_.push_back({detail::ConvLayer(base + ".conv", cfg_.encoder_depth(l), prev_c, 2, rng),
                                detail::NormLayer(base + ".bn", cfg_.encoder_depth(l), cfg_.bn_eps,
                                                  cfg_.bn_momentum)});
            prev_c = cfg_.encoder_depth(l);
        }
        // fusion branches, grouped per target stage
        branches_.resize(static_cast<std::size_t>(cfg_.stages) + 1);
        for (const Edge& e : edges) {
            if (e.target < 1 || e.target > cfg_.stages)
                throw std::invalid_argument("network: edge target out of range: " + e.name());
            if (!stage_kept_[static_cast<std::size_t>(e.target)])
                throw std::invalid_argument("network: edge targets a dropped stage: " + e.name());
            if (e.src.kind == NodeRef::Kind::Decoder &&
                (e.src.index <= e.target || e.src.index > cfg_.stages))
                throw std::invalid_argument("network: acyclicity violated by edge " + e.name());
            if (e.src.kind == NodeRef::Kind::Decoder && !stage_kept_[static_cast<std::size_t>(e.src.index)])
                throw std::invalid_argument("network: edge sources a dropped stage: " + e.name());
            if (e.src.kind == NodeRef::Kind::Encoder && (e.src.index < 1 || e.src.index > cfg_.stages))
                throw std::invalid_argument("network: edge source out of range: " + e.name());

            Branch br;
            br.edge = e;
            const std::string base = "edge." + e.name();
            br.conv = detail::ConvLayer(base + ".conv", cfg_.decoder_depth(e.target), source_depth(e.src), 1,
                                        rng);
            if (mode_ == FusionMode::Weighted)
                br.bn = detail::NormLayer(base + ".bn", cfg_.decoder_depth(e.target), cfg_.bn_eps,
                                          cfg_.bn_momentum);
            branches_[static_cast<std::size_t>(e.target)].push_back(std::move(br));
        }
        // decode stages + head
        decode_.resize(static_cast<std::size_t>(cfg_.stages) + 1);
        for (int l = 1; l <= cfg_.stages; ++l) {
            if (!stage_kept_[static_cast<std::size_t>(l)]) continue;
            const std::string base = "dec" + std::to_string(l);
            decode_[static_cast<std::size_t>(l)] = Decode{
                detail::ConvLayer(base + ".conv", cfg_.decoder_depth(l), cfg_.decoder_depth(l), 1, rng),
                detail::NormLayer(base + ".bn", cfg_.decoder_depth(l), cfg_.bn_eps, cfg_.bn_momentum)};
        }
        head_ = detail::ConvLayer("head.conv", 1, cfg_.decoder_depth(1), 1, rng);

        if (mode_ == FusionMode::Weighted) {
            conns_.edges = edges;
            conns_.thetas.reserve(edges.size());
            for (const Edge& e : edges) conns_.thetas.emplace_back("theta." + e.name(), Tensor::scalar(0.0));
            theta_index_.resize(static_cast<std::size_t>(cfg_.stages) + 1);
            for (std::size_t i = 0; i < edges.size(); ++i)
                theta_index_[static_cast<std::size_t>(edges[i].target)].push_back(i);
        }
    }

    /// Dense super-network over the complete candidate set.
    static PhaseRetrievalNet super_net(const SuperNetConfig& cfg, std::uint64_t seed) {
        std::vector<int> all;
        for (int l = 1; l <= cfg.stages; ++l) all.push_back(l);
        return PhaseRetrievalNet(cfg, candidate_edges(cfg.stages), all, FusionMode::Weighted, seed);
    }

    const SuperNetConfig& config() const { return cfg_; }
    FusionMode fusion_mode() const { return mode_; }
    ConnectionSet& connections() { return conns_; }
    const ConnectionSet& connections() const { return conns_; }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (const auto& group : branches_)
            for (const Branch& b : group) out.push_back(b.edge);
        return out;
    }

    std::vector<int> kept_stages() const {
        std::vector<int> out;
        for (int l = 1; l <= cfg_.stages; ++l)
            if (stage_kept_[static_cast<std::size_t>(l)]) out.push_back(l);
        return out;
    }

    /// Stride-2 conv/bn/relu6 chain producing the feature pyramid, plus the
    /// 3x3 ground feature pooled from the deepest stage.
    StageFeatures encode(const Tensor& img, Tape* tape, bool training) {
        if (img.shape().h() != cfg_.input_h || img.shape().w() != cfg_.input_w ||
            img.shape().c() != 1)
            throw std::invalid_argument("encode: expected [N,1," + std::to_string(cfg_.input_h) + "," +
                                        std::to_string(cfg_.input_w) + "], got " + img.shape().str());
        StageFeatures f;
        f.E.reserve(static_cast<std::size_t>(cfg_.stages));
        Tensor x = img;
        for (int l = 1; l <= cfg_.stages; ++l) {
            auto& st = encoder_[static_cast<std::size_t>(l - 1)];
            x = relu6(st.bn.apply(st.conv.apply(x, tape), tape, training));
            f.E.push_back(x);
        }
        f.G = avg_pool_to(f.E.back(), cfg_.ground_pool, cfg_.ground_pool);
        f.D.resize(static_cast<std::size_t>(cfg_.stages));
        return f;
    }

    /// Fused input T_l: every candidate branch is resized and projected to the
    /// stage geometry; sources larger than the stage are downsampled before
    /// the convolution, everything else is convolved then upsampled. In
    /// weighted mode each branch passes batch norm and is gated by
    /// sigmoid(theta).
    Tensor fuse(int l, const StageFeatures& feats, Tape* tape, bool training, bool track_thetas = false) {
        auto& group = branches_.at(static_cast<std::size_t>(l));
        if (group.empty()) throw std::logic_error("fuse: stage D" + std::to_string(l) + " has no input edges");
        const std::int64_t th = cfg_.stage_h(l), tw = cfg_.stage_w(l);

        std::vector<Tensor> parts;
        parts.reserve(group.size());
        for (auto& br : group) {
            const Tensor& src = source_feature(br.edge.src, feats);
            Tensor y;
            if (src.shape().h() > th) {
                y = br.conv.apply(bilinear_resize(src, th, tw), tape);
            } else {
                y = bilinear_resize(br.conv.apply(src, tape), th, tw);
            }
            if (br.bn) y = br.bn->apply(y, tape, training);
            parts.push_back(std::move(y));
        }

        if (mode_ == FusionMode::Plain) {
            Tensor acc = parts.front();
            for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
            return acc;
        }
        std::vector<Tensor> gates;
        gates.reserve(parts.size());
        for (std::size_t slot = 0; slot < group.size(); ++slot) {
            Parameter& theta = conns_.thetas[theta_index_[static_cast<std::size_t>(l)][slot]];
            Tensor t = (tape && track_thetas) ? tape->watch(theta) : theta.value.detached();
            gates.push_back(sigmoid(t));
        }
        return weighted_sum(parts, gates);
    }

    /// D_l = relu6(bn(conv(relu6(T_l)))).
    Tensor decode_stage(int l, const Tensor& fused, Tape* tape, bool training) {
        auto& d = decode_[static_cast<std::size_t>(l)];
        if (!d) throw std::logic_error("decode_stage: stage D" + std::to_string(l) + " is not kept");
        return relu6(d->bn.apply(d->conv.apply(relu6(fused), tape), tape, training));
    }

    /// Compress D_1 to one channel, resize to the interferogram geometry, and
    /// squash into [0,1] via relu6 / 6.
    Tensor regression_head(const Tensor& d1, std::int64_t target_h, std::int64_t target_w, Tape* tape) {
        Tensor y = head_.apply(d1, tape);
        y = bilinear_resize(y, target_h, target_w);
        return scale(relu6(y), 1.0 / 6.0);
    }

    Tensor forward(const Tensor& img, Tape* tape = nullptr, bool training = false,
                   bool track_thetas = false) {
        StageFeatures feats = encode(img, tape, training);
        for (int l = cfg_.stages; l >= 1; --l) {
            if (!stage_kept_[static_cast<std::size_t>(l)]) continue;
            Tensor fused = fuse(l, feats, tape, training, track_thetas);
            feats.D[static_cast<std::size_t>(l - 1)] = decode_stage(l, fused, tape, training);
        }
        return regression_head(feats.D[0], img.shape().h(), img.shape().w(), tape);
    }

    /// Network parameters in construction order; excludes thetas.
    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> out;
        for (auto& st : encoder_) {
            out.push_back(&st.conv.kernel);
            out.push_back(&st.conv.bias);
            out.push_back(&st.bn.gamma);
            out.push_back(&st.bn.beta);
        }
        for (auto& group : branches_) {
            for (auto& br : group) {
                out.push_back(&br.conv.kernel);
                out.push_back(&br.conv.bias);
                if (br.bn) {
                    out.push_back(&br.bn->gamma);
                    out.push_back(&br.bn->beta);
                }
            }
        }
        for (auto& d : decode_) {
            if (!d) continue;
            out.push_back(&d->conv.kernel);
            out.push_back(&d->conv.bias);
            out.push_back(&d->bn.gamma);
            out.push_back(&d->bn.beta);
        }
        out.push_back(&head_.kernel);
        out.push_back(&head_.bias);
        return out;
    }

    std::vector<Parameter*> thetas() {
        std::vector<Parameter*> out;
        for (auto& t : conns_.thetas) out.push_back(&t);
        return out;
    }

    /// Every tensor that defines the model: parameters, thetas, and batch
    /// norm running statistics.
    std::vector<std::pair<std::string, Tensor*>> named_state() {
        std::vector<std::pair<std::string, Tensor*>> out;
        for (Parameter* p : parameters()) out.emplace_back(p->name, &p->value);
        for (Parameter* p : thetas()) out.emplace_back(p->name, &p->value);
        auto stats = [&out](const std::string& base, detail::NormLayer& n) {
            out.emplace_back(base + ".running_mean", &n.stats.running_mean);
            out.emplace_back(base + ".running_var", &n.stats.running_var);
        };
        for (std::size_t l = 0; l < encoder_.size(); ++l)
            stats("enc" + std::to_string(l + 1) + ".bn", encoder_[l].bn);
        for (auto& group : branches_)
            for (auto& br : group)
                if (br.bn) stats("edge." + br.edge.name() + ".bn", *br.bn);
        for (int l = 1; l <= cfg_.stages; ++l)
            if (decode_[static_cast<std::size_t>(l)])
                stats("dec" + std::to_string(l) + ".bn", decode_[static_cast<std::size_t>(l)]->bn);
        return out;
    }

    std::int64_t parameter_count() {
        std::int64_t n = 0;
        for (Parameter* p : parameters()) n += p->value.numel();
        return n;
    }

private:
    struct Stage {
        detail::ConvLayer conv;
        detail::NormLayer bn;
    };
    struct Branch {
        Edge edge;
        detail::ConvLayer conv;
        std::optional<detail::NormLayer> bn;
    };
    struct Decode {
        detail::ConvLayer conv;
        detail::NormLayer bn;
    };

    std::int64_t source_depth(const NodeRef& src) const {
        switch (src.kind) {
            case NodeRef::Kind::Encoder: return cfg_.encoder_depth(src.index);
            case NodeRef::Kind::Ground: return cfg_.encoder_depth(cfg_.stages);
            case NodeRef::Kind::Decoder: return cfg_.decoder_depth(src.index);
        }
        return 1;
    }

    const Tensor& source_feature(const NodeRef& src, const StageFeatures& feats) const {
        switch (src.kind) {
            case NodeRef::Kind::Encoder: return feats.E.at(static_cast<std::size_t>(src.index - 1));
            case NodeRef::Kind::Ground: return feats.G;
            case NodeRef::Kind::Decoder: {
                const Tensor& d = feats.D.at(static_cast<std::size_t>(src.index - 1));
                if (!d.defined())
                    throw std::logic_error("fuse: D" + std::to_string(src.index) +
                                           " read before it was computed");
                return d;
            }
        }
        throw std::logic_error("unreachable");
    }

    SuperNetConfig cfg_;
    FusionMode mode_;
    std::vector<bool> stage_kept_;
    std::vector<Stage> encoder_;
    std::vector<std::vector<Branch>> branches_;  // by target stage
    std::vector<std::optional<Decode>> decode_;  // by stage
    detail::ConvLayer head_;
    ConnectionSet conns_;                         // weighted mode only
    std::vector<std::vector<std::size_t>> theta_index_;
};

}  // namespace fringeforge
