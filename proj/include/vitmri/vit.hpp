#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vitmri/graph.hpp"
#include "vitmri/rng.hpp"
#include "vitmri/tensor.hpp"

namespace vitmri {

struct ViTConfig {
    std::size_t image_size = 224;
    std::size_t patch_size = 16;
    std::size_t channels = 3;
    std::size_t embed_dim = 768;
    std::size_t depth = 12;
    std::size_t num_heads = 12;
    std::size_t mlp_dim = 3072;
    std::size_t head_hidden = 256;
    double head_dropout = 0.3;
    std::size_t num_classes = 4;

    static ViTConfig tiny() {
        ViTConfig c;
        c.image_size = 32;
        c.patch_size = 8;
        c.embed_dim = 16;
        c.depth = 2;
        c.num_heads = 2;
        c.mlp_dim = 32;
        c.head_hidden = 8;
        return c;
    }

    std::size_t head_dim() const { return embed_dim / num_heads; }
    std::size_t patches_per_side() const { return image_size / patch_size; }
    std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
    std::size_t tokens() const { return num_patches() + 1; }
    std::size_t patch_elems() const { return patch_size * patch_size * channels; }

    void validate() const;
    bool operator==(const ViTConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-6;

// One named parameter tensor in the model's fixed enumeration order.
struct ParamEntrySpec {
    enum class Init { trunc_normal, normal, zeros, ones };
    std::string name;
    Shape shape;
    bool backbone;  // false only for head.* entries
    Init init;
};

std::vector<ParamEntrySpec> param_entries(const ViTConfig& cfg);
std::size_t param_count(const ViTConfig& cfg);

// Named parameter tensors, stored in the fixed enumeration order.
template <typename T>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor<T>> values;
    std::vector<char> backbone;

    std::size_t size() const { return values.size(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw std::out_of_range("ParamSet: unknown parameter '" + name + "'");
    }

    Tensor<T>& at(const std::string& name) { return values[index_of(name)]; }
    const Tensor<T>& at(const std::string& name) const { return values[index_of(name)]; }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& v : values) n += v.numel();
        return n;
    }

    template <typename U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        out.names = names;
        out.backbone = backbone;
        out.values.reserve(values.size());
        for (const auto& v : values) out.values.push_back(v.template cast<U>());
        return out;
    }
};

// Truncated-normal weights (sigma 0.02, cut at 2 sigma), plain normal
// cls/pos embeddings, zero biases/betas, unit gammas. Draw order follows the
// parameter enumeration, so a seed pins every value.
template <typename T>
ParamSet<T> init_params(const ViTConfig& cfg, RngStream& rng) {
    cfg.validate();
    ParamSet<T> out;
    for (const ParamEntrySpec& e : param_entries(cfg)) {
        Tensor<T> t(e.shape);
        switch (e.init) {
            case ParamEntrySpec::Init::trunc_normal:
                for (std::size_t i = 0; i < t.numel(); ++i)
                    t[i] = static_cast<T>(rng.truncated_normal(0.02, 2.0));
                break;
            case ParamEntrySpec::Init::normal:
                for (std::size_t i = 0; i < t.numel(); ++i)
                    t[i] = static_cast<T>(0.02 * rng.normal());
                break;
            case ParamEntrySpec::Init::zeros:
                break;
            case ParamEntrySpec::Init::ones:
                for (std::size_t i = 0; i < t.numel(); ++i) t[i] = T(1);
                break;
        }
        out.names.push_back(e.name);
        out.values.push_back(std::move(t));
        out.backbone.push_back(e.backbone ? 1 : 0);
    }
    return out;
}

// [C,H,W] -> [N, P*P*C]; patches in reading order, each row flattened
// channel-major (all of channel 0's P*P pixels, then channel 1, ...).
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch) {
    if (image.rank() != 3) throw std::invalid_argument("patchify: expected [C,H,W]");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (h % patch != 0 || w % patch != 0)
        throw std::invalid_argument("patchify: image dimensions not divisible by patch size");
    const std::size_t gh = h / patch, gw = w / patch;
    Tensor<T> out(Shape{gh * gw, patch * patch * c});
    for (std::size_t gy = 0; gy < gh; ++gy)
        for (std::size_t gx = 0; gx < gw; ++gx) {
            T* row = out.data() + (gy * gw + gx) * patch * patch * c;
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t py = 0; py < patch; ++py)
                    for (std::size_t px = 0; px < patch; ++px)
                        row[ch * patch * patch + py * patch + px] =
                            image[ch * h * w + (gy * patch + py) * w + (gx * patch + px)];
        }
    return out;
}

template <typename T>
Tensor<T> patchify_batch(const Tensor<T>& images, std::size_t patch) {
    if (images.rank() != 4) throw std::invalid_argument("patchify_batch: expected [B,C,H,W]");
    const std::size_t b = images.dim(0);
    const std::size_t sample = images.numel() / b;
    Tensor<T> first =
        patchify(Tensor<T>(Shape{images.dim(1), images.dim(2), images.dim(3)},
                           std::vector<T>(images.data(), images.data() + sample)),
                 patch);
    Tensor<T> out(Shape{b, first.dim(0), first.dim(1)});
    std::copy(first.data(), first.data() + first.numel(), out.data());
    for (std::size_t i = 1; i < b; ++i) {
        Tensor<T> p =
            patchify(Tensor<T>(Shape{images.dim(1), images.dim(2), images.dim(3)},
                               std::vector<T>(images.data() + i * sample,
                                              images.data() + (i + 1) * sample)),
                     patch);
        std::copy(p.data(), p.data() + p.numel(), out.data() + i * p.numel());
    }
    return out;
}

enum class Mode { train, eval };

// Post-softmax attention weights, one [B, heads, T, T] tensor per layer.
template <typename T>
struct AttentionTrace {
    std::vector<Tensor<T>> layers;
};

template <typename T>
struct VitGraph {
    typename Graph<T>::Id logits;
    std::vector<typename Graph<T>::Id> attention;  // softmax node per layer
    std::vector<typename Graph<T>::Id> param_nodes;  // parallel to ParamSet order
};

// Builds the full forward pass into `g` and returns the logits node plus
// handles for gradients and attention capture. Pre-norm blocks:
// x += proj(MHSA(LN1(x))); x += MLP(LN2(x)); final LN; CLS vector through
// Dense(head_hidden) -> GELU -> Dropout -> Dense(num_classes).
template <typename T>
VitGraph<T> vit_forward(Graph<T>& g, const ViTConfig& cfg, const ParamSet<T>& params,
                        const Tensor<T>& images, Mode mode, bool capture_attention,
                        RngStream* dropout_rng) {
    using Id = typename Graph<T>::Id;
    cfg.validate();
    if (images.rank() != 4 || images.dim(1) != cfg.channels ||
        images.dim(2) != cfg.image_size || images.dim(3) != cfg.image_size)
        throw std::invalid_argument("vit_forward: input shape " + shape_str(images.shape()) +
                                    " does not match config");
    const bool training = mode == Mode::train;
    if (training && cfg.head_dropout > 0.0 && dropout_rng == nullptr)
        throw std::invalid_argument("vit_forward: training mode requires a dropout stream");

    VitGraph<T> vg;
    vg.param_nodes.reserve(params.size());
    for (const auto& v : params.values) vg.param_nodes.push_back(g.param(&v));
    const auto p = [&](const char* name) { return vg.param_nodes[params.index_of(name)]; };

    const std::size_t tcount = cfg.tokens();
    const std::size_t n = cfg.num_patches();
    const std::size_t d = cfg.embed_dim;
    const std::size_t heads = cfg.num_heads;
    const std::size_t hd = cfg.head_dim();
    const std::size_t b = images.dim(0);

    // Patch tokens, projected: [B,N,D].
    Id tokens = g.constant(patchify_batch(images, cfg.patch_size));
    Id x = g.add(g.matmul(tokens, p("patch_embed.weight")), p("patch_embed.bias"));

    // Prepend CLS via constant selectors: S maps [B,N,D] -> [B,T,D] rows 1..N,
    // e0 places the CLS vector in row 0.
    Tensor<T> sel(Shape{tcount, n});
    for (std::size_t i = 0; i < n; ++i) sel[(i + 1) * n + i] = T(1);
    Tensor<T> e0(Shape{tcount, 1});
    e0[0] = T(1);
    Id cls_row = g.reshape(p("cls_token"), Shape{1, d});
    x = g.add(g.matmul(g.constant(std::move(sel)), x),
              g.matmul(g.constant(std::move(e0)), cls_row));
    x = g.add(x, p("pos_embed"));

    const T attn_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
    for (std::size_t blk = 0; blk < cfg.depth; ++blk) {
        const std::string base = "blocks." + std::to_string(blk) + ".";
        const auto bp = [&](const std::string& suffix) {
            return vg.param_nodes[params.index_of(base + suffix)];
        };

        Id h1 = g.layer_norm(x, bp("ln1.gamma"), bp("ln1.beta"), static_cast<T>(kLayerNormEps));
        const auto split_heads = [&](Id t) {
            return g.transpose(g.reshape(t, Shape{b, tcount, heads, hd}), {0, 2, 1, 3});
        };
        Id q = split_heads(g.add(g.matmul(h1, bp("attn.q.weight")), bp("attn.q.bias")));
        Id k = split_heads(g.add(g.matmul(h1, bp("attn.k.weight")), bp("attn.k.bias")));
        Id v = split_heads(g.add(g.matmul(h1, bp("attn.v.weight")), bp("attn.v.bias")));

        Id attn = g.softmax(g.scale(g.matmul(q, k, false, true), attn_scale), 3);
        if (capture_attention) vg.attention.push_back(attn);

        Id ctx = g.reshape(g.transpose(g.matmul(attn, v), {0, 2, 1, 3}), Shape{b, tcount, d});
        Id proj = g.add(g.matmul(ctx, bp("attn.proj.weight")), bp("attn.proj.bias"));
        x = g.add(x, proj);

        Id h2 = g.layer_norm(x, bp("ln2.gamma"), bp("ln2.beta"), static_cast<T>(kLayerNormEps));
        Id m = g.gelu(g.add(g.matmul(h2, bp("mlp.fc1.weight")), bp("mlp.fc1.bias")));
        m = g.add(g.matmul(m, bp("mlp.fc2.weight")), bp("mlp.fc2.bias"));
        x = g.add(x, m);
    }

    x = g.layer_norm(x, p("norm.gamma"), p("norm.beta"), static_cast<T>(kLayerNormEps));

    // CLS vector: [B,T,D] -> [B,D].
    Tensor<T> pick(Shape{1, tcount});
    pick[0] = T(1);
    Id cls = g.reshape(g.matmul(g.constant(std::move(pick)), x), Shape{b, d});

    Id h = g.gelu(g.add(g.matmul(cls, p("head.fc1.weight")), p("head.fc1.bias")));
    if (cfg.head_dropout > 0.0) h = g.dropout(h, cfg.head_dropout, training, dropout_rng);
    vg.logits = g.add(g.matmul(h, p("head.fc2.weight")), p("head.fc2.bias"));
    return vg;
}

// Plain forward: returns logits (and the attention trace when requested).
template <typename T>
std::pair<Tensor<T>, AttentionTrace<T>> forward(const ViTConfig& cfg, const ParamSet<T>& params,
                                                const Tensor<T>& images, Mode mode,
                                                bool capture_attention,
                                                RngStream* dropout_rng = nullptr) {
    Graph<T> g;
    VitGraph<T> vg = vit_forward(g, cfg, params, images, mode, capture_attention, dropout_rng);
    AttentionTrace<T> trace;
    for (auto id : vg.attention) trace.layers.push_back(g.value(id));
    return {g.value(vg.logits), std::move(trace)};
}

// Checkpoint container: magic + version + config text + named float32 arrays
// in enumeration order. load(save(p)) reproduces every value bit-exactly.
void save_params(const ViTConfig& cfg, const ParamSet<float>& params,
                 const std::filesystem::path& path);
std::pair<ViTConfig, ParamSet<float>> load_params(const std::filesystem::path& path);

// Throws listing every differing field when the two configs disagree.
void ensure_config_match(const ViTConfig& expected, const ViTConfig& loaded);

}  // namespace vitmri
