#include "vitmri/vit.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace vitmri {

void ViTConfig::validate() const {
    if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0)
        throw std::invalid_argument("ViTConfig: image_size must be a positive multiple of patch_size");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("ViTConfig: channels must be 1 or 3");
    if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0)
        throw std::invalid_argument("ViTConfig: embed_dim must be a positive multiple of num_heads");
    if (depth == 0 || mlp_dim == 0 || head_hidden == 0 || num_classes == 0)
        throw std::invalid_argument("ViTConfig: depth/mlp_dim/head_hidden/num_classes must be positive");
    if (head_dropout < 0.0 || head_dropout >= 1.0)
        throw std::invalid_argument("ViTConfig: head_dropout must lie in [0,1)");
}

std::vector<ParamEntrySpec> param_entries(const ViTConfig& cfg) {
    cfg.validate();
    using Init = ParamEntrySpec::Init;
    std::vector<ParamEntrySpec> out;
    const std::size_t d = cfg.embed_dim;

    out.push_back({"patch_embed.weight", {cfg.patch_elems(), d}, true, Init::trunc_normal});
    out.push_back({"patch_embed.bias", {d}, true, Init::zeros});
    out.push_back({"cls_token", {d}, true, Init::normal});
    out.push_back({"pos_embed", {cfg.tokens(), d}, true, Init::normal});
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        const std::string b = "blocks." + std::to_string(i) + ".";
        out.push_back({b + "ln1.gamma", {d}, true, Init::ones});
        out.push_back({b + "ln1.beta", {d}, true, Init::zeros});
        for (const char* qkv : {"q", "k", "v"}) {
            out.push_back({b + "attn." + qkv + ".weight", {d, d}, true, Init::trunc_normal});
            out.push_back({b + "attn." + qkv + ".bias", {d}, true, Init::zeros});
        }
        out.push_back({b + "attn.proj.weight", {d, d}, true, Init::trunc_normal});
        out.push_back({b + "attn.proj.bias", {d}, true, Init::zeros});
        out.push_back({b + "ln2.gamma", {d}, true, Init::ones});
        out.push_back({b + "ln2.beta", {d}, true, Init::zeros});
        out.push_back({b + "mlp.fc1.weight", {d, cfg.mlp_dim}, true, Init::trunc_normal});
        out.push_back({b + "mlp.fc1.bias", {cfg.mlp_dim}, true, Init::zeros});
        out.push_back({b + "mlp.fc2.weight", {cfg.mlp_dim, d}, true, Init::trunc_normal});
        out.push_back({b + "mlp.fc2.bias", {d}, true, Init::zeros});
    }
    out.push_back({"norm.gamma", {d}, true, Init::ones});
    out.push_back({"norm.beta", {d}, true, Init::zeros});
    out.push_back({"head.fc1.weight", {d, cfg.head_hidden}, false, Init::trunc_normal});
    out.push_back({"head.fc1.bias", {cfg.head_hidden}, false, Init::zeros});
    out.push_back({"head.fc2.weight", {cfg.head_hidden, cfg.num_classes}, false,
                   Init::trunc_normal});
    out.push_back({"head.fc2.bias", {cfg.num_classes}, false, Init::zeros});
    return out;
}

std::size_t param_count(const ViTConfig& cfg) {
    std::size_t n = 0;
    for (const auto& e : param_entries(cfg)) n += shape_numel(e.shape);
    return n;
}

namespace {

constexpr char kMagic[8] = {'V', 'I', 'T', 'M', 'R', 'I', '0', '1'};
constexpr std::uint32_t kVersion = 1;

std::string config_text(const ViTConfig& c) {
    std::ostringstream os;
    os << "image_size=" << c.image_size << "\npatch_size=" << c.patch_size
       << "\nchannels=" << c.channels << "\nembed_dim=" << c.embed_dim
       << "\ndepth=" << c.depth << "\nnum_heads=" << c.num_heads
       << "\nmlp_dim=" << c.mlp_dim << "\nhead_hidden=" << c.head_hidden
       << "\nhead_dropout=" << c.head_dropout << "\nnum_classes=" << c.num_classes << "\n";
    return os.str();
}

ViTConfig config_from_text(const std::string& text) {
    ViTConfig c;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("checkpoint: malformed config line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "image_size") c.image_size = std::stoull(val);
        else if (key == "patch_size") c.patch_size = std::stoull(val);
        else if (key == "channels") c.channels = std::stoull(val);
        else if (key == "embed_dim") c.embed_dim = std::stoull(val);
        else if (key == "depth") c.depth = std::stoull(val);
        else if (key == "num_heads") c.num_heads = std::stoull(val);
        else if (key == "mlp_dim") c.mlp_dim = std::stoull(val);
        else if (key == "head_hidden") c.head_hidden = std::stoull(val);
        else if (key == "head_dropout") c.head_dropout = std::stod(val);
        else if (key == "num_classes") c.num_classes = std::stoull(val);
        else throw std::runtime_error("checkpoint: unknown config key '" + key + "'");
    }
    return c;
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Reader {
    const std::vector<char>& buf;
    std::size_t pos = 0;

    void read(void* dst, std::size_t n) {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
        std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    }
    template <typename T>
    T get() {
        T v;
        read(&v, sizeof(T));
        return v;
    }
};

}  // namespace

void save_params(const ViTConfig& cfg, const ParamSet<float>& params,
                 const std::filesystem::path& path) {
    const auto spec = param_entries(cfg);
    if (spec.size() != params.size())
        throw std::invalid_argument("save_params: parameter set does not match config");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_params: cannot open " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kVersion);
    const std::string cfg_text = config_text(cfg);
    write_raw(out, static_cast<std::uint32_t>(cfg_text.size()));
    out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    write_raw(out, static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params.names[i] != spec[i].name || params.values[i].shape() != spec[i].shape)
            throw std::invalid_argument("save_params: entry " + std::to_string(i) +
                                        " ('" + params.names[i] + "') does not match config");
        write_raw(out, static_cast<std::uint32_t>(params.names[i].size()));
        out.write(params.names[i].data(), static_cast<std::streamsize>(params.names[i].size()));
        const Shape& s = params.values[i].shape();
        write_raw(out, static_cast<std::uint32_t>(s.size()));
        for (auto dim : s) write_raw(out, static_cast<std::uint64_t>(dim));
        out.write(reinterpret_cast<const char*>(params.values[i].data()),
                  static_cast<std::streamsize>(params.values[i].numel() * sizeof(float)));
    }
    if (!out.good()) throw std::runtime_error("save_params: write failed for " + path.string());
}

std::pair<ViTConfig, ParamSet<float>> load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_params: cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{buf};

    char magic[8];
    r.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_params: bad magic in " + path.string() +
                                 " (not a checkpoint file)");
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion)
        throw std::runtime_error("load_params: unsupported version " + std::to_string(version));

    const auto cfg_len = r.get<std::uint32_t>();
    std::string cfg_text(cfg_len, '\0');
    r.read(cfg_text.data(), cfg_len);
    const ViTConfig cfg = config_from_text(cfg_text);
    const auto spec = param_entries(cfg);

    const auto count = r.get<std::uint32_t>();
    if (count != spec.size())
        throw std::runtime_error("load_params: expected " + std::to_string(spec.size()) +
                                 " tensors, file has " + std::to_string(count));

    ParamSet<float> params;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto name_len = r.get<std::uint32_t>();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        if (name != spec[i].name)
            throw std::runtime_error("load_params: tensor " + std::to_string(i) + " is '" +
                                     name + "', expected '" + spec[i].name + "'");
        const auto ndim = r.get<std::uint32_t>();
        Shape shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        if (shape != spec[i].shape)
            throw std::runtime_error("load_params: tensor '" + name + "' has shape " +
                                     shape_str(shape) + ", expected " +
                                     shape_str(spec[i].shape));
        Tensor<float> t(shape);
        r.read(t.data(), t.numel() * sizeof(float));
        params.names.push_back(name);
        params.values.push_back(std::move(t));
        params.backbone.push_back(spec[i].backbone ? 1 : 0);
    }
    if (r.pos != buf.size())
        throw std::runtime_error("load_params: trailing bytes in " + path.string());
    return {cfg, std::move(params)};
}

void ensure_config_match(const ViTConfig& expected, const ViTConfig& loaded) {
    std::vector<std::string> bad;
    const auto cmp = [&](const char* field, auto a, auto b) {
        if (a != b) {
            std::ostringstream os;
            os << field << " (expected " << a << ", got " << b << ")";
            bad.push_back(os.str());
        }
    };
    cmp("image_size", expected.image_size, loaded.image_size);
    cmp("patch_size", expected.patch_size, loaded.patch_size);
    cmp("channels", expected.channels, loaded.channels);
    cmp("embed_dim", expected.embed_dim, loaded.embed_dim);
    cmp("depth", expected.depth, loaded.depth);
    cmp("num_heads", expected.num_heads, loaded.num_heads);
    cmp("mlp_dim", expected.mlp_dim, loaded.mlp_dim);
    cmp("head_hidden", expected.head_hidden, loaded.head_hidden);
    cmp("head_dropout", expected.head_dropout, loaded.head_dropout);
    cmp("num_classes", expected.num_classes, loaded.num_classes);
    if (!bad.empty()) {
        std::string msg = "checkpoint config mismatch: ";
        for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? "; " : "") + bad[i];
        throw std::runtime_error(msg);
    }
}

}  // namespace vitmri
