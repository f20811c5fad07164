#include "vitmri/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace vitmri {

namespace {

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw UserError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("");
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw UserError("config: key '" + key + "' expects a non-negative integer, got '" + v +
                        "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UserError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct KeyDef {
    const char* key;
    const char* desc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    bool alias = false;  // aliases are accepted but not dumped
};

#define STR_KEY(name, field, desc)                                             \
    KeyDef{name, desc, [](RunConfig& c, const std::string& v) { c.field = v; }, \
           [](const RunConfig& c) { return c.field; }}
#define DBL_KEY(name, field, desc)                                                          \
    KeyDef{name, desc, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); }, \
           [](const RunConfig& c) { return num(c.field); }}
#define SIZE_KEY(name, field, desc)                                                       \
    KeyDef{name, desc, [](RunConfig& c, const std::string& v) { c.field = to_size(name, v); }, \
           [](const RunConfig& c) { return std::to_string(c.field); }}
#define BOOL_KEY(name, field, desc)                                                       \
    KeyDef{name, desc, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); }, \
           [](const RunConfig& c) { return c.field ? "true" : "false"; }}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        STR_KEY("data_root", data_root, "root directory with the four class folders"),
        STR_KEY("cache_root", cache_root, "directory for CLAHE-preprocessed PNGs"),
        STR_KEY("output_dir", output_dir, "where checkpoints and reports are written"),
        STR_KEY("manifest", manifest, "split CSV produced by the split command"),
        KeyDef{"seed", "master random seed (default 42)",
               [](RunConfig& c, const std::string& v) {
                   c.seed = static_cast<std::uint64_t>(to_size("seed", v));
               },
               [](const RunConfig& c) { return std::to_string(c.seed); }},
        STR_KEY("model", model, "model preset: vit_b16 or tiny"),
        DBL_KEY("split.train", split.train, "training fraction (default 0.8)"),
        DBL_KEY("split.val", split.val, "validation fraction (default 0.1)"),
        DBL_KEY("split.test", split.test, "test fraction (default 0.1)"),
        SIZE_KEY("clahe.tiles_x", clahe.tiles_x, "CLAHE tile grid columns (default 8)"),
        SIZE_KEY("clahe.tiles_y", clahe.tiles_y, "CLAHE tile grid rows (default 8)"),
        DBL_KEY("clahe.clip_limit", clahe.clip_limit, "CLAHE clip limit (default 2.0)"),
        SIZE_KEY("clahe.bins", clahe.bins, "CLAHE histogram bins (default 256)"),
        DBL_KEY("augment.hflip_prob", augment.hflip_prob,
                "horizontal flip probability (default 0.5)"),
        DBL_KEY("augment.rot_degrees", augment.rot_degrees,
                "max rotation in degrees (default 15)"),
        DBL_KEY("augment.translate_frac", augment.translate_frac,
                "max translation fraction (default 0.05)"),
        DBL_KEY("augment.zoom_frac", augment.zoom_frac, "max zoom deviation (default 0.08)"),
        DBL_KEY("augment.contrast_frac", augment.contrast_frac,
                "max contrast deviation (default 0.10)"),
        DBL_KEY("augment.mixup_alpha", augment.mixup_alpha, "MixUp Beta alpha (default 0.2)"),
        DBL_KEY("augment.cutmix_alpha", augment.cutmix_alpha, "CutMix Beta alpha (default 1.0)"),
        DBL_KEY("augment.mixup_prob", augment.mixup_prob,
                "MixUp selection weight (default 0.5)"),
        DBL_KEY("augment.cutmix_prob", augment.cutmix_prob,
                "CutMix selection weight (default 0.5)"),
        SIZE_KEY("train.stage1_epochs", train.stage1_epochs,
                 "head warm-up epochs (default 5)"),
        DBL_KEY("train.stage1_head_lr", train.stage1_head_lr,
                "stage-1 head learning rate (default 1e-3)"),
        SIZE_KEY("train.stage2_max_epochs", train.stage2_max_epochs,
                 "fine-tuning epoch cap (default 15)"),
        DBL_KEY("train.stage2_backbone_lr", train.stage2_backbone_lr,
                "stage-2 backbone peak lr (default 1e-5)"),
        DBL_KEY("train.stage2_head_lr", train.stage2_head_lr,
                "stage-2 head peak lr (default 1e-4)"),
        DBL_KEY("train.lr_min", train.lr_min, "cosine schedule floor (default 1e-7)"),
        SIZE_KEY("train.patience", train.patience,
                 "early-stopping patience in stage-2 epochs (default 5)"),
        DBL_KEY("train.weight_decay", train.weight_decay, "AdamW weight decay (default 1e-4)"),
        DBL_KEY("train.label_smoothing", train.label_smoothing,
                "label smoothing epsilon (default 0.1)"),
        SIZE_KEY("train.batch_size", train.batch_size, "mini-batch size (default 32)"),
        DBL_KEY("train.beta1", train.beta1, "AdamW beta1 (default 0.9)"),
        DBL_KEY("train.beta2", train.beta2, "AdamW beta2 (default 0.999)"),
        DBL_KEY("train.adam_eps", train.adam_eps, "AdamW epsilon (default 1e-8)"),
        DBL_KEY("train.ema_decay", train.ema_decay, "EMA decay (default 0.999)"),
        BOOL_KEY("train.early_stopping", train.early_stopping,
                 "enable stage-2 early stopping (default true)"),
        BOOL_KEY("train.augment_pixels", train.augment_pixels,
                 "enable per-image augmentation (default true)"),
        BOOL_KEY("train.mix_batches", train.mix_batches,
                 "enable MixUp/CutMix (default true)"),
        KeyDef{"batch_size", "alias for train.batch_size",
               [](RunConfig& c, const std::string& v) {
                   c.train.batch_size = to_size("batch_size", v);
               },
               [](const RunConfig& c) { return std::to_string(c.train.batch_size); },
               /*alias=*/true},
    };
    return table;
}

#undef STR_KEY
#undef DBL_KEY
#undef SIZE_KEY
#undef BOOL_KEY

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

ViTConfig RunConfig::vit() const {
    if (model == "vit_b16") return ViTConfig{};
    if (model == "tiny") return ViTConfig::tiny();
    throw UserError("config: unknown model preset '" + model + "' (expected vit_b16 or tiny)");
}

void RunConfig::validate() const {
    vit().validate();
    train.validate();
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const KeyDef& def : key_table()) {
        if (key == def.key) {
            def.set(cfg, value);
            return;
        }
    }
    throw UserError("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UserError(origin + ":" + std::to_string(lineno) +
                            ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_config_kv(cfg, key, value);
        } catch (const UserError& e) {
            throw UserError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("config: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::vector<std::pair<std::string, std::string>> config_keys() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const KeyDef& def : key_table()) out.emplace_back(def.key, def.desc);
    return out;
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    for (const KeyDef& def : key_table())
        if (!def.alias) os << def.key << " = " << def.get(cfg) << '\n';
    return os.str();
}

}  // namespace vitmri
