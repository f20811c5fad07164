#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vitmri/augment.hpp"
#include "vitmri/clahe.hpp"
#include "vitmri/dataset.hpp"
#include "vitmri/train.hpp"
#include "vitmri/vit.hpp"

namespace vitmri {

// Everything a run needs, bound from a flat key=value config file with CLI
// flags layered on top. Unknown keys are hard errors so typos cannot pass
// silently.
struct RunConfig {
    std::string data_root;
    std::string cache_root;
    std::string output_dir = "out";
    std::string manifest;  // split CSV written by `split`
    std::uint64_t seed = 42;
    std::string model = "vit_b16";  // vit_b16 | tiny

    SplitRatios split;
    ClaheConfig clahe;
    AugmentConfig augment;
    StageConfig train;

    ViTConfig vit() const;  // resolves the `model` preset
    void validate() const;
};

// Applies one key=value pair; UserError on unknown keys or bad values.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// One `key=value` per line; `#` starts a comment; blank lines ignored.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Accepted keys with one-line descriptions (drives --help and the docs).
std::vector<std::pair<std::string, std::string>> config_keys();

// Round-trippable dump of every key at its current value.
std::string config_to_text(const RunConfig& cfg);

}  // namespace vitmri
