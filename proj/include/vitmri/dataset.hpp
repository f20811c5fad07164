#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vitmri/clahe.hpp"
#include "vitmri/image.hpp"
#include "vitmri/rng.hpp"
#include "vitmri/tensor.hpp"

namespace vitmri {

// Fixed class ordering (alphabetical); used for one-hot rows, confusion
// matrix axes and directory names alike.
enum class ClassLabel : int { glioma = 0, healthy = 1, meningioma = 2, pituitary = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<const char*, kNumClasses> kClassNames = {
    "glioma", "healthy", "meningioma", "pituitary"};

const char* class_name(ClassLabel label);
std::optional<ClassLabel> class_from_name(const std::string& name);

struct ManifestEntry {
    std::string relative_path;  // forward-slash "<class>/<file>"
    ClassLabel label;
};

struct Manifest {
    std::vector<ManifestEntry> entries;  // sorted by relative_path
    std::vector<std::string> warnings;   // skipped files etc.
};

enum class SplitKind : int { train = 0, val = 1, test = 2 };

const char* split_name(SplitKind kind);
std::optional<SplitKind> split_from_name(const std::string& name);

struct SplitEntry {
    std::string relative_path;
    ClassLabel label;
    SplitKind split;
};

struct SplitAssignment {
    std::vector<SplitEntry> entries;  // manifest order
    std::uint64_t seed = 0;
};

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Thrown for bad user-facing inputs (paths, formats, configuration).
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scans root/<class>/<file>. The root must contain exactly the four class
// directories; unreadable or non-image files are skipped with a warning
// recorded on the manifest.
Manifest scan_directory(const std::filesystem::path& root);

// Per class: shuffle that class's (sorted) entries with a stream derived
// from (seed, class index); the first round-half-up(test_ratio*n) go to
// test, the next round-half-up(val_ratio*n) to val, the rest to train.
SplitAssignment stratified_split(const Manifest& manifest, const SplitRatios& ratios = {},
                                 std::uint64_t seed = 42);

void write_split_csv(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment read_split_csv(const std::filesystem::path& path);

struct CacheResult {
    std::size_t written = 0;
    std::vector<std::string> warnings;
};

// Where a source file lands in the cache tree: same relative path with the
// extension replaced by .png.
std::string cached_relative_path(const std::string& relative_path);

// Mirrors the manifest tree under cache_root as CLAHE-processed PNGs
// (source extension replaced by .png). Files whose cached copy is at least
// as new as the source are skipped; per-file failures become warnings and
// do not abort the run. `threads` caps parallel workers (0 = all cores).
CacheResult cache_clahe(const Manifest& manifest, const std::filesystem::path& src_root,
                        const std::filesystem::path& cache_root, const ClaheConfig& cfg,
                        std::size_t threads = 0);

struct Batch {
    Tensor<float> images;   // [B,C,H,W], values in [0,1]
    Tensor<double> labels;  // [B,K], rows sum to 1
    std::vector<std::size_t> indices;  // positions into the epoch's entry list
};

// Replicates gray to RGB or averages RGB to gray so loaded images match the
// channel count the model expects.
ImageU8 to_channels(const ImageU8& img, std::size_t channels);

// Deterministic epoch iterator: shuffles entries with a stream derived from
// (shuffle_seed, "batches", epoch), loads images under root, applies the
// optional augment hook, resizes to (image_size, image_size), scales to
// [0,1] and one-hot encodes labels. The final short batch is kept.
class BatchStream {
public:
    using AugmentHook = std::function<ImageU8(const ImageU8&, std::size_t epoch_index)>;

    BatchStream(const std::filesystem::path& root, std::vector<ManifestEntry> entries,
                std::size_t batch_size, std::uint64_t shuffle_seed, std::uint64_t epoch,
                std::size_t image_size, std::size_t channels, AugmentHook augment = nullptr);

    // Fills `out` with the next batch; false once the epoch is exhausted.
    bool next(Batch& out);

    std::size_t num_batches() const;
    const std::vector<std::size_t>& order() const { return order_; }

private:
    std::filesystem::path root_;
    std::vector<ManifestEntry> entries_;
    std::vector<std::size_t> order_;
    std::size_t batch_size_;
    std::size_t image_size_;
    std::size_t channels_;
    std::size_t cursor_ = 0;
    AugmentHook augment_;
};

// Loads one image as a [C,S,S] float tensor in [0,1] (no augmentation).
Tensor<float> load_image_tensor(const std::filesystem::path& path, std::size_t image_size,
                                std::size_t channels);
Tensor<float> image_to_tensor(const ImageU8& img, std::size_t image_size, std::size_t channels);

std::vector<ManifestEntry> split_subset(const SplitAssignment& split, SplitKind kind);

}  // namespace vitmri
