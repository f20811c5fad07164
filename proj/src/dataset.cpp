#include "vitmri/dataset.hpp"

#include <algorithm>

#include "vitmri/transforms.hpp"
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace vitmri {

namespace fs = std::filesystem;

const char* class_name(ClassLabel label) {
    return kClassNames.at(static_cast<std::size_t>(label));
}

std::optional<ClassLabel> class_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (name == kClassNames[i]) return static_cast<ClassLabel>(i);
    return std::nullopt;
}

const char* split_name(SplitKind kind) {
    switch (kind) {
        case SplitKind::train: return "train";
        case SplitKind::val: return "val";
        case SplitKind::test: return "test";
    }
    return "?";
}

std::optional<SplitKind> split_from_name(const std::string& name) {
    if (name == "train") return SplitKind::train;
    if (name == "val") return SplitKind::val;
    if (name == "test") return SplitKind::test;
    return std::nullopt;
}

Manifest scan_directory(const fs::path& root) {
    if (!fs::is_directory(root)) throw UserError("dataset root is not a directory: " + root.string());

    std::vector<std::string> found_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_directory()) {
            if (!class_from_name(name))
                throw UserError("unexpected directory '" + name + "' under " + root.string() +
                                " (expected only glioma/healthy/meningioma/pituitary)");
            found_dirs.push_back(name);
        }
    }
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (std::find(found_dirs.begin(), found_dirs.end(), kClassNames[i]) == found_dirs.end())
            throw UserError("missing class directory '" + std::string(kClassNames[i]) +
                            "' under " + root.string());

    Manifest m;
    for (std::size_t ci = 0; ci < kNumClasses; ++ci) {
        const fs::path class_dir = root / kClassNames[ci];
        std::size_t count_before = m.entries.size();
        for (const auto& entry : fs::directory_iterator(class_dir)) {
            const std::string rel = std::string(kClassNames[ci]) + "/" +
                                    entry.path().filename().string();
            if (!entry.is_regular_file()) {
                m.warnings.push_back("skipped " + rel + ": not a regular file");
                continue;
            }
            if (!has_image_extension(entry.path())) {
                m.warnings.push_back("skipped " + rel + ": not a PNG/JPEG file");
                continue;
            }
            std::ifstream probe(entry.path(), std::ios::binary);
            if (!probe) {
                m.warnings.push_back("skipped " + rel + ": unreadable");
                continue;
            }
            m.entries.push_back({rel, static_cast<ClassLabel>(ci)});
        }
        if (m.entries.size() == count_before)
            throw UserError("class directory '" + std::string(kClassNames[ci]) +
                            "' contains no readable images");
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.relative_path < b.relative_path;
              });
    std::sort(m.warnings.begin(), m.warnings.end());
    return m;
}

namespace {

std::size_t round_half_up_count(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

}  // namespace

SplitAssignment stratified_split(const Manifest& manifest, const SplitRatios& ratios,
                                 std::uint64_t seed) {
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw UserError("split ratios must sum to 1");
    if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0)
        throw UserError("split ratios must all be positive");

    std::array<std::vector<std::size_t>, kNumClasses> per_class;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
        per_class[static_cast<std::size_t>(manifest.entries[i].label)].push_back(i);

    std::vector<SplitKind> assigned(manifest.entries.size(), SplitKind::train);
    for (std::size_t ci = 0; ci < kNumClasses; ++ci) {
        auto& idx = per_class[ci];
        const std::size_t n = idx.size();
        if (n < 3)
            throw UserError("class '" + std::string(kClassNames[ci]) +
                            "' has only " + std::to_string(n) + " entries; need at least 3");
        const std::size_t n_test = round_half_up_count(ratios.test * static_cast<double>(n));
        const std::size_t n_val = round_half_up_count(ratios.val * static_cast<double>(n));
        if (n_test == 0 || n_val == 0 || n_test + n_val >= n)
            throw UserError("class '" + std::string(kClassNames[ci]) +
                            "' is too small to populate train/val/test at these ratios");

        RngStream rng = RngStream::derive(seed, "stratified_split", ci);
        rng.shuffle(idx.begin(), idx.end());
        for (std::size_t k = 0; k < n; ++k) {
            const SplitKind kind = k < n_test              ? SplitKind::test
                                   : k < n_test + n_val    ? SplitKind::val
                                                           : SplitKind::train;
            assigned[idx[k]] = kind;
        }
    }

    SplitAssignment out;
    out.seed = seed;
    out.entries.reserve(manifest.entries.size());
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
        out.entries.push_back(
            {manifest.entries[i].relative_path, manifest.entries[i].label, assigned[i]});
    return out;
}

void write_split_csv(const SplitAssignment& split, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw UserError("cannot open for write: " + path.string());
    out << "relative_path,label,split\n";
    for (const auto& e : split.entries) {
        if (e.relative_path.find(',') != std::string::npos)
            throw UserError("path contains a comma, cannot serialize: " + e.relative_path);
        out << e.relative_path << ',' << class_name(e.label) << ',' << split_name(e.split)
            << '\n';
    }
    if (!out.good()) throw UserError("write failed for " + path.string());
}

SplitAssignment read_split_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open split file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw UserError("empty split file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "relative_path,label,split")
        throw UserError("bad split file header in " + path.string() + ": '" + line + "'");

    SplitAssignment out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw UserError(path.string() + ":" + std::to_string(lineno) +
                            ": expected 3 comma-separated fields");
        const std::string rel = line.substr(0, c1);
        const std::string lab = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string spl = line.substr(c2 + 1);
        const auto label = class_from_name(lab);
        if (!label)
            throw UserError(path.string() + ":" + std::to_string(lineno) +
                            ": unknown class label '" + lab + "'");
        const auto kind = split_from_name(spl);
        if (!kind)
            throw UserError(path.string() + ":" + std::to_string(lineno) +
                            ": unknown split '" + spl + "'");
        out.entries.push_back({rel, *label, *kind});
    }
    return out;
}

CacheResult cache_clahe(const Manifest& manifest, const fs::path& src_root,
                        const fs::path& cache_root, const ClaheConfig& cfg,
                        std::size_t threads) {
    struct Slot {
        bool written = false;
        std::string warning;
    };
    std::vector<Slot> slots(manifest.entries.size());

    const auto process = [&](std::size_t i) {
        const auto& entry = manifest.entries[i];
        const fs::path src = src_root / entry.relative_path;
        const fs::path dst = cache_root / cached_relative_path(entry.relative_path);
        try {
            std::error_code ec;
            if (fs::exists(dst) && fs::last_write_time(dst, ec) >= fs::last_write_time(src))
                return;
            fs::create_directories(dst.parent_path());
            save_png(dst, clahe(load_image(src), cfg));
            slots[i].written = true;
        } catch (const std::exception& e) {
            slots[i].warning = entry.relative_path + ": " + e.what();
        }
    };

    std::size_t workers = threads ? threads : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min(workers, std::max<std::size_t>(manifest.entries.size(), 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < manifest.entries.size();
                     i = next.fetch_add(1))
                    process(i);
            });
        for (auto& t : pool) t.join();
    }

    CacheResult result;
    for (const auto& s : slots) {
        if (s.written) ++result.written;
        if (!s.warning.empty()) result.warnings.push_back(s.warning);
    }
    return result;
}

std::string cached_relative_path(const std::string& relative_path) {
    return fs::path(relative_path).replace_extension(".png").generic_string();
}

ImageU8 to_channels(const ImageU8& img, std::size_t channels) {
    if (img.channels == channels) return img;
    ImageU8 out(img.height, img.width, channels);
    const std::size_t n = img.height * img.width;
    if (img.channels == 1 && channels == 3) {
        for (std::size_t i = 0; i < n; ++i)
            out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = img.pixels[i];
        return out;
    }
    if (img.channels == 3 && channels == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned sum = static_cast<unsigned>(img.pixels[3 * i]) +
                                 img.pixels[3 * i + 1] + img.pixels[3 * i + 2];
            out.pixels[i] = static_cast<std::uint8_t>((2 * sum + 3) / 6);  // round(sum/3)
        }
        return out;
    }
    throw std::invalid_argument("to_channels: unsupported conversion");
}

Tensor<float> image_to_tensor(const ImageU8& img, std::size_t image_size, std::size_t channels) {
    ImageU8 fit = to_channels(img, channels);
    if (fit.height != image_size || fit.width != image_size)
        fit = resize_bilinear(fit, image_size, image_size);
    Tensor<float> out(Shape{channels, image_size, image_size});
    const std::size_t plane = image_size * image_size;
    for (std::size_t y = 0; y < image_size; ++y)
        for (std::size_t x = 0; x < image_size; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                out[c * plane + y * image_size + x] =
                    static_cast<float>(fit.at(y, x, c)) / 255.0f;
    return out;
}

Tensor<float> load_image_tensor(const fs::path& path, std::size_t image_size,
                                std::size_t channels) {
    return image_to_tensor(load_image(path), image_size, channels);
}

BatchStream::BatchStream(const fs::path& root, std::vector<ManifestEntry> entries,
                         std::size_t batch_size, std::uint64_t shuffle_seed, std::uint64_t epoch,
                         std::size_t image_size, std::size_t channels, AugmentHook augment)
    : root_(root),
      entries_(std::move(entries)),
      batch_size_(batch_size),
      image_size_(image_size),
      channels_(channels),
      augment_(std::move(augment)) {
    if (batch_size_ == 0) throw std::invalid_argument("BatchStream: batch_size must be >= 1");
    RngStream rng = RngStream::derive(shuffle_seed, "batches", epoch);
    order_ = rng.permutation(entries_.size());
}

std::size_t BatchStream::num_batches() const {
    return (entries_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchStream::next(Batch& out) {
    if (cursor_ >= order_.size()) return false;
    const std::size_t b = std::min(batch_size_, order_.size() - cursor_);
    out.images = Tensor<float>(Shape{b, channels_, image_size_, image_size_});
    out.labels = Tensor<double>(Shape{b, kNumClasses});
    out.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                       order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + b));

    const std::size_t sample_sz = channels_ * image_size_ * image_size_;
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t epoch_index = cursor_ + k;
        const ManifestEntry& e = entries_[order_[epoch_index]];
        ImageU8 img;
        try {
            img = load_image(root_ / e.relative_path);
        } catch (const std::exception& ex) {
            throw UserError("failed to load '" + e.relative_path + "': " + ex.what());
        }
        if (augment_) img = augment_(img, epoch_index);
        const Tensor<float> t = image_to_tensor(img, image_size_, channels_);
        std::copy(t.data(), t.data() + sample_sz, out.images.data() + k * sample_sz);
        out.labels[k * kNumClasses + static_cast<std::size_t>(e.label)] = 1.0;
    }
    cursor_ += b;
    return true;
}

std::vector<ManifestEntry> split_subset(const SplitAssignment& split, SplitKind kind) {
    std::vector<ManifestEntry> out;
    for (const auto& e : split.entries)
        if (e.split == kind) out.push_back({e.relative_path, e.label});
    return out;
}

}  // namespace vitmri
