#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdir/image.hpp"
#include "tdir/rng.hpp"

namespace tdir {

/// Reads an 8-bit RGB or grayscale PNG into a unit-range C x H x W image.
/// 16-bit, palette and alpha images are rejected with IoError.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG (1 or 3 channels). Samples are clamped to the image's
/// domain, mapped to [0, 255] and rounded half away from zero.
void save_image(const Image& img, const std::filesystem::path& path);

/// Sorted list of *.png files directly inside `dir`.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

enum class Split { Train, Val, Test };
const char* to_string(Split s);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Deterministic split from a hash of the file name.
Split split_for(std::string_view filename, const SplitRatios& ratios);

struct ManifestEntry {
    std::string name;
    std::filesystem::path clean;
    std::filesystem::path degraded;
    Split split = Split::Train;
};

struct PairManifest {
    std::vector<ManifestEntry> entries;
    /// Files present in only one of the two directories.
    std::vector<std::filesystem::path> unmatched;
};

/// Pairs PNGs with identical file names in the two directories. Unmatched
/// files are listed (and reported on stderr); an empty intersection throws.
PairManifest build_manifest(const std::filesystem::path& clean_dir, const std::filesystem::path& degraded_dir,
                            const SplitRatios& ratios = {});

/// CSV with header "name,clean,degraded,split".
void write_manifest_csv(const PairManifest& manifest, std::ostream& os);

std::vector<ImagePair> load_pairs(const PairManifest& manifest, std::optional<Split> only = std::nullopt);

/// Cuts the same size x size window from both images of a pair. Images
/// smaller than the window are reflect-padded first; the offset is uniform
/// over valid positions (forced to (0, 0) when there is only one).
ImagePair sample_patch(const ImagePair& pair, int size, Rng& rng);

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

} // namespace tdir
