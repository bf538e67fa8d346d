#include "tdir/dataio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include "tdir/errors.hpp"

namespace tdir {

namespace fs = std::filesystem;

Image load_image(const fs::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + png.message);
    }
    const auto fail = [&](const std::string& why) {
        png_image_free(&png);
        throw IoError("unsupported PNG " + path.string() + ": " + why);
    };
    if (png.format & PNG_FORMAT_FLAG_LINEAR) fail("16-bit samples");
    if (png.format & PNG_FORMAT_FLAG_COLORMAP) fail("palette colour type");
    if (png.format & PNG_FORMAT_FLAG_ALPHA) fail("alpha channel");

    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    const int h = static_cast<int>(png.height);
    const int w = static_cast<int>(png.width);
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }

    Image img(channels, h, w, ValueDomain::Unit);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.pixels.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
    return img;
}

void save_image(const Image& img, const fs::path& path) {
    const int channels = img.channels();
    if (channels != 1 && channels != 3) throw InvalidArgument("save_image: only 1- or 3-channel images");
    const Image unit = convert(img, ValueDomain::Unit);
    const int h = img.height(), w = img.width();
    std::vector<png_byte> buf(static_cast<std::size_t>(h) * w * channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                const double v = std::clamp(unit.pixels.at(c, y, x), 0.0, 1.0);
                buf[(static_cast<std::size_t>(y) * w + x) * channels + c] = static_cast<png_byte>(std::lround(v * 255.0));
            }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(w);
    png.height = static_cast<png_uint_32>(h);
    png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + png.message);
    }
}

std::vector<fs::path> list_png_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

const char* to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Split split_for(std::string_view filename, const SplitRatios& ratios) {
    const double total = ratios.train + ratios.val + ratios.test;
    if (!(total > 0.0) || ratios.train < 0 || ratios.val < 0 || ratios.test < 0) {
        throw InvalidArgument("split ratios must be non-negative with a positive sum");
    }
    // Top 53 bits of the hash give a uniform double in [0, 1).
    const double u = static_cast<double>(fnv1a64(filename) >> 11) * 0x1.0p-53 * total;
    if (u < ratios.train) return Split::Train;
    if (u < ratios.train + ratios.val) return Split::Val;
    return Split::Test;
}

PairManifest build_manifest(const fs::path& clean_dir, const fs::path& degraded_dir, const SplitRatios& ratios) {
    const auto clean = list_png_files(clean_dir);
    const auto degraded = list_png_files(degraded_dir);
    std::set<std::string> degraded_names;
    for (const auto& p : degraded) degraded_names.insert(p.filename().string());

    PairManifest m;
    std::set<std::string> paired;
    for (const auto& p : clean) {
        const std::string name = p.filename().string();
        if (degraded_names.count(name)) {
            m.entries.push_back({name, p, degraded_dir / name, split_for(name, ratios)});
            paired.insert(name);
        } else {
            m.unmatched.push_back(p);
        }
    }
    for (const auto& p : degraded) {
        if (!paired.count(p.filename().string())) m.unmatched.push_back(p);
    }
    for (const auto& p : m.unmatched) std::cerr << "warning: unpaired image " << p.string() << '\n';
    if (m.entries.empty()) {
        throw IoError("no matching file names between " + clean_dir.string() + " and " + degraded_dir.string());
    }
    return m;
}

void write_manifest_csv(const PairManifest& manifest, std::ostream& os) {
    os << "name,clean,degraded,split\n";
    for (const auto& e : manifest.entries) {
        os << e.name << ',' << e.clean.string() << ',' << e.degraded.string() << ',' << to_string(e.split) << '\n';
    }
}

std::vector<ImagePair> load_pairs(const PairManifest& manifest, std::optional<Split> only) {
    std::vector<ImagePair> pairs;
    for (const auto& e : manifest.entries) {
        if (only && e.split != *only) continue;
        ImagePair p{load_image(e.clean), load_image(e.degraded)};
        if (p.clean.pixels.shape() != p.degraded.pixels.shape()) {
            throw IoError("pair " + e.name + " has mismatched image sizes");
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

ImagePair sample_patch(const ImagePair& pair, int size, Rng& rng) {
    if (size < 1) throw InvalidArgument("patch size must be positive");
    if (pair.clean.pixels.shape() != pair.degraded.pixels.shape()) {
        throw InvalidArgument("sample_patch: pair images differ in shape");
    }
    Tensor clean = pair.clean.pixels;
    Tensor degraded = pair.degraded.pixels;
    const int h = std::max(clean.height(), size);
    const int w = std::max(clean.width(), size);
    if (h != clean.height() || w != clean.width()) {
        clean = reflect_pad(clean, h, w);
        degraded = reflect_pad(degraded, h, w);
    }
    const int y0 = h == size ? 0 : uniform_int(rng, 0, h - size);
    const int x0 = w == size ? 0 : uniform_int(rng, 0, w - size);
    return {Image(crop(clean, y0, x0, size, size), pair.clean.domain),
            Image(crop(degraded, y0, x0, size, size), pair.degraded.domain)};
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
    }
}

} // namespace tdir
