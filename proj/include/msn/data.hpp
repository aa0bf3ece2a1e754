#ifndef MSN_DATA_HPP
#define MSN_DATA_HPP

// IDX (MNIST container) reading and writing, deterministic subsampling and a
// procedural digit set for offline runs.
//
// IDX layout: bytes 0-1 zero, byte 2 element type (0x08 = unsigned byte),
// byte 3 rank, then rank big-endian uint32 sizes, then the row-major payload.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msn/errors.hpp"
#include "msn/network.hpp"
#include "msn/vecmath.hpp"

namespace msn {

inline constexpr std::uint8_t kIdxUnsignedByte = 0x08;

struct IdxArray {
    std::uint8_t type_code = kIdxUnsignedByte;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;

    [[nodiscard]] std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    friend bool operator==(const IdxArray&, const IdxArray&) = default;
};

inline IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw ParseError(bytes.size(), "idx: truncated magic number");
    if (bytes[0] != 0 || bytes[1] != 0) throw ParseError(0, "idx: bad magic number");
    if (bytes[2] != kIdxUnsignedByte) throw ParseError(2, "idx: unsupported element type");
    IdxArray out;
    const std::size_t rank = bytes[3];
    if (rank == 0) throw ParseError(3, "idx: rank must be >= 1");
    std::size_t offset = 4;
    for (std::size_t i = 0; i < rank; ++i) {
        if (bytes.size() < offset + 4) throw ParseError(bytes.size(), "idx: truncated dimension table");
        const std::uint32_t d = (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
                                (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
        out.dims.push_back(d);
        offset += 4;
    }
    const std::size_t expected = out.element_count();
    const std::size_t available = bytes.size() - offset;
    if (available < expected) {
        throw ParseError(bytes.size(), "idx: payload has " + std::to_string(available) + " bytes, header promises " +
                                           std::to_string(expected));
    }
    if (available > expected) throw ParseError(offset + expected, "idx: trailing bytes after payload");
    out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return out;
}

inline std::vector<std::uint8_t> serialize_idx(const IdxArray& arr) {
    if (arr.dims.empty() || arr.dims.size() > 255) throw ArgumentError("idx: rank must be in [1, 255]");
    if (arr.data.size() != arr.element_count()) throw DimensionError("idx: payload size does not match dims");
    std::vector<std::uint8_t> bytes{0, 0, arr.type_code, static_cast<std::uint8_t>(arr.dims.size())};
    for (auto d : arr.dims) {
        bytes.push_back(static_cast<std::uint8_t>(d >> 24));
        bytes.push_back(static_cast<std::uint8_t>(d >> 16));
        bytes.push_back(static_cast<std::uint8_t>(d >> 8));
        bytes.push_back(static_cast<std::uint8_t>(d));
    }
    bytes.insert(bytes.end(), arr.data.begin(), arr.data.end());
    return bytes;
}

inline IdxArray load_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

inline void write_idx(const std::filesystem::path& path, const IdxArray& arr) {
    const auto bytes = serialize_idx(arr);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Pairs an image array [count][rows][cols] with a label array [count].
/// Pixels are divided by 255; no centering.
inline Dataset make_dataset(const IdxArray& images, const IdxArray& labels, std::size_t num_classes = 10) {
    if (images.dims.size() != 3) throw DimensionError("images must have rank 3");
    if (labels.dims.size() != 1) throw DimensionError("labels must have rank 1");
    if (images.dims[0] != labels.dims[0]) throw DimensionError("image and label counts differ");
    Dataset ds;
    ds.sample_shape = {1, images.dims[1], images.dims[2]};
    ds.num_classes = num_classes;
    ds.features.reserve(images.data.size());
    for (auto px : images.data) ds.features.push_back(static_cast<double>(px) / 255.0);
    ds.labels.assign(labels.data.begin(), labels.data.end());
    ds.validate();
    return ds;
}

inline Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
    return make_dataset(load_idx(images), load_idx(labels), 10);
}

/// Uniform n-subset without replacement; items keep their original order.
inline Dataset subsample(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n > dataset.size()) {
        throw ArgumentError("subsample: n=" + std::to_string(n) + " outside [1, " + std::to_string(dataset.size()) +
                            "]");
    }
    const auto picks = choose_indices(dataset.size(), n, RngHandle{seed, 0x73756273ULL});
    Dataset out;
    out.sample_shape = dataset.sample_shape;
    out.num_classes = dataset.num_classes;
    out.features.reserve(n * dataset.sample_shape.size());
    for (std::size_t i : picks) {
        const auto x = dataset.input(i);
        out.features.insert(out.features.end(), x.begin(), x.end());
        out.labels.push_back(dataset.labels[i]);
    }
    return out;
}

inline std::vector<std::size_t> class_counts(const Dataset& dataset) {
    std::vector<std::size_t> counts(dataset.num_classes, 0);
    for (auto l : dataset.labels) ++counts.at(l);
    return counts;
}

namespace detail {

// Seven-segment masks, bit order a b c d e f g (top, upper right, lower right,
// bottom, lower left, upper left, middle).
inline constexpr std::array<std::uint8_t, 10> kSegments = {0x7e, 0x30, 0x6d, 0x79, 0x33,
                                                           0x5b, 0x5f, 0x70, 0x7f, 0x7b};

inline std::vector<double> glyph_template(std::size_t cls, std::size_t size, std::uint64_t seed) {
    std::vector<double> img(size * size, 0.0);
    auto set = [&](std::size_t r, std::size_t c) { img[r * size + c] = 1.0; };
    if (cls < kSegments.size()) {
        const std::size_t lo = 1, hi = size - 2, mid = size / 2;
        const std::uint8_t mask = kSegments[cls];
        auto on = [&](int bit) { return (mask >> (6 - bit)) & 1; };
        for (std::size_t c = lo; c <= hi; ++c) {
            if (on(0)) set(lo, c);
            if (on(3)) set(hi, c);
            if (on(6)) set(mid, c);
        }
        for (std::size_t r = lo; r <= mid; ++r) {
            if (on(5)) set(r, lo);
            if (on(1)) set(r, hi);
        }
        for (std::size_t r = mid; r <= hi; ++r) {
            if (on(4)) set(r, lo);
            if (on(2)) set(r, hi);
        }
    } else {
        // Classes beyond ten get a fixed random pattern.
        auto engine = RngHandle{seed, 0x676c797068ULL + cls}.engine();
        std::bernoulli_distribution lit(0.3);
        for (auto& v : img) v = lit(engine) ? 1.0 : 0.0;
    }
    return img;
}

}  // namespace detail

/// Procedural stand-in for MNIST: each class has a fixed glyph (seven-segment
/// digits for the first ten), plus gaussian pixel noise clamped to [0, 1].
/// Labels cycle through the classes, so the set is balanced.
inline Dataset synthetic_digits(std::size_t n, std::size_t image_size, std::size_t num_classes, std::uint64_t seed,
                                double noise = 0.1) {
    if (num_classes == 0 || n < num_classes) throw ArgumentError("synthetic_digits: need n >= num_classes >= 1");
    if (image_size < 5) throw ArgumentError("synthetic_digits: image_size must be >= 5");
    if (!(noise >= 0.0)) throw ArgumentError("synthetic_digits: noise must be >= 0");
    std::vector<std::vector<double>> templates;
    for (std::size_t c = 0; c < num_classes; ++c) templates.push_back(detail::glyph_template(c, image_size, seed));

    Dataset ds;
    ds.sample_shape = {1, image_size, image_size};
    ds.num_classes = num_classes;
    ds.features.reserve(n * image_size * image_size);
    auto engine = RngHandle{seed, 0x6e6f697365ULL}.engine();
    std::normal_distribution<double> jitter(0.0, noise > 0.0 ? noise : 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i % num_classes;
        for (double px : templates[cls]) {
            const double v = noise > 0.0 ? px + jitter(engine) : px;
            ds.features.push_back(std::clamp(v, 0.0, 1.0));
        }
        ds.labels.push_back(cls);
    }
    return ds;
}

}  // namespace msn

#endif  // MSN_DATA_HPP
