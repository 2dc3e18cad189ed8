// SPDX-License-Identifier: Apache-2.0
#include "augal/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "augal/errors.hpp"
#include "augal/rng.hpp"

namespace augal {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t be_u32(const std::vector<std::uint8_t>& b, std::size_t off,
                     const std::string& path) {
    if (off + 4 > b.size())
        throw FormatError(path + ": truncated at byte offset " + std::to_string(off));
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

Image Dataset::image(std::size_t i) const {
    Image img;
    img.channels = channels;
    img.height = height;
    img.width = width;
    const double* p = image_ptr(i);
    img.pix.assign(p, p + image_size());
    return img;
}

ChannelStats compute_channel_stats(const Dataset& data) {
    ChannelStats stats;
    stats.mean.assign(data.channels, 0.0);
    stats.stddev.assign(data.channels, 0.0);
    const std::size_t plane = data.height * data.width;
    const std::size_t per_channel = data.n * plane;
    for (std::size_t i = 0; i < data.n; ++i)
        for (std::size_t c = 0; c < data.channels; ++c) {
            const double* p = data.images.data() + (i * data.channels + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) stats.mean[c] += p[j];
        }
    for (double& m : stats.mean) m /= static_cast<double>(per_channel);
    for (std::size_t i = 0; i < data.n; ++i)
        for (std::size_t c = 0; c < data.channels; ++c) {
            const double* p = data.images.data() + (i * data.channels + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const double d = p[j] - stats.mean[c];
                stats.stddev[c] += d * d;
            }
        }
    for (double& s : stats.stddev)
        s = std::max(std::sqrt(s / static_cast<double>(per_channel)), 1e-12);
    return stats;
}

void normalize(Dataset& data, const ChannelStats& stats) {
    if (data.normalized) throw UsageError("normalize: dataset already normalized");
    if (stats.mean.size() != data.channels)
        throw UsageError("normalize: channel count mismatch");
    const std::size_t plane = data.height * data.width;
    for (std::size_t i = 0; i < data.n; ++i)
        for (std::size_t c = 0; c < data.channels; ++c) {
            double* p = data.images.data() + (i * data.channels + c) * plane;
            for (std::size_t j = 0; j < plane; ++j)
                p[j] = (p[j] - stats.mean[c]) / stats.stddev[c];
        }
    data.normalized = true;
}

void denormalize(Dataset& data, const ChannelStats& stats) {
    if (!data.normalized) throw UsageError("denormalize: dataset is not normalized");
    const std::size_t plane = data.height * data.width;
    for (std::size_t i = 0; i < data.n; ++i)
        for (std::size_t c = 0; c < data.channels; ++c) {
            double* p = data.images.data() + (i * data.channels + c) * plane;
            for (std::size_t j = 0; j < plane; ++j)
                p[j] = p[j] * stats.stddev[c] + stats.mean[c];
        }
    data.normalized = false;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img_bytes = read_file(images_path);
    const auto lbl_bytes = read_file(labels_path);

    const std::uint32_t img_magic = be_u32(img_bytes, 0, images_path);
    if (img_magic != 2051)
        throw FormatError(images_path + ": bad magic " + std::to_string(img_magic) +
                          " (want 2051) at byte offset 0");
    const std::uint32_t lbl_magic = be_u32(lbl_bytes, 0, labels_path);
    if (lbl_magic != 2049)
        throw FormatError(labels_path + ": bad magic " + std::to_string(lbl_magic) +
                          " (want 2049) at byte offset 0");

    const std::uint32_t n = be_u32(img_bytes, 4, images_path);
    const std::uint32_t rows = be_u32(img_bytes, 8, images_path);
    const std::uint32_t cols = be_u32(img_bytes, 12, images_path);
    const std::uint32_t n_lbl = be_u32(lbl_bytes, 4, labels_path);
    if (n != n_lbl)
        throw FormatError(labels_path + ": label count " + std::to_string(n_lbl) +
                          " does not match image count " + std::to_string(n) +
                          " at byte offset 4");
    const std::size_t want_img = 16 + std::size_t(n) * rows * cols;
    if (img_bytes.size() != want_img)
        throw FormatError(images_path + ": truncated at byte offset " +
                          std::to_string(std::min(img_bytes.size(), want_img)));
    const std::size_t want_lbl = 8 + std::size_t(n);
    if (lbl_bytes.size() != want_lbl)
        throw FormatError(labels_path + ": truncated at byte offset " +
                          std::to_string(std::min(lbl_bytes.size(), want_lbl)));

    Dataset d;
    d.n = n;
    d.channels = 1;
    d.height = rows;
    d.width = cols;
    d.images.resize(d.n * d.image_size());
    d.labels.resize(d.n);
    for (std::size_t i = 0; i < d.images.size(); ++i)
        d.images[i] = static_cast<double>(img_bytes[16 + i]) / 255.0;
    int max_label = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
        d.labels[i] = lbl_bytes[8 + i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.class_count = static_cast<std::size_t>(max_label) + 1;
    return d;
}

Dataset load_cifar(const std::string& path, CifarVariant variant) {
    return load_cifar_files({path}, variant);
}

Dataset load_cifar_files(const std::vector<std::string>& paths, CifarVariant variant) {
    const std::size_t label_bytes = variant == CifarVariant::Cifar100 ? 2 : 1;
    const std::size_t record = label_bytes + 3072;
    Dataset d;
    d.channels = 3;
    d.height = 32;
    d.width = 32;
    d.class_count = variant == CifarVariant::Cifar100 ? 100 : 10;
    for (const auto& path : paths) {
        const auto bytes = read_file(path);
        if (bytes.size() % record != 0)
            throw FormatError(path + ": size " + std::to_string(bytes.size()) +
                              " is not a multiple of record size " +
                              std::to_string(record) + " at byte offset " +
                              std::to_string(bytes.size() - bytes.size() % record));
        const std::size_t n = bytes.size() / record;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t* rec = bytes.data() + i * record;
            const int label = rec[label_bytes - 1];  // fine label for cifar100
            if (label >= static_cast<int>(d.class_count))
                throw FormatError(path + ": label " + std::to_string(label) +
                                  " out of range at byte offset " +
                                  std::to_string(i * record));
            d.labels.push_back(label);
            for (std::size_t j = 0; j < 3072; ++j)
                d.images.push_back(static_cast<double>(rec[label_bytes + j]) / 255.0);
        }
        d.n += n;
    }
    if (d.n == 0) throw FormatError("load_cifar: no records");
    return d;
}

Dataset synth_blobs(std::size_t n_per_class, std::size_t classes, std::size_t side,
                    double separation, std::uint64_t seed, const std::string& split) {
    if (n_per_class == 0 || classes < 2 || side == 0)
        throw ConfigError("synth_blobs: need n_per_class>0, classes>=2, side>0");
    const std::size_t dim = side * side;
    std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
    for (std::size_t c = 0; c < classes; ++c) {
        RngStream cs(seed, StreamPurpose::SynthData, 0, c);
        for (double& v : centers[c]) v = separation * cs.next_normal();
    }
    const std::uint64_t noise_base = split == "test" ? 1'000'000 : 0;
    Dataset d;
    d.n = n_per_class * classes;
    d.channels = 1;
    d.height = side;
    d.width = side;
    d.class_count = classes;
    d.split = split;
    d.normalized = true;  // blob values live in normalized space already
    d.images.reserve(d.n * dim);
    d.labels.reserve(d.n);
    for (std::size_t i = 0; i < n_per_class; ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            RngStream ns(seed, StreamPurpose::SynthData, noise_base + 1 + c, i);
            for (std::size_t j = 0; j < dim; ++j)
                d.images.push_back(centers[c][j] + ns.next_normal());
            d.labels.push_back(static_cast<int>(c));
        }
    return d;
}

}  // namespace augal
