// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "augal/augment.hpp"

namespace augal {

/// In-memory image classification dataset, (N,C,H,W) f64 row-major.
struct Dataset {
    std::vector<double> images;
    std::vector<int> labels;
    std::size_t n = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t class_count = 0;
    std::string split;  // "train" | "test"
    bool normalized = false;

    std::size_t image_size() const { return channels * height * width; }
    const double* image_ptr(std::size_t i) const {
        return images.data() + i * image_size();
    }
    Image image(std::size_t i) const;
};

/// Per-channel normalization constants, computed once from a training split.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

ChannelStats compute_channel_stats(const Dataset& data);
void normalize(Dataset& data, const ChannelStats& stats);
void denormalize(Dataset& data, const ChannelStats& stats);

/// IDX (FashionMNIST distribution format) loader: big-endian headers, magic
/// 2051/2049. Pixels scaled to [0,1]; normalization is a separate step.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

enum class CifarVariant { Cifar10, Cifar100 };

/// One CIFAR binary batch file: per record 1 label byte (2 for CIFAR-100,
/// coarse then fine; fine used) + 3072 channel-planar RGB bytes.
Dataset load_cifar(const std::string& path, CifarVariant variant);

/// Several batch files concatenated in the order given.
Dataset load_cifar_files(const std::vector<std::string>& paths, CifarVariant variant);

/// Gaussian clusters at seeded centers, reshaped to (1, side, side)
/// pseudo-images. Values are already in normalized space. The split tag picks
/// an independent noise stream so train/test share centers but not samples.
Dataset synth_blobs(std::size_t n_per_class, std::size_t classes, std::size_t side,
                    double separation, std::uint64_t seed,
                    const std::string& split = "train");

}  // namespace augal
