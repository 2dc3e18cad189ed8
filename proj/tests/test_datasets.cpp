// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "augal/datasets.hpp"
#include "augal/errors.hpp"

using namespace augal;
namespace fs = std::filesystem;

namespace {

std::string write_bytes(const std::string& name, const std::vector<std::uint8_t>& b) {
    const std::string path = (fs::temp_directory_path() / name).string();
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
    return path;
}

void push_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back((x >> 24) & 0xff);
    v.push_back((x >> 16) & 0xff);
    v.push_back((x >> 8) & 0xff);
    v.push_back(x & 0xff);
}

// Two 2x2 images with hand-picked pixel bytes, labels 7 and 1.
struct IdxFixture {
    std::string images, labels;
    IdxFixture() {
        std::vector<std::uint8_t> img;
        push_be32(img, 2051);
        push_be32(img, 2);
        push_be32(img, 2);
        push_be32(img, 2);
        const std::uint8_t pixels[8] = {0, 51, 102, 255, 17, 34, 68, 136};
        img.insert(img.end(), pixels, pixels + 8);
        images = write_bytes("augal_fix_imgs.idx", img);
        std::vector<std::uint8_t> lbl;
        push_be32(lbl, 2049);
        push_be32(lbl, 2);
        lbl.push_back(7);
        lbl.push_back(1);
        labels = write_bytes("augal_fix_lbls.idx", lbl);
    }
};

}  // namespace

TEST_CASE("IDX fixture round-trips exact pixel values") {
    IdxFixture fx;
    Dataset d = load_idx(fx.images, fx.labels);
    CHECK(d.n == 2);
    CHECK(d.channels == 1);
    CHECK(d.height == 2);
    CHECK(d.width == 2);
    CHECK(d.labels == std::vector<int>{7, 1});
    const double expect[8] = {0.0,        51.0 / 255,  102.0 / 255, 1.0,
                              17.0 / 255, 34.0 / 255,  68.0 / 255,  136.0 / 255};
    for (int i = 0; i < 8; ++i) CHECK(d.images[i] == expect[i]);
}

TEST_CASE("IDX loader error contracts") {
    IdxFixture fx;
    SUBCASE("labels file with the image magic is a format error") {
        CHECK_THROWS_WITH_AS(load_idx(fx.images, fx.images),
                             doctest::Contains("2051"), FormatError);
    }
    SUBCASE("image file with the label magic is a format error") {
        CHECK_THROWS_AS(load_idx(fx.labels, fx.images), FormatError);
    }
    SUBCASE("truncated image payload reports a byte offset") {
        std::vector<std::uint8_t> img;
        push_be32(img, 2051);
        push_be32(img, 2);
        push_be32(img, 2);
        push_be32(img, 2);
        img.push_back(1);  // 1 byte of 8
        const std::string path = write_bytes("augal_trunc.idx", img);
        CHECK_THROWS_WITH_AS(load_idx(path, fx.labels),
                             doctest::Contains("byte offset"), FormatError);
    }
    SUBCASE("image/label count mismatch is a format error") {
        std::vector<std::uint8_t> lbl;
        push_be32(lbl, 2049);
        push_be32(lbl, 3);
        lbl.insert(lbl.end(), {1, 2, 3});
        const std::string path = write_bytes("augal_badcount.idx", lbl);
        CHECK_THROWS_AS(load_idx(fx.images, path), FormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_idx("/nonexistent/images", fx.labels), FormatError);
    }
}

TEST_CASE("CIFAR-10 single-record fixture round-trips exactly") {
    std::vector<std::uint8_t> rec(1 + 3072);
    rec[0] = 5;
    for (std::size_t i = 0; i < 3072; ++i) rec[1 + i] = (i * 7 + 3) % 256;
    const std::string path = write_bytes("augal_cifar1.bin", rec);
    Dataset d = load_cifar(path, CifarVariant::Cifar10);
    CHECK(d.n == 1);
    CHECK(d.channels == 3);
    CHECK(d.height == 32);
    CHECK(d.width == 32);
    CHECK(d.labels == std::vector<int>{5});
    for (std::size_t i = 0; i < 3072; ++i)
        CHECK(d.images[i] == double((i * 7 + 3) % 256) / 255.0);
}

TEST_CASE("CIFAR-100 uses the fine label byte") {
    std::vector<std::uint8_t> rec(2 + 3072, 0);
    rec[0] = 13;  // coarse
    rec[1] = 97;  // fine
    const std::string path = write_bytes("augal_cifar100.bin", rec);
    Dataset d = load_cifar(path, CifarVariant::Cifar100);
    CHECK(d.labels == std::vector<int>{97});
    CHECK(d.class_count == 100);
}

TEST_CASE("CIFAR file of non-record length is a format error") {
    std::vector<std::uint8_t> bad(3072);  // one record minus the label byte
    const std::string path = write_bytes("augal_cifar_bad.bin", bad);
    CHECK_THROWS_WITH_AS(load_cifar(path, CifarVariant::Cifar10),
                         doctest::Contains("record size"), FormatError);
}

TEST_CASE("normalization round-trips within 1e-12 and applies exactly once") {
    IdxFixture fx;
    Dataset d = load_idx(fx.images, fx.labels);
    const Dataset orig = d;
    const ChannelStats stats = compute_channel_stats(d);
    normalize(d, stats);
    CHECK(d.normalized);
    CHECK_THROWS_AS(normalize(d, stats), UsageError);
    denormalize(d, stats);
    for (std::size_t i = 0; i < d.images.size(); ++i)
        CHECK(d.images[i] == doctest::Approx(orig.images[i]).epsilon(1e-12));
    CHECK_THROWS_AS(denormalize(d, stats), UsageError);
}

TEST_CASE("loading is idempotent") {
    IdxFixture fx;
    Dataset a = load_idx(fx.images, fx.labels);
    Dataset b = load_idx(fx.images, fx.labels);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
}

TEST_CASE("synth_blobs determinism and class structure") {
    Dataset a = synth_blobs(20, 3, 4, 2.0, 9, "train");
    Dataset b = synth_blobs(20, 3, 4, 2.0, 9, "train");
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    CHECK(a.n == 60);
    CHECK(a.class_count == 3);
    Dataset t = synth_blobs(20, 3, 4, 2.0, 9, "test");
    CHECK(t.images != a.images);  // independent noise per split
}

TEST_CASE("separation 0 gives identical class-conditional distributions") {
    // class-conditional means all collapse to 0 when centers coincide
    Dataset d = synth_blobs(400, 3, 4, 0.0, 11, "train");
    const std::size_t dim = d.image_size();
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < d.n; ++i) {
            if (d.labels[i] != int(c)) continue;
            for (std::size_t j = 0; j < dim; ++j) mean += d.images[i * dim + j];
            ++count;
        }
        mean /= double(count * dim);
        CHECK(std::abs(mean) < 4.0 / std::sqrt(double(count * dim)));
    }
}

TEST_CASE("large separation: independent softmax-regression oracle hits ~100%") {
    // oracle classifier trained by plain full-batch gradient descent on the
    // flattened features, written here without the tensor engine
    Dataset train = synth_blobs(60, 3, 4, 4.0, 13, "train");
    Dataset test = synth_blobs(40, 3, 4, 4.0, 13, "test");
    const std::size_t dim = train.image_size(), C = 3;
    std::vector<double> W(C * (dim + 1), 0.0);
    auto logits = [&](const Dataset& d, std::size_t i, std::vector<double>& out) {
        for (std::size_t c = 0; c < C; ++c) {
            double z = W[c * (dim + 1) + dim];
            for (std::size_t j = 0; j < dim; ++j)
                z += W[c * (dim + 1) + j] * d.images[i * dim + j];
            out[c] = z;
        }
    };
    std::vector<double> z(C), p(C), grad(W.size());
    for (int iter = 0; iter < 300; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < train.n; ++i) {
            logits(train, i, z);
            const double mx = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            for (std::size_t c = 0; c < C; ++c) sum += (p[c] = std::exp(z[c] - mx));
            for (std::size_t c = 0; c < C; ++c) {
                const double err = p[c] / sum - (train.labels[i] == int(c) ? 1.0 : 0.0);
                for (std::size_t j = 0; j < dim; ++j)
                    grad[c * (dim + 1) + j] += err * train.images[i * dim + j];
                grad[c * (dim + 1) + dim] += err;
            }
        }
        for (std::size_t k = 0; k < W.size(); ++k)
            W[k] -= 0.05 / double(train.n) * grad[k];
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.n; ++i) {
        logits(test, i, z);
        const std::size_t arg =
            std::max_element(z.begin(), z.end()) - z.begin();
        if (int(arg) == test.labels[i]) ++correct;
    }
    CHECK(double(correct) / double(test.n) >= 0.98);
}

TEST_CASE("official FashionMNIST files when a data dir is available") {
    const char* dir = std::getenv("AUGAL_DATA_DIR");
    if (!dir) {
        MESSAGE("AUGAL_DATA_DIR not set; skipping official-file checks");
        return;
    }
    const fs::path root = fs::path(dir) / "fashion";
    const fs::path imgs = root / "train-images-idx3-ubyte";
    if (!fs::exists(imgs)) {
        MESSAGE("FashionMNIST files not found; skipping");
        return;
    }
    Dataset d = load_idx(imgs.string(), (root / "train-labels-idx1-ubyte").string());
    CHECK(d.n == 60000);
    CHECK(d.height == 28);
    CHECK(d.width == 28);
    for (int l : d.labels) {
        CHECK(l >= 0);
        CHECK(l < 10);
    }
}
