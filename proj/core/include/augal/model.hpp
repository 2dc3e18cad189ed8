// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "augal/tensor.hpp"

namespace augal {

/// Channel/hidden widths of the desk_cnn architecture. Defaults are the
/// standard configuration; tests can instantiate narrow variants small enough
/// for finite-difference checking.
struct DeskCnnWidths {
    std::size_t conv1 = 16;
    std::size_t conv2 = 32;
    std::size_t fc = 128;
    bool operator==(const DeskCnnWidths&) const = default;
};

struct ModelSpec {
    std::string architecture = "desk_cnn";  // desk_cnn | mlp
    std::size_t in_channels = 1;
    std::size_t height = 28;
    std::size_t width = 28;
    std::size_t classes = 10;
    std::uint64_t init_seed = 0;
    DeskCnnWidths widths{};

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// A classifier: ordered parameter list plus the forward wiring chosen by the
/// spec. Parameters require grad; wrap calls in NoGradGuard for frozen
/// inference.
class Model {
  public:
    const ModelSpec& spec() const { return spec_; }
    const std::vector<NamedTensor>& named_parameters() const { return params_; }
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;

    /// Batch (M, C_in, H, W) -> logits (M, classes). Logits are checked finite.
    Tensor forward(const Tensor& batch) const;

    std::vector<std::uint8_t> snapshot() const;
    void restore(const std::vector<std::uint8_t>& bytes);

  private:
    friend Model build(const ModelSpec& spec);
    ModelSpec spec_;
    std::vector<NamedTensor> params_;
};

/// Deterministic construction: He fan-in normal weights, zero biases, all
/// drawn from counter-based streams keyed by the init seed.
Model build(const ModelSpec& spec);

/// Checkpoint file plus sidecar text manifest (`<path>.manifest`) describing
/// the spec, so a model can be rebuilt and restored from disk.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace augal
