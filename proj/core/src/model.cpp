// SPDX-License-Identifier: Apache-2.0
#include "augal/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "augal/checkpoint.hpp"
#include "augal/errors.hpp"
#include "augal/rng.hpp"

namespace augal {

void ModelSpec::validate() const {
    if (architecture != "desk_cnn" && architecture != "mlp")
        throw ConfigError("ModelSpec: unknown architecture '" + architecture + "'");
    if (classes < 2) throw ConfigError("ModelSpec: class count must be >= 2");
    if (in_channels == 0 || height == 0 || width == 0)
        throw ConfigError("ModelSpec: input dims must be positive");
    if (architecture == "desk_cnn") {
        if (height < 4 || width < 4)
            throw ConfigError("ModelSpec: desk_cnn needs input of at least 4x4");
        if (widths.conv1 == 0 || widths.conv2 == 0 || widths.fc == 0)
            throw ConfigError("ModelSpec: desk_cnn widths must be positive");
    }
}

namespace {

// Fan-in-scaled normal init, std = sqrt(1/(3*fan_in)). The 1/3 gain keeps the
// batch-norm-free desk stack trainable at the reference learning rate 0.1.
Tensor fan_in_weight(std::vector<std::size_t> shape, std::size_t fan_in,
                     std::uint64_t seed, std::uint64_t param_index) {
    RngStream stream(seed, StreamPurpose::ModelInit, 0, param_index);
    const double sd = std::sqrt(1.0 / (3.0 * static_cast<double>(fan_in)));
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (double& v : t.data()) v = sd * stream.next_normal();
    return t;
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({n}, /*requires_grad=*/true); }

std::size_t pooled(std::size_t dim) { return (dim - 2) / 2 + 1; }

}  // namespace

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.tensor);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
}

Model build(const ModelSpec& spec) {
    spec.validate();
    Model m;
    m.spec_ = spec;
    std::uint64_t pi = 0;
    if (spec.architecture == "desk_cnn") {
        const auto& w = spec.widths;
        m.params_.push_back(
            {"conv1.w", fan_in_weight({w.conv1, spec.in_channels, 3, 3},
                                  spec.in_channels * 9, spec.init_seed, pi++)});
        m.params_.push_back({"conv1.b", zero_bias(w.conv1)});
        ++pi;
        m.params_.push_back({"conv2.w", fan_in_weight({w.conv2, w.conv1, 3, 3},
                                                  w.conv1 * 9, spec.init_seed, pi++)});
        m.params_.push_back({"conv2.b", zero_bias(w.conv2)});
        ++pi;
        const std::size_t flat =
            w.conv2 * pooled(pooled(spec.height)) * pooled(pooled(spec.width));
        m.params_.push_back(
            {"fc1.w", fan_in_weight({flat, w.fc}, flat, spec.init_seed, pi++)});
        m.params_.push_back({"fc1.b", zero_bias(w.fc)});
        ++pi;
        m.params_.push_back(
            {"fc2.w", fan_in_weight({w.fc, spec.classes}, w.fc, spec.init_seed, pi++)});
        m.params_.push_back({"fc2.b", zero_bias(spec.classes)});
    } else {
        const std::size_t flat = spec.in_channels * spec.height * spec.width;
        const std::size_t hidden = 128;
        m.params_.push_back(
            {"fc1.w", fan_in_weight({flat, hidden}, flat, spec.init_seed, pi++)});
        m.params_.push_back({"fc1.b", zero_bias(hidden)});
        ++pi;
        m.params_.push_back(
            {"fc2.w", fan_in_weight({hidden, spec.classes}, hidden, spec.init_seed, pi++)});
        m.params_.push_back({"fc2.b", zero_bias(spec.classes)});
    }
    return m;
}

Tensor Model::forward(const Tensor& batch) const {
    if (batch.rank() != 4 || batch.shape()[1] != spec_.in_channels ||
        batch.shape()[2] != spec_.height || batch.shape()[3] != spec_.width)
        throw ConfigError("forward: batch shape " + shape_str(batch.shape()) +
                          " does not match spec (M," +
                          std::to_string(spec_.in_channels) + "," +
                          std::to_string(spec_.height) + "," +
                          std::to_string(spec_.width) + ")");
    const std::size_t mb = batch.shape()[0];
    Tensor logits;
    if (spec_.architecture == "desk_cnn") {
        const Tensor& c1w = params_[0].tensor;
        const Tensor& c1b = params_[1].tensor;
        const Tensor& c2w = params_[2].tensor;
        const Tensor& c2b = params_[3].tensor;
        const Tensor& f1w = params_[4].tensor;
        const Tensor& f1b = params_[5].tensor;
        const Tensor& f2w = params_[6].tensor;
        const Tensor& f2b = params_[7].tensor;
        Tensor h = max_pool2d(relu(conv2d(batch, c1w, c1b, 1, 1)), 2, 2);
        h = max_pool2d(relu(conv2d(h, c2w, c2b, 1, 1)), 2, 2);
        h = reshape(h, {mb, h.size() / mb});
        h = relu(add_row_bias(matmul(h, f1w), f1b));
        logits = add_row_bias(matmul(h, f2w), f2b);
    } else {
        const Tensor& f1w = params_[0].tensor;
        const Tensor& f1b = params_[1].tensor;
        const Tensor& f2w = params_[2].tensor;
        const Tensor& f2b = params_[3].tensor;
        Tensor h = reshape(batch, {mb, batch.size() / mb});
        h = relu(add_row_bias(matmul(h, f1w), f1b));
        logits = add_row_bias(matmul(h, f2w), f2b);
    }
    for (double v : logits.data())
        if (!std::isfinite(v)) throw NumericError("forward: non-finite logits");
    return logits;
}

std::vector<std::uint8_t> Model::snapshot() const { return serialize_tensors(parameters()); }

void Model::restore(const std::vector<std::uint8_t>& bytes) {
    auto params = parameters();
    restore_tensors(params, bytes);
}

void save_model(const Model& model, const std::string& path) {
    const auto bytes = model.snapshot();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("save_model: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    const auto& s = model.spec();
    std::ofstream mf(path + ".manifest");
    mf << "architecture=" << s.architecture << "\n"
       << "in_channels=" << s.in_channels << "\n"
       << "height=" << s.height << "\n"
       << "width=" << s.width << "\n"
       << "classes=" << s.classes << "\n"
       << "init_seed=" << s.init_seed << "\n"
       << "widths=" << s.widths.conv1 << "," << s.widths.conv2 << "," << s.widths.fc
       << "\n";
}

Model load_model(const std::string& path) {
    std::ifstream mf(path + ".manifest");
    if (!mf) throw FormatError("load_model: missing manifest " + path + ".manifest");
    ModelSpec spec;
    std::string line;
    while (std::getline(mf, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "architecture") spec.architecture = val;
        else if (key == "in_channels") spec.in_channels = std::stoul(val);
        else if (key == "height") spec.height = std::stoul(val);
        else if (key == "width") spec.width = std::stoul(val);
        else if (key == "classes") spec.classes = std::stoul(val);
        else if (key == "init_seed") spec.init_seed = std::stoull(val);
        else if (key == "widths") {
            std::istringstream is(val);
            char comma;
            is >> spec.widths.conv1 >> comma >> spec.widths.conv2 >> comma >>
                spec.widths.fc;
        }
    }
    Model m = build(spec);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("load_model: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    m.restore(bytes);
    return m;
}

}  // namespace augal
