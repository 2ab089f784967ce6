// Small fully-connected binary classifier: architecture description,
// parameter storage with a fixed flatten order, and forward evaluation.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace streamal {

using FeatureVector = Eigen::VectorXd;

// Layer sizes include input and the single output logit,
// e.g. {32, 64, 32, 1}. Hidden activations are rectifiers,
// the output is a raw logit.
struct MLPArch {
    std::vector<int> layer_sizes;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int n_weight_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int fan_in(int l) const { return layer_sizes[l]; }
    int fan_out(int l) const { return layer_sizes[l + 1]; }

    // Parameter count; biases are folded into each layer's matrix as an
    // extra input column, so layer l holds fan_out x (fan_in + 1) entries.
    std::int64_t param_count() const;

    // Config-boundary validation: at least one hidden layer, output width 1,
    // positive widths. Core math routines accept any well-formed size list.
    void validate() const;

    bool operator==(const MLPArch&) const = default;
};

MLPArch default_arch(int input_dim);

// All learnable parameters of one head. Storage is a single flat vector in a
// fixed layer-major order: layer 0 first, column-major within each layer's
// combined [W | b] matrix of shape fan_out x (fan_in + 1). The bias is the
// last column. This order is also the checkpoint byte layout.
class ParamVector {
  public:
    ParamVector() = default;
    explicit ParamVector(const MLPArch& arch);
    ParamVector(const MLPArch& arch, Eigen::VectorXd flat);

    static ParamVector zeros(const MLPArch& arch) { return ParamVector(arch); }

    const MLPArch& arch() const { return arch_; }
    std::int64_t size() const { return data_.size(); }

    Eigen::Map<const Eigen::MatrixXd> layer(int l) const;
    Eigen::Map<Eigen::MatrixXd> layer(int l);

    // Weight block and bias column of layer l (views into the flat storage).
    Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> weights(int l) const;

    const Eigen::VectorXd& flat() const { return data_; }
    Eigen::VectorXd& flat() { return data_; }

    bool operator==(const ParamVector& o) const {
        return arch_ == o.arch_ && data_ == o.data_;
    }

  private:
    MLPArch arch_;
    Eigen::VectorXd data_;
    std::vector<std::int64_t> offsets_;

    void build_offsets();
};

// Forward pass for one feature vector; returns the raw logit.
double forward(const FeatureVector& x, const ParamVector& theta, const MLPArch& arch);

// Batched forward: rows of X are examples; returns one logit per row.
Eigen::VectorXd forward_batch(const Eigen::MatrixXd& X, const ParamVector& theta,
                              const MLPArch& arch);

double sigmoid(double z);

// log(1 + exp(z)) - y*z, evaluated stably.
double bce_with_logit(double logit, double label);

}  // namespace streamal
