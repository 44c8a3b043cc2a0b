#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qonet/error.hpp"

namespace qonet {

enum class Activation : std::uint8_t { Relu, Linear };

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

/// One affine map followed by a per-unit activation: x -> act(W x + b).
template <typename Scalar>
struct Layer {
    SparseRowMatrix<Scalar> weights;  // units x fan_in, only |w| > 0 stored
    VectorX<Scalar> bias;
    std::vector<Activation> activation;

    Eigen::Index units() const { return weights.rows(); }
    Eigen::Index fan_in() const { return weights.cols(); }
    bool all_linear() const {
        return std::all_of(activation.begin(), activation.end(), [](Activation a) { return a == Activation::Linear; });
    }
};

namespace detail {

template <typename Scalar>
bool is_finite(const Scalar& x) {
    using std::isfinite;
    return static_cast<bool>(isfinite(x));
}

}  // namespace detail

/// Layered ReLU network. Immutable once built; the constructor checks every shape invariant.
template <typename Scalar>
class BasicReluNetwork {
public:
    using LayerType = Layer<Scalar>;

    BasicReluNetwork(Eigen::Index input_dim, std::vector<LayerType> layers,
                     nlohmann::json metadata = nlohmann::json::object())
        : input_dim_(input_dim), layers_(std::move(layers)), metadata_(std::move(metadata)) {
        if (input_dim_ < 0) throw Error(ErrorCategory::Config, "input_dim must be nonnegative");
        if (layers_.empty()) throw Error(ErrorCategory::Config, "a network needs at least one layer");
        Eigen::Index fan_in = input_dim_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            auto& l = layers_[i];
            const std::string where = "layer " + std::to_string(i);
            if (l.fan_in() != fan_in) {
                throw Error(ErrorCategory::Dimension, where + " has fan-in " + std::to_string(l.fan_in()) +
                                                          ", expected " + std::to_string(fan_in));
            }
            if (l.bias.size() != l.units() || static_cast<Eigen::Index>(l.activation.size()) != l.units()) {
                throw Error(ErrorCategory::Dimension, where + ": weights, bias and activation lengths differ");
            }
            l.weights.prune([](Eigen::Index, Eigen::Index, const Scalar& v) { return v != Scalar(0); });
            l.weights.makeCompressed();
            for (Eigen::Index k = 0; k < l.weights.outerSize(); ++k) {
                for (typename SparseRowMatrix<Scalar>::InnerIterator it(l.weights, k); it; ++it) {
                    if (!detail::is_finite(it.value())) throw Error(ErrorCategory::Numerical, where + ": non-finite weight");
                }
            }
            for (Eigen::Index k = 0; k < l.bias.size(); ++k) {
                if (!detail::is_finite(l.bias(k))) throw Error(ErrorCategory::Numerical, where + ": non-finite bias");
            }
            fan_in = l.units();
        }
    }

    Eigen::Index input_dim() const noexcept { return input_dim_; }
    Eigen::Index output_dim() const noexcept { return layers_.back().units(); }
    int depth() const noexcept { return static_cast<int>(layers_.size()); }
    const std::vector<LayerType>& layers() const noexcept { return layers_; }
    const LayerType& layer(std::size_t i) const { return layers_.at(i); }
    const nlohmann::json& metadata() const noexcept { return metadata_; }

    BasicReluNetwork with_metadata(nlohmann::json metadata) const {
        BasicReluNetwork copy = *this;
        copy.metadata_ = std::move(metadata);
        return copy;
    }

    /// Same network with parameters converted to another scalar type.
    template <typename T>
    BasicReluNetwork<T> cast() const {
        std::vector<Layer<T>> out;
        out.reserve(layers_.size());
        for (const auto& l : layers_) {
            out.push_back({l.weights.template cast<T>(), l.bias.template cast<T>(), l.activation});
        }
        return BasicReluNetwork<T>(input_dim_, std::move(out), metadata_);
    }

private:
    Eigen::Index input_dim_;
    std::vector<LayerType> layers_;
    nlohmann::json metadata_;
};

using ReluNetwork = BasicReluNetwork<double>;

template <typename Scalar>
void apply_activation(const Layer<Scalar>& layer, VectorX<Scalar>& x) {
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (layer.activation[static_cast<std::size_t>(k)] == Activation::Relu && x(k) < Scalar(0)) x(k) = Scalar(0);
    }
}

template <typename Scalar, typename Derived>
VectorX<Scalar> eval(const BasicReluNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& y) {
    if (y.size() != net.input_dim()) {
        throw Error(ErrorCategory::Dimension, "input has length " + std::to_string(y.size()) + ", network expects " +
                                                  std::to_string(net.input_dim()));
    }
    VectorX<Scalar> x = y.template cast<Scalar>();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (!detail::is_finite(x(k))) throw Error(ErrorCategory::Numerical, "non-finite network input");
    }
    for (const auto& layer : net.layers()) {
        VectorX<Scalar> next = layer.weights * x;
        next += layer.bias;
        apply_activation(layer, next);
        x = std::move(next);
    }
    return x;
}

/// Outputs of every layer, last entry equal to eval(net, y).
template <typename Scalar, typename Derived>
std::vector<VectorX<Scalar>> eval_trace(const BasicReluNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& y) {
    if (y.size() != net.input_dim()) throw Error(ErrorCategory::Dimension, "input length does not match network");
    std::vector<VectorX<Scalar>> trace;
    trace.reserve(net.layers().size());
    VectorX<Scalar> x = y.template cast<Scalar>();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (!detail::is_finite(x(k))) throw Error(ErrorCategory::Numerical, "non-finite network input");
    }
    for (const auto& layer : net.layers()) {
        VectorX<Scalar> next = layer.weights * x;
        next += layer.bias;
        apply_activation(layer, next);
        trace.push_back(next);
        x = std::move(next);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

struct SubnetworkAudit {
    std::size_t units = 0;
    std::size_t nonzero_weights = 0;
    std::size_t nonzero_biases = 0;
    int depth = 0;
};

/// Raw counts. complexity() = units + nonzero weights + nonzero biases.
struct ComplexityAudit {
    std::size_t units = 0;
    std::size_t relu_units = 0;
    std::size_t nonzero_weights = 0;
    std::size_t nonzero_biases = 0;
    std::size_t input_weights = 0;  // nonzero weights of the first layer
    int depth = 0;
    std::size_t padding_units = 0;
    std::size_t padding_weights = 0;
    std::map<std::string, SubnetworkAudit> per_subnetwork;

    std::size_t complexity() const noexcept { return units + nonzero_weights + nonzero_biases; }
    nlohmann::json to_json() const;
};

template <typename Scalar>
ComplexityAudit audit(const BasicReluNetwork<Scalar>& net) {
    ComplexityAudit a;
    a.depth = net.depth();
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& l = net.layers()[i];
        a.units += static_cast<std::size_t>(l.units());
        a.relu_units += static_cast<std::size_t>(
            std::count(l.activation.begin(), l.activation.end(), Activation::Relu));
        const auto nnz = static_cast<std::size_t>(l.weights.nonZeros());
        a.nonzero_weights += nnz;
        if (i == 0) a.input_weights = nnz;
        for (Eigen::Index k = 0; k < l.bias.size(); ++k) {
            if (l.bias(k) != Scalar(0)) ++a.nonzero_biases;
        }
    }
    const auto& meta = net.metadata();
    if (meta.contains("subnetworks")) {
        for (const auto& s : meta["subnetworks"]) {
            a.per_subnetwork[s["name"].template get<std::string>()] = {
                s["units"].template get<std::size_t>(), s["nonzero_weights"].template get<std::size_t>(),
                s["nonzero_biases"].template get<std::size_t>(), s["depth"].template get<int>()};
        }
        a.padding_units = meta.value("padding_units", std::size_t{0});
        a.padding_weights = meta.value("padding_weights", std::size_t{0});
    }
    return a;
}

// ---------------------------------------------------------------------------
// Combinators
// ---------------------------------------------------------------------------

/// Sequential composition: eval(stack(a, b), y) == eval(b, eval(a, y)) bitwise; depths add.
template <typename Scalar>
BasicReluNetwork<Scalar> stack(const BasicReluNetwork<Scalar>& a, const BasicReluNetwork<Scalar>& b) {
    if (a.output_dim() != b.input_dim()) {
        throw Error(ErrorCategory::Dimension, "stack: output width " + std::to_string(a.output_dim()) +
                                                  " does not match input width " + std::to_string(b.input_dim()));
    }
    std::vector<Layer<Scalar>> layers = a.layers();
    layers.insert(layers.end(), b.layers().begin(), b.layers().end());
    nlohmann::json meta = a.metadata();
    meta.update(b.metadata());
    return BasicReluNetwork<Scalar>(a.input_dim(), std::move(layers), std::move(meta));
}

/// Composition that folds a's trailing all-LINEAR layer into b's first affine map, saving one
/// layer. Exact in real arithmetic; callers keep the fused products representable.
template <typename Scalar>
BasicReluNetwork<Scalar> fuse(const BasicReluNetwork<Scalar>& a, const BasicReluNetwork<Scalar>& b) {
    if (a.output_dim() != b.input_dim()) throw Error(ErrorCategory::Dimension, "fuse: width mismatch");
    const auto& last = a.layers().back();
    if (!last.all_linear()) throw Error(ErrorCategory::Config, "fuse: first network must end in a LINEAR layer");
    const auto& first = b.layers().front();
    Layer<Scalar> merged;
    merged.weights = (first.weights * last.weights).pruned();
    merged.bias = first.weights * last.bias + first.bias;
    merged.activation = first.activation;
    std::vector<Layer<Scalar>> layers(a.layers().begin(), a.layers().end() - 1);
    layers.push_back(std::move(merged));
    layers.insert(layers.end(), b.layers().begin() + 1, b.layers().end());
    nlohmann::json meta = a.metadata();
    meta.update(b.metadata());
    return BasicReluNetwork<Scalar>(a.input_dim(), std::move(layers), std::move(meta));
}

/// Side-by-side composition. Output is the concatenation of member outputs. Members shorter than
/// the deepest are extended by LINEAR identity layers on their outputs; those padding units and
/// weights are counted by audit(). With shared_input every member reads the same input vector,
/// otherwise inputs are concatenated in member order.
template <typename Scalar>
BasicReluNetwork<Scalar> parallel(std::span<const BasicReluNetwork<Scalar>> nets, bool shared_input) {
    if (nets.empty()) throw Error(ErrorCategory::Config, "parallel: no members");
    int depth = 0;
    Eigen::Index input_dim = 0;
    for (const auto& n : nets) {
        depth = std::max(depth, n.depth());
        if (shared_input) {
            if (n.input_dim() != nets.front().input_dim()) {
                throw Error(ErrorCategory::Dimension, "parallel: shared input requires equal input dimensions");
            }
            input_dim = n.input_dim();
        } else {
            input_dim += n.input_dim();
        }
    }

    using Triplet = Eigen::Triplet<Scalar, int>;
    std::vector<Layer<Scalar>> layers(static_cast<std::size_t>(depth));
    std::vector<Eigen::Index> col_offset(nets.size(), 0);  // into the previous layer
    {
        Eigen::Index off = 0;
        for (std::size_t k = 0; k < nets.size(); ++k) {
            col_offset[k] = shared_input ? 0 : off;
            off += nets[k].input_dim();
        }
    }
    Eigen::Index prev_width = input_dim;
    std::size_t padding_units = 0;
    std::size_t padding_weights = 0;
    std::vector<std::size_t> member_padding_units(nets.size(), 0);
    std::vector<std::size_t> member_padding_weights(nets.size(), 0);
    std::vector<Eigen::Index> out_offset(nets.size(), 0);

    for (int li = 0; li < depth; ++li) {
        std::vector<Triplet> trip;
        std::vector<Scalar> bias;
        std::vector<Activation> act;
        Eigen::Index row = 0;
        std::vector<Eigen::Index> row_offset(nets.size(), 0);
        for (std::size_t k = 0; k < nets.size(); ++k) {
            const auto& n = nets[k];
            row_offset[k] = row;
            if (li < n.depth()) {
                const auto& l = n.layers()[static_cast<std::size_t>(li)];
                for (Eigen::Index r = 0; r < l.weights.outerSize(); ++r) {
                    for (typename SparseRowMatrix<Scalar>::InnerIterator it(l.weights, r); it; ++it) {
                        trip.emplace_back(static_cast<int>(row + r), static_cast<int>(col_offset[k] + it.col()),
                                          it.value());
                    }
                }
                for (Eigen::Index r = 0; r < l.units(); ++r) {
                    bias.push_back(l.bias(r));
                    act.push_back(l.activation[static_cast<std::size_t>(r)]);
                }
                row += l.units();
            } else {
                const Eigen::Index w = n.output_dim();
                for (Eigen::Index r = 0; r < w; ++r) {
                    trip.emplace_back(static_cast<int>(row + r), static_cast<int>(col_offset[k] + r), Scalar(1));
                    bias.push_back(Scalar(0));
                    act.push_back(Activation::Linear);
                }
                row += w;
                padding_units += static_cast<std::size_t>(w);
                padding_weights += static_cast<std::size_t>(w);
                member_padding_units[k] += static_cast<std::size_t>(w);
                member_padding_weights[k] += static_cast<std::size_t>(w);
            }
        }
        auto& layer = layers[static_cast<std::size_t>(li)];
        layer.weights.resize(row, prev_width);
        layer.weights.setFromTriplets(trip.begin(), trip.end());
        layer.bias = Eigen::Map<const VectorX<Scalar>>(bias.data(), static_cast<Eigen::Index>(bias.size()));
        layer.activation = std::move(act);
        col_offset = row_offset;
        prev_width = row;
        if (li == depth - 1) out_offset = row_offset;
    }

    nlohmann::json subs = nlohmann::json::array();
    for (std::size_t k = 0; k < nets.size(); ++k) {
        const ComplexityAudit a = audit(nets[k]);
        const auto& meta = nets[k].metadata();
        subs.push_back({{"name", meta.value("name", "member" + std::to_string(k))},
                        {"units", a.units},
                        {"nonzero_weights", a.nonzero_weights},
                        {"nonzero_biases", a.nonzero_biases},
                        {"depth", a.depth},
                        {"output_offset", out_offset[k]},
                        {"output_count", nets[k].output_dim()},
                        {"padding_units", member_padding_units[k]},
                        {"padding_weights", member_padding_weights[k]}});
    }
    nlohmann::json meta = {{"subnetworks", std::move(subs)},
                           {"padding_units", padding_units},
                           {"padding_weights", padding_weights}};
    return BasicReluNetwork<Scalar>(input_dim, std::move(layers), std::move(meta));
}

template <typename Scalar>
BasicReluNetwork<Scalar> parallel(const std::vector<BasicReluNetwork<Scalar>>& nets, bool shared_input) {
    return parallel(std::span<const BasicReluNetwork<Scalar>>(nets), shared_input);
}

// ---------------------------------------------------------------------------
// Elementary gadgets (double parameters; cast for other scalars)
// ---------------------------------------------------------------------------

/// Single layer x -> act(W x + b) from a dense description; zeros are not stored.
ReluNetwork single_layer(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                         std::vector<Activation> activation, nlohmann::json metadata = nlohmann::json::object());

/// Purely affine single-layer network.
ReluNetwork linear_map(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias);

/// t -> sigma(t) - sigma(-t) per channel: one ReLU layer of 2*width units, one LINEAR readout.
ReluNetwork identity_gadget(int width = 1);

/// t -> sigma(t + 1) - sigma(t - 1) - 1, i.e. t clamped to [-1, 1].
ReluNetwork clamp_gadget();

/// d inputs, one LINEAR unit with zero weights and the given bias.
ReluNetwork constant_gadget(int input_dim, double value);

// ---------------------------------------------------------------------------
// Serialization (double parameters)
// ---------------------------------------------------------------------------

/// Layers with rows*cols above this are written in CSR form ("weights_csr").
inline constexpr Eigen::Index kDenseLayerLimit = 4096;

nlohmann::json serialize(const ReluNetwork& net, Eigen::Index dense_limit = kDenseLayerLimit);
ReluNetwork deserialize(const nlohmann::json& doc);

void save_network(const ReluNetwork& net, const std::filesystem::path& path);
ReluNetwork load_network(const std::filesystem::path& path);

}  // namespace qonet
