#include "qonet/network.hpp"

#include <fstream>
#include <sstream>

namespace qonet {

nlohmann::json ComplexityAudit::to_json() const {
    nlohmann::json subs = nlohmann::json::object();
    for (const auto& [name, s] : per_subnetwork) {
        subs[name] = {{"units", s.units},
                      {"nonzero_weights", s.nonzero_weights},
                      {"nonzero_biases", s.nonzero_biases},
                      {"depth", s.depth}};
    }
    return {{"units", units},
            {"relu_units", relu_units},
            {"nonzero_weights", nonzero_weights},
            {"nonzero_biases", nonzero_biases},
            {"input_weights", input_weights},
            {"depth", depth},
            {"complexity", complexity()},
            {"padding_units", padding_units},
            {"padding_weights", padding_weights},
            {"complexity_without_padding", complexity() - padding_units - padding_weights},
            {"per_subnetwork", std::move(subs)}};
}

ReluNetwork single_layer(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                         std::vector<Activation> activation, nlohmann::json metadata) {
    Layer<double> l{weights.sparseView(), bias, std::move(activation)};
    return ReluNetwork(weights.cols(), {std::move(l)}, std::move(metadata));
}

ReluNetwork linear_map(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias) {
    return single_layer(weights, bias, std::vector<Activation>(static_cast<std::size_t>(weights.rows()),
                                                                Activation::Linear));
}

ReluNetwork identity_gadget(int width) {
    if (width < 1) throw Error(ErrorCategory::Config, "identity gadget width must be positive");
    Eigen::MatrixXd split = Eigen::MatrixXd::Zero(2 * width, width);
    Eigen::MatrixXd join = Eigen::MatrixXd::Zero(width, 2 * width);
    for (int i = 0; i < width; ++i) {
        split(2 * i, i) = 1.0;
        split(2 * i + 1, i) = -1.0;
        join(i, 2 * i) = 1.0;
        join(i, 2 * i + 1) = -1.0;
    }
    const auto relu = single_layer(split, Eigen::VectorXd::Zero(2 * width),
                                   std::vector<Activation>(static_cast<std::size_t>(2 * width), Activation::Relu));
    return stack(relu, linear_map(join, Eigen::VectorXd::Zero(width)))
        .with_metadata({{"name", "identity"}});
}

ReluNetwork clamp_gadget() {
    const auto relu = single_layer(Eigen::MatrixXd::Ones(2, 1), Eigen::Vector2d(1.0, -1.0),
                                   {Activation::Relu, Activation::Relu});
    return stack(relu, linear_map(Eigen::RowVector2d(1.0, -1.0), Eigen::VectorXd::Constant(1, -1.0)))
        .with_metadata({{"name", "clamp"}});
}

ReluNetwork constant_gadget(int input_dim, double value) {
    return linear_map(Eigen::MatrixXd::Zero(1, input_dim), Eigen::VectorXd::Constant(1, value))
        .with_metadata({{"name", "constant"}});
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

const char* activation_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

const nlohmann::json& require(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + "/" + key, "missing field '" + key + "'");
    return *it;
}

double number_at(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where, "expected a number");
    return v.get<double>();
}

std::vector<double> number_array(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where, "expected an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number_at(v[i], where + "/" + std::to_string(i)));
    return out;
}

Layer<double> parse_layer(const nlohmann::json& doc, Eigen::Index fan_in, const std::string& where) {
    if (!doc.is_object()) throw ParseError(where, "layer must be an object");
    const auto bias = number_array(require(doc, "bias", where), where + "/bias");
    const auto rows = static_cast<Eigen::Index>(bias.size());

    const auto& acts = require(doc, "activation", where);
    if (!acts.is_array()) throw ParseError(where + "/activation", "expected an array");
    std::vector<Activation> activation;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        const auto& a = acts[i];
        const std::string loc = where + "/activation/" + std::to_string(i);
        if (!a.is_string()) throw ParseError(loc, "activation must be a string");
        const auto name = a.get<std::string>();
        if (name == "relu") activation.push_back(Activation::Relu);
        else if (name == "linear") activation.push_back(Activation::Linear);
        else throw ParseError(loc, "unknown activation '" + name + "'");
    }
    if (static_cast<Eigen::Index>(activation.size()) != rows) {
        throw ParseError(where + "/activation", "activation length differs from bias length");
    }

    std::vector<Eigen::Triplet<double, int>> trip;
    if (doc.contains("weights")) {
        const auto& w = doc["weights"];
        const std::string loc = where + "/weights";
        if (!w.is_array() || static_cast<Eigen::Index>(w.size()) != rows) {
            throw ParseError(loc, "expected one weight row per unit");
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto row = number_array(w[static_cast<std::size_t>(r)], loc + "/" + std::to_string(r));
            if (static_cast<Eigen::Index>(row.size()) != fan_in) {
                throw ParseError(loc + "/" + std::to_string(r), "row length " + std::to_string(row.size()) +
                                                                    " differs from fan-in " + std::to_string(fan_in));
            }
            for (Eigen::Index c = 0; c < fan_in; ++c) {
                const double v = row[static_cast<std::size_t>(c)];
                if (v != 0.0) trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
            }
        }
    } else if (doc.contains("weights_csr")) {
        const auto& csr = doc["weights_csr"];
        const std::string loc = where + "/weights_csr";
        const auto& ptr_json = require(csr, "row_ptr", loc);
        const auto& col_json = require(csr, "col", loc);
        const auto values = number_array(require(csr, "values", loc), loc + "/values");
        if (!ptr_json.is_array() || !col_json.is_array()) throw ParseError(loc, "row_ptr and col must be arrays");
        const auto ptr = ptr_json.get<std::vector<long long>>();
        const auto col = col_json.get<std::vector<long long>>();
        const auto cols = require(csr, "cols", loc);
        if (!cols.is_number_integer() || cols.get<Eigen::Index>() != fan_in) {
            throw ParseError(loc + "/cols", "column count differs from fan-in " + std::to_string(fan_in));
        }
        if (static_cast<Eigen::Index>(ptr.size()) != rows + 1 || col.size() != values.size() || ptr.front() != 0 ||
            ptr.back() != static_cast<long long>(values.size())) {
            throw ParseError(loc, "inconsistent CSR arrays");
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto lo = ptr[static_cast<std::size_t>(r)];
            const auto hi = ptr[static_cast<std::size_t>(r) + 1];
            if (hi < lo) throw ParseError(loc + "/row_ptr", "row_ptr must be nondecreasing");
            for (auto k = lo; k < hi; ++k) {
                const auto c = col[static_cast<std::size_t>(k)];
                if (c < 0 || c >= fan_in) throw ParseError(loc + "/col/" + std::to_string(k), "column out of range");
                const double v = values[static_cast<std::size_t>(k)];
                if (v != 0.0) trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
            }
        }
    } else {
        throw ParseError(where + "/weights", "missing field 'weights'");
    }

    Layer<double> layer;
    layer.weights.resize(rows, fan_in);
    layer.weights.setFromTriplets(trip.begin(), trip.end());
    layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
    layer.activation = std::move(activation);
    return layer;
}

}  // namespace

nlohmann::json serialize(const ReluNetwork& net, Eigen::Index dense_limit) {
    nlohmann::json doc;
    doc["input_dim"] = net.input_dim();
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        nlohmann::json lj;
        if (l.units() * l.fan_in() <= dense_limit) {
            const Eigen::MatrixXd dense(l.weights);
            auto& rows = lj["weights"] = nlohmann::json::array();
            for (Eigen::Index r = 0; r < dense.rows(); ++r) {
                std::vector<double> row(static_cast<std::size_t>(dense.cols()));
                for (Eigen::Index c = 0; c < dense.cols(); ++c) row[static_cast<std::size_t>(c)] = dense(r, c);
                rows.push_back(std::move(row));
            }
        } else {
            std::vector<long long> ptr{0};
            std::vector<long long> col;
            std::vector<double> values;
            for (Eigen::Index r = 0; r < l.weights.outerSize(); ++r) {
                for (SparseRowMatrix<double>::InnerIterator it(l.weights, r); it; ++it) {
                    col.push_back(it.col());
                    values.push_back(it.value());
                }
                ptr.push_back(static_cast<long long>(values.size()));
            }
            lj["weights_csr"] = {{"rows", l.units()},
                                 {"cols", l.fan_in()},
                                 {"row_ptr", std::move(ptr)},
                                 {"col", std::move(col)},
                                 {"values", std::move(values)}};
        }
        lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        auto& acts = lj["activation"] = nlohmann::json::array();
        for (auto a : l.activation) acts.push_back(activation_name(a));
        layers.push_back(std::move(lj));
    }
    doc["metadata"] = net.metadata();
    return doc;
}

ReluNetwork deserialize(const nlohmann::json& doc) {
    const auto& in = require(doc, "input_dim", "");
    if (!in.is_number_integer() || in.get<long long>() < 0) {
        throw ParseError("/input_dim", "input_dim must be a nonnegative integer");
    }
    const auto& layers_json = require(doc, "layers", "");
    if (!layers_json.is_array() || layers_json.empty()) throw ParseError("/layers", "expected a nonempty array");
    Eigen::Index fan_in = in.get<Eigen::Index>();
    std::vector<Layer<double>> layers;
    for (std::size_t i = 0; i < layers_json.size(); ++i) {
        layers.push_back(parse_layer(layers_json[i], fan_in, "/layers/" + std::to_string(i)));
        fan_in = layers.back().units();
    }
    nlohmann::json metadata = doc.contains("metadata") ? doc["metadata"] : nlohmann::json::object();
    try {
        return ReluNetwork(in.get<Eigen::Index>(), std::move(layers), std::move(metadata));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError("/layers", e.what());
    }
}

void save_network(const ReluNetwork& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCategory::Io, "cannot open " + path.string() + " for writing");
    out << serialize(net).dump() << '\n';
    if (!out) throw Error(ErrorCategory::Io, "write to " + path.string() + " failed");
}

ReluNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::Io, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ":byte " + std::to_string(e.byte), e.what());
    }
    return deserialize(doc);
}

}  // namespace qonet
