#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qonet/multiindex.hpp"
#include "qonet/orthopoly.hpp"
#include "qonet/sampling.hpp"

namespace qonet::cli {

/// Everything a subcommand may read. Loaded from `--config` JSON, then overridden by flags.
struct RunConfig {
    nlohmann::json bound = {{"kind", "isotropic"}};  // {"kind", "rho", "logC", "prefactor"}
    std::string family = "shifted_legendre";
    std::optional<int> d;
    std::optional<std::size_t> M;
    std::vector<std::size_t> M_list;
    std::optional<double> tau;
    std::optional<double> pvol;
    bool extrapolate = true;
    std::optional<SamplerSpec> sampler;
    std::uint64_t seed = 1;
    std::string out;
    std::string report;
    std::string sidecar;
    std::string network;
    std::string points;
    bool timing_in_csv = false;

    static RunConfig from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

    BoundFunction make_bound() const;
    PolynomialFamily make_family() const;
};

/// Runs one subcommand. Returns 0 on success, 1 on a runtime failure (message prefixed with its
/// category on `err`), 2 on bad flags (usage on `err`).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace qonet::cli
