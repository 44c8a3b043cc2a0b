#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace qonet {

enum class SamplerKind { Grid, Halton };

/// Point set on [0,1]^d used for every sup-norm measurement.
///   Grid: tensor grid with `points_per_axis` equispaced points per axis (endpoints included).
///   Halton: first `samples` Halton points (skipping the origin) with a seeded Cranley-Patterson
///   rotation.
struct SamplerSpec {
    SamplerKind kind = SamplerKind::Grid;
    int points_per_axis = 1025;
    std::size_t samples = 100'000;
    std::uint64_t seed = 1;

    static SamplerSpec grid(int points_per_axis);
    static SamplerSpec halton(std::size_t samples, std::uint64_t seed);
    /// d = 1: 1025-point grid; d = 2: 101 x 101 grid; d >= 3: 10^5 Halton points.
    static SamplerSpec default_for(int d, std::uint64_t seed = 1);

    std::size_t count(int d) const;
    nlohmann::json to_json() const;
    static SamplerSpec from_json(const nlohmann::json& doc);
};

/// d x N matrix of sample points, deterministic for a fixed spec.
Eigen::MatrixXd sample_points(int d, const SamplerSpec& spec);

}  // namespace qonet
