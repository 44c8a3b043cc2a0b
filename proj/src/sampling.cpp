#include "qonet/sampling.hpp"

#include <cmath>
#include <random>

#include "qonet/error.hpp"

namespace qonet {

SamplerSpec SamplerSpec::grid(int points_per_axis) {
    SamplerSpec s;
    s.kind = SamplerKind::Grid;
    s.points_per_axis = points_per_axis;
    return s;
}

SamplerSpec SamplerSpec::halton(std::size_t samples, std::uint64_t seed) {
    SamplerSpec s;
    s.kind = SamplerKind::Halton;
    s.samples = samples;
    s.seed = seed;
    return s;
}

SamplerSpec SamplerSpec::default_for(int d, std::uint64_t seed) {
    if (d == 1) return grid(1025);
    if (d == 2) return grid(101);
    return halton(100'000, seed);
}

std::size_t SamplerSpec::count(int d) const {
    if (kind == SamplerKind::Halton) return samples;
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(points_per_axis);
    return n;
}

nlohmann::json SamplerSpec::to_json() const {
    if (kind == SamplerKind::Grid) return {{"kind", "grid"}, {"points_per_axis", points_per_axis}};
    return {{"kind", "halton"}, {"samples", samples}, {"seed", seed}};
}

SamplerSpec SamplerSpec::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("kind")) throw ParseError("/kind", "missing field 'kind'");
    const auto kind = doc["kind"].get<std::string>();
    if (kind == "grid") return grid(doc.value("points_per_axis", 1025));
    if (kind == "halton") {
        if (!doc.contains("seed")) throw ParseError("/seed", "halton sampler requires a seed");
        return halton(doc.value("samples", std::size_t{100'000}), doc["seed"].get<std::uint64_t>());
    }
    throw ParseError("/kind", "unknown sampler kind '" + kind + "'");
}

namespace {

double radical_inverse(std::size_t i, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % static_cast<std::size_t>(base));
        i /= static_cast<std::size_t>(base);
        f *= inv;
    }
    return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

Eigen::MatrixXd sample_points(int d, const SamplerSpec& spec) {
    if (d < 1) throw Error(ErrorCategory::Config, "sampler dimension must be positive");
    if (spec.kind == SamplerKind::Grid) {
        if (spec.points_per_axis < 2) throw Error(ErrorCategory::Config, "grid needs at least 2 points per axis");
        const std::size_t n = spec.count(d);
        if (n > 50'000'000) throw Error(ErrorCategory::Resource, "grid has too many points");
        const int k = spec.points_per_axis;
        Eigen::MatrixXd pts(d, static_cast<Eigen::Index>(n));
        for (std::size_t p = 0; p < n; ++p) {
            std::size_t rest = p;
            for (int i = 0; i < d; ++i) {
                const auto j = static_cast<int>(rest % static_cast<std::size_t>(k));
                rest /= static_cast<std::size_t>(k);
                pts(i, static_cast<Eigen::Index>(p)) = static_cast<double>(j) / (k - 1);
            }
        }
        return pts;
    }
    if (d > static_cast<int>(std::size(kPrimes))) throw Error(ErrorCategory::Config, "Halton sampler supports d <= 12");
    std::mt19937_64 gen(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> shift(static_cast<std::size_t>(d));
    for (auto& s : shift) s = unif(gen);
    Eigen::MatrixXd pts(d, static_cast<Eigen::Index>(spec.samples));
    for (std::size_t p = 0; p < spec.samples; ++p) {
        for (int i = 0; i < d; ++i) {
            double v = radical_inverse(p + 1, kPrimes[i]) + shift[static_cast<std::size_t>(i)];
            if (v >= 1.0) v -= 1.0;
            pts(i, static_cast<Eigen::Index>(p)) = v;
        }
    }
    return pts;
}

}  // namespace qonet
