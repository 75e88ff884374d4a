#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "pdw/signal.hpp"

namespace testutil {

using pdw::Complex;

// Independent of pdw::Rng so oracles never share a generator with the code under test.
inline std::vector<Complex> random_complex(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937 gen(static_cast<std::uint32_t>(seed * 2654435761u + 17));
    std::normal_distribution<double> nd(0.0, scale / std::sqrt(2.0));
    std::vector<Complex> v(n);
    for (auto& x : v) x = {nd(gen), nd(gen)};
    return v;
}

inline std::vector<double> random_real(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937 gen(static_cast<std::uint32_t>(seed * 40503u + 3));
    std::uniform_real_distribution<double> ud(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = ud(gen);
    return v;
}

inline double energy(const std::vector<Complex>& x, std::size_t begin = 0, std::size_t end = SIZE_MAX) {
    double e = 0.0;
    for (std::size_t i = begin; i < std::min(end, x.size()); ++i) e += std::norm(x[i]);
    return e;
}

// Fresh scratch directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::current_path() / ("scratch_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
