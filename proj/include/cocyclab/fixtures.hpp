#pragma once

// Shipped reference experiments.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace cocyclab {

struct Fixture {
    std::string name;
    std::string experiment;
    /// Headline number the run should reproduce.
    std::string expected;
    /// Where the expected value comes from (closed form, oracle, property).
    std::string basis;
    nlohmann::json config;
};

const std::vector<Fixture>& fixtures();
/// Throws ValidationError for unknown names.
const Fixture& fixture(const std::string& name);

/// SL_2(Z) generators [[1,2],[0,1]] and [[1,0],[2,1]] with inverses, uniform.
nlohmann::json sl2z_system(std::uint64_t seed);
nlohmann::json sl2z_cocycle();

} // namespace cocyclab
