#pragma once

#include "cocyclab/linalg.hpp"

#include <nlohmann/json.hpp>

namespace cocyclab {

/// Row-major [[...], ...] <-> Matrix. Throws ValidationError on ragged or
/// non-numeric input.
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json vector_to_json(const Vector& v);

} // namespace cocyclab
