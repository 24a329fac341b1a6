#pragma once

#include "ncjoin/algebra.hpp"

#include <json.hpp>

#include <filesystem>

namespace ncjoin {

/// Malformed input file (bad JSON or schema violation).
struct InputError : Error {
  using Error::Error;
};

/// Matrices are row-major nested arrays; each entry is a number or a
/// [re, im] pair.
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Complex complex_from_json(const nlohmann::json& j);
nlohmann::json complex_to_json(Complex z);

/// System description schema:
/// {"blocks":[...], "state":{"density": M}, "group":{"kind":"Z"|"Zk"|"Zm", "k"|"m": int},
///  "generators":[{"perm":[...], "unitary": M}, ...]}
/// Density and unitaries are full block-diagonal matrices of size sum(blocks).
/// A missing "unitary" means the identity.
FiniteSystem system_from_json(const nlohmann::json& j);
nlohmann::json system_to_json(const FiniteSystem& sys);

FiniteSystem load_system(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace ncjoin
