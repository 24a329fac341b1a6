#include "ncjoin/system_io.hpp"

#include <fstream>
#include <sstream>

namespace ncjoin {

using nlohmann::json;

Complex complex_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw InputError("expected a number or a [re, im] pair, got " + j.dump());
}

json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InputError("matrix must be a nonempty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw InputError("matrix rows must be arrays");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InputError("matrix row " + std::to_string(r) + " has wrong length");
    for (std::size_t c = 0; c < cols; ++c) m(Eigen::Index(r), Eigen::Index(c)) = complex_from_json(j[r][c]);
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

static GroupDescriptor group_from_json(const json& g) {
  if (!g.is_object() || !g.contains("kind") || !g["kind"].is_string())
    throw InputError("\"group\" must be an object with a string \"kind\"");
  const std::string kind = g["kind"].get<std::string>();
  if (kind == "Z") return GroupDescriptor::integers();
  if (kind == "Zk") {
    if (!g.contains("k") || !g["k"].is_number_integer() || g["k"].get<int>() < 1)
      throw InputError("group kind Zk requires a positive integer \"k\"");
    return GroupDescriptor::lattice(g["k"].get<int>());
  }
  if (kind == "Zm") {
    if (!g.contains("m") || !g["m"].is_number_integer() || g["m"].get<int>() < 1)
      throw InputError("group kind Zm requires a positive integer \"m\"");
    return GroupDescriptor::cyclic(g["m"].get<int>());
  }
  throw InputError("unknown group kind \"" + kind + "\"");
}

static json group_to_json(const GroupDescriptor& g) {
  switch (g.kind()) {
    case GroupDescriptor::Kind::Integers: return {{"kind", "Z"}};
    case GroupDescriptor::Kind::IntegerLattice: return {{"kind", "Zk"}, {"k", g.generator_count()}};
    case GroupDescriptor::Kind::FiniteCyclic: return {{"kind", "Zm"}, {"m", g.order()}};
  }
  return {};
}

FiniteSystem system_from_json(const json& j) {
  try {
    if (!j.is_object()) throw InputError("system description must be a JSON object");
    for (const char* key : {"blocks", "state", "group", "generators"})
      if (!j.contains(key)) throw InputError(std::string("system description is missing \"") + key + "\"");
    FiniteSystem sys;
    sys.structure = BlockStructure(j.at("blocks").get<std::vector<int>>());
    if (!j["state"].is_object() || !j["state"].contains("density"))
      throw InputError("\"state\" must be an object with a \"density\" matrix");
    sys.state = FaithfulState(AlgebraElement::from_block_diagonal(sys.structure, matrix_from_json(j["state"]["density"])));
    sys.group = group_from_json(j["group"]);
    if (!j["generators"].is_array()) throw InputError("\"generators\" must be an array");
    for (const json& g : j["generators"]) {
      if (!g.is_object() || !g.contains("perm")) throw InputError("each generator needs a \"perm\" array");
      AlgebraElement u = g.contains("unitary")
                             ? AlgebraElement::from_block_diagonal(sys.structure, matrix_from_json(g["unitary"]))
                             : AlgebraElement::identity(sys.structure);
      sys.generators.emplace_back(sys.structure, g["perm"].get<std::vector<int>>(), std::move(u));
    }
    if (j.contains("name") && j["name"].is_string()) sys.name = j["name"].get<std::string>();
    return sys;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed system description: ") + e.what());
  } catch (const StructuralError& e) {
    throw InputError(std::string("malformed system description: ") + e.what());
  }
}

json system_to_json(const FiniteSystem& sys) {
  json gens = json::array();
  for (const auto& g : sys.generators)
    gens.push_back({{"perm", g.permutation()}, {"unitary", matrix_to_json(g.conjugator().to_block_diagonal())}});
  json out = {{"blocks", sys.structure.sizes()},
              {"state", {{"density", matrix_to_json(sys.state.density().to_block_diagonal())}}},
              {"group", group_to_json(sys.group)},
              {"generators", gens}};
  if (!sys.name.empty()) out["name"] = sys.name;
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

FiniteSystem load_system(const std::filesystem::path& path) {
  FiniteSystem sys = system_from_json(read_json_file(path));
  if (sys.name.empty()) sys.name = path.stem().string();
  return sys;
}

}  // namespace ncjoin
