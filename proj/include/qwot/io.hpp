#pragma once

// JSON problem files and deterministic reports. Matrices are row-major arrays
// of rows; a complex entry is [re, im], a real entry may be a bare number.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qwot/errors.hpp"
#include "qwot/linalg.hpp"
#include "qwot/quantum.hpp"
#include "qwot/solver.hpp"

namespace qwot {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kFileDimGuard = 8;
inline constexpr std::size_t kScanDimGuard = 4;

// Raised for malformed input; always carries the offending field.
class InputError : public Error {
 public:
  using Error::Error;
};

// QWOT_MAX_DIM overrides the built-in limit when set to a positive integer.
inline std::size_t dimension_guard(std::size_t fallback) {
  if (const char* env = std::getenv("QWOT_MAX_DIM")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

inline void check_dimension(std::size_t dim, std::size_t fallback, const std::string& where) {
  const std::size_t limit = dimension_guard(fallback);
  if (dim > limit) {
    throw SizeError(where + ": dimension " + std::to_string(dim) + " exceeds guard " +
                    std::to_string(limit) + " (set QWOT_MAX_DIM to override)");
  }
}

//----------------------------------------------------------------------------
// Matrices
//----------------------------------------------------------------------------

inline cplx parse_entry(const json& e, const std::string& field) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
    return {e[0].get<double>(), e[1].get<double>()};
  }
  throw InputError(field + ": expected a number or [re, im]");
}

inline ComplexMatrix parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw InputError(field + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  std::vector<cplx> entries;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j[i];
    const std::string rf = field + "[" + std::to_string(i) + "]";
    if (!row.is_array()) throw InputError(rf + ": expected an array");
    if (i == 0) cols = row.size();
    if (row.size() != cols) throw InputError(rf + ": ragged row");
    for (std::size_t c = 0; c < cols; ++c) entries.push_back(parse_entry(row[c], rf + "[" + std::to_string(c) + "]"));
  }
  return ComplexMatrix(rows, cols, std::move(entries));
}

inline json matrix_to_json(const ComplexMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back({m(i, c).real(), m(i, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

//----------------------------------------------------------------------------
// Problem files
//----------------------------------------------------------------------------

struct ProblemFile {
  std::size_t dim = 0;
  bool rounded = false;  // Hermitianize and renormalize on load
  std::map<std::string, State> states;
  std::vector<std::pair<std::string, HermitianOperator>> observables;
  std::optional<double> p;
  std::optional<double> q;
  double tol = kDefaultSolverTol;
  int max_iters = kDefaultMaxIters;
  std::optional<std::uint64_t> seed;
  json source;  // parsed document, for the digest

  const State& state(const std::string& name) const {
    const auto it = states.find(name);
    if (it == states.end()) throw InputError("states." + name + ": missing");
    return it->second;
  }
  ObservableCollection collection() const {
    if (observables.empty()) throw InputError("observables: empty");
    std::vector<HermitianOperator> obs;
    for (const auto& [name, a] : observables) obs.push_back(a);
    return ObservableCollection(std::move(obs));
  }
};

inline ProblemFile parse_problem(const json& doc) {
  if (!doc.is_object()) throw InputError("document: expected an object");
  ProblemFile pf;
  pf.source = doc;
  if (doc.contains("schema") && doc["schema"] != kSchemaVersion) {
    throw InputError("schema: unsupported version " + doc["schema"].dump());
  }
  if (!doc.contains("dim") || !doc["dim"].is_number_unsigned()) {
    throw InputError("dim: expected a positive integer");
  }
  pf.dim = doc["dim"].get<std::size_t>();
  if (pf.dim == 0) throw InputError("dim: must be positive");
  check_dimension(pf.dim, kFileDimGuard, "dim");
  if (doc.contains("rounded")) {
    if (!doc["rounded"].is_boolean()) throw InputError("rounded: expected a boolean");
    pf.rounded = doc["rounded"].get<bool>();
  }
  auto check_shape = [&](const ComplexMatrix& m, const std::string& field) {
    if (m.rows() != pf.dim || m.cols() != pf.dim) {
      throw InputError(field + ": expected " + std::to_string(pf.dim) + "x" + std::to_string(pf.dim));
    }
  };
  if (doc.contains("states")) {
    if (!doc["states"].is_object()) throw InputError("states: expected an object of matrices");
    for (const auto& [name, mj] : doc["states"].items()) {
      const std::string field = "states." + name;
      const auto m = parse_matrix(mj, field);
      check_shape(m, field);
      try {
        pf.states.emplace(name, pf.rounded ? State::from_rounded(m, 1e-9) : State(HermitianOperator(m, 1e-9), 1e-9));
      } catch (const Error& e) {
        throw InputError(field + ": " + e.what());
      }
    }
  }
  if (doc.contains("observables")) {
    const auto& obs = doc["observables"];
    if (!obs.is_array()) throw InputError("observables: expected an array");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const std::string field = "observables[" + std::to_string(k) + "]";
      std::string name = "A" + std::to_string(k);
      const json* mj = &obs[k];
      if (obs[k].is_object()) {
        if (obs[k].contains("name")) name = obs[k]["name"].get<std::string>();
        if (!obs[k].contains("matrix")) throw InputError(field + ".matrix: missing");
        mj = &obs[k]["matrix"];
      }
      const auto m = parse_matrix(*mj, field);
      check_shape(m, field);
      try {
        pf.observables.emplace_back(name, pf.rounded ? HermitianOperator::hermitian_part(m)
                                                     : HermitianOperator(m, 1e-9));
      } catch (const Error& e) {
        throw InputError(field + ": " + e.what());
      }
    }
  }
  auto number = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    if (!doc[key].is_number()) throw InputError(std::string(key) + ": expected a number");
    return doc[key].get<double>();
  };
  pf.p = number("p");
  pf.q = number("q");
  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    if (!s.is_object()) throw InputError("solver: expected an object");
    if (s.contains("tol")) {
      if (!s["tol"].is_number() || !(s["tol"].get<double>() > 0.0)) throw InputError("solver.tol: expected a positive number");
      pf.tol = s["tol"].get<double>();
    }
    if (s.contains("max_iters")) {
      if (!s["max_iters"].is_number_integer() || s["max_iters"].get<int>() <= 0) {
        throw InputError("solver.max_iters: expected a positive integer");
      }
      pf.max_iters = s["max_iters"].get<int>();
    }
  }
  if (doc.contains("seed") && !doc["seed"].is_null()) {
    if (!doc["seed"].is_number_unsigned()) throw InputError("seed: expected a nonnegative integer");
    pf.seed = doc["seed"].get<std::uint64_t>();
  }
  return pf;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line:column.
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t stop = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, text.size()) : 0;
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto doc = parse_json_text(ss.str(), path);
  try {
    return parse_problem(doc);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

//----------------------------------------------------------------------------
// Deterministic serialization
//----------------------------------------------------------------------------

inline std::string format_double(double x) {
  if (std::isnan(x)) return "\"nan\"";
  if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

namespace detail {

inline void write_json(const json& j, std::string& out, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close_pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad + json(it.key()).dump() + (indent > 0 ? ": " : ":");
        write_json(it.value(), out, indent, depth + 1);
      }
      out += nl + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      if (flat || indent == 0) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += indent > 0 ? ", " : ",";
          write_json(j[i], out, flat ? 0 : indent, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[";
      out += nl;
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) {
          out += ",";
          out += nl;
        }
        out += pad;
        write_json(j[i], out, indent, depth + 1);
      }
      out += nl + close_pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

// Sorted keys, every float as %.12e.
inline std::string serialize(const json& j, int indent = 2) {
  std::string out;
  detail::write_json(j, out, indent, 0);
  return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string digest(const json& j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize(j, 0))));
  return buf;
}

//----------------------------------------------------------------------------
// Report fragments
//----------------------------------------------------------------------------

inline json transport_json(const TransportResult& r, bool with_plan = false) {
  json j = {{"value", r.value},
            {"dual_value", r.dual_value},
            {"gap", r.gap},
            {"primal_residual", r.primal_residual},
            {"dual_residual", r.dual_residual},
            {"iterations", r.iterations},
            {"converged", r.converged}};
  if (with_plan) j["plan"] = matrix_to_json(r.plan.matrix());
  return j;
}

}  // namespace qwot
