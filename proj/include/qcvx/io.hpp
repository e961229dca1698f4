#pragma once

// JSON input specs and report serialization.

#include "qcvx/decompose.hpp"
#include "qcvx/extremal.hpp"
#include "qcvx/fields.hpp"
#include "qcvx/polyconvexity.hpp"
#include "qcvx/rankone.hpp"

#include "json.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace qcvx {

using json = nlohmann::json;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormSpec {
  std::string family;  // cubic | cyclic | extremal_q | corollary_q | matrix
  QuadraticForm form;
  std::optional<CubicParams> cubic;
  double asymmetry = 0.0;  // max |M - M^T| of a raw matrix input
};

namespace detail {

inline double number_at(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw InputError(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

// params given as an object with named keys or as a positional array.
inline std::vector<double> params_of(const json& spec, const std::vector<const char*>& names) {
  if (!spec.contains("params")) throw InputError("missing 'params'");
  const json& p = spec.at("params");
  std::vector<double> out;
  if (p.is_array()) {
    if (p.size() != names.size())
      throw InputError("'params' must have " + std::to_string(names.size()) + " entries");
    for (const auto& v : p) {
      if (!v.is_number()) throw InputError("'params' entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  if (!p.is_object()) throw InputError("'params' must be an object or array");
  for (const char* n : names) out.push_back(number_at(p, n));
  return out;
}

inline Vec3 vec3_of(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw InputError(std::string(what) + " must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw InputError(std::string(what) + " must be an array of 3 numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline CubicParams cubic_of(const json& spec) {
  const auto p = params_of(spec, {"alpha", "beta", "gamma"});
  return {p[0], p[1], p[2]};
}

}  // namespace detail

inline FormSpec parse_form_spec(const json& spec) {
  if (!spec.is_object()) throw InputError("form spec must be a JSON object");
  FormSpec out;
  if (spec.contains("matrix") && !spec.contains("family")) out.family = "matrix";
  else if (spec.contains("family") && spec.at("family").is_string()) out.family = spec.at("family").get<std::string>();
  else throw InputError("form spec needs 'family' or 'matrix'");

  if (out.family == "cubic") {
    out.cubic = detail::cubic_of(spec);
    out.form = from_cubic(*out.cubic);
  } else if (out.family == "corollary_q") {
    const CubicParams p = detail::cubic_of(spec);
    out.form = corollary_q(p.alpha, p.beta, p.gamma);
  } else if (out.family == "cyclic") {
    const auto p = detail::params_of(spec, {"a", "b", "c", "d"});
    out.form = from_cyclic({p[0], p[1], p[2], p[3]});
  } else if (out.family == "extremal_q") {
    out.form = extremal_q();
  } else if (out.family == "matrix") {
    if (!spec.contains("matrix")) throw InputError("missing 'matrix'");
    const json& m = spec.at("matrix");
    if (!m.is_array() || m.size() != 9) throw InputError("'matrix' must be 9 rows of 9 numbers");
    Mat9 raw;
    for (int r = 0; r < 9; ++r) {
      if (!m[r].is_array() || m[r].size() != 9) throw InputError("'matrix' must be 9 rows of 9 numbers");
      for (int c = 0; c < 9; ++c) {
        if (!m[r][c].is_number()) throw InputError("'matrix' entries must be numbers");
        raw(r, c) = m[r][c].get<double>();
      }
    }
    out.asymmetry = max_abs(raw - raw.transpose());
    out.form = QuadraticForm(raw);
  } else {
    throw InputError("unknown family '" + out.family + "'");
  }
  return out;
}

inline ScalarProfile parse_profile(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw InputError("profile must be an object with 'cos'/'sin' arrays");
  auto arr = [&](const char* key) {
    std::vector<double> v;
    if (!j.contains(key)) return v;
    if (!j.at(key).is_array()) throw InputError(std::string("profile '") + key + "' must be an array");
    for (const auto& x : j.at(key)) {
      if (!x.is_number()) throw InputError(std::string("profile '") + key + "' entries must be numbers");
      v.push_back(x.get<double>());
    }
    return v;
  };
  return {arr("cos"), arr("sin")};
}

/// {"profiles": {"v0": {"cos": [...], "sin": [...]}, ...}}; missing profiles are zero.
inline SpecialPotential parse_potential(const json& spec) {
  if (!spec.is_object()) throw InputError("profile spec must be a JSON object");
  const json& p = spec.contains("profiles") ? spec.at("profiles") : spec;
  if (!p.is_object()) throw InputError("'profiles' must be an object");
  SpecialPotential sp;
  for (int m = 0; m < 4; ++m) {
    const std::string key = "v" + std::to_string(m);
    if (p.contains(key)) sp.v[m] = parse_profile(p.at(key));
  }
  return sp;
}

inline Subdomain parse_subdomain(const json& spec) {
  if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string())
    throw InputError("domain spec needs 'kind': box|ball");
  const std::string kind = spec.at("kind").get<std::string>();
  const Vec3 center = spec.contains("center") ? detail::vec3_of(spec.at("center"), "'center'") : Vec3::Zero();
  try {
    if (kind == "box") {
      if (!spec.contains("half_widths")) throw InputError("box needs 'half_widths'");
      const json& h = spec.at("half_widths");
      const Vec3 half = h.is_number() ? Vec3::Constant(h.get<double>()) : detail::vec3_of(h, "'half_widths'");
      return Subdomain::box(center, half);
    }
    if (kind == "ball") return Subdomain::ball(center, detail::number_at(spec, "radius"));
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  throw InputError("unknown domain kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

inline json to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

inline json to_json(const Vec9& v) {
  json a = json::array();
  for (int i = 0; i < 9; ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) a.push_back(to_json(Vec3(m.row(r).transpose())));
  return a;
}

inline json to_json(const Verdict& v) {
  json j{{"status", to_string(v.status)}, {"min_value", v.min_value}};
  j["witnesses"] = json::array();
  if (v.status == Verdict::Status::violated)
    j["witnesses"].push_back({{"x", to_json(v.x)}, {"y", to_json(v.y)}, {"value", v.min_value}});
  else
    j["attaining"] = {{"x", to_json(v.x)}, {"y", to_json(v.y)}};
  j["zero_points"] = json::array();
  for (const ZeroPoint& z : v.zero_points)
    j["zero_points"].push_back({{"x", to_json(z.x)}, {"y", to_json(z.y)}, {"value", z.value}});
  j["descents"] = v.descents;
  j["not_converged"] = v.not_converged;
  if (v.zero_form) j["zero_form"] = true;
  return j;
}

inline json to_json(const StructuralCertificate& c) {
  json rows = json::array();
  for (int r : c.forced_zero_rows) rows.push_back(var_name(r));
  json j{{"forced_zero_rows", rows},
         {"constraint_rank", c.constraint_rank},
         {"forced_alpha", to_json(c.forced_alpha.values)},
         {"negative_point", to_json(c.negative_point.coords())},
         {"value", c.value},
         {"form_value", c.form_value}};
  if (c.exact_form_value) j["exact_form_value"] = *c.exact_form_value;
  return j;
}

inline json to_json(const PolyVerdict& v) {
  json j{{"status", to_string(v.status)},
         {"alpha", to_json(v.alpha.values)},
         {"lambda_min", v.lambda_min},
         {"restarts_run", v.restarts_run},
         {"iterations", v.iterations}};
  if (v.structural) j["certificate"] = {{"kind", "structural"}, {"structural", to_json(*v.structural)}};
  else if (v.status == PolyVerdict::Status::not_polyconvex) j["certificate"] = {{"kind", "numerical"}};
  else j["certificate"] = nullptr;
  return j;
}

inline json to_json(const SquareTerm& s) { return {{"weight", s.weight}, {"coeffs", to_json(s.coeffs)}}; }

inline json to_json(const DecompositionCertificate& c) {
  json sq = json::array();
  for (const SquareTerm& s : c.squares) sq.push_back(to_json(s));
  return {{"case", c.case_id},
          {"beta_prime", c.beta_prime},
          {"gamma_prime", c.gamma_prime},
          {"squares", sq},
          {"null_part", to_json(c.null_part.values)},
          {"projection_residual", c.projection_residual}};
}

inline json to_json(const RankOneDirection& d) { return {{"a", to_json(d.a)}, {"b", to_json(d.b)}}; }

inline json to_json(const ProbeReport& r) {
  json per = json::array();
  for (const DirectionProbe& p : r.per_direction)
    per.push_back({{"a", to_json(p.direction.a)},
                   {"b", to_json(p.direction.b)},
                   {"t_star", p.t_star},
                   {"zero_aligned", p.zero_aligned}});
  return {{"directions", r.directions},
          {"sup_t", r.sup_t},
          {"worst", to_json(r.worst)},
          {"extremal_def1", r.extremal_def1},
          {"per_direction", per}};
}

inline json to_json(const EquivalenceMap& m) { return {{"A", to_json(m.a)}, {"B", to_json(m.b)}}; }

inline json to_json(const DivergenceStudy& s) {
  return {{"h", s.h}, {"residual", s.residual}, {"term_error", s.term_error}, {"observed_order", s.observed_order}};
}

inline json to_json(const SharpBoundReport& r) {
  return {{"interior", r.interior},
          {"boundary", r.boundary},
          {"gap", r.gap},
          {"base", r.base},
          {"cross", r.cross},
          {"perturbation", r.perturbation},
          {"decomposition_residual", r.decomposition_residual},
          {"boundary_max_w", r.boundary_max_w},
          {"volume_points", r.volume_points},
          {"surface_points", r.surface_points}};
}

inline json to_json(const Subdomain& d) {
  if (d.kind() == Subdomain::Kind::box)
    return {{"kind", "box"}, {"center", to_json(d.center())}, {"half_widths", to_json(d.half_widths())}};
  return {{"kind", "ball"}, {"center", to_json(d.center())}, {"radius", d.radius()}};
}

}  // namespace qcvx
