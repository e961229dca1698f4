// qcvx: command-line front end.
//
//   qcvx analyze form.json --expect rank-one-convex --expect not-polyconvex
//   qcvx decompose cubic.json
//   qcvx probe form.json --directions 200
//   qcvx fields-verify profiles.json
//   qcvx fields-bound profiles.json --domain box.json --perturbations 100
//   qcvx equiv --from 8,1,0.125 --to 1,1,1
//
// Exit codes: 0 completed, 1 expected property violated, 2 inconclusive,
// 3 input error.

#include "qcvx/io.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace qcvx;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitInput = 3;

struct Options {
  std::string input;
  std::string format = "json";
  std::uint64_t seed = 1;
  double tol = 1e-9;
  unsigned threads = 0;
  std::vector<std::string> expect;
  bool verbose = false;
  bool timing = false;
  int grid = 10000;
  int multistarts = 50;
  int max_iter = 2000;
  int directions = 200;
  int perturbations = 100;
  int samples = 10000;
  int quadrature = kDefaultQuadrature;
  std::string domain;
  std::string from, to;
};

struct Outcome {
  json report;
  int exit_code = kExitOk;
  std::vector<std::string> failures;
};

std::string read_all(const std::string& path) {
  if (path.empty()) throw InputError("no input given (pass a file path or '-')");
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
}

SearchConfig search_config(const Options& o) {
  SearchConfig c;
  c.grid_size = o.grid;
  c.multistarts = o.multistarts;
  c.max_iter = o.max_iter;
  c.tol = o.tol;
  c.seed = o.seed;
  c.threads = o.threads;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return c;
}

PolyConfig poly_config(const Options& o) {
  PolyConfig c;
  c.tol = o.tol;
  c.seed = o.seed;
  c.threads = o.threads;
  return c;
}

json config_echo(const Options& o) {
  return {{"seed", o.seed},           {"tol", o.tol},
          {"grid", o.grid},           {"multistarts", o.multistarts},
          {"max_iter", o.max_iter},   {"expect", o.expect}};
}

void log(const Options& o, const std::string& msg) {
  if (o.verbose) std::cerr << "qcvx: " << msg << '\n';
}

// Checks every --expect against the named boolean facts of a run.
void apply_expectations(const Options& o, const std::map<std::string, bool>& facts, Outcome& out) {
  for (const std::string& e : o.expect) {
    auto it = facts.find(e);
    if (it == facts.end()) {
      std::string known;
      for (const auto& [k, v] : facts) known += (known.empty() ? "" : ", ") + k;
      throw InputError("unknown --expect '" + e + "' for this command (known: " + known + ")");
    }
    if (!it->second) out.failures.push_back("expected " + e);
  }
  if (!out.failures.empty()) out.exit_code = kExitExpectation;
}

FormSpec load_form(const Options& o, json& report) {
  const std::string text = read_all(o.input);
  report["input_digest"] = fnv1a(text);
  FormSpec spec = parse_form_spec(parse_json(text));
  if (spec.asymmetry > 1e-9)
    std::cerr << "qcvx: warning: input matrix is not symmetric (max |M - M^T| = " << spec.asymmetry
              << "); using its symmetric part\n";
  report["form"] = {{"family", spec.family}, {"asymmetry", spec.asymmetry}};
  return spec;
}

Outcome run_analyze(const Options& o) {
  Outcome out;
  const FormSpec spec = load_form(o, out.report);
  log(o, "certifying rank-one convexity");
  const Verdict v = certify(spec.form, search_config(o));
  log(o, "testing polyconvexity");
  const PolyVerdict pv = feasibility(spec.form, poly_config(o));
  const Biquadratic bq = to_biquadratic(spec.form);
  out.report["rankone"] = to_json(v);
  out.report["polyconvexity"] = to_json(pv);
  out.report["symmetry"] = {{"swap", symmetry_check(bq, SymmetryKind::swap)},
                            {"cyclic", symmetry_check(bq, SymmetryKind::cyclic)},
                            {"axis_reflection", symmetry_check(bq, SymmetryKind::axis_reflection)}};
  if (spec.cubic) {
    const auto bad = cubic_violation(*spec.cubic);
    out.report["cubic_admissible"] = !bad.has_value();
    if (bad) out.report["cubic_violation"] = *bad;
  }
  const bool r1 = v.rank_one_convex();
  const bool poly = pv.status == PolyVerdict::Status::polyconvex;
  const bool not_poly = pv.status == PolyVerdict::Status::not_polyconvex;
  apply_expectations(o,
                     {{"rank-one-convex", r1},
                      {"not-rank-one-convex", !r1},
                      {"quasiconvex", r1},
                      {"not-quasiconvex", !r1},
                      {"marginal", v.status == Verdict::Status::marginal},
                      {"certified", v.status == Verdict::Status::certified},
                      {"polyconvex", poly},
                      {"not-polyconvex", not_poly}},
                     out);
  if (out.exit_code == kExitOk && (v.inconclusive() || pv.status == PolyVerdict::Status::inconclusive))
    out.exit_code = kExitInconclusive;
  return out;
}

Outcome run_decompose(const Options& o) {
  Outcome out;
  const FormSpec spec = load_form(o, out.report);
  if (!spec.cubic) throw InputError("decompose requires a cubic family form spec, got '" + spec.family + "'");
  DecompositionCertificate cert;
  try {
    cert = decompose_cubic(*spec.cubic);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const bool ok = verify_certificate(spec.form, cert);
  out.report["certificate"] = to_json(cert);
  out.report["verified"] = ok;
  out.report["reconstruction_error"] = max_abs(reconstruct(cert) - spec.form.matrix());
  apply_expectations(o, {{"verified", ok}}, out);
  return out;
}

Outcome run_probe(const Options& o) {
  Outcome out;
  const FormSpec spec = load_form(o, out.report);
  if (o.directions < 0) throw InputError("--directions must be >= 0");
  const SearchConfig cfg = search_config(o);
  if (certify(spec.form, cfg).status == Verdict::Status::violated)
    throw InputError("probe requires a rank-one convex form");
  log(o, "probing " + std::to_string(o.directions) + " directions");
  const ProbeReport r = probe_def1(spec.form, o.directions, cfg);
  out.report["probe"] = to_json(r);
  apply_expectations(o, {{"extremal", r.extremal_def1}, {"not-extremal", !r.extremal_def1}}, out);
  return out;
}

json potential_echo(const SpecialPotential& sp) {
  json p;
  for (int m = 0; m < 4; ++m)
    p["v" + std::to_string(m)] = {{"cos", sp.v[m].cos_coeffs()}, {"sin", sp.v[m].sin_coeffs()}};
  return p;
}

Outcome run_fields_verify(const Options& o) {
  Outcome out;
  const std::string text = read_all(o.input);
  out.report["input_digest"] = fnv1a(text);
  const SpecialPotential sp = parse_potential(parse_json(text));
  out.report["profiles"] = potential_echo(sp);
  if (o.samples < 1) throw InputError("--samples must be >= 1");

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const QuadraticForm q = extremal_q();
  double qmax = -std::numeric_limits<double>::infinity(), qabs = 0.0;
  for (int i = 0; i < o.samples; ++i) {
    const Vec3 x(unif(rng), unif(rng), unif(rng));
    const double v = q(MatrixVar(special_gradient(sp, x)));
    qmax = std::max(qmax, v);
    qabs = std::max(qabs, std::abs(v));
  }

  const PeriodicField pf = PeriodicField::from_special(sp);
  const int n = 2 * pf.max_mode() + 4;
  const double spectral = cell_average_q_spectral(pf);
  const double quad = cell_average_q_quadrature(pf, n);

  double div_max = 0.0, order_min = std::numeric_limits<double>::infinity(), term_max = 0.0;
  for (int i = 0; i < 16; ++i) {
    const Vec3 x(unif(rng), unif(rng), unif(rng));
    const DivergenceStudy s = divergence_study(sp, x, 1e-3);
    div_max = std::max(div_max, *std::max_element(s.residual.begin(), s.residual.end()));
    term_max = std::max(term_max, s.term_error[0]);
    if (s.term_error[2] > 1e-13) order_min = std::min(order_min, s.observed_order);
  }
  const bool avg_ok = std::abs(spectral) <= 1e-10 && std::abs(quad) <= 1e-10;
  const bool order_ok = !std::isfinite(order_min) || order_min >= 1.8;
  const bool div_ok = div_max <= 1e-5 && order_ok;
  const bool pointwise_ok = qmax <= 1e-12;

  out.report["pointwise"] = {{"samples", o.samples}, {"max_q", qmax}, {"max_abs_q", qabs}, {"pass", pointwise_ok}};
  out.report["cell_average"] = {
      {"spectral", spectral}, {"quadrature", quad}, {"grid", n}, {"gradient_energy", gradient_energy(pf)}, {"pass", avg_ok}};
  out.report["divergence"] = {{"h", 1e-3},
                              {"points", 16},
                              {"max_residual", div_max},
                              {"max_term_error", term_max},
                              {"min_observed_order", std::isfinite(order_min) ? json(order_min) : json(nullptr)},
                              {"pass", div_ok}};
  out.report["is_special"] = is_special(pf);
  apply_expectations(o,
                     {{"special-field", avg_ok && div_ok},
                      {"pointwise-zero", pointwise_ok},
                      {"is-special", is_special(pf)}},
                     out);
  return out;
}

Outcome run_fields_bound(const Options& o) {
  Outcome out;
  const std::string text = read_all(o.input);
  out.report["input_digest"] = fnv1a(text);
  const json spec = parse_json(text);
  const SpecialPotential sp = parse_potential(spec);
  Subdomain omega = Subdomain::box(Vec3::Zero(), Vec3::Constant(0.5));
  if (!o.domain.empty()) {
    const std::string dtext = read_all(o.domain);
    out.report["domain_digest"] = fnv1a(dtext);
    omega = parse_subdomain(parse_json(dtext));
  } else if (spec.is_object() && spec.contains("domain")) {
    omega = parse_subdomain(spec.at("domain"));
  }
  if (o.perturbations < 0) throw InputError("--perturbations must be >= 0");
  if (o.quadrature < 2) throw InputError("--quadrature must be >= 2");
  out.report["profiles"] = potential_echo(sp);
  out.report["domain"] = to_json(omega);
  out.report["quadrature"] = o.quadrature;

  const SharpBoundReport base = sharp_bound_check(omega, sp, Perturbation{TrigField{}, 0.0}, o.quadrature, o.threads);
  out.report["unperturbed"] = to_json(base);
  const double scale = std::max(1.0, std::abs(base.boundary));
  const bool sharp = std::abs(base.gap) <= 1e-8 * scale;

  std::mt19937_64 rng(o.seed);
  double min_gap = std::numeric_limits<double>::infinity(), max_cross = 0.0;
  int positive = 0;
  json gaps = json::array();
  for (int k = 0; k < o.perturbations; ++k) {
    const Perturbation w{TrigField::random(4, 2, rng), 1.0};
    const SharpBoundReport r = sharp_bound_check(omega, sp, w, o.quadrature, o.threads);
    min_gap = std::min(min_gap, r.gap);
    max_cross = std::max(max_cross, std::abs(r.cross));
    if (r.gap > 1e-6) ++positive;
    gaps.push_back(r.gap);
  }
  const bool holds = o.perturbations == 0 || min_gap >= -1e-8 * scale;
  const bool cross_ok = max_cross <= 1e-8;
  out.report["perturbed"] = {{"count", o.perturbations},
                             {"min_gap", o.perturbations ? json(min_gap) : json(nullptr)},
                             {"strictly_positive", positive},
                             {"max_abs_cross", max_cross},
                             {"gaps", gaps}};
  out.report["bound_holds"] = holds;
  out.report["sharp"] = sharp;
  out.report["cross_term_ok"] = cross_ok;
  apply_expectations(o, {{"bound-holds", holds && cross_ok}, {"sharp", sharp}}, out);
  return out;
}

CubicParams triple(const std::string& s, const char* flag) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError(std::string(flag) + ": not a number: '" + item + "'");
    }
  }
  if (v.size() != 3) throw InputError(std::string(flag) + " needs three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

Outcome run_equiv(const Options& o) {
  Outcome out;
  CubicParams from, to;
  if (!o.from.empty() || !o.to.empty()) {
    if (o.from.empty() || o.to.empty()) throw InputError("equiv needs both --from and --to");
    from = triple(o.from, "--from");
    to = triple(o.to, "--to");
    out.report["input_digest"] = fnv1a(o.from + ";" + o.to);
  } else {
    const std::string text = read_all(o.input);
    out.report["input_digest"] = fnv1a(text);
    const json spec = parse_json(text);
    if (!spec.is_object() || !spec.contains("from") || !spec.contains("to"))
      throw InputError("equiv spec needs 'from' and 'to'");
    from = detail::cubic_of(json{{"params", spec.at("from")}});
    to = detail::cubic_of(json{{"params", spec.at("to")}});
  }
  out.report["from"] = {from.alpha, from.beta, from.gamma};
  out.report["to"] = {to.alpha, to.beta, to.gamma};

  for (double v : {from.alpha, from.beta, from.gamma, to.alpha, to.beta, to.gamma})
    if (!(v > 0.0)) throw InputError("equiv parameters must be positive");
  const double p = from.alpha * from.beta * from.gamma, pp = to.alpha * to.beta * to.gamma;
  if (std::abs(p - pp) > 1e-9 * p) {
    out.report["products_match"] = false;
    out.failures.push_back("no diagonal equivalence: requires alpha*beta*gamma == alpha'*beta'*gamma'");
    out.exit_code = kExitExpectation;
    return out;
  }
  const EquivalenceMap m = diagonal_scaling(from.alpha, from.beta, from.gamma, to.alpha, to.beta, to.gamma);
  const Biquadratic mapped = transform(to_biquadratic(corollary_q(from.alpha, from.beta, from.gamma)), m);
  const Biquadratic target = to_biquadratic(corollary_q(to.alpha, to.beta, to.gamma));
  const double err = max_abs(mapped.coeffs() - target.coeffs());
  const bool match = approx_equal(mapped, target);
  out.report["products_match"] = true;
  out.report["map"] = to_json(m);
  out.report["coefficient_error"] = err;
  out.report["match"] = match;
  if (!match) {
    out.failures.push_back("mapped coefficients differ from target");
    out.exit_code = kExitExpectation;
  }
  return out;
}

void print_text(const json& j, const std::string& prefix, std::ostream& os) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) print_text(v, prefix.empty() ? k : prefix + "." + k, os);
  } else if (j.is_array() && (j.size() > 12 || (!j.empty() && j.front().is_structured()))) {
    if (j.size() > 12) {
      os << prefix << ": [" << j.size() << " entries]\n";
      return;
    }
    for (std::size_t i = 0; i < j.size(); ++i) print_text(j[i], prefix + "[" + std::to_string(i) + "]", os);
  } else {
    os << prefix << ": " << j.dump() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convexity certificates for quadratic forms on 3x3 gradients"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_input) {
    auto* in = sub->add_option("input", o.input, "Input JSON file, or - for stdin");
    if (needs_input) in->required();
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "text"}));
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--tol", o.tol, "Certification tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    sub->add_option("--expect", o.expect, "Property the run must confirm (repeatable)");
    sub->add_flag("--verbose", o.verbose, "Progress on stderr");
    sub->add_flag("--timing", o.timing, "Add wall time to the report (not reproducible)");
  };
  auto add_search = [&](CLI::App* sub) {
    sub->add_option("--grid", o.grid, "Sphere grid points");
    sub->add_option("--multistarts", o.multistarts, "Random descent starts");
    sub->add_option("--max-iter", o.max_iter, "Iterations per descent");
  };

  auto* analyze = app.add_subcommand("analyze", "Rank-one convexity, polyconvexity and symmetries of a form");
  add_common(analyze, true);
  add_search(analyze);
  auto* decompose = app.add_subcommand("decompose", "Squares plus null-Lagrangian certificate for a cubic form");
  add_common(decompose, true);
  auto* probe = app.add_subcommand("probe", "Try to subtract rank-one squares from a form");
  add_common(probe, true);
  add_search(probe);
  probe->add_option("--directions", o.directions, "Random directions to probe");
  auto* fverify = app.add_subcommand("fields-verify", "Check a special potential: pointwise, cell average, divergence");
  add_common(fverify, true);
  fverify->add_option("--samples", o.samples, "Pointwise samples");
  auto* fbound = app.add_subcommand("fields-bound", "Boundary-integral energy bound on a subdomain");
  add_common(fbound, true);
  fbound->add_option("--domain", o.domain, "Subdomain JSON file (default: centered box of half-width 1/2)");
  fbound->add_option("--perturbations", o.perturbations, "Random cutoff perturbations");
  fbound->add_option("--quadrature", o.quadrature, "Gauss-Legendre points per direction");
  auto* equiv = app.add_subcommand("equiv", "Diagonal equivalence between two corollary_q forms");
  add_common(equiv, false);
  equiv->add_option("--from", o.from, "alpha,beta,gamma");
  equiv->add_option("--to", o.to, "alpha',beta',gamma'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    if (sub == analyze) out = run_analyze(o);
    else if (sub == decompose) out = run_decompose(o);
    else if (sub == probe) out = run_probe(o);
    else if (sub == fverify) out = run_fields_verify(o);
    else if (sub == fbound) out = run_fields_bound(o);
    else out = run_equiv(o);
  } catch (const InputError& e) {
    std::cerr << "qcvx " << command << ": input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "qcvx " << command << ": input error: " << e.what() << '\n';
    return kExitInput;
  }

  json report;
  report["command"] = command;
  report["input_digest"] = out.report.value("input_digest", "");
  report["config"] = config_echo(o);
  for (const auto& [k, v] : out.report.items())
    if (k != "input_digest") report[k] = v;
  report["exit_code"] = out.exit_code;
  report["failures"] = out.failures;
  if (o.timing)
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (o.format == "json") std::cout << report.dump(2) << '\n';
  else print_text(report, "", std::cout);
  for (const std::string& f : out.failures) std::cerr << "qcvx " << command << ": " << f << '\n';
  return out.exit_code;
}
