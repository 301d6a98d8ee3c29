#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirrorflow/experiment.hpp"

namespace mirrorflow::cli {

using nlohmann::json;

inline ParameterError config_error(const std::string& what) { return ParameterError("config: " + what); }

inline const json& need(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw config_error(std::string("missing key '") + key + "'");
  return j.at(key);
}

inline Vector to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw config_error(what + " must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw config_error(what + " must contain numbers only");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix to_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw config_error(what + " must be a nonempty array of rows");
  const auto cols = j[0].size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw config_error(what + " rows differ in length");
    m.row(static_cast<Index>(i)) = to_vector(j[i], what).transpose();
  }
  return m;
}

// {"topology": "ring" | "path" | "complete", "n": k} or {"n": k, "edges": [[a, b], [a, b, w], ...]}
inline Graph parse_graph(const json& j) {
  const Index n = need(j, "n").get<Index>();
  if (j.contains("edges")) {
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) throw config_error("edge must be [a, b] or [a, b, weight]");
      edges.push_back({e[0].get<Index>(), e[1].get<Index>(), e.size() == 3 ? e[2].get<double>() : 1.0});
    }
    return Graph(n, std::move(edges));
  }
  const std::string topo = need(j, "topology").get<std::string>();
  if (topo == "ring") return Graph::ring(n);
  if (topo == "path") return Graph::path(n);
  if (topo == "complete") return Graph::complete(n);
  throw config_error("unknown topology '" + topo + "'");
}

// dim is the block dimension when the entry does not carry one itself.
inline Objective parse_objective(const json& j, Index dim) {
  const std::string kind = need(j, "kind").get<std::string>();
  if (kind == "quadratic") {
    const Matrix q = to_matrix(need(j, "Q"), "Q");
    const Vector c = j.contains("c") ? to_vector(j.at("c"), "c") : Vector(Vector::Zero(q.rows()));
    return Objective::quadratic(q, c);
  }
  if (kind == "logistic") return Objective::logistic(to_vector(need(j, "w"), "w"));
  if (kind == "l1") return Objective::l1(j.contains("dim") ? j.at("dim").get<Index>() : dim);
  throw config_error("unknown objective kind '" + kind + "'");
}

inline MirrorMap parse_mirror(const json& j, Index dim) {
  const std::string kind = j.is_string() ? j.get<std::string>() : need(j, "kind").get<std::string>();
  if (kind == "euclidean") return MirrorMap::euclidean(dim);
  if (kind == "negative_entropy") return MirrorMap::negative_entropy(dim);
  if (kind == "itakura_saito") return MirrorMap::itakura_saito(dim);
  if (kind == "simplex_entropy") return MirrorMap::simplex_entropy(dim);
  if (kind == "box") return MirrorMap::projection(Projector::box(to_vector(need(j, "lo"), "lo"), to_vector(need(j, "hi"), "hi")));
  if (kind == "sphere")
    return MirrorMap::projection(Projector::sphere(to_vector(need(j, "center"), "center"), need(j, "radius").get<double>()));
  if (kind == "affine")
    return MirrorMap::projection(Projector::affine(to_matrix(need(j, "A"), "A"), to_vector(need(j, "b"), "b")));
  if (kind == "half_space")
    return MirrorMap::projection(Projector::half_space(to_vector(need(j, "a"), "a"), need(j, "b").get<double>()));
  if (kind == "simplex") return MirrorMap::projection(Projector::simplex(dim));
  if (kind == "orthant") return MirrorMap::projection(Projector::orthant(dim));
  throw config_error("unknown mirror map '" + kind + "'");
}

// Interior start point for a map when the config gives none.
inline Vector default_start(const MirrorMap& m) {
  switch (m.kind()) {
    case MapKind::Euclidean: return Vector::Zero(m.dim());
    case MapKind::NegEntropy:
    case MapKind::ItakuraSaito:
    case MapKind::SimplexEntropy: return Vector::Constant(m.dim(), 1.0 / static_cast<double>(m.dim()));
    case MapKind::Projection: return m.projector()->project(Vector::Zero(m.dim()));
  }
  return Vector::Zero(m.dim());
}

inline Index objective_dim(const json& j) {
  const std::string kind = need(j, "kind").get<std::string>();
  if (kind == "quadratic") return static_cast<Index>(need(j, "Q").size());
  if (kind == "logistic") return static_cast<Index>(need(j, "w").size());
  if (j.contains("dim")) return j.at("dim").get<Index>();
  return 0;
}

inline ConstrainedProblem parse_constrained(const json& j, const std::string& name) {
  Matrix a;
  Vector b;
  std::optional<Vector> planted;
  std::optional<std::string> mirror_kind;
  if (j.contains("mirror")) {
    const auto& mj = j.at("mirror");
    mirror_kind = mj.is_string() ? mj.get<std::string>() : need(mj, "kind").get<std::string>();
  }
  if (j.contains("random")) {
    // orthonormal rows and b = A x0 for a planted k-sparse x0
    const auto& r = j.at("random");
    SeededRng rng(need(r, "seed").get<std::uint64_t>());
    const Index rows = need(r, "rows").get<Index>(), cols = need(r, "cols").get<Index>();
    const Index k = r.value("sparsity", Index{2});
    if (k < 1 || k > cols) throw config_error("sparsity must lie in [1, cols]");
    a = random_orthonormal_rows(rng, rows, cols);
    const bool nonneg = mirror_kind && (*mirror_kind == "negative_entropy" || *mirror_kind == "itakura_saito" ||
                                        *mirror_kind == "orthant");
    planted = detail::planted_sparse(rng, cols, k, nonneg);
    b = a * *planted;
  } else {
    a = to_matrix(need(j, "A"), "A");
    b = to_vector(need(j, "b"), "b");
  }
  const Index n = a.cols();
  Objective f = parse_objective(need(j, "objective"), n);
  MirrorMap m = j.contains("mirror") ? parse_mirror(j.at("mirror"), n) : MirrorMap::euclidean(n);
  Vector start = j.contains("start") ? to_vector(j.at("start"), "start") : default_start(m);
  if (j.contains("planted")) planted = to_vector(j.at("planted"), "planted");
  ConstrainedProblem p{name, std::move(f), std::move(a), std::move(b), std::move(m), std::move(start), planted};
  p.validate();
  return p;
}

inline ConsensusProblem parse_consensus(const json& j, const std::string& name) {
  Graph g = parse_graph(need(j, "graph"));
  const auto& agents = need(j, "agents");
  if (!agents.is_array() || static_cast<Index>(agents.size()) != g.nodes())
    throw config_error("consensus problem needs one agent entry per node");
  Index block = j.value("block", Index{0});
  if (!block) block = objective_dim(need(agents[0], "objective"));
  if (block < 1) throw config_error("cannot infer the block dimension, set 'block'");
  std::vector<Objective> fs;
  std::vector<MirrorMap> maps;
  Vector start(g.nodes() * block);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    fs.push_back(parse_objective(need(a, "objective"), block));
    maps.push_back(a.contains("mirror") ? parse_mirror(a.at("mirror"), block) : MirrorMap::euclidean(block));
    const Vector s = a.contains("start") ? to_vector(a.at("start"), "start") : default_start(maps.back());
    require_size(s.size(), block, "agent start");
    start.segment(static_cast<Index>(i) * block, block) = s;
  }
  std::optional<Vector> planted;
  if (j.contains("planted")) planted = to_vector(j.at("planted"), "planted");
  ConsensusProblem p{name, std::move(fs), std::move(maps), std::move(g), block, std::move(start), planted};
  p.validate();
  return p;
}

inline MonotropicProblem parse_monotropic(const json& j, const std::string& name) {
  Graph g = parse_graph(need(j, "graph"));
  const auto& agents = need(j, "agents");
  if (!agents.is_array() || static_cast<Index>(agents.size()) != g.nodes())
    throw config_error("monotropic problem needs one agent entry per node");
  std::vector<Objective> fs;
  std::vector<MirrorMap> maps;
  std::vector<Matrix> as;
  std::vector<Vector> ds;
  std::vector<Vector> starts;
  Index total = 0;
  for (const auto& a : agents) {
    as.push_back(to_matrix(need(a, "A"), "A"));
    ds.push_back(to_vector(need(a, "d"), "d"));
    const Index n = as.back().cols();
    fs.push_back(parse_objective(need(a, "objective"), n));
    maps.push_back(a.contains("mirror") ? parse_mirror(a.at("mirror"), n) : MirrorMap::euclidean(n));
    starts.push_back(a.contains("start") ? to_vector(a.at("start"), "start") : default_start(maps.back()));
    require_size(starts.back().size(), n, "agent start");
    total += n;
  }
  Vector start(total);
  Index off = 0;
  for (const auto& s : starts) {
    start.segment(off, s.size()) = s;
    off += s.size();
  }
  std::optional<Vector> planted;
  if (j.contains("planted")) planted = to_vector(j.at("planted"), "planted");
  MonotropicProblem p{name, std::move(fs), std::move(maps), std::move(as), std::move(ds), std::move(g),
                      std::move(start), planted};
  p.validate();
  return p;
}

inline AnyProblem parse_problem(const json& j) {
  const std::string type = need(j, "type").get<std::string>();
  const std::string name = j.value("name", std::string("inline"));
  if (type == "constrained") return parse_constrained(j, name);
  if (type == "consensus") return parse_consensus(j, name);
  if (type == "monotropic") return parse_monotropic(j, name);
  throw config_error("unknown problem type '" + type + "'");
}

inline SystemKind parse_system(const std::string& s) {
  const SystemInfo* info = find_system(s);
  if (!info) {
    std::string known;
    for (const auto& x : system_catalogue()) known += (known.empty() ? "" : ", ") + x.name;
    throw ParameterError("unknown system '" + s + "', known systems: " + known);
  }
  return info->kind;
}

inline SystemKind default_system(ProblemFamily f, bool smooth) {
  switch (f) {
    case ProblemFamily::Constrained: return smooth ? SystemKind::APDMD : SystemKind::SAPDMD;
    case ProblemFamily::Consensus: return smooth ? SystemKind::ADPDMD : SystemKind::SADPDMD;
    case ProblemFamily::Monotropic: return smooth ? SystemKind::ADMD : SystemKind::SADMD;
  }
  return SystemKind::APDMD;
}

// Overrides collected from the command line; unset fields leave the config alone.
struct Overrides {
  std::optional<std::string> problem, system, out;
  std::optional<double> alpha, beta, t0, tf, mu0, rel_tol, abs_tol;
  std::optional<std::uint64_t> seed;
  std::optional<int> points_per_decade;
};

struct LoadedConfig {
  ExperimentConfig experiment;
  std::string out;
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParameterError("config file '" + path + "': " + e.what());
  }
}

// Layering: catalogue defaults < config file < command line flags.
inline LoadedConfig resolve_config(const json& file, const Overrides& o) {
  try {
    LoadedConfig out;
    ExperimentConfig& c = out.experiment;
    std::optional<AnyProblem> inline_problem;
    std::string problem;
    if (o.problem) {
      problem = *o.problem;
    } else if (file.contains("problem")) {
      if (file.at("problem").is_string()) problem = file.at("problem").get<std::string>();
      else inline_problem = parse_problem(file.at("problem"));
    } else {
      throw ParameterError("no problem given, use --problem or a config file");
    }

    if (inline_problem) {
      c.inline_problem = inline_problem;
      c.problem = name_of(*inline_problem);
      c.system = default_system(family_of(*inline_problem), objective_is_smooth(*inline_problem));
      c.alpha = family_of(*inline_problem) == ProblemFamily::Constrained ? 2.0 : 3.0;
      if (is_smoothed(c.system)) c.mu0 = 1.0;
    } else {
      c = default_config(problem);
    }

    auto num = [&](const char* key, auto& dst) {
      if (file.contains(key)) dst = file.at(key).get<std::decay_t<decltype(dst)>>();
    };
    if (file.contains("system")) c.system = parse_system(file.at("system").get<std::string>());
    num("alpha", c.alpha);
    num("beta", c.beta);
    num("t0", c.t0);
    num("tf", c.tf);
    if (file.contains("mu0")) {
      if (file.at("mu0").is_null()) c.mu0.reset();
      else c.mu0 = file.at("mu0").get<double>();
    }
    if (file.contains("seed")) c.seed = file.at("seed").get<std::uint64_t>();
    if (file.contains("integrator")) {
      const auto& ij = file.at("integrator");
      if (ij.contains("rel_tol")) c.integrator.rel_tol = ij.at("rel_tol").get<double>();
      if (ij.contains("abs_tol")) c.integrator.abs_tol = ij.at("abs_tol").get<double>();
      if (ij.contains("points_per_decade")) c.integrator.points_per_decade = ij.at("points_per_decade").get<int>();
      if (ij.contains("max_steps")) c.integrator.max_steps = ij.at("max_steps").get<long>();
    }
    if (file.contains("out")) out.out = file.at("out").get<std::string>();

    if (o.system) {
      c.system = parse_system(*o.system);
      // switching between smoothed and unsmoothed systems drops or needs mu0
      if (!is_smoothed(c.system) && !o.mu0) c.mu0.reset();
    }
    if (o.alpha) c.alpha = *o.alpha;
    if (o.beta) c.beta = *o.beta;
    if (o.t0) c.t0 = *o.t0;
    if (o.tf) c.tf = *o.tf;
    if (o.mu0) c.mu0 = *o.mu0;
    if (o.seed) c.seed = *o.seed;
    if (o.rel_tol) c.integrator.rel_tol = *o.rel_tol;
    if (o.abs_tol) c.integrator.abs_tol = *o.abs_tol;
    if (o.points_per_decade) c.integrator.points_per_decade = *o.points_per_decade;
    if (o.out) out.out = *o.out;
    if (out.out.empty()) throw ParameterError("no output directory given, use --out");

    const AnyProblem p = c.inline_problem ? *c.inline_problem : build_problem(c.problem, c.seed);
    validate_config(c, p);
    return out;
  } catch (const json::exception& e) {
    throw config_error(e.what());
  }
}

}  // namespace mirrorflow::cli
