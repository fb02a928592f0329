#include "kme/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kme {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw std::invalid_argument("scenario key '" + key + "': " + what);
}

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::string valid;
      for (const char* k : allowed) {
        if (!valid.empty()) valid += ", ";
        valid += k;
      }
      fail(ctx.empty() ? item.key() : ctx + "." + item.key(),
           "unknown key (valid keys: " + valid + ")");
    }
  }
}

const json& require(const json& j, const std::string& ctx, const char* key) {
  if (!j.contains(key)) fail(ctx.empty() ? key : ctx + "." + key, "missing");
  return j.at(key);
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

BoxBounds parse_bounds(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) fail(key, "expected [[lo, hi], ...]");
  BoxBounds b;
  const int dim = static_cast<int>(v.size());
  b.lo.resize(dim);
  b.hi.resize(dim);
  for (int d = 0; d < dim; ++d) {
    const json& pair = v.at(d);
    if (!pair.is_array() || pair.size() != 2) fail(key, "expected [[lo, hi], ...]");
    b.lo[d] = as_number(pair.at(0), key);
    b.hi[d] = as_number(pair.at(1), key);
  }
  try {
    b.validate();
  } catch (const std::exception& e) {
    fail(key, e.what());
  }
  return b;
}

KernelSpec parse_kernel(const json& v, const std::string& key) {
  if (!v.is_object()) fail(key, "expected { family, length_scale }");
  check_keys(v, key, {"family", "length_scale"});
  KernelSpec spec;
  try {
    spec.family = kernel_family_from_string(as_string(require(v, key, "family"), key + ".family"));
  } catch (const std::invalid_argument& e) {
    fail(key + ".family", e.what());
  }
  spec.length_scale = as_number(require(v, key, "length_scale"), key + ".length_scale");
  try {
    spec.validate();
  } catch (const std::exception& e) {
    fail(key + ".length_scale", e.what());
  }
  return spec;
}

}  // namespace

std::string Scenario::planner_label() const {
  switch (planner) {
    case PlannerKind::greedy:
      return "greedy";
    case PlannerKind::mpc:
      return "mpc";
    case PlannerKind::full:
      return "full";
    case PlannerKind::short_term:
      return "short_term";
    case PlannerKind::subsampled:
      return "subsampled";
    case PlannerKind::tsp:
      return "tsp";
    case PlannerKind::nbv:
      return "nbv";
  }
  return "?";
}

Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");
  check_keys(j, "",
             {"name", "domain", "target", "samples", "embedding_kernel",
              "objective_kernel", "system", "planner", "baseline", "solver",
              "control_weight", "steps", "seeds", "start", "coverage_radius",
              "outputs"});
  Scenario s;
  if (j.contains("name")) s.name = as_string(j.at("name"), "name");

  // domain
  {
    const json& d = require(j, "", "domain");
    check_keys(d, "domain", {"type", "bounds", "path", "normalize_to"});
    const std::string type = as_string(require(d, "domain", "type"), "domain.type");
    if (type == "box") {
      s.domain_is_mesh = false;
      s.box = parse_bounds(require(d, "domain", "bounds"), "domain.bounds");
    } else if (type == "mesh") {
      s.domain_is_mesh = true;
      s.mesh_path = as_string(require(d, "domain", "path"), "domain.path");
      if (d.contains("normalize_to")) {
        s.mesh_normalize_to = parse_bounds(d.at("normalize_to"), "domain.normalize_to");
      } else {
        s.mesh_normalize_to = BoxBounds::cube(3, -0.5, 0.5);
      }
      if (s.mesh_normalize_to.dim() != 3) {
        fail("domain.normalize_to", "mesh normalization box must be 3D");
      }
    } else {
      fail("domain.type", "expected box|mesh");
    }
  }
  const int dim = s.domain_is_mesh ? 3 : s.box.dim();

  // target
  {
    const json& t = require(j, "", "target");
    check_keys(t, "target", {"type", "components"});
    const std::string type = as_string(require(t, "target", "type"), "target.type");
    if (type == "uniform") {
      s.target.type = TargetSpec::Type::uniform;
    } else if (type == "mixture") {
      s.target.type = TargetSpec::Type::mixture;
      const json& comps = require(t, "target", "components");
      if (!comps.is_array() || comps.empty()) {
        fail("target.components", "expected a nonempty array");
      }
      for (std::size_t c = 0; c < comps.size(); ++c) {
        const std::string ck = "target.components[" + std::to_string(c) + "]";
        const json& comp = comps.at(c);
        check_keys(comp, ck, {"weight", "mean", "cov"});
        MixtureComponent mc;
        mc.weight = as_number(require(comp, ck, "weight"), ck + ".weight");
        const json& mean = require(comp, ck, "mean");
        if (!mean.is_array() || static_cast<int>(mean.size()) != dim) {
          fail(ck + ".mean", "expected an array of domain dimension");
        }
        mc.mean.resize(dim);
        for (int d = 0; d < dim; ++d) mc.mean[d] = as_number(mean.at(d), ck + ".mean");
        const json& cov = require(comp, ck, "cov");
        if (!cov.is_array() || static_cast<int>(cov.size()) != dim) {
          fail(ck + ".cov", "expected a dim x dim matrix");
        }
        mc.cov.resize(dim, dim);
        for (int r = 0; r < dim; ++r) {
          const json& row = cov.at(r);
          if (!row.is_array() || static_cast<int>(row.size()) != dim) {
            fail(ck + ".cov", "expected a dim x dim matrix");
          }
          for (int cidx = 0; cidx < dim; ++cidx) {
            mc.cov(r, cidx) = as_number(row.at(cidx), ck + ".cov");
          }
        }
        s.target.components.push_back(std::move(mc));
      }
      try {
        s.target.validate(dim);
      } catch (const std::exception& e) {
        fail("target.components", e.what());
      }
    } else {
      fail("target.type", "expected uniform|mixture");
    }
  }

  s.sample_count = as_int(require(j, "", "samples"), "samples");
  if (s.sample_count < 1) fail("samples", "must be >= 1");

  s.embedding_kernel = parse_kernel(require(j, "", "embedding_kernel"), "embedding_kernel");
  s.objective_kernel = parse_kernel(require(j, "", "objective_kernel"), "objective_kernel");

  // system
  {
    const json& sys = require(j, "", "system");
    check_keys(sys, "system",
               {"system", "u_max", "dt", "sigma", "constrain_to_domain"});
    try {
      s.system.kind = system_kind_from_string(
          as_string(require(sys, "system", "system"), "system.system"));
    } catch (const std::invalid_argument& e) {
      fail("system.system", e.what());
    }
    s.system.space_dim = dim;
    s.system.u_max = as_number(require(sys, "system", "u_max"), "system.u_max");
    s.system.dt = as_number(require(sys, "system", "dt"), "system.dt");
    if (sys.contains("sigma")) {
      try {
        s.system.sigma = sigma_kind_from_string(as_string(sys.at("sigma"), "system.sigma"));
      } catch (const std::invalid_argument& e) {
        fail("system.sigma", e.what());
      }
    } else {
      s.system.sigma = s.domain_is_mesh ? SigmaKind::project : SigmaKind::identity;
    }
    if (s.domain_is_mesh && s.system.sigma != SigmaKind::project) {
      fail("system.sigma", "mesh domains require sigma = project");
    }
    if (sys.contains("constrain_to_domain")) {
      if (!sys.at("constrain_to_domain").is_boolean()) {
        fail("system.constrain_to_domain", "expected a boolean");
      }
      s.system.constrain_to_domain = sys.at("constrain_to_domain").get<bool>();
    }
    try {
      s.system.validate();
    } catch (const std::exception& e) {
      fail("system", e.what());
    }
  }

  // planner or baseline
  if (j.contains("planner") && j.contains("baseline")) {
    fail("planner", "scenario may set either planner or baseline, not both");
  }
  if (j.contains("planner")) {
    const json& p = j.at("planner");
    if (p.is_string()) {
      if (p.get<std::string>() != "greedy") {
        fail("planner", "expected \"greedy\" or {\"mpc\": {...}}");
      }
      s.planner = Scenario::PlannerKind::greedy;
    } else if (p.is_object()) {
      check_keys(p, "planner", {"mpc"});
      const json& m = require(p, "planner", "mpc");
      check_keys(m, "planner.mpc", {"horizon", "iterations", "step_size"});
      s.planner = Scenario::PlannerKind::mpc;
      s.solver.horizon = as_int(require(m, "planner.mpc", "horizon"), "planner.mpc.horizon");
      s.solver.iterations =
          as_int(require(m, "planner.mpc", "iterations"), "planner.mpc.iterations");
      s.solver.step_size =
          as_number(require(m, "planner.mpc", "step_size"), "planner.mpc.step_size");
    } else {
      fail("planner", "expected \"greedy\" or {\"mpc\": {...}}");
    }
  } else if (j.contains("baseline")) {
    const json& b = j.at("baseline");
    if (b.is_string()) {
      const std::string name = b.get<std::string>();
      if (name == "full") {
        s.planner = Scenario::PlannerKind::full;
        s.memory.kind = MemoryPolicy::Kind::full;
      } else if (name == "tsp") {
        s.planner = Scenario::PlannerKind::tsp;
      } else {
        fail("baseline", "expected full|tsp|{short_term}|{subsampled}|{nbv}");
      }
    } else if (b.is_object()) {
      check_keys(b, "baseline", {"short_term", "subsampled", "nbv"});
      if (b.contains("short_term")) {
        s.planner = Scenario::PlannerKind::short_term;
        s.memory.kind = MemoryPolicy::Kind::short_term;
        s.memory.memory = as_int(b.at("short_term"), "baseline.short_term");
      } else if (b.contains("subsampled")) {
        const json& sub = b.at("subsampled");
        check_keys(sub, "baseline.subsampled", {"K", "reseed"});
        s.planner = Scenario::PlannerKind::subsampled;
        s.memory.kind = MemoryPolicy::Kind::subsampled;
        s.memory.memory = as_int(require(sub, "baseline.subsampled", "K"),
                                 "baseline.subsampled.K");
        if (sub.contains("reseed")) {
          if (!sub.at("reseed").is_boolean()) {
            fail("baseline.subsampled.reseed", "expected a boolean");
          }
          s.memory.reseed_each_step = sub.at("reseed").get<bool>();
        }
      } else if (b.contains("nbv")) {
        const json& nbv = b.at("nbv");
        check_keys(nbv, "baseline.nbv", {"radius"});
        s.planner = Scenario::PlannerKind::nbv;
        if (nbv.contains("radius")) {
          s.nbv_radius = as_number(nbv.at("radius"), "baseline.nbv.radius");
        }
      }
    } else {
      fail("baseline", "expected full|tsp|{short_term}|{subsampled}|{nbv}");
    }
    try {
      s.memory.validate();
    } catch (const std::exception& e) {
      fail("baseline", e.what());
    }
  }

  // shared solver settings for memory baselines (and mpc defaults)
  if (j.contains("solver")) {
    const json& m = j.at("solver");
    check_keys(m, "solver", {"horizon", "iterations", "step_size"});
    if (m.contains("horizon")) s.solver.horizon = as_int(m.at("horizon"), "solver.horizon");
    if (m.contains("iterations")) {
      s.solver.iterations = as_int(m.at("iterations"), "solver.iterations");
    }
    if (m.contains("step_size")) {
      s.solver.step_size = as_number(m.at("step_size"), "solver.step_size");
    }
  }
  if (s.solver.horizon < 1) fail("solver.horizon", "must be >= 1");
  if (s.solver.iterations < 1) fail("solver.iterations", "must be >= 1");
  if (!(s.solver.step_size > 0)) fail("solver.step_size", "must be > 0");

  if (j.contains("control_weight")) {
    s.control_weight = as_number(j.at("control_weight"), "control_weight");
    if (s.control_weight < 0) fail("control_weight", "must be >= 0");
  }

  s.steps = as_int(require(j, "", "steps"), "steps");
  if (s.steps < 1) fail("steps", "must be >= 1");

  if (j.contains("seeds")) {
    const json& seeds = j.at("seeds");
    if (!seeds.is_array() || seeds.empty()) fail("seeds", "expected a nonempty array");
    s.seeds.clear();
    for (const auto& v : seeds) {
      if (!v.is_number_integer()) fail("seeds", "expected integers");
      s.seeds.push_back(v.get<std::uint64_t>());
    }
  }

  if (j.contains("start")) {
    const json& st = j.at("start");
    if (st.is_string()) {
      if (st.get<std::string>() != "random") fail("start", "expected \"random\" or an array");
    } else if (st.is_array()) {
      if (static_cast<int>(st.size()) != dim) {
        fail("start", "expected an array of domain dimension");
      }
      s.start.resize(dim);
      for (int d = 0; d < dim; ++d) s.start[d] = as_number(st.at(d), "start");
    } else {
      fail("start", "expected \"random\" or an array");
    }
  }

  if (j.contains("coverage_radius")) {
    if (!j.at("coverage_radius").is_null()) {
      s.coverage_radius = as_number(j.at("coverage_radius"), "coverage_radius");
      if (!(s.coverage_radius > 0)) fail("coverage_radius", "must be > 0");
    }
  }

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    check_keys(o, "outputs", {"dump_error_state"});
    if (o.contains("dump_error_state")) {
      if (!o.at("dump_error_state").is_boolean()) {
        fail("outputs.dump_error_state", "expected a boolean");
      }
      s.dump_error_state = o.at("dump_error_state").get<bool>();
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("scenario file " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  if (s.domain_is_mesh) {
    nlohmann::json norm = nlohmann::json::array();
    for (int d = 0; d < 3; ++d) {
      norm.push_back({s.mesh_normalize_to.lo[d], s.mesh_normalize_to.hi[d]});
    }
    j["domain"] = {{"type", "mesh"}, {"path", s.mesh_path}, {"normalize_to", norm}};
  } else {
    nlohmann::json bounds = nlohmann::json::array();
    for (int d = 0; d < s.box.dim(); ++d) {
      bounds.push_back({s.box.lo[d], s.box.hi[d]});
    }
    j["domain"] = {{"type", "box"}, {"bounds", bounds}};
  }
  if (s.target.type == TargetSpec::Type::uniform) {
    j["target"] = {{"type", "uniform"}};
  } else {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : s.target.components) {
      nlohmann::json mean = nlohmann::json::array();
      for (int d = 0; d < c.mean.size(); ++d) mean.push_back(c.mean[d]);
      nlohmann::json cov = nlohmann::json::array();
      for (int r = 0; r < c.cov.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int cc = 0; cc < c.cov.cols(); ++cc) row.push_back(c.cov(r, cc));
        cov.push_back(row);
      }
      comps.push_back({{"weight", c.weight}, {"mean", mean}, {"cov", cov}});
    }
    j["target"] = {{"type", "mixture"}, {"components", comps}};
  }
  j["samples"] = s.sample_count;
  j["embedding_kernel"] = {{"family", to_string(s.embedding_kernel.family)},
                           {"length_scale", s.embedding_kernel.length_scale}};
  j["objective_kernel"] = {{"family", to_string(s.objective_kernel.family)},
                           {"length_scale", s.objective_kernel.length_scale}};
  j["system"] = {{"system", s.system.kind == SystemKind::single_integrator
                                ? "single_integrator"
                                : "double_integrator"},
                 {"u_max", s.system.u_max},
                 {"dt", s.system.dt},
                 {"sigma", s.system.sigma == SigmaKind::identity ? "identity" : "project"},
                 {"constrain_to_domain", s.system.constrain_to_domain}};
  switch (s.planner) {
    case Scenario::PlannerKind::greedy:
      j["planner"] = "greedy";
      break;
    case Scenario::PlannerKind::mpc:
      j["planner"] = {{"mpc",
                       {{"horizon", s.solver.horizon},
                        {"iterations", s.solver.iterations},
                        {"step_size", s.solver.step_size}}}};
      break;
    case Scenario::PlannerKind::full:
      j["baseline"] = "full";
      break;
    case Scenario::PlannerKind::short_term:
      j["baseline"] = {{"short_term", s.memory.memory}};
      break;
    case Scenario::PlannerKind::subsampled:
      j["baseline"] = {{"subsampled",
                        {{"K", s.memory.memory}, {"reseed", s.memory.reseed_each_step}}}};
      break;
    case Scenario::PlannerKind::tsp:
      j["baseline"] = "tsp";
      break;
    case Scenario::PlannerKind::nbv:
      j["baseline"] = {{"nbv", {{"radius", s.nbv_radius}}}};
      break;
  }
  if (s.planner != Scenario::PlannerKind::mpc) {
    j["solver"] = {{"horizon", s.solver.horizon},
                   {"iterations", s.solver.iterations},
                   {"step_size", s.solver.step_size}};
  }
  j["control_weight"] = s.control_weight;
  j["steps"] = s.steps;
  j["seeds"] = s.seeds;
  if (s.start.size() > 0) {
    nlohmann::json st = nlohmann::json::array();
    for (int d = 0; d < s.start.size(); ++d) st.push_back(s.start[d]);
    j["start"] = st;
  } else {
    j["start"] = "random";
  }
  if (s.coverage_radius > 0) j["coverage_radius"] = s.coverage_radius;
  j["outputs"] = {{"dump_error_state", s.dump_error_state}};
  return j;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must look like dotted.key=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(value_text);
  } catch (...) {
    value = value_text;  // bare strings
  }
  nlohmann::json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw std::invalid_argument("empty key segment in: " + path);
    parts.push_back(part);
  }
  if (parts.empty()) throw std::invalid_argument("empty override key");
  // Scalars along the path are replaced by objects; schema validation then
  // rejects any key the path invented, listing the valid keys.
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) *node = nlohmann::json::object();
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) *node = nlohmann::json::object();
  (*node)[parts.back()] = value;
}

std::string scenario_hash(const nlohmann::json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

DomainModel make_domain(const Scenario& s) {
  if (s.domain_is_mesh) return load_mesh(s.mesh_path, s.mesh_normalize_to);
  return DomainModel::box(s.box);
}

}  // namespace kme
