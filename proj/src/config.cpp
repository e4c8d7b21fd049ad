#include <pendyn/config.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace pendyn {

namespace {

using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw ConfigError(ErrorCode::kInvalidArgument, "config: " + (path.empty() ? "<root>" : path) + ": " + msg);
}

/// A json value together with its key path, for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) schema_error(path_, "expected an object");
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) {
        std::string list;
        for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        schema_error(child_path(key), "unknown key (allowed: " + list + ")");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.contains(key)) schema_error(child_path(key), "missing required key");
    return Node(j_.at(key), child_path(key));
  }

  std::optional<Node> opt(const char* key) const {
    if (!j_.contains(key)) return std::nullopt;
    return Node(j_.at(key), child_path(key));
  }

  double number() const {
    if (j_.is_number()) {
      const double v = j_.get<double>();
      if (!std::isfinite(v)) schema_error(path_, "must be finite");
      return v;
    }
    if (j_.is_string()) {
      try {
        return parse_scalar(j_.get<std::string>());
      } catch (const Error&) {
        schema_error(path_, "expected a number or \"sqrt2\", got \"" + j_.get<std::string>() + "\"");
      }
    }
    schema_error(path_, "expected a number");
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) schema_error(path_, "must be > 0");
    return v;
  }

  std::uint64_t count() const {
    if (!j_.is_number_integer() || j_.get<long long>() < 0) schema_error(path_, "expected a nonnegative integer");
    return j_.get<std::uint64_t>();
  }

  std::string string() const {
    if (!j_.is_string()) schema_error(path_, "expected a string");
    return j_.get<std::string>();
  }

  Vec vec() const {
    if (!j_.is_array() || j_.empty()) schema_error(path_, "expected a nonempty array of numbers");
    Vec v(static_cast<Index>(j_.size()));
    for (std::size_t i = 0; i < j_.size(); ++i) {
      v[static_cast<Index>(i)] = Node(j_[i], path_ + "[" + std::to_string(i) + "]").number();
    }
    return v;
  }

  Mat mat() const {
    if (!j_.is_array() || j_.empty()) schema_error(path_, "expected a nonempty array of rows");
    const std::size_t rows = j_.size();
    std::size_t cols = 0;
    Mat m;
    for (std::size_t i = 0; i < rows; ++i) {
      const Vec r = Node(j_[i], path_ + "[" + std::to_string(i) + "]").vec();
      if (i == 0) {
        cols = static_cast<std::size_t>(r.size());
        m.resize(static_cast<Index>(rows), static_cast<Index>(cols));
      } else if (static_cast<std::size_t>(r.size()) != cols) {
        schema_error(path_, "rows have different lengths");
      }
      m.row(static_cast<Index>(i)) = r.transpose();
    }
    return m;
  }

 private:
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

/// Runs `f`, rewording library errors as schema errors at `path`.
template <class F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kPairing) {
      throw ConfigError(ErrorCode::kPairing, "config: " + path + ": " + e.what());
    }
    schema_error(path, e.what());
  }
}

PowerSchedule parse_power(const Node& n) {
  n.expect_object({"family", "c0", "p"});
  const std::string fam = n.at("family").string();
  if (fam != "power") schema_error(n.path() + ".family", "unknown family \"" + fam + "\" (allowed: power)");
  const double c0 = n.at("c0").positive();
  const double p = n.at("p").number();
  return PowerSchedule(c0, p);
}

DampingSchedule parse_damping(const Node& n) {
  n.expect_object({"kind", "g0", "g_inf", "rate"});
  const std::string kind = n.at("kind").string();
  if (kind == "constant") {
    if (n.has("g_inf") || n.has("rate")) schema_error(n.path(), "constant damping takes only g0");
    return DampingSchedule::constant(n.at("g0").positive());
  }
  if (kind == "decay-to-floor") {
    const double g0 = n.at("g0").positive();
    const double gi = n.at("g_inf").positive();
    const double rate = n.at("rate").positive();
    return DampingSchedule::decay_to_floor(g0, gi, rate);
  }
  schema_error(n.path() + ".kind", "unknown damping kind \"" + kind + "\" (allowed: constant, decay-to-floor)");
}

ConstraintSet parse_set(const Node& n, Index dim) {
  const std::string kind = n.at("kind").string();
  return guarded(n.path(), [&] {
    if (kind == "hyperplane") {
      n.expect_object({"kind", "a", "b"});
      return ConstraintSet::hyperplane(n.at("a").vec(), n.at("b").number());
    }
    if (kind == "affine-subspace") {
      n.expect_object({"kind", "A", "b"});
      return ConstraintSet::affine_subspace(n.at("A").mat(), n.at("b").vec());
    }
    if (kind == "box") {
      n.expect_object({"kind", "lo", "hi"});
      return ConstraintSet::box(n.at("lo").vec(), n.at("hi").vec());
    }
    if (kind == "whole-space") {
      n.expect_object({"kind"});
      return ConstraintSet::whole_space(dim);
    }
    schema_error(n.path() + ".kind",
                 "unknown set kind \"" + kind + "\" (allowed: hyperplane, affine-subspace, box, whole-space)");
  });
}

ProxDescriptor parse_function(const Node& n, Index dim) {
  const std::string kind = n.at("kind").string();
  return guarded(n.path(), [&] {
    if (kind == "zero") {
      n.expect_object({"kind"});
      return ProxDescriptor::zero();
    }
    if (kind == "l1") {
      n.expect_object({"kind", "weight"});
      return ProxDescriptor::l1(n.at("weight").positive());
    }
    if (kind == "quadratic-shift") {
      n.expect_object({"kind", "center", "modulus"});
      return ProxDescriptor::quadratic_shift(n.at("center").vec(), n.at("modulus").positive());
    }
    if (kind == "indicator") {
      n.expect_object({"kind", "set"});
      return ProxDescriptor::indicator(parse_set(n.at("set"), dim));
    }
    schema_error(n.path() + ".kind",
                 "unknown function kind \"" + kind + "\" (allowed: zero, l1, quadratic-shift, indicator)");
  });
}

ResolventOperator parse_operator(const Node& n, Index dim) {
  const std::string kind = n.at("kind").string();
  return guarded(n.path(), [&] {
    if (kind == "zero") {
      n.expect_object({"kind"});
      return ResolventOperator::zero(dim);
    }
    if (kind == "affine") {
      n.expect_object({"kind", "M", "q", "eta"});
      const double eta = n.has("eta") ? n.at("eta").number() : 0.0;
      return ResolventOperator::affine(n.at("M").mat(), n.at("q").vec(), eta);
    }
    if (kind == "subdifferential") {
      n.expect_object({"kind", "f", "eta"});
      ProxDescriptor f = parse_function(n.at("f"), dim);
      const double eta = n.has("eta") ? n.at("eta").number() : f.strong_convexity();
      return ResolventOperator::subdifferential(std::move(f), dim, eta);
    }
    schema_error(n.path() + ".kind", "unknown operator kind \"" + kind + "\" (allowed: zero, affine, subdifferential)");
  });
}

CocoerciveMap parse_map(const Node& n, Index dim) {
  const std::string kind = n.at("kind").string();
  return guarded(n.path(), [&] {
    if (kind == "zero") {
      n.expect_object({"kind"});
      return CocoerciveMap::zero(dim);
    }
    if (kind == "gradient-affine") {
      n.expect_object({"kind", "Q", "r"});
      return CocoerciveMap::gradient_affine(n.at("Q").mat(), n.at("r").vec());
    }
    if (kind == "quadratic-penalty") {
      n.expect_object({"kind", "a", "b"});
      return CocoerciveMap::quadratic_penalty(n.at("a").vec(), n.at("b").number());
    }
    schema_error(n.path() + ".kind",
                 "unknown map kind \"" + kind + "\" (allowed: zero, gradient-affine, quadratic-penalty)");
  });
}

ProblemInstance build_custom(const json& comp, const ScheduleSet& s) {
  const Node n(comp, "problem.components");
  n.expect_object({"A", "D", "B", "C", "u0", "v0"});
  const Vec u0 = n.at("u0").vec();
  const Index dim = u0.size();
  const Vec v0 = n.at("v0").vec();
  ResolventOperator A = parse_operator(n.at("A"), dim);
  CocoerciveMap D = parse_map(n.at("D"), dim);
  CocoerciveMap B = parse_map(n.at("B"), dim);
  if (const auto c = n.opt("C")) {
    const ConstraintSet C = parse_set(*c, dim);
    if (!pairs_with(C, B)) {
      throw ConfigError(ErrorCode::kPairing,
                        "config: problem.components.C: " + C.name() + " is not zer of B (" + B.name() + ")");
    }
  }
  const double eta = A.eta();
  bool grid = false;
  if (const auto* sub = std::get_if<ResolventOperator::Subdifferential>(&A.kind())) {
    grid = std::holds_alternative<L1Norm>(sub->f.kind());
  }
  return guarded("problem.components", [&] {
    return ProblemInstance{"custom",
                           "inline components: A = " + A.name() + ", D = " + D.name() + ", B = " + B.name(),
                           SystemSpec(std::move(A), std::move(D), std::move(B), s, u0, v0),
                           grid ? OracleMethod::kGridRefinement : OracleMethod::kAffineKkt,
                           eta > 0.0,
                           eta,
                           std::nullopt};
  });
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

double parse_scalar(const std::string& text) {
  if (text == "sqrt2" || text == "sqrt(2)") return std::sqrt(2.0);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument, "not a finite number: '" + text + "'");
  }
  return v;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    std::ostringstream os;
    os << "config: parse error at line " << line << ", column " << col << ": " << e.what();
    throw ConfigError(ErrorCode::kParse, os.str());
  }
  const Node r(root, "");
  r.expect_object({"problem", "schedules", "integrator", "outputs", "verdict", "seed"});

  ExperimentConfig cfg{"", nullptr, std::nullopt, std::nullopt, default_schedules(), {}, {}, {}, 0};

  {
    const Node s = r.at("schedules");
    s.expect_object({"lambda", "beta", "gamma"});
    cfg.schedules.lambda = guarded("schedules.lambda", [&] { return parse_power(s.at("lambda")); });
    cfg.schedules.beta = guarded("schedules.beta", [&] { return parse_power(s.at("beta")); });
    cfg.schedules.gamma = guarded("schedules.gamma", [&] { return parse_damping(s.at("gamma")); });
  }

  {
    const Node p = r.at("problem");
    p.expect_object({"name", "components", "u0", "v0"});
    if (p.has("name") == p.has("components")) schema_error("problem", "give exactly one of name, components");
    if (p.has("name")) {
      cfg.problem_name = p.at("name").string();
      if (const auto u = p.opt("u0")) cfg.u0 = u->vec();
      if (const auto v = p.opt("v0")) cfg.v0 = v->vec();
    } else {
      if (p.has("u0") || p.has("v0")) schema_error("problem", "u0/v0 belong inside components");
      cfg.problem_name = "custom";
      cfg.components = p.at("components").raw();
    }
  }

  {
    const Node n = r.at("integrator");
    n.expect_object({"mode", "dt", "rel_tol", "abs_tol", "t_end", "sample_stride", "max_dt"});
    IntegratorConfig& ic = cfg.integrator;
    const std::string mode = n.at("mode").string();
    if (mode == "fixed") {
      ic.mode = StepMode::kFixed;
      if (n.has("rel_tol") || n.has("abs_tol")) schema_error("integrator", "rel_tol/abs_tol need mode adaptive");
    } else if (mode == "adaptive") {
      ic.mode = StepMode::kAdaptive;
    } else {
      schema_error("integrator.mode", "unknown mode \"" + mode + "\" (allowed: fixed, adaptive)");
    }
    ic.dt = n.at("dt").positive();
    ic.t_end = n.at("t_end").positive();
    if (const auto v = n.opt("rel_tol")) ic.rel_tol = v->positive();
    if (const auto v = n.opt("abs_tol")) ic.abs_tol = v->positive();
    if (const auto v = n.opt("max_dt")) ic.max_dt = v->positive();
    if (const auto v = n.opt("sample_stride")) {
      ic.sample_stride = v->count();
      if (ic.sample_stride < 1) schema_error("integrator.sample_stride", "must be >= 1");
    }
    guarded("integrator", [&] { validate(ic); });
  }

  if (const auto o = r.opt("outputs")) {
    o->expect_object({"directory", "formats"});
    if (const auto d = o->opt("directory")) cfg.outputs.directory = d->string();
    if (const auto f = o->opt("formats")) {
      if (!f->raw().is_array()) schema_error(f->path(), "expected an array of strings");
      cfg.outputs.formats.clear();
      for (std::size_t i = 0; i < f->raw().size(); ++i) {
        const std::string fmt = Node(f->raw()[i], f->path() + "[" + std::to_string(i) + "]").string();
        if (fmt != "csv" && fmt != "json" && fmt != "plotdata") {
          schema_error(f->path(), "unknown format \"" + fmt + "\" (allowed: csv, json, plotdata)");
        }
        cfg.outputs.formats.insert(fmt);
      }
    }
  }

  if (const auto v = r.opt("verdict")) {
    v->expect_object({"strong_tol", "ergodic_tol"});
    if (const auto s = v->opt("strong_tol")) cfg.verdict.strong_tol = s->positive();
    if (const auto e = v->opt("ergodic_tol")) cfg.verdict.ergodic_tol = e->positive();
  }

  if (const auto s = r.opt("seed")) cfg.seed = s->count();

  // resolve the problem now so bad names and bad components fail at parse time
  (void)build_instance(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ErrorCode::kParse, "config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ProblemInstance build_instance(const ExperimentConfig& cfg) {
  if (cfg.problem_name == "custom") return build_custom(cfg.components, cfg.schedules);
  ProblemInstance inst = guarded("problem.name", [&] { return find_instance(cfg.problem_name, cfg.schedules); });
  if (cfg.u0 || cfg.v0) {
    inst.spec = guarded("problem", [&] {
      return inst.spec.with_initial(cfg.u0.value_or(inst.spec.u0()), cfg.v0.value_or(inst.spec.v0()));
    });
    inst.known_limit.reset();
  }
  return inst;
}

void apply_override(ExperimentConfig& cfg, const std::string& param, double value) {
  ScheduleSet& s = cfg.schedules;
  auto power = [&](PowerSchedule& p, bool scale) {
    p = guarded(param, [&] { return scale ? PowerSchedule(value, p.exponent()) : PowerSchedule(p.c0(), value); });
  };
  if (param == "lambda.c0") {
    power(s.lambda, true);
  } else if (param == "lambda.p") {
    power(s.lambda, false);
  } else if (param == "beta.c0") {
    power(s.beta, true);
  } else if (param == "beta.p") {
    power(s.beta, false);
  } else if (param == "gamma.g0" || param == "gamma.floor" || param == "gamma.rate") {
    DampingSchedule& g = s.gamma;
    g = guarded(param, [&] {
      if (g.is_constant()) {
        if (param == "gamma.rate") schema_error(param, "constant damping has no rate");
        return DampingSchedule::constant(value);
      }
      if (param == "gamma.g0") return DampingSchedule::decay_to_floor(value, g.g_inf(), g.rate());
      if (param == "gamma.floor") return DampingSchedule::decay_to_floor(g.g0(), value, g.rate());
      return DampingSchedule::decay_to_floor(g.g0(), g.g_inf(), value);
    });
  } else if (param == "integrator.t_end") {
    cfg.integrator.t_end = value;
  } else if (param == "integrator.dt") {
    cfg.integrator.dt = value;
  } else if (param == "integrator.rel_tol") {
    cfg.integrator.rel_tol = value;
  } else if (param == "integrator.abs_tol") {
    cfg.integrator.abs_tol = value;
  } else {
    schema_error(param,
                 "unknown sweep parameter (allowed: lambda.c0, lambda.p, beta.c0, beta.p, gamma.g0, gamma.floor, "
                 "gamma.rate, integrator.t_end, integrator.dt, integrator.rel_tol, integrator.abs_tol)");
  }
  guarded("integrator", [&] { validate(cfg.integrator); });
}

nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
  using oj = nlohmann::ordered_json;
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  oj j;
  j["problem"]["name"] = cfg.problem_name;
  if (!cfg.components.is_null()) j["problem"]["components"] = oj::parse(cfg.components.dump());
  if (cfg.u0) j["problem"]["u0"] = vec(*cfg.u0);
  if (cfg.v0) j["problem"]["v0"] = vec(*cfg.v0);
  const ScheduleSet& s = cfg.schedules;
  j["schedules"]["lambda"] = {{"family", "power"}, {"c0", s.lambda.c0()}, {"p", s.lambda.exponent()}};
  j["schedules"]["beta"] = {{"family", "power"}, {"c0", s.beta.c0()}, {"p", s.beta.exponent()}};
  if (s.gamma.is_constant()) {
    j["schedules"]["gamma"] = {{"kind", "constant"}, {"g0", s.gamma.g0()}};
  } else {
    j["schedules"]["gamma"] = {
        {"kind", "decay-to-floor"}, {"g0", s.gamma.g0()}, {"g_inf", s.gamma.g_inf()}, {"rate", s.gamma.rate()}};
  }
  const IntegratorConfig& ic = cfg.integrator;
  j["integrator"] = {{"mode", ic.mode == StepMode::kFixed ? "fixed" : "adaptive"},
                     {"dt", ic.dt},
                     {"rel_tol", ic.rel_tol},
                     {"abs_tol", ic.abs_tol},
                     {"t_end", ic.t_end},
                     {"sample_stride", ic.sample_stride},
                     {"max_dt", ic.max_dt}};
  j["outputs"] = {{"directory", cfg.outputs.directory.string()},
                  {"formats", std::vector<std::string>(cfg.outputs.formats.begin(), cfg.outputs.formats.end())}};
  j["verdict"] = {{"strong_tol", cfg.verdict.strong_tol}, {"ergodic_tol", cfg.verdict.ergodic_tol}};
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace pendyn
