#include <pendyn/app.hpp>

#include <pendyn/csv.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace pendyn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::size_t kPropertySamples = 1000;

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

std::string vec_text(const Vec& v) {
  std::ostringstream os;
  os << std::setprecision(10) << '(';
  for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

std::optional<std::size_t> column_index(const TrajectoryRecord& r, const std::string& name) {
  const auto it = std::find(r.extra_columns.begin(), r.extra_columns.end(), name);
  if (it == r.extra_columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - r.extra_columns.begin());
}

void write_json(const fs::path& path, const ojson& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

void write_trajectory(const TrajectoryRecord& rec, const fs::path& path) {
  std::vector<std::string> header = {"t"};
  for (Index i = 0; i < rec.dim; ++i) header.push_back("x_" + std::to_string(i));
  for (Index i = 0; i < rec.dim; ++i) header.push_back("v_" + std::to_string(i));
  header.insert(header.end(), rec.extra_columns.begin(), rec.extra_columns.end());
  TableWriter w(path, header);
  std::vector<double> row;
  for (const auto& s : rec.samples) {
    row.clear();
    row.push_back(s.t);
    row.insert(row.end(), s.x.data(), s.x.data() + s.x.size());
    row.insert(row.end(), s.v.data(), s.v.data() + s.v.size());
    row.insert(row.end(), s.extra.begin(), s.extra.end());
    w.row(row);
  }
}

ojson oracle_json(const OracleResult& o) {
  ojson j;
  j["method"] = to_string(o.method);
  j["x_star"] = to_std(o.anchor.x_star);
  j["v"] = to_std(o.anchor.v);
  j["p"] = to_std(o.anchor.p);
  j["w"] = to_std(o.anchor.w);
  j["unique"] = o.unique;
  if (o.method == OracleMethod::kGridRefinement) {
    j["levels"] = o.levels;
    j["level_gap"] = o.level_gap;
  }
  j["notes"] = o.notes;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// validate

bool ValidationResult::pass() const {
  if (!hypotheses.all_pass() || !oracle_error.empty()) return false;
  if (anchor_check && !anchor_check->pass()) return false;
  return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.second.pass; });
}

ValidationResult validate_experiment(const ExperimentConfig& cfg) {
  const ProblemInstance inst = build_instance(cfg);
  ValidationResult v;
  v.problem = inst.name;
  v.hypotheses = inst.spec.hypotheses();
  try {
    v.oracle = kkt_oracle(inst);
    v.anchor_check = verify_anchor(inst.spec, v.oracle->anchor, 1e-8);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnsupported) {
      v.oracle_skipped = e.what();
    } else {
      v.oracle_error = e.what();
    }
  }
  const double lam0 = inst.spec.schedules().lambda.value(0.0);
  v.properties.emplace_back("A firmly nonexpansive resolvent (lambda(0))",
                            check_firm_nonexpansiveness(inst.spec.A(), lam0, kPropertySamples, cfg.seed));
  v.properties.emplace_back("D cocoercive", check_cocoercivity(inst.spec.D(), kPropertySamples, cfg.seed + 1));
  v.properties.emplace_back("B cocoercive", check_cocoercivity(inst.spec.B(), kPropertySamples, cfg.seed + 2));
  return v;
}

std::string to_text(const ValidationResult& v) {
  std::ostringstream os;
  os << "problem: " << v.problem << "\n";
  os << to_text(v.hypotheses);
  os << "oracle\n";
  if (v.oracle) {
    const AnchorCheck& c = *v.anchor_check;
    auto mark = [](bool b) { return b ? "PASS" : "FAIL"; };
    os << "  " << to_string(v.oracle->method) << ": x* = " << vec_text(v.oracle->anchor.x_star)
       << (v.oracle->unique ? "" : "  [non-unique]") << "\n";
    os << "  " << mark(c.in_constraint) << "  x* in C\n";
    os << "  " << mark(c.v_in_A) << "  v in A(x*)\n";
    os << "  " << mark(c.p_in_normal_cone) << "  p in N_C(x*)\n";
    os << "  " << mark(c.decomposition_residual <= 1e-8) << "  |v + D(x*) + p| = " << c.decomposition_residual
       << "\n";
  } else if (!v.oracle_error.empty()) {
    os << "  FAIL  " << v.oracle_error << "\n";
  } else {
    os << "  SKIP  " << v.oracle_skipped << "\n";
  }
  os << "operator properties (" << kPropertySamples << " samples)\n";
  for (const auto& [name, rep] : v.properties) {
    os << "  " << (rep.pass ? "PASS" : "FAIL") << "  " << name << " (max violation " << rep.max_violation << ")\n";
  }
  os << "result: " << (v.pass() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

ojson to_json(const ValidationResult& v) {
  ojson j;
  j["problem"] = v.problem;
  j["hypotheses"] = to_json(v.hypotheses);
  if (v.oracle) {
    j["oracle"] = oracle_json(*v.oracle);
    j["oracle"]["certificate_pass"] = v.anchor_check->pass();
    j["oracle"]["decomposition_residual"] = v.anchor_check->decomposition_residual;
  } else {
    j["oracle"] = {{"error", v.oracle_error}, {"skipped", v.oracle_skipped}};
  }
  for (const auto& [name, rep] : v.properties) {
    j["properties"].push_back({{"name", name}, {"max_violation", rep.max_violation}, {"pass", rep.pass}});
  }
  j["pass"] = v.pass();
  return j;
}

int cmd_validate(const ExperimentConfig& cfg, std::ostream& out) {
  const ValidationResult v = validate_experiment(cfg);
  out << to_text(v);
  return v.pass() ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------
// run

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult r{build_instance(cfg), std::nullopt, {}, {}, {}, std::nullopt, std::nullopt, {}, {}};
  const SystemSpec& spec = r.instance.spec;
  try {
    r.oracle = kkt_oracle(r.instance);
  } catch (const Error& e) {
    r.notes.push_back(std::string("no anchor: ") + e.what());
  }

  std::optional<Vec> x_star;
  if (r.oracle) x_star = r.oracle->anchor.x_star;
  RunningIntegrals integrals(spec.dim(), x_star);
  StepSink* sinks[] = {&integrals};
  r.record = integrate(spec, cfg.integrator, sinks);
  r.constants = lemma_constants(constants_lipschitz_b(spec));
  if (spec.B().is_zero()) r.notes.emplace_back("B = 0: lemma constants use L_B = 1");

  if (!r.oracle) return r;
  const AnchorPoint& anchor = r.oracle->anchor;
  auto attempt = [&](const char* what, auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      r.notes.push_back(std::string(what) + " skipped: " + e.what());
    }
  };
  attempt("lyapunov samples", [&] { r.lyapunov = lyapunov_samples(spec, anchor, r.record, r.constants); });
  for (const LemmaInequality m :
       {LemmaInequality::kBase, LemmaInequality::kEpsilon, LemmaInequality::kAfterT0, LemmaInequality::kAfterT1}) {
    attempt(to_string(m), [&] { r.monitors.push_back(lemma_monitor(spec, anchor, r.constants, r.record, m)); });
  }
  attempt("energy check", [&] { r.energy = energy_bound_check(spec, anchor, r.constants, r.record); });
  attempt("convergence report", [&] { r.report = convergence_report(spec, anchor, r.record, cfg.verdict); });
  return r;
}

ojson diagnostics_json(const ExperimentConfig& cfg, const RunResult& r) {
  ojson j;
  j["problem"] = r.instance.name;
  j["description"] = r.instance.description;
  j["config"] = to_json(cfg);
  j["supported_regime"] = r.instance.spec.supported_regime();
  j["hypotheses"] = to_json(r.instance.spec.hypotheses());
  j["oracle"] = r.oracle ? oracle_json(*r.oracle) : ojson(nullptr);
  const IntegrationStats& st = r.record.stats;
  j["integration"] = {{"accepted", st.accepted},
                      {"rejected", st.rejected},
                      {"rhs_evaluations", st.rhs_evaluations},
                      {"smallest_step", st.smallest_step},
                      {"largest_step", st.largest_step},
                      {"samples", r.record.samples.size()},
                      {"warnings", r.record.warnings}};
  const Sample& last = r.record.final_sample();
  j["final_state"] = {{"t", last.t}, {"x", to_std(last.x)}, {"v", to_std(last.v)}};
  j["lemma_constants"] = to_json(r.constants);
  j["monitors"] = ojson::array();
  for (const auto& m : r.monitors) j["monitors"].push_back(to_json(m));
  j["energy_check"] = r.energy ? to_json(*r.energy) : ojson(nullptr);
  j["convergence"] = r.report ? to_json(*r.report) : ojson(nullptr);
  j["notes"] = r.notes;
  return j;
}

void write_artifacts(const ExperimentConfig& cfg, const RunResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& formats = cfg.outputs.formats;
  const TrajectoryRecord& rec = r.record;
  const std::optional<Vec> x_star = r.oracle ? std::optional<Vec>(r.oracle->anchor.x_star) : std::nullopt;

  if (formats.count("csv")) {
    write_trajectory(rec, dir / "trajectory.csv");

    TableWriter mon(dir / "monitors.csv", {"mode", "t", "lhs", "rhs", "violation"});
    for (const auto& m : r.monitors) {
      for (const auto& p : m.points) {
        mon.text_row({to_string(m.which), format_double(p.t), format_double(p.lhs), format_double(p.rhs),
                      format_double(p.violation)});
      }
    }

    std::vector<std::string> header = {"t"};
    std::vector<std::size_t> idx;
    for (Index i = 0; i < rec.dim; ++i) {
      header.push_back("xbar_" + std::to_string(i));
      idx.push_back(*column_index(rec, "xbar_" + std::to_string(i)));
    }
    if (x_star) header.emplace_back("distance");
    TableWriter erg(dir / "ergodic.csv", header);
    std::vector<double> row;
    Vec xb(rec.dim);
    for (const auto& s : rec.samples) {
      row.assign(1, s.t);
      for (Index i = 0; i < rec.dim; ++i) xb[i] = s.extra[idx[static_cast<std::size_t>(i)]];
      row.insert(row.end(), xb.data(), xb.data() + xb.size());
      if (x_star) row.push_back((xb - *x_star).norm());
      erg.row(row);
    }
  }

  if (formats.count("json")) {
    write_json(dir / "diagnostics.json", diagnostics_json(cfg, r));
    write_json(dir / "hypotheses.json", to_json(r.instance.spec.hypotheses()));
  }

  if (formats.count("plotdata")) {
    fs::create_directories(dir / "plotdata");
    const SystemSpec& spec = r.instance.spec;
    {
      TableWriter w(dir / "plotdata" / "residual.tsv", {"t", "residual"}, '\t');
      for (const auto& s : rec.samples) w.row({s.t, stationarity_residual(spec, s.t, s.x)});
    }
    if (x_star) {
      TableWriter d(dir / "plotdata" / "distance.tsv", {"t", "distance"}, '\t');
      for (const auto& s : rec.samples) d.row({s.t, (s.x - *x_star).norm()});
    }
    if (!r.lyapunov.empty()) {
      TableWriter e(dir / "plotdata" / "energy.tsv", {"t", "energy"}, '\t');
      for (const auto& l : r.lyapunov) e.row({l.t, l.energy});
    }
  }
}

int cmd_run(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  const fs::path dir = opts.out.value_or(cfg.outputs.directory);
  {
    const ProblemInstance inst = build_instance(cfg);
    if (!inst.spec.supported_regime()) {
      if (!opts.force) {
        err << "hypotheses failed; refusing to run without --force\n" << to_text(inst.spec.hypotheses());
        return kExitValidation;
      }
      err << "warning: running an unsupported regime (--force); verdicts are suppressed\n";
    }
  }
  try {
    const RunResult r = run_experiment(cfg);
    write_artifacts(cfg, r, dir);
    out << "problem: " << r.instance.name << "\n";
    out << "samples: " << r.record.samples.size() << ", accepted steps: " << r.record.stats.accepted
        << ", rejected: " << r.record.stats.rejected << "\n";
    for (const auto& w : r.record.warnings) out << "warning: " << w << "\n";
    if (r.report) {
      out << "verdict: " << r.report->verdict << "\n";
      out << "final distance: " << r.report->final_distance << ", final |xdot|: " << r.report->final_velocity_norm
          << "\n";
    }
    for (const auto& n : r.notes) out << "note: " << n << "\n";
    out << "artifacts: " << dir.string() << "\n";
    return kExitOk;
  } catch (const IntegrationError& e) {
    err << "integration failed (" << to_string(e.code()) << "): " << e.what() << "\n";
    try {
      fs::create_directories(dir);
      if (!e.partial().samples.empty()) write_trajectory(e.partial(), dir / "trajectory.csv");
      ojson j;
      j["error"] = {{"code", to_string(e.code())}, {"message", e.what()}, {"last_good_t", e.last_good().t}};
      j["config"] = to_json(cfg);
      write_json(dir / "diagnostics.json", j);
      err << "partial artifacts: " << dir.string() << "\n";
    } catch (const std::exception& w) {
      err << "could not write partial artifacts: " << w.what() << "\n";
    }
    return kExitRuntime;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---------------------------------------------------------------------------
// sweep

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const SweepSpec& spec, bool force,
                                const fs::path& out_dir) {
  if (spec.values.empty()) throw ConfigError(ErrorCode::kInvalidArgument, "sweep: empty value list");
  if (spec.metric != "final_distance" && spec.metric != "final_velocity" && spec.metric != "ergodic_distance") {
    throw ConfigError(ErrorCode::kInvalidArgument,
                      "sweep: unknown metric '" + spec.metric +
                          "' (allowed: final_distance, final_velocity, ergodic_distance)");
  }
  // every override is checked before anything runs
  std::vector<ExperimentConfig> cfgs;
  for (double v : spec.values) {
    ExperimentConfig c = cfg;
    apply_override(c, spec.param, v);
    cfgs.push_back(std::move(c));
  }

  std::vector<SweepRow> rows(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      SweepRow& row = rows[i];
      row.index = i;
      row.value = spec.values[i];
      try {
        const ProblemInstance inst = build_instance(cfgs[i]);
        if (!inst.spec.supported_regime() && !force) {
          row.status = "hypothesis-failed";
          std::string f;
          for (const auto& n : inst.spec.hypotheses().failures()) f += (f.empty() ? "" : ", ") + n;
          row.message = "failed: " + f;
          continue;
        }
        char name[32];
        std::snprintf(name, sizeof name, "run-%03zu", i);
        const RunResult r = run_experiment(cfgs[i]);
        write_artifacts(cfgs[i], r, out_dir / name);
        row.status = "ok";
        if (r.report) {
          row.verdict = r.report->verdict;
          if (spec.metric == "final_distance") row.metric = r.report->final_distance;
          if (spec.metric == "final_velocity") row.metric = r.report->final_velocity_norm;
          if (spec.metric == "ergodic_distance") row.metric = r.report->ergodic_distance;
        } else {
          if (spec.metric == "final_velocity") row.metric = r.record.final_sample().v.norm();
          row.message = "no convergence report (no anchor)";
        }
      } catch (const std::exception& e) {
        row.status = "runtime-error";
        row.message = e.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(spec.jobs, static_cast<unsigned>(cfgs.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

int cmd_sweep(const ExperimentConfig& cfg, const SweepSpec& spec, const RunOptions& opts, std::ostream& out,
              std::ostream& err) {
  const fs::path dir = opts.out.value_or(cfg.outputs.directory);
  fs::create_directories(dir);
  const auto rows = run_sweep(cfg, spec, opts.force, dir);

  {
    TableWriter w(dir / "summary.csv", {"index", spec.param, "status", spec.metric, "verdict", "message"});
    for (const auto& r : rows) {
      w.text_row({std::to_string(r.index), format_double(r.value), r.status,
                  r.metric ? format_double(*r.metric) : std::string(), r.verdict, r.message});
    }
  }

  std::vector<std::vector<std::string>> table = {{"#", spec.param, "status", spec.metric, "verdict", "message"}};
  for (const auto& r : rows) {
    std::ostringstream v, m;
    v << std::setprecision(6) << r.value;
    if (r.metric) m << std::setprecision(6) << *r.metric;
    table.push_back({std::to_string(r.index), v.str(), r.status, m.str(), r.verdict, r.message});
  }
  std::vector<std::size_t> width(table[0].size(), 0);
  for (const auto& line : table)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  for (const auto& line : table) {
    std::string s;
    for (std::size_t c = 0; c < line.size(); ++c) {
      s += line[c];
      if (c + 1 < line.size()) s += std::string(width[c] - line[c].size() + 2, ' ');
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out << s << "\n";
  }
  out << "summary: " << (dir / "summary.csv").string() << "\n";

  bool runtime = false, hyp = false;
  for (const auto& r : rows) {
    runtime = runtime || r.status == "runtime-error";
    hyp = hyp || r.status == "hypothesis-failed";
  }
  if (runtime) {
    err << "some runs failed at runtime\n";
    return kExitRuntime;
  }
  return hyp ? kExitValidation : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gallery(std::ostream& out) {
  for (const auto& inst : gallery()) {
    out << inst.name << "\n  " << inst.description << "\n  dim " << inst.spec.dim() << ", A = " << inst.spec.A().name()
        << ", D = " << inst.spec.D().name() << ", B = " << inst.spec.B().name();
    if (inst.strongly_monotone) out << ", A strongly monotone (eta = " << inst.modulus << ")";
    out << "\n";
    try {
      const OracleResult o = kkt_oracle(inst);
      out << "  oracle " << to_string(o.method) << ": x* = " << vec_text(o.anchor.x_star)
          << (o.unique ? "" : " [non-unique]") << "\n";
    } catch (const Error& e) {
      out << "  oracle unavailable: " << e.what() << "\n";
    }
  }
  return kExitOk;
}

}  // namespace pendyn
