#include "cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "cli/scenario.hpp"
#include "cli/suites.hpp"

namespace mphs::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ScenarioError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::MissingIntensive:
    case ErrorKind::BranchAmbiguity:
    case ErrorKind::AlphabetMismatch:
    case ErrorKind::AlgebraicLoop:
      return kExitValidation;
    case ErrorKind::NotSkewSymmetric:
    case ErrorKind::PassivityViolation:
      return kExitInvariant;
    default:
      return kExitSolver;
  }
}

namespace {

struct Options {
  std::string command;
  std::string target;
  std::string out_dir;
  std::string format;
  std::optional<double> k;
  std::optional<std::uint64_t> budget;
  std::uint64_t seed = 1;
  std::size_t max_probabilities = 4096;
  bool quiet = false;
  bool error_json = false;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

unsigned threads_from_env() {
  const char* v = std::getenv("MAXENT_PHS_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024)
    throw Error(ErrorKind::InvalidArgument, "MAXENT_PHS_THREADS must be an integer in [1, 1024]");
  return static_cast<unsigned>(n);
}

Overrides overrides_of(const Options& o) {
  Overrides ov;
  ov.k = o.k;
  ov.budget = o.budget;
  ov.threads = threads_from_env();
  return ov;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw Error(ErrorKind::InvalidArgument, "failed writing '" + path.string() + "'");
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::InvalidArgument, "cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

Json labeled_json(const LabeledVector& v) {
  Json j = Json::object();
  for (std::size_t i = 0; i < v.size(); ++i) j[v.label(i)] = v.value(i);
  return j;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

// ---------------------------------------------------------------- entropy

struct EntropyReport {
  Json json;
  std::string csv;
  std::string csv_name;
  std::vector<std::string> summary;  // human-readable lines
};

std::string distribution_csv(const AccessibleSet& set, const Distribution& p, InfoConstant k) {
  std::ostringstream os;
  os << "index,microstate";
  for (const auto& f : set.functions()) os << "," << csv_field(f.label);
  os << ",probability,surprisal\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << i << "," << csv_field(set.microstate(i).to_string());
    for (std::size_t f = 0; f < set.functions().size(); ++f) os << "," << num(set.values(f)[i]);
    const double s = p.probability(i) > 0.0 ? -k.k() * p.log_probability(i) : INFINITY;
    os << "," << num(p.probability(i)) << "," << (std::isfinite(s) ? num(s) : std::string("inf")) << "\n";
  }
  return os.str();
}

EntropyReport entropy_ideal_gas(const Scenario& s) {
  const auto& m = *s.ideal_gas;
  std::vector<double> Ts = s.sweep_T;
  if (s.ensemble) Ts.push_back(*s.ensemble->intensives.T);
  if (s.free) Ts.push_back(s.free->at("energy") / (1.5 * m.N * m.k.k()));
  if (Ts.empty()) s.root().fail("the ideal gas needs sweep.T, ensemble.T or constraints.free.energy");

  EntropyReport r;
  r.csv_name = "ideal_gas.csv";
  std::ostringstream csv;
  csv << "T,E_bar,S,P\n";
  Json rows = Json::array();
  for (double T : Ts) {
    const auto st = ideal_gas_state(m, T);
    csv << num(T) << "," << num(st.E_bar) << "," << num(st.S) << "," << num(st.P) << "\n";
    Json row;
    row["T"] = T;
    row["E_bar"] = st.E_bar;
    row["S"] = st.S;
    row["P"] = st.P;
    row["log_partition"] = ideal_gas_log_partition(m, T);
    row["lambdas"] = {{"energy", -1.0 / T}};
    row["PV_over_NkT"] = st.P * m.V / (m.N * m.k.k() * T);
    rows.push_back(row);
    r.summary.push_back("T=" + short_num(T) + "  E=" + short_num(st.E_bar) + "  S=" + short_num(st.S) +
                        "  P=" + short_num(st.P));
  }
  r.csv = csv.str();
  r.json["system"] = "ideal_gas";
  r.json["k"] = m.k.k();
  r.json["N"] = m.N;
  r.json["V"] = m.V;
  r.json["states"] = rows;
  return r;
}

EntropyReport entropy_enumerated(const Scenario& s, const Options& o) {
  const auto& set = *s.set;
  EntropyReport r;
  r.csv_name = "distribution.csv";
  Json& j = r.json;
  j["omega"] = set.size();
  j["k"] = s.k.k();
  if (s.k.k() > 0.0) j["base"] = s.k.base();

  std::optional<Distribution> dist;
  if (s.free) {
    const auto sol = solve_multipliers(s.set, *s.free, s.k);
    j["mode"] = "free";
    j["targets"] = labeled_json(sol.targets);
    j["lambdas"] = labeled_json(sol.lambdas);
    j["log_partition"] = sol.log_partition;
    j["entropy"] = sol.entropy;
    j["residuals"] = labeled_json(sol.residuals);
    j["iterations"] = sol.iterations;
    IntensiveLabels labels;
    try {
      Json in = Json::object();
      for (const auto& [name, value] : intensive_quantities(sol, labels)) in[name] = value;
      j["intensives"] = in;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedTemperature) throw;
      j["intensives"] = nullptr;
    }
    dist = sol.distribution;
  } else if (s.ensemble) {
    const auto& e = *s.ensemble;
    dist = ensemble_distribution(set, e.kind, e.intensives, s.k, e.labels);
    const auto lambdas = ensemble_multipliers(e.kind, e.intensives, e.labels);
    j["mode"] = "ensemble";
    j["ensemble"] = std::string(e.kind.name());
    j["lambdas"] = labeled_json(lambdas);
    j["log_partition"] = log_partition(set, lambdas, s.k);
    j["entropy"] = statistical_entropy(*dist, s.k);
    Json in = Json::object();
    if (e.intensives.T) in["T"] = *e.intensives.T;
    if (e.intensives.P) in["P"] = *e.intensives.P;
    if (e.intensives.mu) in["mu"] = *e.intensives.mu;
    j["intensives"] = in;
  } else if (s.probabilities) {
    dist = Distribution::from_probabilities(*s.probabilities);
    j["mode"] = "distribution";
    j["entropy"] = statistical_entropy(*dist, s.k);
  } else {
    dist = Distribution::uniform(set.size());
    j["mode"] = "uniform";
    j["lambdas"] = Json::object();
    j["log_partition"] = microcanonical_entropy(set.size(), s.k);
    j["entropy"] = microcanonical_entropy(set.size(), s.k);
  }

  Json expectations = Json::object();
  for (std::size_t f = 0; f < set.functions().size(); ++f)
    expectations[set.functions()[f].label] = dist->expectation(set.values(f));
  j["expectations"] = expectations;
  if (set.size() <= o.max_probabilities) {
    Json probs = Json::array();
    for (std::size_t i = 0; i < set.size(); ++i) probs.push_back(dist->probability(i));
    j["probabilities"] = probs;
  }
  r.csv = distribution_csv(set, *dist, s.k);

  r.summary.push_back("omega = " + std::to_string(set.size()));
  r.summary.push_back("entropy = " + short_num(j["entropy"].get<double>()) + " (k = " + short_num(s.k.k()) + ")");
  if (j.contains("log_partition")) r.summary.push_back("k ln Z = " + short_num(j["log_partition"].get<double>()));
  if (j.contains("lambdas"))
    for (auto it = j["lambdas"].begin(); it != j["lambdas"].end(); ++it)
      r.summary.push_back("lambda[" + it.key() + "] = " + short_num(it.value().get<double>()));
  if (j.contains("intensives") && j["intensives"].is_object())
    for (auto it = j["intensives"].begin(); it != j["intensives"].end(); ++it)
      r.summary.push_back(it.key() + " = " + short_num(it.value().get<double>()));
  return r;
}

int cmd_entropy(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario s = load_scenario(o.target, overrides_of(o));
  Options opts = o;
  if (auto output = s.root().find("output")) {
    if (auto mp = output->find("max_probabilities")) opts.max_probabilities = mp->count();
    if (auto f = output->find("format"); f && opts.format.empty()) opts.format = f->string();
  }
  if (opts.format.empty()) opts.format = "json";
  if (opts.format != "json" && opts.format != "csv") throw Error(ErrorKind::ScenarioError, "unknown output format");

  if (!s.set && !s.ideal_gas) s.root().at("system");
  const EntropyReport r = s.ideal_gas ? entropy_ideal_gas(s) : entropy_enumerated(s, opts);
  const std::string json = r.json.dump(2) + "\n";
  if (!opts.out_dir.empty()) {
    const auto dir = prepare_out_dir(opts.out_dir);
    write_file(dir / "entropy.json", json);
    write_file(dir / r.csv_name, r.csv);
  } else {
    out << (opts.format == "json" ? json : r.csv);
  }
  if (!opts.quiet)
    for (const auto& line : r.summary) err << line << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- simulate

struct Check {
  std::string name;
  double value;
  double tolerance;
  bool passed;
};

Json checks_json(const std::vector<Check>& checks) {
  Json a = Json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"passed", c.passed}});
  return a;
}

Json ledger_json(const TrajectoryLedger& l) {
  Json rows = Json::array();
  for (const auto& row : l.rows) {
    Json r;
    r["time"] = row.time;
    Json state = Json::object(), efforts = Json::object();
    for (std::size_t i = 0; i < l.state_labels.size(); ++i) {
      state[l.state_labels[i]] = row.state(static_cast<Eigen::Index>(i));
      efforts[l.state_labels[i]] = row.efforts(static_cast<Eigen::Index>(i));
    }
    r["state"] = state;
    r["efforts"] = efforts;
    r["energy"] = row.energy;
    r["P_s"] = row.P_s;
    r["P_d"] = row.P_d;
    r["P_ext"] = row.P_ext;
    r["sigma_i"] = row.sigma_i;
    r["sigma_ext"] = row.sigma_ext;
    r["balance_defect"] = row.balance_defect;
    rows.push_back(r);
  }
  return {{"state_labels", l.state_labels}, {"rows", rows}};
}

std::string ledger_text(const TrajectoryLedger& l, const std::string& format) {
  if (format == "json") return ledger_json(l).dump(2) + "\n";
  std::ostringstream os;
  l.write_csv(os);
  return os.str();
}

// max |T V^(2/3) / (T0 V0^(2/3)) - 1| over the ledger
double adiabat_deviation(const TrajectoryLedger& l) {
  Eigen::Index v = -1;
  for (std::size_t i = 0; i < l.state_labels.size(); ++i)
    if (l.state_labels[i] == "volume") v = static_cast<Eigen::Index>(i);
  auto invariant = [&](const LedgerRow& r) { return r.efforts(0) * std::pow(r.state(v), 2.0 / 3.0); };
  const double ref = invariant(l.rows.front());
  double worst = 0.0;
  for (const auto& r : l.rows) worst = std::max(worst, std::abs(invariant(r) / ref - 1.0));
  return worst;
}

int simulate_single(const Scenario& s, const SimulationSetup& setup, const Options& o, const std::string& format,
                    std::ostream& out, std::ostream& err) {
  const TrajectoryLedger l = run(*setup.model, setup.signal, setup.x0, setup.t_end, setup.dt);

  std::vector<Check> checks;
  const double power = l.max_relative_power_defect();
  checks.push_back({"power_balance", power, setup.power_tolerance, power <= setup.power_tolerance});
  const double E0 = l.rows.front().energy, E1 = l.rows.back().energy;
  const double scale = std::max({std::abs(E0), std::abs(E1), std::abs(l.stored_work), 1e-300});
  const double energy = l.energy_balance_defect() / scale;
  checks.push_back({"energy_balance", energy, setup.energy_tolerance, energy <= setup.energy_tolerance});
  if (setup.irreversible) {
    const double m = l.min_sigma_i();
    checks.push_back({"entropy_production_nonnegative", m, -1e-14, m >= -1e-14});
  }
  const auto& labels = l.state_labels;
  const bool volume_only = setup.driven_ports.size() == 1 && setup.driven_ports.front() == "ext:volume";
  if (s.ideal_gas && !setup.irreversible && volume_only &&
      std::find(labels.begin(), labels.end(), "volume") != labels.end() && labels.size() >= 2 &&
      setup.model->structure().converter == std::nullopt && !setup.model->structure().plain_law) {
    const double dev = adiabat_deviation(l);
    checks.push_back({"adiabat_TV^(2/3)", dev, 1e-4, dev <= 1e-4});
  }

  Json summary;
  summary["kind"] = "trajectory";
  summary["dt"] = setup.dt;
  summary["t_end"] = setup.t_end;
  summary["steps"] = l.rows.size() - 1;
  summary["initial_energy"] = E0;
  summary["final_energy"] = E1;
  summary["stored_work"] = l.stored_work;
  summary["energy_balance_defect"] = l.energy_balance_defect();
  summary["max_relative_power_defect"] = power;
  summary["entropy_production"] = l.entropy_production;
  summary["entropy_outflow"] = l.entropy_outflow;
  summary["min_sigma_i"] = l.min_sigma_i();
  summary["halvings"] = l.halvings;
  summary["checks"] = checks_json(checks);

  const std::string ext = format == "json" ? "json" : "csv";
  if (!o.out_dir.empty()) {
    const auto dir = prepare_out_dir(o.out_dir);
    write_file(dir / ("ledger." + ext), ledger_text(l, format));
    write_file(dir / "summary.json", summary.dump(2) + "\n");
  } else {
    out << ledger_text(l, format);
  }
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    if (!o.quiet || !c.passed)
      err << (c.passed ? "PASS " : "FAIL ") << c.name << " = " << short_num(c.value) << " (tolerance "
          << short_num(c.tolerance) << ")\n";
  }
  return ok ? kExitOk : kExitInvariant;
}

int simulate_coupled(const SimulationSetup& setup, const Options& o, const std::string& format, std::ostream& out,
                     std::ostream& err) {
  const CoupledResult r =
      couple_and_equilibrate(*setup.model, setup.x0, *setup.partner, setup.x0_partner, setup.conductance, setup.t_end, setup.dt);

  std::vector<Check> checks;
  checks.push_back({"energy_drift", r.energy_drift, setup.drift_tolerance, r.energy_drift <= setup.drift_tolerance});
  checks.push_back({"heat_flows_hot_to_cold", r.min_flow_gap_product, 0.0, r.min_flow_gap_product >= 0.0});
  checks.push_back({"total_entropy_nondecreasing", r.entropy_nondecreasing ? 0.0 : 1.0, 0.0, r.entropy_nondecreasing});
  const double Tmax = std::max(r.a.rows.back().efforts(0), r.b.rows.back().efforts(0));
  const double gap = r.final_gap / Tmax;
  checks.push_back({"final_temperature_gap", gap, setup.gap_tolerance, gap <= setup.gap_tolerance});

  std::ostringstream csv;
  csv << "time,T_A,T_B,S_A,S_B,heat_flow,energy_total,entropy_total\n";
  for (std::size_t i = 0; i < r.a.rows.size(); ++i) {
    const auto& a = r.a.rows[i];
    const auto& b = r.b.rows[i];
    csv << num(a.time) << "," << num(a.efforts(0)) << "," << num(b.efforts(0)) << "," << num(a.state(0)) << ","
        << num(b.state(0)) << "," << num(r.heat_flow[i]) << "," << num(a.energy + b.energy) << ","
        << num(a.state(0) + b.state(0)) << "\n";
  }

  Json summary;
  summary["kind"] = "coupling";
  summary["dt"] = setup.dt;
  summary["t_end"] = setup.t_end;
  summary["conductance"] = setup.conductance;
  summary["steps"] = r.a.rows.size() - 1;
  summary["initial_energy"] = r.initial_energy;
  summary["final_energy"] = r.final_energy;
  summary["energy_drift"] = r.energy_drift;
  summary["final_T_A"] = r.a.rows.back().efforts(0);
  summary["final_T_B"] = r.b.rows.back().efforts(0);
  summary["final_gap"] = r.final_gap;
  summary["equilibrated"] = r.equilibrated;
  summary["checks"] = checks_json(checks);

  Json combined;
  if (format == "json") combined = {{"a", ledger_json(r.a)}, {"b", ledger_json(r.b)}, {"heat_flow", r.heat_flow}};
  if (!o.out_dir.empty()) {
    const auto dir = prepare_out_dir(o.out_dir);
    if (format == "json") {
      write_file(dir / "ledger.json", combined.dump(2) + "\n");
    } else {
      write_file(dir / "ledger.csv", csv.str());
      write_file(dir / "ledger_a.csv", ledger_text(r.a, "csv"));
      write_file(dir / "ledger_b.csv", ledger_text(r.b, "csv"));
    }
    write_file(dir / "summary.json", summary.dump(2) + "\n");
  } else {
    out << (format == "json" ? combined.dump(2) + "\n" : csv.str());
  }
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    if (!o.quiet || !c.passed)
      err << (c.passed ? "PASS " : "FAIL ") << c.name << " = " << short_num(c.value) << " (tolerance "
          << short_num(c.tolerance) << ")\n";
  }
  return ok ? kExitOk : kExitInvariant;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const Scenario s = load_scenario(o.target, overrides_of(o));
  std::string format = o.format;
  if (auto output = s.root().find("output"))
    if (auto f = output->find("format"); f && format.empty()) format = f->string();
  if (format.empty()) format = "csv";
  if (format != "json" && format != "csv") throw Error(ErrorKind::ScenarioError, "unknown output format");
  const SimulationSetup setup = simulation_setup(s);
  return setup.partner ? simulate_coupled(setup, o, format, out, err) : simulate_single(s, setup, o, format, out, err);
}

// ----------------------------------------------------------------- verify

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<CheckResult> results;
  std::error_code ec;
  if (is_builtin_suite(o.target) && !fs::is_regular_file(o.target, ec)) {
    const std::vector<std::string> names = o.target == "all" ? builtin_suites() : std::vector<std::string>{o.target};
    for (const auto& name : names) results.push_back(run_builtin(name, o.seed));
  } else {
    results = run_scenario_suites(load_scenario(o.target, overrides_of(o)));
  }

  bool ok = true;
  Json report = Json::array();
  std::ostringstream text;
  for (const auto& r : results) {
    ok = ok && r.passed;
    report.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"instances", r.instances},
                      {"max_deviation", r.max_deviation},
                      {"tolerance", r.tolerance},
                      {"detail", r.detail}});
    text << (r.passed ? "PASS " : "FAIL ") << r.name << "  instances=" << r.instances
         << "  max_deviation=" << short_num(r.max_deviation) << "  tolerance=" << short_num(r.tolerance) << "\n";
    if (!o.quiet || !r.passed) text << "    " << r.detail << "\n";
  }
  const std::string json = report.dump(2) + "\n";
  if (!o.out_dir.empty()) write_file(prepare_out_dir(o.out_dir) / "verify.json", json);
  out << (o.format == "json" ? json : text.str());
  if (!ok) err << "verification failed\n";
  return ok ? kExitOk : kExitInvariant;
}

void report_error(const Options& o, std::ostream& err, const std::string& kind, const std::string& message, int code) {
  if (o.error_json) {
    const std::string prefix = kind + ": ";
    const std::string plain = message.rfind(prefix, 0) == 0 ? message.substr(prefix.size()) : message;
    Json j{{"error", {{"kind", kind}, {"message", plain}, {"exit_code", code}}}};
    err << j.dump() << "\n";
  } else {
    err << "error: " << message << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Maximum-entropy thermodynamics and port-Hamiltonian simulation", "maxent-phs"};
  app.require_subcommand(1, 1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", o.target, "Scenario file (JSON, version 1)")->required();
    sub->add_option("--out", o.out_dir, "Write results into this directory");
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--k", o.k, "Override the entropy constant k");
    sub->add_option("--budget", o.budget, "Maximum number of enumerated words");
    sub->add_flag("--quiet", o.quiet, "Only report failures on stderr");
    sub->add_flag("--error-json", o.error_json, "Report errors as JSON on stderr");
  };
  auto* entropy = app.add_subcommand("entropy", "Solve for the equilibrium distribution and report it");
  add_common(entropy);
  entropy->add_option("--max-probabilities", o.max_probabilities, "Include p* in the JSON report up to this size");
  auto* simulate = app.add_subcommand("simulate", "Integrate a port-Hamiltonian scenario and write its ledger");
  add_common(simulate);
  auto* verify = app.add_subcommand("verify", "Run a builtin suite (legendre, gradient, skew, maximality, "
                                              "ideal-gas-law, all) or the checks of a scenario");
  add_common(verify);
  verify->add_option("--seed", o.seed, "Seed of the randomized builtin suites");

  // --error-json must take effect even when parsing fails
  for (int i = 1; i < argc; ++i) o.error_json = o.error_json || std::string(argv[i]) == "--error-json";

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(o, err, "UsageError", e.what(), kExitValidation);
    return kExitValidation;
  }

  try {
    if (entropy->parsed()) return cmd_entropy(o, out, err);
    if (simulate->parsed()) return cmd_simulate(o, out, err);
    return cmd_verify(o, out, err);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(o, err, to_string(e.kind()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(o, err, "InternalError", e.what(), kExitSolver);
    return kExitSolver;
  }
}

}  // namespace mphs::cli
