// Command-line front end: validate description files, run defect sweeps and
// invariant checks, execute the builders and schedulers, emit summaries and
// CSV reports.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpcstar/io.hpp"
#include "cpcstar/limit.hpp"

namespace {

using namespace cpcstar;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitIo = 3;

struct Options {
  std::string command;
  std::string input;
  std::string output;
  std::uint64_t seed = 1;
  int k = 0;
  int horizon = -1;
  std::string grid;
  std::string probes = "units";
  std::vector<std::string> tol_overrides;
  std::vector<double> epsilons;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_output(const Options& opt, const std::string& text) {
  if (opt.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(opt.output, std::ios::binary);
  if (!out) throw ParseError("cannot open output file: " + opt.output);
  out << text;
}

Tolerances parse_tolerances(const std::vector<std::string>& overrides) {
  Tolerances tol;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ParseError("--tol expects KEY=VALUE, got \"" + kv + "\"");
    const std::string key = kv.substr(0, eq);
    const double value = std::stod(kv.substr(eq + 1));
    if (key == "herm")
      tol.herm_tol = value;
    else if (key == "psd")
      tol.psd_tol = value;
    else if (key == "eq")
      tol.eq_tol = value;
    else
      throw ParseError("--tol key must be herm, psd or eq, got \"" + key +
                       "\"");
  }
  tol.validate();
  return tol;
}

// "m0:m1,n0:n1,l0:l1" (inclusive windows)
IndexGrid parse_grid(const std::string& text, int last) {
  IndexGrid grid{2, last, 1, last - 1, 1, last - 1};
  if (text.empty()) return grid;
  std::istringstream is(text);
  std::string part;
  int field = 0;
  while (std::getline(is, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw ParseError("--grid expects m0:m1,n0:n1,l0:l1");
    const int lo = std::stoi(part.substr(0, colon));
    const int hi = std::stoi(part.substr(colon + 1));
    if (field == 0) {
      grid.m_lo = lo;
      grid.m_hi = hi;
    } else if (field == 1) {
      grid.n_lo = lo;
      grid.n_hi = hi;
    } else if (field == 2) {
      grid.l_lo = lo;
      grid.l_hi = hi;
    } else {
      throw ParseError("--grid has too many fields");
    }
    ++field;
  }
  return grid;
}

GeneratorPolicy parse_probes(const std::string& text, std::uint64_t seed) {
  if (text == "units") {
    GeneratorPolicy p = GeneratorPolicy::units();
    p.seed = seed;
    return p;
  }
  if (text == "hermitian") {
    GeneratorPolicy p = GeneratorPolicy::hermitian();
    p.seed = seed;
    return p;
  }
  if (text.rfind("random:", 0) == 0)
    return GeneratorPolicy::random(std::stoi(text.substr(7)), seed);
  throw ParseError("--probes must be units, hermitian or random:COUNT");
}

ParsedDocument load_input(const Options& opt, const Tolerances& tol) {
  if (opt.input.empty()) throw ParseError("--input is required");
  // Builtin descriptors may be given in place of a file path.
  if (opt.input.find('{') != std::string::npos)
    return build_builtin(opt.input);
  return parse_system_document(read_file(opt.input), tol);
}

const InductiveSystem& as_system(const ParsedDocument& doc) {
  if (!std::holds_alternative<InductiveSystem>(doc))
    throw ValidationError("this command expects an inductive system input");
  return std::get<InductiveSystem>(doc);
}

const CpapSystem& as_cpap(const ParsedDocument& doc) {
  if (!std::holds_alternative<CpapSystem>(doc))
    throw ValidationError("this command expects a cpap input");
  return std::get<CpapSystem>(doc);
}

int cmd_validate(const Options& opt, const Tolerances& tol) {
  // parse_system_document and build_builtin throw on invalid steps, so
  // reaching this point means the document validated.
  ParsedDocument doc = load_input(opt, tol);
  if (std::holds_alternative<InductiveSystem>(doc)) {
    const auto& sys = std::get<InductiveSystem>(doc);
    std::cout << "system " << sys.name() << ": " << sys.stages().size()
              << " stages\n";
    for (size_t n = 0; n < sys.validation().size(); ++n) {
      const auto& v = sys.validation()[n];
      std::cout << "  step " << n << ": cp="
                << (v.cp_by_construction ? "by-construction" : "choi-verified")
                << " choi_min_eig=" << v.choi_min_eigenvalue
                << " contractive=" << (v.is_contractive ? "yes" : "no")
                << "\n";
    }
  } else {
    const auto& cpap = std::get<CpapSystem>(doc);
    std::cout << "cpap " << cpap.name << ": " << cpap.num_stages()
              << " stages, " << cpap.probes.size() << " probes\n";
    for (int n = 0; n < cpap.num_stages(); ++n) {
      double worst = 0;
      for (double d : cpap.approx_defect[n]) worst = std::max(worst, d);
      std::cout << "  stage " << n << ": max approx defect " << worst << "\n";
    }
  }
  std::cout << "valid\n";
  return kExitOk;
}

int cmd_defects(const Options& opt, const Tolerances& tol) {
  const ParsedDocument doc = load_input(opt, tol);
  const InductiveSystem& sys = as_system(doc);
  const IndexGrid grid = parse_grid(opt.grid, sys.last_stage());
  const GeneratorPolicy policy = parse_probes(opt.probes, opt.seed);
  DefectReport report = defect_sweep(sys, opt.k, policy, grid);
  write_output(opt, emit_csv(report));
  std::cerr << "defects: " << report.entries.size() << " rows, max "
            << report.max_value() << ", trend "
            << (report.trend.nonincreasing ? "nonincreasing" : "mixed")
            << "\n";
  return kExitOk;
}

int cmd_invariants(const Options& opt, const Tolerances& tol) {
  const ParsedDocument doc = load_input(opt, tol);
  const InductiveSystem& sys = as_system(doc);
  const int last = sys.last_stage();
  bool ok = true;
  auto line = [&](const char* name, bool pass, double value) {
    std::cout << (pass ? "[pass] " : "[FAIL] ") << name << " (" << value
              << ")\n";
    ok = ok && pass;
  };

  // composite coherence rho_{m,n} = rho_{m,j} o rho_{j,n}
  double coherence = 0.0;
  for (int n = 0; n <= last; ++n)
    for (int j = n; j <= last; ++j)
      for (int m = j; m <= last; ++m) {
        const Element probe = unit(sys.stage(n));
        const Element direct = sys.composite(m, n).apply(probe);
        const Element split =
            sys.composite(m, j).apply(sys.composite(j, n).apply(probe));
        coherence =
            std::max(coherence, operator_norm(subtract(direct, split)));
      }
  line("composite coherence", coherence <= 1e-12, coherence);

  // norm profiles non-increasing
  bool monotone = true;
  double worst_jump = 0.0;
  for (int k = 0; k <= std::min(2, last - 1); ++k)
    for (const auto& x : matrix_units(sys.stage(k))) {
      std::vector<int> stages;
      for (int m = k; m <= last; ++m) stages.push_back(m);
      const auto profile = limit_norm_profile(sys, k, x, stages);
      for (size_t i = 1; i < profile.size(); ++i) {
        const double jump = profile[i].second - profile[i - 1].second;
        worst_jump = std::max(worst_jump, jump);
        if (jump > 1e-12) monotone = false;
      }
    }
  line("norm profile monotone", monotone, worst_jump);

  // order-unit domination on Hermitian generators
  double worst_margin = 0.0;
  for (int k = 0; k <= std::min(1, last - 2); ++k)
    for (const auto& x : hermitian_basis(sys.stage(k)))
      for (int n = k + 1; n < last; ++n)
        worst_margin = std::min(
            worst_margin, order_unit_domination_margin(sys, k, x, last, n));
  line("order-unit domination", worst_margin >= -1e-10, worst_margin);

  return ok ? kExitOk : kExitValidation;
}

int cmd_product(const Options& opt, const Tolerances& tol) {
  const ParsedDocument doc = load_input(opt, tol);
  const InductiveSystem& sys = as_system(doc);
  const int N = opt.horizon >= 0 ? opt.horizon : sys.last_stage();
  const int k = opt.k;
  if (!(k + 1 < N))
    throw ValidationError("product: need k + 1 < horizon");
  DefectReport report;
  report.kind = "limit-product";
  const auto units = matrix_units(sys.stage(k));
  const auto labels = matrix_unit_labels(sys.stage(k));
  for (size_t a = 0; a < units.size(); ++a)
    for (size_t b = 0; b < units.size(); ++b) {
      const LimitElement xa = limit_element(sys, k, units[a], N);
      const LimitElement xb = limit_element(sys, k, units[b], N);
      for (int n = k + 1; n < N; ++n) {
        DefectEntry e;
        e.k = k;
        e.m = N;
        e.n = n;
        e.pair = labels[a] + "*" + labels[b];
        e.kind = "mult_id";
        e.value = mult_id_defect(sys, xa, xb, n);
        report.entries.push_back(e);
        e.kind = "cstar_identity";
        e.value = cstar_identity_defect(sys, xa, n);
        report.entries.push_back(e);
        e.kind = "theta_order_zero";
        e.value = theta_order_zero_defect(sys, xa, xb, n);
        report.entries.push_back(e);
      }
    }
  report.metadata["system"] = sys.name();
  report.metadata["k"] = std::to_string(k);
  report.metadata["horizon"] = std::to_string(N);
  report.metadata["seed"] = std::to_string(opt.seed);
  report.sort_entries();
  write_output(opt, emit_csv(report));
  std::cerr << "product: " << report.entries.size() << " rows, max "
            << report.max_value() << "\n";
  return kExitOk;
}

int cmd_nf_lift(const Options& opt, const Tolerances& tol) {
  const ParsedDocument doc = load_input(opt, tol);
  write_output(opt, emit_system_document(direct_sum_nf_lift(as_system(doc))));
  return kExitOk;
}

nlohmann::json schedule_to_json(const SubsystemSchedule& s) {
  nlohmann::json j;
  j["indices"] = s.indices;
  j["epsilons"] = s.epsilons;
  j["feasible"] = s.feasible;
  j["safety_factor"] = s.safety_factor;
  nlohmann::json certs = nlohmann::json::array();
  for (const auto& c : s.certificates)
    certs.push_back({{"inequality", c.inequality},
                     {"probe", c.probe},
                     {"stage", c.stage},
                     {"chosen", c.chosen},
                     {"partner", c.partner},
                     {"value", c.value},
                     {"bound", c.bound}});
  j["certificates"] = std::move(certs);
  if (s.first_failure) {
    const auto& c = *s.first_failure;
    j["first_failure"] = {{"inequality", c.inequality},
                          {"probe", c.probe},
                          {"stage", c.stage},
                          {"chosen", c.chosen},
                          {"partner", c.partner},
                          {"value", c.value},
                          {"bound", c.bound}};
  }
  return j;
}

int cmd_summable(const Options& opt, const Tolerances& tol) {
  const ParsedDocument doc = load_input(opt, tol);
  const CpapSystem& cpap = as_cpap(doc);
  if (opt.epsilons.empty())
    throw ParseError("--epsilons is required for the summable command");
  const SubsystemSchedule schedule = make_summable(cpap, opt.epsilons);
  write_output(opt, schedule_to_json(schedule).dump(2) + "\n");
  if (!schedule.feasible) {
    std::cerr << "summable: infeasible, first failing inequality "
              << (schedule.first_failure ? schedule.first_failure->inequality
                                         : "unknown")
              << " at candidate "
              << (schedule.first_failure ? schedule.first_failure->chosen : -1)
              << "\n";
    return kExitInfeasible;
  }
  std::cerr << "summable: " << schedule.indices.size() << " indices\n";
  return kExitOk;
}

int cmd_extract(const Options& opt, const Tolerances& tol) {
  const ParsedDocument doc = load_input(opt, tol);
  const CpapSystem& cpap = as_cpap(doc);
  if (opt.epsilons.empty())
    throw ParseError("--epsilons is required for the extract command");
  const ExtractionResult result = extract_cpcstar_subsystem(cpap, opt.epsilons);
  nlohmann::json j = schedule_to_json(result.schedule);
  if (result.schedule.feasible)
    j["subsystem"] = nlohmann::json::parse(
        emit_system_document(result.subsystem));
  write_output(opt, j.dump(2) + "\n");
  if (!result.schedule.feasible) {
    const auto& f = result.schedule.first_failure;
    std::cerr << "extract: infeasible, first failing inequality "
              << (f ? f->inequality : "unknown") << " (probe "
              << (f ? f->probe : -1) << ", candidate " << (f ? f->chosen : -1)
              << ", value " << (f ? f->value : 0.0) << " vs bound "
              << (f ? f->bound : 0.0) << ")\n";
    return kExitInfeasible;
  }
  std::cerr << "extract: indices";
  for (int i : result.schedule.indices) std::cerr << " " << i;
  std::cerr << "\n";
  return kExitOk;
}

int cmd_examples(const Options& opt) {
  if (opt.input.empty())
    throw ParseError("--input must carry a builtin descriptor, e.g. uhf{2,3}");
  write_output(opt, emit_builtin_example(opt.input));
  return kExitOk;
}

int run(const Options& opt) {
  const Tolerances tol = parse_tolerances(opt.tol_overrides);
  if (opt.command == "validate") return cmd_validate(opt, tol);
  if (opt.command == "defects") return cmd_defects(opt, tol);
  if (opt.command == "invariants") return cmd_invariants(opt, tol);
  if (opt.command == "product") return cmd_product(opt, tol);
  if (opt.command == "nf-lift") return cmd_nf_lift(opt, tol);
  if (opt.command == "summable") return cmd_summable(opt, tol);
  if (opt.command == "extract") return cmd_extract(opt, tol);
  if (opt.command == "examples") return cmd_examples(opt);
  throw ParseError("unknown command \"" + opt.command + "\"");
}

}  // namespace

int main(int argc, char** argv) {
  // Keep any BLAS backend single-threaded; the sweeps manage their own pool.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);

  CLI::App app{
      "finite-stage diagnostics for inductive systems of matrix algebras "
      "with completely positive contractive connecting maps"};
  Options opt;
  app.add_option("--command", opt.command,
                 "validate | defects | invariants | product | nf-lift | "
                 "summable | extract | examples")
      ->required();
  app.add_option("--input", opt.input,
                 "description file path or builtin descriptor like uhf{2,3}");
  app.add_option("--output", opt.output, "output path (default: stdout)");
  app.add_option("--seed", opt.seed, "seed for randomized probes");
  app.add_option("--k", opt.k, "generator stage for sweeps");
  app.add_option("--horizon", opt.horizon, "evaluation stage (default: last)");
  app.add_option("--grid", opt.grid, "index windows m0:m1,n0:n1,l0:l1");
  app.add_option("--probes", opt.probes, "units | hermitian | random:COUNT");
  app.add_option("--tol", opt.tol_overrides,
                 "tolerance override KEY=VAL with KEY in {herm,psd,eq}");
  app.add_option("--epsilons", opt.epsilons, "driving sequence for schedules")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitIo;
  }

  try {
    return run(opt);
  } catch (const ScheduleError& e) {
    std::cerr << "infeasible schedule: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
