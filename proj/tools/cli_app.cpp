#include "cli_app.hpp"

#include "hrmm/begv.hpp"
#include "hrmm/forward_kpi.hpp"
#include "hrmm/hjb_exact.hpp"
#include "hrmm/parallel.hpp"
#include "hrmm/quotes.hpp"
#include "hrmm/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hrmm::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kModule = "cli";
constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string command;
  std::string scenario;
  std::string mode = "exact";
  double dt = 0.0;
  std::string out_dir;
  std::string axis;
  std::string values;
  std::string q;
  double t = 0.0;
  bool timing = false;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(pos, end - pos);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? std::string() : item.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw ConfigError(kModule, std::string("bad number in ") + what, item);
    }
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

MarketSpec resolve_scenario(const std::string& ref) {
  if (ref.empty()) throw ConfigError(kModule, "--scenario is required");
  std::error_code ec;
  if (fs::is_regular_file(ref, ec)) return load_scenario(ref);
  for (const auto& s : bundled_scenarios())
    if (s.name == ref) return s.spec;
  throw IoError(kModule, "scenario is neither a readable file nor a bundled name", ref);
}

class Output {
 public:
  Output(const RunConfig& config, std::ostream& out) : dir_(config.out_dir), out_(out) {
    if (!dir_.empty()) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) throw IoError(kModule, "cannot create output directory", dir_);
    }
  }

  bool to_files() const { return !dir_.empty(); }
  const std::vector<std::string>& files() const { return files_; }

  /// Writes to `<out>/<name>`, or to the output stream when no directory was given.
  template <class Fn>
  void write(const std::string& name, Fn&& fn) {
    if (dir_.empty()) {
      fn(out_);
      return;
    }
    const fs::path path = fs::path(dir_) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(kModule, "cannot open output file", path.string());
    fn(f);
    f.close();
    if (!f) throw IoError(kModule, "write failed", path.string());
    files_.push_back(name);
  }

  void manifest(const json& doc) {
    if (dir_.empty()) return;
    const fs::path path = fs::path(dir_) / "manifest.json";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(kModule, "cannot open output file", path.string());
    f << doc.dump(2) << '\n';
    if (!f) throw IoError(kModule, "write failed", path.string());
  }

 private:
  std::string dir_;
  std::ostream& out_;
  std::vector<std::string> files_;
};

int select_state(const InventoryGrid& grid, const std::string& q) {
  if (q.empty()) return grid.origin();
  const std::vector<double> v = parse_list(q, "--q");
  if (static_cast<int>(v.size()) != grid.n_bonds()) {
    throw ConfigError(kModule, "--q needs one inventory per bond", q);
  }
  return grid.locate(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

QuotePolicy build_policy(QuoteMode mode, const MarketSpec& spec, const InventoryGrid& grid, double t, double dt) {
  if (t < 0.0 || t > spec.risk.horizon) throw ConfigError(kModule, "--t outside [0, horizon]", format_fixed(t));
  if (mode == QuoteMode::exact) {
    HjbOptions options;
    options.dt = dt;
    if (t == 0.0) options.store_stride = std::numeric_limits<int>::max();
    else if (spec.n_bonds() == 1) options.store_stride = 1;
    const ExactSolution sol = solve_exact(spec, grid, options);
    return extract_policy(sol.value, spec, sol.book, sol.value.node_index(t));
  }
  return with_table_widening(spec, TableGrid{}, [&](const HamiltonianBook& book) {
    const QuadraticValue value = quadratic_value(spec, book);
    return begv_policy(mode, spec, book, value, value.frame(t), grid, t);
  });
}

void cmd_validate(const RunConfig& c, const MarketSpec& spec, Output& out, json& info) {
  const InventoryGrid grid = make_grid(spec);
  int flows = 0;
  for (int i = 0; i < spec.n_rungs(); ++i) flows += spec.lambda(i) > 0.0;
  json summary;
  summary["scenario"] = c.scenario;
  summary["bonds"] = spec.bonds;
  summary["tiers"] = spec.tiers;
  summary["sizes"] = spec.ladder.sizes;
  summary["rungs_with_flow"] = flows;
  summary["lattice_states"] = grid.size();
  summary["side_symmetric"] = side_symmetric(spec);
  summary["scenario_hash"] = hex(fnv1a(canonical_text(spec)));
  info["summary"] = summary;
  out.write("validate.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
}

void cmd_solve_exact(const RunConfig& c, const MarketSpec& spec, Output& out) {
  const InventoryGrid grid = make_grid(spec);
  HjbOptions options;
  options.dt = c.dt;
  if (c.t == 0.0) options.store_stride = std::numeric_limits<int>::max();
  else if (spec.n_bonds() == 1) options.store_stride = 1;
  const ExactSolution sol = solve_exact(spec, grid, options);
  const int node = sol.value.node_index(c.t);
  out.write("value_exact.csv", [&](std::ostream& os) {
    os << "t";
    for (const auto& b : spec.bonds) os << ",q_" << b;
    os << ",u";
    for (const auto& tier : spec.tiers) os << ",xi_" << tier;
    os << '\n';
    const auto& u = sol.value.u[static_cast<std::size_t>(node)];
    const auto& xi = sol.value.xi[static_cast<std::size_t>(node)];
    for (int s = 0; s < grid.size(); ++s) {
      os << format_fixed(sol.value.t[static_cast<std::size_t>(node)]);
      for (int m = 0; m < grid.n_bonds(); ++m) os << ',' << format_fixed(grid.inventory(s, m));
      os << ',' << format_fixed(u(s));
      for (int tau = 0; tau < spec.n_tiers(); ++tau) os << ',' << format_fixed(xi(s, tau));
      os << '\n';
    }
  });
}

void cmd_solve_begv(const MarketSpec& spec, Output& out) {
  const int M = spec.n_bonds();
  const auto header = [&](std::ostream& os, bool with_t) {
    if (with_t) os << "t,";
    bool first = true;
    for (int i = 0; i < M; ++i)
      for (int j = i; j < M; ++j) {
        os << (first ? "" : ",") << "A_" << spec.bonds[static_cast<std::size_t>(i)] << '_'
           << spec.bonds[static_cast<std::size_t>(j)];
        first = false;
      }
    for (const auto& b : spec.bonds) os << ",B_" << b;
    for (const auto& tier : spec.tiers) os << ",xi0_" << tier;
    os << '\n';
  };
  const auto row = [&](std::ostream& os, const QuadraticValue& value, const QuadraticFrame& f) {
    bool first = true;
    for (int i = 0; i < M; ++i)
      for (int j = i; j < M; ++j) {
        os << (first ? "" : ",") << format_fixed(f.A(i, j));
        first = false;
      }
    for (int m = 0; m < M; ++m) os << ',' << format_fixed(f.B(m));
    const Vector xi = value.xi(f, Vector::Zero(M));
    for (int tau = 0; tau < spec.n_tiers(); ++tau) os << ',' << format_fixed(xi(tau));
    os << '\n';
  };

  const HamiltonianBook book(spec);
  const QuadraticValue value = quadratic_value(spec, book);
  constexpr int kNodes = 100;
  out.write("riccati.csv", [&](std::ostream& os) {
    header(os, true);
    for (int n = 0; n <= kNodes; ++n) {
      const double t = n == kNodes ? spec.risk.horizon : spec.risk.horizon * n / kNodes;
      os << format_fixed(t) << ',';
      row(os, value, value.frame(t));
    }
  });
  if (value.has_stationary()) {
    out.write("riccati_stationary.csv", [&](std::ostream& os) {
      header(os, false);
      row(os, value, value.stationary_frame());
    });
    const QuadraticFrame f = value.stationary_frame();
    const auto matrix = [](const Matrix& m) {
      json rows = json::array();
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
      }
      return rows;
    };
    json doc;
    doc["bonds"] = spec.bonds;
    doc["tiers"] = spec.tiers;
    doc["A"] = matrix(f.A);
    doc["B"] = std::vector<double>(f.B.data(), f.B.data() + f.B.size());
    doc["D"] = matrix(value.coefficients().D);
    doc["Dcal"] = matrix(value.coefficients().Dcal);
    const Vector xi0 = value.xi(f, Vector::Zero(M));
    json tiers = json::object();
    for (const auto& tc : value.closures()) {
      const auto name = spec.tiers[static_cast<std::size_t>(tc.tier)];
      tiers[name] = {{"live", tc.live}, {"kappa_tilde", tc.kappa_tilde}, {"y", tc.y(f.A)}, {"xi0", xi0(tc.tier)}};
    }
    doc["closures"] = tiers;
    out.write("riccati_stationary.json", [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
  }
}

void cmd_quotes(const RunConfig& c, const MarketSpec& spec, Output& out) {
  const QuoteMode mode = parse_mode(c.mode);
  const InventoryGrid grid = make_grid(spec);
  std::vector<int> states;
  if (c.q.empty()) {
    states.resize(static_cast<std::size_t>(grid.size()));
    for (int s = 0; s < grid.size(); ++s) states[static_cast<std::size_t>(s)] = s;
  } else {
    states.push_back(select_state(grid, c.q));
  }
  const QuotePolicy policy = build_policy(mode, spec, grid, c.t, c.dt);
  out.write(std::string("quotes_") + mode_name(mode) + ".csv",
            [&](std::ostream& os) { write_policy_table(os, policy, spec, states); });
  if (c.q.empty()) return;

  const int s = states.front();
  json doc;
  doc["mode"] = mode_name(mode);
  doc["t"] = policy.t;
  doc["q"] = std::vector<double>(grid.n_bonds());
  for (int m = 0; m < grid.n_bonds(); ++m) doc["q"][static_cast<std::size_t>(m)] = grid.inventory(s, m);
  json rungs = json::array();
  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (spec.lambda(i) <= 0.0) continue;
    const Rung r = spec.arrivals.rung(i);
    const double delta = policy.offsets(s, i);
    const bool live = !std::isnan(delta);
    rungs.push_back({{"bond", spec.bonds[static_cast<std::size_t>(r.bond)]},
                     {"tier", spec.tiers[static_cast<std::size_t>(r.tier)]},
                     {"side", side_name(r.side)},
                     {"size", spec.ladder[r.size]},
                     {"offset_bp", live ? json(delta) : json(nullptr)},
                     {"fill_prob", live ? json(fill_probability(spec.curve(i), delta)) : json(nullptr)}});
  }
  doc["rungs"] = rungs;
  json tiers = json::object();
  for (int tau = 0; tau < spec.n_tiers(); ++tau) {
    tiers[spec.tiers[static_cast<std::size_t>(tau)]] = {{"xi", policy.xi(s, tau)},
                                                        {"hit_ratio", state_hit_ratio(policy, spec, s, tau)}};
  }
  doc["tiers"] = tiers;
  out.write(std::string("quotes_") + mode_name(mode) + ".json", [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

void cmd_forward(const RunConfig& c, const MarketSpec& spec, Output& out) {
  const QuoteMode mode = parse_mode(c.mode);
  const InventoryGrid grid = make_grid(spec);
  const int q0 = select_state(grid, c.q);
  const QuotePolicy policy = build_policy(mode, spec, grid, c.t, c.dt);
  const InventoryLaw law = forward_propagate(policy, spec, q0, spec.risk.horizon);
  const KpiReport kpi = expected_objective(law, policy, spec);
  const std::string tag = mode_name(mode);

  out.write("kpi_" + tag + ".csv", [&](std::ostream& os) {
    for (const auto& tier : spec.tiers) os << "hit_ratio_" << tier << ',';
    os << "objective,pnl,inv_penalty,hr_penalty,terminal_penalty,max_mass_drift\n";
    for (double h : kpi.hit_ratio) os << format_fixed(h) << ',';
    os << format_fixed(kpi.objective) << ',' << format_fixed(kpi.pnl) << ',' << format_fixed(kpi.inventory_penalty)
       << ',' << format_fixed(kpi.hitratio_penalty) << ',' << format_fixed(kpi.terminal_penalty) << ','
       << format_fixed(law.max_mass_drift) << '\n';
  });
  out.write("forward_" + tag + ".csv", [&](std::ostream& os) {
    os << "t,mass";
    for (const auto& b : spec.bonds) os << ",mean_q_" << b << ",sd_q_" << b;
    os << '\n';
    for (std::size_t n = 0; n < law.mu.size(); ++n) {
      const Vector& mu = law.mu[n];
      os << format_fixed(law.t[n]) << ',' << format_fixed(mu.sum());
      for (int m = 0; m < grid.n_bonds(); ++m) {
        double mean = 0.0;
        double second = 0.0;
        for (int s = 0; s < grid.size(); ++s) {
          const double q = grid.inventory(s, m);
          mean += mu(s) * q;
          second += mu(s) * q * q;
        }
        os << ',' << format_fixed(mean) << ',' << format_fixed(std::sqrt(std::max(0.0, second - mean * mean)));
      }
      os << '\n';
    }
  });
}

void cmd_sweep(const RunConfig& c, const MarketSpec& spec, Output& out) {
  if (c.axis.empty()) throw ConfigError(kModule, "--axis is required for sweep");
  if (c.values.empty()) throw ConfigError(kModule, "--values is required for sweep");
  const SweepAxis axis = parse_axis(c.axis);
  const std::vector<double> values = parse_list(c.values, "--values");
  SweepOptions options;
  options.hjb_dt = c.dt;
  const auto rows = sweep(spec, axis, values, options);
  out.write(std::string("sweep_") + axis_name(axis) + ".csv",
            [&](std::ostream& os) { write_sweep_csv(os, spec, axis, rows, c.timing); });
}

json config_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["scenario"] = c.scenario;
  j["mode"] = c.mode;
  j["dt"] = c.dt;
  j["t"] = c.t;
  j["q"] = c.q;
  j["axis"] = c.axis;
  j["values"] = c.values;
  j["timing"] = c.timing;
  return j;
}

int fail(std::ostream& err, int code, const std::string& module, const std::string& message,
         const std::string& context) {
  json e;
  e["code"] = code;
  e["module"] = module;
  e["message"] = message;
  e["context"] = context;
  err << e.dump() << '\n';
  return code;
}

int dispatch(const RunConfig& c, std::ostream& out) {
  const auto start = Clock::now();
  const MarketSpec spec = resolve_scenario(c.scenario);
  validate(spec);
  Output output(c, out);
  json info;
  const auto solve_start = Clock::now();
  if (c.command == "validate") cmd_validate(c, spec, output, info);
  else if (c.command == "solve-exact") cmd_solve_exact(c, spec, output);
  else if (c.command == "solve-begv") cmd_solve_begv(spec, output);
  else if (c.command == "quotes") cmd_quotes(c, spec, output);
  else if (c.command == "forward") cmd_forward(c, spec, output);
  else if (c.command == "sweep") cmd_sweep(c, spec, output);
  else throw ConfigError(kModule, "unknown command", c.command);
  const auto end = Clock::now();

  const std::string scenario_text = canonical_text(spec);
  const json config = config_json(c);
  json manifest;
  manifest["tool"] = "hrmm";
  manifest["command"] = c.command;
  manifest["input_hash"] = hex(fnv1a(scenario_text + '\n' + config.dump()));
  manifest["scenario_hash"] = hex(fnv1a(scenario_text));
  manifest["config"] = config;
  manifest["outputs"] = output.files();
  manifest["versions"] = {{"hrmm", kVersion},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"cxx", static_cast<long>(__cplusplus)}};
  manifest["threads"] = worker_count();
  manifest["wall_time_s"] = {{"total", std::chrono::duration<double>(end - start).count()},
                             {"command", std::chrono::duration<double>(end - solve_start).count()}};
  if (info.contains("summary")) manifest["summary"] = info["summary"];
  output.manifest(manifest);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Market making on RFQ flow with hit-ratio targets", "hrmm"};
  app.require_subcommand(1);
  RunConfig config;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", config.scenario, "Scenario file or bundled name")->required();
    sub->add_option("--out", config.out_dir, "Output directory (stdout when omitted)");
  };
  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate a scenario");
  common(validate_cmd);
  auto* exact_cmd = app.add_subcommand("solve-exact", "Exact HJB value function on the lattice");
  common(exact_cmd);
  exact_cmd->add_option("--dt", config.dt, "Time step (days)");
  exact_cmd->add_option("--t", config.t, "Time of the written slice");
  auto* begv_cmd = app.add_subcommand("solve-begv", "Quadratic approximation A(t), B(t) and the dual closure");
  common(begv_cmd);
  auto* quotes_cmd = app.add_subcommand("quotes", "Quote table for a solver mode");
  common(quotes_cmd);
  auto* forward_cmd = app.add_subcommand("forward", "Inventory law and expected KPIs under a frozen policy");
  common(forward_cmd);
  for (auto* sub : {quotes_cmd, forward_cmd}) {
    sub->add_option("--mode", config.mode, "exact, begv_exact_map_xi_q, begv_exact_map_xi_quadratic, "
                                           "begv_exact_map_xi_const or linearized");
    sub->add_option("--dt", config.dt, "HJB time step for the exact mode (days)");
    sub->add_option("--q", config.q, "Inventory, one value per bond");
    sub->add_option("--t", config.t, "Time of the policy");
  }
  auto* sweep_cmd = app.add_subcommand("sweep", "KPIs over kappa, intensity_ratio or correlation");
  common(sweep_cmd);
  sweep_cmd->add_option("--axis", config.axis, "kappa, intensity_ratio or correlation");
  sweep_cmd->add_option("--values", config.values, "Comma-separated axis values");
  sweep_cmd->add_option("--dt", config.dt, "HJB time step (days)");
  sweep_cmd->add_flag("--timing", config.timing, "Write wall times into the CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, 2, kModule, e.what(), "arguments");
  }
  config.command = app.get_subcommands().front()->get_name();

  try {
    return dispatch(config, out);
  } catch (const Error& e) {
    return fail(err, static_cast<int>(e.kind()), e.module(), e.what(), e.context());
  } catch (const std::exception& e) {
    return fail(err, 3, kModule, e.what(), config.command);
  }
}

}  // namespace hrmm::cli
