#include "hrmm/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace hrmm {

namespace {
constexpr const char* kModule = "cli";

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& message, int line) const {
    throw ConfigError(kModule, message, source_ + ":" + std::to_string(line));
  }

  void read(std::istream& in) {
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string text = raw;
      const auto hash = text.find('#');
      if (hash != std::string::npos) text.erase(hash);
      text = trim(text);
      if (text.empty() || text[0] == ';') continue;
      if (text.front() == '[') {
        if (text.back() != ']') fail("unterminated section header", line);
        section = trim(std::string_view(text).substr(1, text.size() - 2));
        static const char* known[] = {"bonds", "tiers", "ladder", "arrivals", "risk", "targets"};
        if (std::find(std::begin(known), std::end(known), section) == std::end(known)) fail("unknown section [" + section + "]", line);
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos) fail("expected key = value", line);
      if (section.empty()) fail("key outside any section", line);
      Entry e{section, trim(std::string_view(text).substr(0, eq)), trim(std::string_view(text).substr(eq + 1)), line};
      if (e.key.empty()) fail("empty key", line);
      if (e.value.empty()) fail("empty value for " + e.key, line);
      entries_.push_back(std::move(e));
    }
    if (in.bad()) throw IoError(kModule, "read failure", source_);
  }

  MarketSpec build() {
    const auto bonds = names("bonds");
    const auto tiers = names("tiers");
    const Entry& sizes_entry = single("ladder", "sizes");
    MarketSpec spec = make_market(bonds, tiers, numbers(sizes_entry));
    for (const auto& e : entries_) {
      if (e.section == "ladder") ladder_key(spec, e);
    }

    const int M = spec.n_bonds();
    const int K = spec.n_sizes();
    std::vector<char> alpha_set(static_cast<std::size_t>(spec.n_rungs()), 0);
    std::vector<char> beta_set(static_cast<std::size_t>(spec.n_rungs()), 0);
    for (const auto& e : entries_) {
      if (e.section != "arrivals") continue;
      const auto parts = split(e.key, '.');
      if (parts.size() < 3 || parts.size() > 4) fail("arrival keys look like lambda.<bond>.<tier>[.<side>]", e.line);
      const std::string& field = parts[0];
      if (field != "lambda" && field != "alpha" && field != "beta") fail("unknown arrival field " + field, e.line);
      const auto ms = match(parts[1], spec.bonds, "bond", e.line);
      const auto ts = match(parts[2], spec.tiers, "tier", e.line);
      std::vector<Side> sides{Side::bid, Side::ask};
      if (parts.size() == 4 && parts[3] != "*") {
        if (parts[3] == "bid") sides = {Side::bid};
        else if (parts[3] == "ask") sides = {Side::ask};
        else fail("side must be bid, ask or *", e.line);
      }
      auto values = numbers(e);
      if (values.size() == 1) values.assign(static_cast<std::size_t>(K), values[0]);
      if (static_cast<int>(values.size()) != K) fail("expected one value per ladder size or a single value", e.line);
      for (int m : ms)
        for (int tau : ts)
          for (Side s : sides)
            for (int k = 0; k < K; ++k) {
              const double v = values[static_cast<std::size_t>(k)];
              const auto idx = static_cast<std::size_t>(spec.arrivals.index(m, tau, s, k));
              if (field == "lambda") {
                spec.arrivals.lambda[idx] = v;
              } else if (field == "alpha") {
                spec.arrivals.fill[idx].alpha = v;
                alpha_set[idx] = 1;
              } else {
                spec.arrivals.fill[idx].beta = v;
                beta_set[idx] = 1;
              }
            }
    }
    for (int i = 0; i < spec.n_rungs(); ++i) {
      if (spec.lambda(i) > 0.0 && !(alpha_set[static_cast<std::size_t>(i)] && beta_set[static_cast<std::size_t>(i)])) {
        const Rung r = spec.arrivals.rung(i);
        throw ConfigError(kModule, "fill curve alpha and beta must be set on every rung with flow",
                          source_ + ": " + spec.bonds[static_cast<std::size_t>(r.bond)] + "." +
                              spec.tiers[static_cast<std::size_t>(r.tier)] + "." + side_name(r.side) + " size " +
                              std::to_string(r.size));
      }
    }

    risk(spec, M);

    for (const auto& e : entries_) {
      if (e.section != "targets") continue;
      if (e.key == "tiers") {
        for (const auto& n : split(e.value, ',')) {
          const auto ts = match(n, spec.tiers, "tier", e.line);
          for (int tau : ts) {
            if (std::count(spec.targets.targeted.begin(), spec.targets.targeted.end(), tau)) fail("tier targeted twice", e.line);
            spec.targets.targeted.push_back(tau);
          }
        }
        continue;
      }
      const auto parts = split(e.key, '.');
      if (parts.size() != 2 || (parts[0] != "r_star" && parts[0] != "kappa")) fail("unknown target key " + e.key, e.line);
      const double v = number(e);
      for (int tau : match(parts[1], spec.tiers, "tier", e.line)) {
        (parts[0] == "r_star" ? spec.targets.r_star : spec.targets.kappa)[static_cast<std::size_t>(tau)] = v;
      }
    }
    std::sort(spec.targets.targeted.begin(), spec.targets.targeted.end());
    try {
      validate(spec);
    } catch (const ConfigError& e) {
      throw ConfigError(kModule, e.what(), source_ + (e.context().empty() ? "" : ": " + e.context()));
    }
    return spec;
  }

 private:
  std::vector<std::string> names(const std::string& section) {
    const Entry& e = single(section, "names");
    auto out = split(e.value, ',');
    for (const auto& n : out) {
      if (n.empty() || n == "*" || n.find('.') != std::string::npos) fail("invalid name '" + n + "'", e.line);
    }
    for (std::size_t i = 0; i < out.size(); ++i)
      if (std::count(out.begin(), out.end(), out[i]) > 1) fail("duplicate name " + out[i], e.line);
    for (const auto& x : entries_)
      if (x.section == section && x.key != "names") fail("unknown key " + x.key + " in [" + section + "]", x.line);
    return out;
  }

  const Entry& single(const std::string& section, const std::string& key) {
    const Entry* found = nullptr;
    for (const auto& e : entries_) {
      if (e.section != section || e.key != key) continue;
      if (found) fail("duplicate key " + key, e.line);
      found = &e;
    }
    if (!found) throw ConfigError(kModule, "missing " + key + " in [" + section + "]", source_);
    return *found;
  }

  const Entry* optional(const std::string& section, const std::string& key) {
    const Entry* found = nullptr;
    for (const auto& e : entries_) {
      if (e.section != section || e.key != key) continue;
      if (found) fail("duplicate key " + key, e.line);
      found = &e;
    }
    return found;
  }

  double parse_double(const std::string& s, int line) const {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (!s.empty() && *b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) fail("not a number: '" + s + "'", line);
    if (!std::isfinite(v)) fail("non-finite number: '" + s + "'", line);
    return v;
  }

  double number(const Entry& e) const { return parse_double(e.value, e.line); }

  std::vector<double> numbers(const Entry& e) const {
    std::vector<double> out;
    for (const auto& s : split(e.value, ',')) out.push_back(parse_double(s, e.line));
    return out;
  }

  std::vector<int> match(const std::string& token, const std::vector<std::string>& names, const char* what, int line) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(names.size()); ++i)
      if (token == "*" || token == names[static_cast<std::size_t>(i)]) out.push_back(i);
    if (out.empty()) fail(std::string("unknown ") + what + " '" + token + "'", line);
    return out;
  }

  void ladder_key(MarketSpec& spec, const Entry& e) {
    if (e.key == "sizes") return;
    if (e.key == "q_max") spec.lattice.q_max = number(e);
    else if (e.key == "unit") spec.lattice.unit = number(e);
    else fail("unknown key " + e.key + " in [ladder]", e.line);
  }

  void risk(MarketSpec& spec, int M) {
    for (const auto& e : entries_) {
      if (e.section != "risk") continue;
      static const char* known[] = {"phi", "eta", "horizon", "sigma", "rho", "covariance"};
      if (std::find(std::begin(known), std::end(known), e.key) == std::end(known)) fail("unknown key " + e.key + " in [risk]", e.line);
    }
    spec.risk.phi = number(single("risk", "phi"));
    const Entry* eta = optional("risk", "eta");
    spec.risk.eta = eta ? number(*eta) : 0.0;
    const Entry* horizon = optional("risk", "horizon");
    spec.risk.horizon = horizon ? number(*horizon) : 1.0;

    const Entry* cov = optional("risk", "covariance");
    const Entry* sigma = optional("risk", "sigma");
    const Entry* rho = optional("risk", "rho");
    if (cov) {
      if (sigma || rho) fail("give either covariance or sigma/rho, not both", cov->line);
      const auto rows = split(cov->value, ';');
      if (static_cast<int>(rows.size()) != M) fail("covariance needs one row per bond", cov->line);
      spec.risk.sigma_cov.resize(M, M);
      for (int i = 0; i < M; ++i) {
        const auto row = split(rows[static_cast<std::size_t>(i)], ',');
        if (static_cast<int>(row.size()) != M) fail("covariance rows need one entry per bond", cov->line);
        for (int j = 0; j < M; ++j) spec.risk.sigma_cov(i, j) = parse_double(row[static_cast<std::size_t>(j)], cov->line);
      }
      return;
    }
    if (!sigma) throw ConfigError(kModule, "missing sigma or covariance in [risk]", source_);
    auto s = numbers(*sigma);
    if (s.size() == 1) s.assign(static_cast<std::size_t>(M), s[0]);
    if (static_cast<int>(s.size()) != M) fail("sigma needs one value per bond or a single value", sigma->line);
    const double r = rho ? number(*rho) : 0.0;
    if (rho && !(r > -1.0 && r < 1.0)) fail("rho must lie in (-1, 1)", rho->line);
    spec.risk.sigma_cov.resize(M, M);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j)
        spec.risk.sigma_cov(i, j) = (i == j ? 1.0 : r) * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
  }

  std::string source_;
  std::vector<Entry> entries_;
};

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

MarketSpec single_bond(std::vector<std::string> tiers) {
  MarketSpec spec = make_market({"B1"}, std::move(tiers), {1.0, 5.0, 20.0});
  spec.risk.phi = 1.0;
  spec.risk.eta = 0.0;
  spec.risk.horizon = 1.0;
  spec.risk.sigma_cov = Matrix::Identity(1, 1);
  spec.lattice.q_max = 100.0;
  return spec;
}

void set_rungs(MarketSpec& spec, int m, int tau, const std::vector<double>& lambda) {
  const double ab[] = {2.0, 1.5, 1.0};
  for (Side s : {Side::bid, Side::ask})
    for (int k = 0; k < 3; ++k) {
      spec.arrivals.lambda_at(m, tau, s, k) = lambda[static_cast<std::size_t>(k)];
      spec.arrivals.fill_at(m, tau, s, k) = FillCurve{ab[k], ab[k]};
    }
}

void target(MarketSpec& spec, int tau, double kappa) {
  spec.targets.targeted.push_back(tau);
  spec.targets.r_star[static_cast<std::size_t>(tau)] = 0.1;
  spec.targets.kappa[static_cast<std::size_t>(tau)] = kappa;
}
}  // namespace

MarketSpec parse_scenario(std::istream& in, const std::string& source) {
  Parser p(source);
  p.read(in);
  return p.build();
}

MarketSpec parse_scenario_text(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  return parse_scenario(is, source);
}

MarketSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(kModule, "cannot open scenario file", path);
  return parse_scenario(in, path);
}

std::string canonical_text(const MarketSpec& spec) {
  std::ostringstream os;
  auto list = [&](const char* key, const auto& xs) {
    os << key << '=';
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    os << '\n';
  };
  list("bonds", spec.bonds);
  list("tiers", spec.tiers);
  std::vector<std::string> sizes;
  for (double z : spec.ladder.sizes) sizes.push_back(g17(z));
  list("sizes", sizes);
  os << "q_max=" << g17(spec.lattice.q_max) << "\nunit=" << g17(spec.lattice.unit) << '\n';
  for (int i = 0; i < spec.n_rungs(); ++i) {
    os << "rung" << i << '=' << g17(spec.lambda(i)) << ',' << g17(spec.curve(i).alpha) << ',' << g17(spec.curve(i).beta)
       << '\n';
  }
  os << "phi=" << g17(spec.risk.phi) << "\neta=" << g17(spec.risk.eta) << "\nhorizon=" << g17(spec.risk.horizon) << '\n';
  os << "sigma=";
  for (Eigen::Index i = 0; i < spec.risk.sigma_cov.size(); ++i) os << (i ? "," : "") << g17(spec.risk.sigma_cov.data()[i]);
  os << '\n';
  std::vector<std::string> targeted;
  for (int tau : spec.targets.targeted) targeted.push_back(std::to_string(tau));
  list("targeted", targeted);
  for (std::size_t t = 0; t < spec.tiers.size(); ++t) {
    os << "target" << t << '=' << g17(spec.targets.r_star[t]) << ',' << g17(spec.targets.kappa[t]) << '\n';
  }
  return os.str();
}

std::vector<NamedScenario> bundled_scenarios() {
  std::vector<NamedScenario> out;

  MarketSpec baseline = single_bond({"client"});
  set_rungs(baseline, 0, 0, {500.0, 200.0, 50.0});
  target(baseline, 0, 10.0);
  out.push_back({"baseline", baseline});

  MarketSpec two_tier = single_bond({"background", "target"});
  set_rungs(two_tier, 0, 0, {50.0, 20.0, 5.0});
  set_rungs(two_tier, 0, 1, {50.0, 20.0, 5.0});
  target(two_tier, 1, 100.0);
  out.push_back({"two_tier", two_tier});

  MarketSpec two_bond = make_market({"B1", "B2"}, {"target", "background"}, {1.0, 5.0, 20.0});
  two_bond.risk.phi = 1.0;
  two_bond.risk.horizon = 1.0;
  two_bond.risk.sigma_cov.resize(2, 2);
  two_bond.risk.sigma_cov << 1.0, 0.8, 0.8, 1.0;
  two_bond.lattice.q_max = 100.0;
  set_rungs(two_bond, 0, 0, {50.0, 20.0, 5.0});
  set_rungs(two_bond, 1, 1, {500.0, 200.0, 50.0});
  target(two_bond, 0, 10.0);
  out.push_back({"two_bond", two_bond});

  MarketSpec asym = single_bond({"client"});
  set_rungs(asym, 0, 0, {500.0, 200.0, 50.0});
  for (int k = 0; k < 3; ++k) asym.arrivals.lambda_at(0, 0, Side::bid, k) *= 1.5;
  target(asym, 0, 10.0);
  out.push_back({"asym_toy", asym});

  for (auto& s : out) validate(s.spec);
  return out;
}

MarketSpec bundled_scenario(const std::string& name) {
  for (auto& s : bundled_scenarios())
    if (s.name == name) return s.spec;
  throw ConfigError(kModule, "unknown bundled scenario", name);
}

}  // namespace hrmm
