#include "gridflex/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gridflex/errors.hpp"

namespace gridflex {

using json = nlohmann::ordered_json;

double Grid::total_beta() const {
  double s = 0.0;
  for (const auto& b : buses) s += b.beta_l;
  return s;
}

std::vector<GenId> Grid::online_generators() const {
  std::vector<GenId> out;
  for (int g = 0; g < static_cast<int>(generators.size()); ++g)
    if (generators[g].online) out.push_back(g);
  return out;
}

std::vector<std::vector<int>> Grid::incident_lines() const {
  std::vector<std::vector<int>> inc(buses.size());
  for (int l = 0; l < n_lines(); ++l) {
    inc[lines[l].from].push_back(l);
    inc[lines[l].to].push_back(l);
  }
  return inc;
}

double Grid::energy_target_or_default(GenId g, double horizon_hours) const {
  const Generator& gen = generators.at(g);
  if (gen.energy_target) return *gen.energy_target;
  return gen.p_max * horizon_hours / 2.0;
}

Commitment Commitment::from_grid(const Grid& grid) {
  return Commitment{grid.online_generators()};
}

double dynamic_impedance(double reactance, double v_from, double v_to,
                         double angle_diff0) {
  if (reactance <= 0.0)
    throw std::invalid_argument("dynamic_impedance: reactance must be > 0");
  if (v_from <= 0.0 || v_to <= 0.0)
    throw std::invalid_argument("dynamic_impedance: voltages must be > 0");
  if (!(std::abs(angle_diff0) < M_PI / 2.0))
    throw LinearizationError(
        "dynamic_impedance: |angle_diff0| >= pi/2, linearization invalid");
  return reactance / (v_from * v_to * std::cos(angle_diff0));
}

std::vector<std::string> validate_grid(const Grid& grid) {
  std::vector<std::string> v;
  const int n = grid.n_buses();

  if (n == 0) {
    v.push_back("grid has no buses");
    return v;
  }

  // Bus ids must be exactly 0..n-1.
  {
    std::set<BusId> seen;
    for (const auto& b : grid.buses) {
      if (!seen.insert(b.id).second)
        v.push_back("duplicate bus id " + std::to_string(b.id));
      if (b.id < 0 || b.id >= n)
        v.push_back("bus id " + std::to_string(b.id) +
                    " outside 0.." + std::to_string(n - 1));
    }
  }

  if (grid.reference_bus < 0 || grid.reference_bus >= n)
    v.push_back("reference_bus " + std::to_string(grid.reference_bus) +
                " out of range");

  bool endpoints_ok = true;
  std::set<std::pair<BusId, BusId>> pairs;
  for (int l = 0; l < grid.n_lines(); ++l) {
    const Line& ln = grid.lines[l];
    const std::string tag = "line " + std::to_string(l);
    if (ln.from < 0 || ln.from >= n || ln.to < 0 || ln.to >= n) {
      v.push_back(tag + ": endpoint out of range");
      endpoints_ok = false;
      continue;
    }
    if (ln.from == ln.to) v.push_back(tag + ": from == to");
    auto key = std::minmax(ln.from, ln.to);
    if (!pairs.insert(key).second)
      v.push_back(tag + ": parallel line between " + std::to_string(ln.from) +
                  " and " + std::to_string(ln.to) + " (merge on input)");
    if (!(ln.dynamic_impedance > 0.0))
      v.push_back(tag + ": dynamic_impedance must be > 0");
    if (!(ln.thermal_limit > 0.0))
      v.push_back(tag + ": thermal_limit must be > 0");
  }

  // Connectivity over the full bus set (single synchronous area).
  if (endpoints_ok && grid.reference_bus >= 0 && grid.reference_bus < n) {
    std::vector<char> reach(n, 0);
    std::vector<std::vector<int>> adj(n);
    for (const auto& ln : grid.lines) {
      adj[ln.from].push_back(ln.to);
      adj[ln.to].push_back(ln.from);
    }
    std::vector<int> stack{grid.reference_bus};
    reach[grid.reference_bus] = 1;
    while (!stack.empty()) {
      int b = stack.back();
      stack.pop_back();
      for (int nb : adj[b])
        if (!reach[nb]) {
          reach[nb] = 1;
          stack.push_back(nb);
        }
    }
    std::string unreachable;
    for (int b = 0; b < n; ++b)
      if (!reach[b]) unreachable += (unreachable.empty() ? "" : ", ") + std::to_string(b);
    if (!unreachable.empty())
      v.push_back("disconnected grid: buses {" + unreachable +
                  "} unreachable from reference bus " +
                  std::to_string(grid.reference_bus));
  }

  {
    std::set<BusId> gen_buses;
    for (int g = 0; g < static_cast<int>(grid.generators.size()); ++g) {
      const Generator& gen = grid.generators[g];
      const std::string tag = "generator " + std::to_string(g);
      if (gen.bus < 0 || gen.bus >= n) {
        v.push_back(tag + ": bus " + std::to_string(gen.bus) + " out of range");
        continue;
      }
      if (!gen_buses.insert(gen.bus).second)
        v.push_back("bus " + std::to_string(gen.bus) +
                    " hosts more than one generator (use --aggregate to merge)");
      if (!(gen.p_min <= gen.p_max)) v.push_back(tag + ": p_min > p_max");
      if (!(gen.ramp_min < 0.0 && gen.ramp_max > 0.0))
        v.push_back(tag + ": ramp limits must satisfy ramp_min < 0 < ramp_max");
      if (gen.energy_target && !(*gen.energy_target > 0.0))
        v.push_back(tag + ": energy_target must be > 0 when given");
    }
  }

  const double beta_sum = grid.total_beta();
  if (beta_sum == 0.0)
    v.push_back("zero aggregate load frequency response");
  else if (beta_sum > 0.0)
    v.push_back("positive aggregate load frequency response (sum beta_l = " +
                std::to_string(beta_sum) + ")");

  return v;
}

namespace {

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

double require_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw ParseError(where + ": missing field '" + key + "'");
  if (!j[key].is_number())
    throw ParseError(where + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

int require_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw ParseError(where + ": missing field '" + key + "'");
  if (!j[key].is_number_integer())
    throw ParseError(where + ": field '" + key + "' must be an integer");
  return j[key].get<int>();
}

Grid parse_grid_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("grid JSON parse error at line " +
                     std::to_string(line_of_offset(text, e.byte)) + ": " +
                     e.what());
  }
  if (!doc.is_object()) throw ParseError("grid document must be a JSON object");

  Grid grid;
  grid.base_mva = doc.value("base_mva", 100.0);
  if (!doc.contains("reference_bus"))
    throw ParseError("grid: missing field 'reference_bus'");
  grid.reference_bus = doc["reference_bus"].get<int>();

  if (!doc.contains("buses") || !doc["buses"].is_array())
    throw ParseError("grid: missing array 'buses'");
  int idx = 0;
  for (const auto& jb : doc["buses"]) {
    const std::string where = "buses[" + std::to_string(idx++) + "]";
    Bus b;
    b.id = require_int(jb, "id", where);
    b.beta_l = jb.value("beta_l", 0.0);
    grid.buses.push_back(b);
  }
  // Store in id order so equal grids compare equal field-by-field.
  std::sort(grid.buses.begin(), grid.buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });

  idx = 0;
  for (const auto& jl : doc.value("lines", json::array())) {
    const std::string where = "lines[" + std::to_string(idx++) + "]";
    Line ln;
    ln.from = require_int(jl, "from", where);
    ln.to = require_int(jl, "to", where);
    ln.dynamic_impedance = require_number(jl, "dynamic_impedance", where);
    ln.thermal_limit = require_number(jl, "thermal_limit", where);
    ln.nominal_flow = jl.value("nominal_flow", 0.0);
    grid.lines.push_back(ln);
  }

  idx = 0;
  for (const auto& jg : doc.value("generators", json::array())) {
    const std::string where = "generators[" + std::to_string(idx++) + "]";
    Generator g;
    g.bus = require_int(jg, "bus", where);
    g.online = jg.value("online", true);
    g.c1 = jg.value("c1", 0.0);
    g.c2 = jg.value("c2", 0.0);
    g.c3 = jg.value("c3", 0.0);
    g.p_min = require_number(jg, "p_min", where);
    g.p_max = require_number(jg, "p_max", where);
    g.ramp_min = require_number(jg, "ramp_min", where);
    g.ramp_max = require_number(jg, "ramp_max", where);
    if (jg.contains("energy_target"))
      g.energy_target = jg["energy_target"].get<double>();
    grid.generators.push_back(g);
  }

  auto violations = validate_grid(grid);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return grid;
}

bool looks_like_json(const std::string& text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '{';
  }
  return false;
}

}  // namespace

Grid parse_grid(const std::string& case_text) {
  if (looks_like_json(case_text)) return parse_grid_json(case_text);
  return parse_matpower(case_text);
}

Grid parse_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open grid file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

std::string serialize_grid(const Grid& grid) {
  json doc;
  doc["base_mva"] = grid.base_mva;
  doc["reference_bus"] = grid.reference_bus;
  doc["buses"] = json::array();
  for (const auto& b : grid.buses)
    doc["buses"].push_back({{"id", b.id}, {"beta_l", b.beta_l}});
  doc["lines"] = json::array();
  for (const auto& ln : grid.lines)
    doc["lines"].push_back({{"from", ln.from},
                            {"to", ln.to},
                            {"dynamic_impedance", ln.dynamic_impedance},
                            {"thermal_limit", ln.thermal_limit},
                            {"nominal_flow", ln.nominal_flow}});
  doc["generators"] = json::array();
  for (const auto& g : grid.generators) {
    json jg = {{"bus", g.bus},       {"online", g.online},
               {"c1", g.c1},         {"c2", g.c2},
               {"c3", g.c3},         {"p_min", g.p_min},
               {"p_max", g.p_max},   {"ramp_min", g.ramp_min},
               {"ramp_max", g.ramp_max}};
    if (g.energy_target) jg["energy_target"] = *g.energy_target;
    doc["generators"].push_back(jg);
  }
  return doc.dump(2) + "\n";
}

Grid aggregate_generators(const Grid& grid) {
  Grid out = grid;
  out.generators.clear();

  std::map<BusId, std::vector<Generator>> by_bus;
  for (const auto& g : grid.generators) by_bus[g.bus].push_back(g);

  for (const auto& [bus, units] : by_bus) {
    if (units.size() == 1) {
      out.generators.push_back(units[0]);
      continue;
    }
    Generator m;
    m.bus = bus;
    m.online = false;
    bool all_have_target = true;
    double target_sum = 0.0;
    bool any_linear = false;
    for (const auto& u : units) {
      m.online = m.online || u.online;
      m.p_min += u.p_min;
      m.p_max += u.p_max;
      m.ramp_min += u.ramp_min;
      m.ramp_max += u.ramp_max;
      if (u.energy_target)
        target_sum += *u.energy_target;
      else
        all_have_target = false;
      if (u.c1 <= 0.0) any_linear = true;
    }
    if (all_have_target) m.energy_target = target_sum;
    if (any_linear) {
      // A unit with no quadratic term has constant marginal cost; the
      // equal-marginal combination degenerates, so fall back to the cheapest
      // marginal with costs summed at zero output.
      m.c1 = 0.0;
      m.c2 = units[0].c2;
      for (const auto& u : units) m.c2 = std::min(m.c2, u.c2);
      for (const auto& u : units) m.c3 += u.c3;
    } else {
      double inv_c1 = 0.0, c2_over_c1 = 0.0;
      for (const auto& u : units) {
        inv_c1 += 1.0 / u.c1;
        c2_over_c1 += u.c2 / u.c1;
      }
      m.c1 = 1.0 / inv_c1;
      m.c2 = m.c1 * c2_over_c1;
      // Constant chosen so the combined curve equals the summed unit costs at
      // the equal-marginal split of zero total output.
      double k = 0.0;
      for (const auto& u : units) {
        const double p0 = (m.c2 - u.c2) / (2.0 * u.c1);
        k += u.c1 * p0 * p0 + u.c2 * p0 + u.c3;
      }
      m.c3 = k;
    }
    out.generators.push_back(m);
  }

  auto violations = validate_grid(out);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return out;
}

namespace {

// Minimal reader for the MATPOWER matrix syntax:
//   mpc.<name> = [ ... ; ... ];
std::map<std::string, std::vector<std::vector<double>>> matpower_tables(
    const std::string& text) {
  std::map<std::string, std::vector<std::vector<double>>> tables;
  std::istringstream in(text);
  std::string line;
  std::string current;
  std::vector<std::vector<double>> rows;
  int lineno = 0;
  bool in_table = false;

  auto parse_row = [&](const std::string& s) {
    std::vector<double> row;
    std::istringstream rs(s);
    double x;
    while (rs >> x) row.push_back(x);
    if (!row.empty()) rows.push_back(std::move(row));
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (auto pc = line.find('%'); pc != std::string::npos) line.resize(pc);
    if (!in_table) {
      auto eq = line.find('=');
      auto mpc = line.find("mpc.");
      if (mpc == std::string::npos || eq == std::string::npos || eq < mpc)
        continue;
      std::string name = line.substr(mpc + 4, eq - mpc - 4);
      name.erase(std::remove_if(name.begin(), name.end(), ::isspace),
                 name.end());
      auto open = line.find('[', eq);
      if (open == std::string::npos) continue;  // scalar assignment
      current = name;
      rows.clear();
      in_table = true;
      line = line.substr(open + 1);
    }
    if (in_table) {
      auto close = line.find(']');
      std::string body = close == std::string::npos ? line : line.substr(0, close);
      // Rows are separated by ';' or newlines.
      std::size_t start = 0;
      while (start <= body.size()) {
        auto semi = body.find(';', start);
        std::string piece = body.substr(
            start, semi == std::string::npos ? std::string::npos : semi - start);
        parse_row(piece);
        if (semi == std::string::npos) break;
        start = semi + 1;
      }
      if (close != std::string::npos) {
        tables[current] = rows;
        in_table = false;
      }
    }
  }
  if (in_table)
    throw ParseError("matpower: table mpc." + current + " never closed");
  return tables;
}

}  // namespace

Grid parse_matpower(const std::string& case_text, const MatpowerOptions& opts) {
  auto tables = matpower_tables(case_text);
  if (!tables.count("bus") || !tables.count("branch"))
    throw ParseError("matpower: required tables mpc.bus and mpc.branch not found");

  Grid grid;
  // baseMVA appears as a scalar assignment; re-scan for it.
  {
    auto pos = case_text.find("mpc.baseMVA");
    if (pos != std::string::npos) {
      auto eq = case_text.find('=', pos);
      if (eq != std::string::npos) grid.base_mva = std::atof(case_text.c_str() + eq + 1);
    }
  }

  std::map<int, int> bus_index;  // MATPOWER bus number -> dense index
  int ref = -1;
  const auto& bus_rows = tables["bus"];
  for (int i = 0; i < static_cast<int>(bus_rows.size()); ++i) {
    const auto& r = bus_rows[i];
    if (r.size() < 9)
      throw ParseError("matpower: bus row " + std::to_string(i) + " too short");
    bus_index[static_cast<int>(r[0])] = i;
    Bus b;
    b.id = i;
    const double pd = r[2];
    b.beta_l = opts.beta_per_load_mw * pd;
    grid.buses.push_back(b);
    if (static_cast<int>(r[1]) == 3) ref = i;  // BUS_TYPE ref
  }
  grid.reference_bus = ref >= 0 ? ref : 0;

  // Parallel branches merge: impedances combine in parallel, limits add.
  std::map<std::pair<int, int>, Line> merged;
  for (int i = 0; i < static_cast<int>(tables["branch"].size()); ++i) {
    const auto& r = tables["branch"][i];
    if (r.size() < 6)
      throw ParseError("matpower: branch row " + std::to_string(i) + " too short");
    if (!bus_index.count(static_cast<int>(r[0])) ||
        !bus_index.count(static_cast<int>(r[1])))
      throw ParseError("matpower: branch row " + std::to_string(i) +
                       " references unknown bus");
    int f = bus_index[static_cast<int>(r[0])];
    int t = bus_index[static_cast<int>(r[1])];
    const double x = r[3];
    if (!(x > 0.0))
      throw ParseError("matpower: branch row " + std::to_string(i) +
                       " has non-positive reactance");
    const double rate_a = r.size() > 5 ? r[5] : 0.0;
    const double s_d = dynamic_impedance(x, 1.0, 1.0, 0.0) / grid.base_mva;
    const double limit = rate_a > 0.0 ? rate_a : opts.default_thermal_limit;
    auto key = std::minmax(f, t);
    auto it = merged.find(key);
    if (it == merged.end()) {
      merged[key] = Line{f, t, s_d, limit, 0.0};
    } else {
      it->second.dynamic_impedance =
          1.0 / (1.0 / it->second.dynamic_impedance + 1.0 / s_d);
      it->second.thermal_limit += limit;
    }
  }
  for (const auto& [key, ln] : merged) grid.lines.push_back(ln);

  if (tables.count("gen")) {
    const auto& gencost = tables.count("gencost") ? tables["gencost"]
                                                  : std::vector<std::vector<double>>{};
    for (int i = 0; i < static_cast<int>(tables["gen"].size()); ++i) {
      const auto& r = tables["gen"][i];
      if (r.size() < 10)
        throw ParseError("matpower: gen row " + std::to_string(i) + " too short");
      if (!bus_index.count(static_cast<int>(r[0])))
        throw ParseError("matpower: gen row " + std::to_string(i) +
                         " references unknown bus");
      Generator g;
      g.bus = bus_index[static_cast<int>(r[0])];
      g.online = r.size() > 7 ? r[7] > 0.0 : true;
      g.p_max = r.size() > 8 ? r[8] : 0.0;
      g.p_min = r.size() > 9 ? r[9] : 0.0;
      const double ramp_agc = r.size() > 16 ? r[16] : 0.0;  // MW/min
      const double ramp =
          ramp_agc > 0.0 ? ramp_agc
                         : std::max(opts.default_ramp_frac_per_min * g.p_max, 1e-6);
      g.ramp_min = -ramp;
      g.ramp_max = ramp;
      if (i < static_cast<int>(gencost.size())) {
        const auto& c = gencost[i];
        // Polynomial model: MODEL NSTARTUP NSHUTDOWN N c_{n-1} ... c_0
        if (c.size() >= 4 && static_cast<int>(c[0]) == 2) {
          const int ncoef = static_cast<int>(c[3]);
          if (ncoef >= 1 && c.size() >= 4 + static_cast<std::size_t>(ncoef)) {
            if (ncoef >= 3) g.c1 = c[4 + ncoef - 3];
            if (ncoef >= 2) g.c2 = c[4 + ncoef - 2];
            g.c3 = c[4 + ncoef - 1];
          }
        }
      }
      grid.generators.push_back(g);
    }
  }

  auto violations = validate_grid(grid);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return grid;
}

}  // namespace gridflex
