#pragma once

#include <optional>
#include <string>
#include <vector>

namespace gridflex {

using BusId = int;
using GenId = int;

struct Bus {
  BusId id = 0;
  double beta_l = 0.0;  // load frequency response, MW/Hz (<= 0 at load buses)

  bool operator==(const Bus&) const = default;
};

struct Line {
  BusId from = 0;
  BusId to = 0;
  double dynamic_impedance = 0.0;  // rad/MW, from the power-flow linearization
  double thermal_limit = 0.0;      // MW
  double nominal_flow = 0.0;       // MW, in the from->to direction

  bool operator==(const Line&) const = default;
};

struct Generator {
  BusId bus = 0;
  bool online = true;
  double c1 = 0.0;  // $/MW^2
  double c2 = 0.0;  // $/MW
  double c3 = 0.0;  // $
  double p_min = 0.0;    // MW
  double p_max = 0.0;    // MW
  double ramp_min = 0.0; // MW/min (< 0)
  double ramp_max = 0.0; // MW/min (> 0)
  std::optional<double> energy_target;  // MWh over the control period

  bool operator==(const Generator&) const = default;
};

// Immutable network description. Safe to share read-only across threads.
struct Grid {
  std::vector<Bus> buses;            // ids are 0..n-1 after validation
  std::vector<Line> lines;
  std::vector<Generator> generators;
  BusId reference_bus = 0;
  double base_mva = 100.0;

  bool operator==(const Grid&) const = default;

  int n_buses() const { return static_cast<int>(buses.size()); }
  int n_lines() const { return static_cast<int>(lines.size()); }

  double total_beta() const;
  std::vector<GenId> online_generators() const;
  // Incident line indices per bus.
  std::vector<std::vector<int>> incident_lines() const;
  // Energy target for generator g, falling back to p_max * horizon / 2.
  double energy_target_or_default(GenId g, double horizon_hours) const;
};

// The set of generators available for re-dispatch. Fixed across an ensemble.
struct Commitment {
  std::vector<GenId> gens;  // sorted indices into Grid::generators

  bool operator==(const Commitment&) const = default;
  int size() const { return static_cast<int>(gens.size()); }

  static Commitment from_grid(const Grid& grid);
};

// s_d = x / (V_i * V_j * cos(dtheta0)). Inputs in per-unit, angle in rad.
// Throws LinearizationError when |angle_diff0| >= pi/2.
double dynamic_impedance(double reactance, double v_from, double v_to,
                         double angle_diff0);

// Returns every violated invariant (empty when the grid is valid).
std::vector<std::string> validate_grid(const Grid& grid);

// Parses the native JSON schema or a MATPOWER-style .m case (sniffed from the
// leading characters). Throws ParseError or ValidationError.
Grid parse_grid(const std::string& case_text);
Grid parse_grid_file(const std::string& path);

std::string serialize_grid(const Grid& grid);

// Merges multiple generators sharing a bus: limits and ramps add, quadratic
// cost curves combine at equal marginal cost.
Grid aggregate_generators(const Grid& grid);

struct MatpowerOptions {
  double beta_per_load_mw = -0.025;       // MW/Hz per MW of load
  double default_ramp_frac_per_min = 0.05;  // of p_max, when RAMP_AGC missing
  double default_thermal_limit = 1e4;     // MW, when RATE_A is 0
};

Grid parse_matpower(const std::string& case_text,
                    const MatpowerOptions& opts = {});

}  // namespace gridflex
