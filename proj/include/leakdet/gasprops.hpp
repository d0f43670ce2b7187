#pragma once

// Natural-gas property correlations used for feature engineering and data
// validation.  Units follow oilfield convention: psia, degrees Rankine,
// lb/lbmol, lb/ft3, centipoise.
//
// Correlations:
//   - pseudo-criticals: Standing-form quadratics in specific gravity,
//     injectable so an alternate correlation can be swapped in;
//   - compressibility factor: Brill & Beggs explicit fit;
//   - viscosity: Lee-Gonzalez-Eakin.

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "leakdet/common.hpp"

namespace leakdet::gas {

constexpr double kGasConstant = 10.732;     // psia ft3 / (lbmol R)
constexpr double kAirMolecularWeight = 28.97;  // lb/lbmol
constexpr double kRankineOffset = 459.67;

inline double rankine_from_fahrenheit(double deg_f) { return deg_f + kRankineOffset; }

struct GasState {
    double pressure = 0.0;          // psia, absolute
    double temperature = 0.0;       // degrees Rankine
    double specific_gravity = 0.0;  // air = 1
    double molecular_weight = 0.0;  // lb/lbmol
    double density = 0.0;           // lb/ft3
};

struct PseudoReduced {
    double t_pr = 0.0;
    double p_pr = 0.0;
};

struct PseudoCritical {
    double t_pc = 0.0;  // degrees Rankine
    double p_pc = 0.0;  // psia
};

inline double molecular_weight_from_sg(double specific_gravity) {
    return kAirMolecularWeight * specific_gravity;
}

// Standing-form quadratic pseudo-critical correlation for dry natural gas.
inline PseudoCritical pseudo_critical(double specific_gravity) {
    if (!(specific_gravity >= 0.55 && specific_gravity <= 1.0)) {
        std::ostringstream msg;
        msg << "pseudo_critical: specific gravity " << specific_gravity
            << " outside supported range [0.55, 1.0]";
        throw std::domain_error(msg.str());
    }
    const double sg = specific_gravity;
    const double t_pc = 168.0 + 325.0 * sg - 12.5 * sg * sg;
    const double p_pc = 677.0 + 15.0 * sg - 37.5 * sg * sg;
    return {t_pc, p_pc};
}

using PseudoCriticalFn = std::function<PseudoCritical(double)>;

// Brill & Beggs compressibility factor, z = A + (1-A)e^{-B} + C ppr^D.
// Valid for t_pr > 0.92 (the A term takes sqrt(t_pr - 0.92)); the B term has
// a pole at t_pr = 0.86, below the admissible range anyway.
inline double z_factor(const PseudoReduced& pr) {
    if (!(pr.t_pr > 0.92)) {
        std::ostringstream msg;
        msg << "z_factor: reduced temperature " << pr.t_pr << " must exceed 0.92";
        throw std::domain_error(msg.str());
    }
    if (!(pr.p_pr >= 0.0)) {
        std::ostringstream msg;
        msg << "z_factor: reduced pressure " << pr.p_pr << " must be non-negative";
        throw std::domain_error(msg.str());
    }
    const double t = pr.t_pr;
    const double p = pr.p_pr;
    const double a = 1.39 * std::sqrt(t - 0.92) - 0.36 * t - 0.101;
    const double b = (0.62 - 0.23 * t) * p +
                     (0.066 / (t - 0.86) - 0.037) * p * p +
                     0.32 * std::pow(10.0, -9.0 * (t - 1.0)) * std::pow(p, 6.0);
    const double c = 0.132 - 0.32 * std::log10(t);
    const double k = 0.3106 - 0.49 * t + 0.1824 * t * t;
    const double d = std::pow(10.0, k);
    const double z = a + (1.0 - a) * std::exp(-b) + c * std::pow(p, d);
    return z;
}

// rho = P M / (z R T), lb/ft3.
inline double gas_density(double pressure_psia, double molecular_weight, double z,
                          double temperature_rankine) {
    if (!(pressure_psia > 0.0) || !(temperature_rankine > 0.0) || !(z > 0.0))
        throw std::domain_error("gas_density: pressure, temperature and z must be positive");
    return pressure_psia * molecular_weight / (z * kGasConstant * temperature_rankine);
}

// Lee-Gonzalez-Eakin viscosity, centipoise.
//   K = (9.4 + 0.02 M) T^1.5 / (209 + 19 M + T) * 1e-4
//   X = 3.5 + 0.01 M + 986 / T
//   y = 2.4 - 0.2 X
//   mu = K exp(X (rho/62.4)^y)
inline double gas_viscosity(const GasState& state) {
    if (!(state.temperature > 0.0)) {
        std::ostringstream msg;
        msg << "gas_viscosity: temperature " << state.temperature << " R must be positive";
        throw std::domain_error(msg.str());
    }
    if (!(state.density >= 0.0)) {
        std::ostringstream msg;
        msg << "gas_viscosity: density " << state.density << " lb/ft3 must be non-negative";
        throw std::domain_error(msg.str());
    }
    const double m = state.molecular_weight;
    const double t = state.temperature;
    const double k =
        (9.4 + 0.02 * m) * std::pow(t, 1.5) / (209.0 + 19.0 * m + t) * 1e-4;
    const double x = 3.5 + 0.01 * m + 986.0 / t;
    const double y = 2.4 - 0.2 * x;
    return k * std::exp(x * std::pow(state.density / 62.4, y));
}

// Convenience entry points working from telemetry units (psia, deg F, SG).

inline double z_at(double pressure_psia, double temperature_f, double specific_gravity,
                   const PseudoCriticalFn& correlation = pseudo_critical) {
    const PseudoCritical pc = correlation(specific_gravity);
    const double t_r = rankine_from_fahrenheit(temperature_f);
    return z_factor({t_r / pc.t_pc, pressure_psia / pc.p_pc});
}

inline GasState state_at(double pressure_psia, double temperature_f, double specific_gravity,
                         const PseudoCriticalFn& correlation = pseudo_critical) {
    GasState s;
    s.pressure = pressure_psia;
    s.temperature = rankine_from_fahrenheit(temperature_f);
    s.specific_gravity = specific_gravity;
    s.molecular_weight = molecular_weight_from_sg(specific_gravity);
    const double z = z_at(pressure_psia, temperature_f, specific_gravity, correlation);
    s.density = gas_density(pressure_psia, s.molecular_weight, z, s.temperature);
    return s;
}

inline double viscosity_at(double pressure_psia, double temperature_f, double specific_gravity,
                           const PseudoCriticalFn& correlation = pseudo_critical) {
    return gas_viscosity(state_at(pressure_psia, temperature_f, specific_gravity, correlation));
}

}  // namespace leakdet::gas
