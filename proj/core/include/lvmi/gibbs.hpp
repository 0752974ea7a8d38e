#pragma once

#include <Eigen/Core>

#include "lvmi/psi.hpp"
#include "lvmi/rng.hpp"
#include "lvmi/samplers.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

// Auxiliary variables for one unit. Full-J vectors; only the slots matching
// each variable's kind are meaningful.
struct AugmentedState {
    Eigen::VectorXd omega_b;  // binary Polya-Gamma draws
    Eigen::VectorXd W;        // ordinal latent logistic responses
    Eigen::VectorXd omega_o;  // ordinal Polya-Gamma draws
    Eigen::VectorXd omega_z;  // missingness Polya-Gamma draws (K2 >= 1)

    // omega <- 0.5 everywhere; W <- interval midpoint (finite intervals) or
    // threshold +-1, per the unit's current categories. The first sweep
    // redraws everything, so any positive start is valid.
    static AugmentedState init(const Psi& psi, const UnitState& unit);
};

// Fixed step order for a full sweep:
//   aux(binary, ordinal, missingness) -> eta -> xi -> y_mis.
struct SweepPlan {
    bool model_missingness = false;  // false for K2 = 0 specs

    static SweepPlan for_spec(const ModelSpec& spec);
};

// Scratch buffers reused across sweeps of a worker; no allocation inside
// the sweep loop.
struct GibbsWorkspace {
    Eigen::MatrixXd prec_eta, prec_xi;
    Eigen::VectorXd shift_eta, shift_xi, work_eta, work_xi;

    explicit GibbsWorkspace(const ModelSpec& spec);
};

// omega_b[j] ~ PG(1, |alpha0_j + alpha_j' eta|) for each binary j.
void draw_aux_binary(const UnitState& unit, const Psi& psi, AugmentedState& aug, RngStream& rng);

// Two-stage ordinal update: W_j ~ TN(alpha_j' eta, 1/omega_o[j]) restricted
// to the current category's threshold interval, then
// omega_o[j] ~ PG(2, |alpha_j' eta - W_j|).
void draw_aux_ordinal(const UnitState& unit, const Psi& psi, AugmentedState& aug, RngStream& rng);

// omega_z[j] ~ PG(1, |gamma0_j + gamma_j' xi|) for every j. Requires K2 >= 1.
void draw_aux_missingness(const UnitState& unit, const Psi& psi, AugmentedState& aug,
                          RngStream& rng);

// Exact MVN full conditional of eta:
//   precision  A' D_Omega A + kappa' kappa + I,
//   shift      A' mu_data + kappa'(xi - zeta x) + beta x,
// with D_Omega carrying 1/sigma_j^2 (continuous), omega_b (binary),
// omega_o (ordinal), and mu_data the matching working responses.
void draw_eta(UnitState& unit, const AugmentedState& aug, const Psi& psi, RngStream& rng,
              GibbsWorkspace& ws);

// Exact MVN full conditional of xi:
//   precision  Gamma' D_{omega_z} Gamma + I,
//   shift      Gamma'(z - 1/2 - D_{omega_z} gamma0) + zeta x + kappa eta.
void draw_xi(UnitState& unit, const AugmentedState& aug, const Psi& psi, RngStream& rng,
             GibbsWorkspace& ws);

// Redraws y_j from g_j(. | eta) for every missing slot; observed slots are
// never touched.
void draw_missing_y(UnitState& unit, const Psi& psi, RngStream& rng);

// One full sweep in plan order. Leaves invariant the conditional
// distribution of (y_mis, eta, xi) given the observed data.
void gibbs_sweep(UnitState& unit, AugmentedState& aug, const Psi& psi, const SweepPlan& plan,
                 RngStream& rng, GibbsWorkspace& ws);

// Shared initialization used by fitting and imputation: missing y slots
// start at the observed mean (continuous), mode (binary), or median
// category (ordinal); eta and xi start at zero.
void init_missing_values(Eigen::MatrixXd& y,
                         const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& z,
                         const ModelSpec& spec);

}  // namespace lvmi
