#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "lvmi/psi.hpp"
#include "lvmi/rng.hpp"
#include "lvmi/types.hpp"

namespace lvmi {

struct SAConfig {
    int iters = 3000;          // T
    int burnin = 1000;         // T0
    double step_scale = 0.01;  // A in rho_t = A t^{-c}
    double step_exponent = 0.51;
    std::uint64_t seed = 0;
    int workers = 0;           // 0 = auto
    bool record_trace = false;
    // Per-iteration update norm cap, as a multiple of sqrt(dim). Loose
    // enough to be inactive after burn-in; activations are counted.
    double clip_multiple = 10.0;
    // Per-coordinate cap on a single update (unconstrained scale). The raw
    // N-summed gradient makes early iterations violently overshoot (log
    // sigma can jump by N * rho_t); this trust cap tames the transient and
    // deactivates once rho_t * N is small.
    double coord_cap = 0.5;

    void validate() const;
};

struct BlockDiagnostic {
    std::string block;
    double trace_mean = 0.0;        // mean over the last diagnostic window
    double half_window_drift = 0.0; // |second-half mean - first-half mean|
};

struct FitResult {
    Psi psi_hat;
    // Natural-scale parameter snapshots, one row per iteration (optional).
    std::optional<Eigen::MatrixXd> trace;
    std::vector<BlockDiagnostic> diagnostics;
    int clip_activations = 0;      // iterations where any clip engaged
    int last_clip_iteration = 0;   // 0 = never; expected <= burnin
};

// rho_t = A t^{-c}.
double step_size(int t, const SAConfig& cfg);

// Moment-based starting values: intercepts and thresholds from observed
// marginals, residual SDs from observed SDs, loadings U(-0.5, 0.5), prior
// coefficients U(-0.1, 0.1), constraints applied.
Psi init_psi(const Dataset& data, const ModelSpec& spec, RngStream& rng);

// Stochastic-approximation ML fit: per iteration, one Gibbs sweep per unit
// under the current parameters, then a Robbins-Monro update on the
// unconstrained scale with the summed complete-data score. Returns the
// trajectory average over iterations burnin+1..iters, averaged on the
// unconstrained scale and mapped back.
FitResult fit(const Dataset& data, const ModelSpec& spec, const SAConfig& cfg);

}  // namespace lvmi
