// Slow dimension-selection integration test: BIC over a (K1, K2) grid on
// data generated with K1 = 2, K2 = 1 non-ignorable truth.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lvmi/selection.hpp"
#include "lvmi/simulate.hpp"

using namespace lvmi;

TEST_CASE("BIC selects the generating dimensions in most replicates") {
    StudyIConfig gen;
    gen.n = 2000;
    gen.k1 = 2;
    gen.k2 = 1;
    gen.ignorable_truth = false;

    ModelSpec base;
    for (int j = 0; j < 10; ++j) base.variables.push_back({j, VarKind::Continuous, 0});
    for (int j = 10; j < 20; ++j) base.variables.push_back({j, VarKind::Binary, 0});
    base.K2 = 1;
    base.ignorable = false;

    int hits = 0;
    const int replicates = 10;
    for (int r = 0; r < replicates; ++r) {
        gen.param_seed = mix_seed(100, r);
        RngStream param_rng(gen.param_seed, Phase::DataGenParams, 0);
        const Psi psi_true = gen_params_study_I(gen, param_rng);
        const Dataset data = draw_dataset_latent(psi_true, gen.n, mix_seed(200, r));

        SAConfig sa;
        sa.iters = 1500;
        sa.burnin = 500;
        sa.seed = mix_seed(300, r);
        const SelectionResult res =
            select_dimensions(data, base, {{1, 1}, {2, 1}, {3, 1}}, sa, 5000);
        REQUIRE(res.argmin_index >= 0);
        const auto& best = res.rows[res.argmin_index];
        hits += (best.K1 == 2 && best.K2 == 1);
        for (const auto& row : res.rows) {
            CHECK_FALSE(row.failed);
            CHECK(row.loglik_se > 0.0);
        }
    }
    CHECK(hits >= 7);
}
