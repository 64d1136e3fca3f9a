use std::collections::BTreeMap;

use smlab_core::malliavin_numeric::{gamma_draw, GammaMethod, MehlerSpec, SmoothFunctional};
use smlab_core::np_bound::{np_estimate, KConstant, KSource};
use smlab_core::reference_laws::ReferenceLaw;
use smlab_core::rng::derive_seed;
use smlab_core::Result;

use super::{num, Outcome, Table};
use crate::config::ExperimentConfig;

pub(super) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let c = &config.npbound;
    let tol = &config.tolerances;
    let mut out = Outcome::default();
    let spec = MehlerSpec { nodes: c.mehler_nodes, inner: c.mehler_inner, allow_fd: false };
    let mut table = Table::new(
        "npbound.csv",
        &["construction", "law", "method", "n", "np_l1", "np_l1_se", "np_l1_regressed", "np_l2", "d_w", "d_w_se", "k", "sandwich_holds"],
    );

    // X = I_2(e (x) e) = xi^2 - 1 against the centered chi-square, and
    // X = I_1(e) = xi against the normal: both give g*(X) = g_X exactly
    let constructions = [
        ("chi2_i2", SmoothFunctional::hermite(2, 1), "chi2", KConstant { value: 1.0, source: KSource::Caller }),
        ("normal_i1", SmoothFunctional::linear(vec![1.0]), "normal", KConstant::normal_wasserstein()),
    ];
    for (i, (label, f, law_name, k)) in constructions.into_iter().enumerate() {
        let law = ReferenceLaw::catalog(law_name, &BTreeMap::new())?;
        for (j, fast) in [true, false].into_iter().enumerate() {
            let seed = derive_seed(config.seed, (2 * i + j) as u64);
            let s = gamma_draw(&f, c.n_paths, seed, &spec, fast)?;
            let method = match s.meta.method {
                GammaMethod::FastPath => "fast_path",
                GammaMethod::Mehler => "mehler",
                GammaMethod::Chaos => "chaos",
            };
            let r = np_estimate(&law, &s, k, c.bins)?;
            let limit = if fast { tol.np_fast } else { tol.np_mehler };
            out.estimate(format!("np_l1/{label}/{method}"), r.np_l1);
            out.estimate(format!("np_l1_regressed/{label}/{method}"), r.np_l1_regressed);
            out.estimate(format!("d_w/{label}/{method}"), r.d_w_empirical);
            out.check(format!("exact_zero/{label}/{method}"), r.np_l1.value < limit, format!("np_l1 {:.3e}, limit {limit:e}", r.np_l1.value));
            table.push(vec![
                label.to_string(),
                law_name.to_string(),
                method.to_string(),
                r.n.to_string(),
                num(r.np_l1.value),
                num(r.np_l1.stderr),
                num(r.np_l1_regressed.value),
                num(r.np_l2.value),
                num(r.d_w_empirical.value),
                num(r.d_w_empirical.stderr),
                num(r.k.value),
                r.sandwich_holds.to_string(),
            ]);
        }
    }
    out.tables = vec![table];
    Ok(out)
}
