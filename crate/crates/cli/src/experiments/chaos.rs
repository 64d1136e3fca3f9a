use smlab_core::gaussian_chaos::{product_formula_residual, GridMeasure, SymmetricKernel};
use smlab_core::np_bound::{normal_clt_ladder, trend};
use smlab_core::rng::{block_rng, derive_seed};
use smlab_core::stats::Estimate;
use smlab_core::Result;

use super::{num, Outcome, Table};
use crate::config::ExperimentConfig;

pub(super) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let c = &config.chaos;
    let k = config.tolerances.k_product;
    let mut out = Outcome::default();

    let grid = GridMeasure::uniform(c.product_cells, 1.0)?;
    let mut rng = block_rng(derive_seed(config.seed, 0), 0);
    let kernels = (1..=c.max_order).map(|q| SymmetricKernel::random(&grid, q, &mut rng)).collect::<Result<Vec<_>>>()?;
    let mut products = Table::new("chaos_products.csv", &["q", "p", "residual_mean", "residual_mean_se", "residual_sq", "residual_sq_se"]);
    for (i, f) in kernels.iter().enumerate() {
        for (j, g) in kernels.iter().enumerate() {
            let seed = derive_seed(config.seed, 1 + (i * c.max_order + j) as u64);
            let r = product_formula_residual(f, g, c.product_paths, seed)?;
            let (q, p) = r.orders;
            out.estimate(format!("product_residual/{q},{p}"), r.mean);
            out.estimate(format!("product_residual_sq/{q},{p}"), r.mean_square);
            out.check(
                format!("product/{q},{p}"),
                r.consistent_with_zero(k, 1e-12),
                format!("mean {:.2e} +- {:.1e}, mean square {:.2e} +- {:.1e}", r.mean.value, r.mean.stderr, r.mean_square.value, r.mean_square.stderr),
            );
            products.push(vec![q.to_string(), p.to_string(), num(r.mean.value), num(r.mean.stderr), num(r.mean_square.value), num(r.mean_square.stderr)]);
        }
    }

    let rows = normal_clt_ladder(&c.ladder, c.ladder_paths, derive_seed(config.seed, 1 << 20))?;
    let mut ladder = Table::new(
        "chaos_ladder.csv",
        &["n", "max_contraction", "excess_kurtosis", "excess_kurtosis_se", "var_gamma", "var_gamma_se", "bound", "bound_se", "d_w", "d_w_se", "np_l1", "np_l1_se"],
    );
    for r in &rows {
        let n = r.n;
        out.exact(format!("max_contraction/{n}"), r.max_contraction);
        out.estimate(format!("excess_kurtosis/{n}"), r.excess_kurtosis);
        out.estimate(format!("var_gamma/{n}"), r.chaos.var_gamma);
        out.estimate(format!("d_w/{n}"), r.d_w);
        out.estimate(format!("np_l1/{n}"), r.np_l1);
        out.check(
            format!("variance_bound/{n}"),
            r.bound_holds,
            format!("Var(|DX|^2/2) {:.4e} vs (E X^4 - 3)/6 {:.4e}", r.chaos.var_gamma.value, r.chaos.bound.value),
        );
        ladder.push(vec![
            n.to_string(),
            num(r.max_contraction),
            num(r.excess_kurtosis.value),
            num(r.excess_kurtosis.stderr),
            num(r.chaos.var_gamma.value),
            num(r.chaos.var_gamma.stderr),
            num(r.chaos.bound.value),
            num(r.chaos.bound.stderr),
            num(r.d_w.value),
            num(r.d_w.stderr),
            num(r.np_l1.value),
            num(r.np_l1.stderr),
        ]);
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let series: [(&str, Vec<Estimate>); 4] = [
        ("contraction", rows.iter().map(|r| Estimate::exact(r.max_contraction)).collect()),
        ("excess_kurtosis", rows.iter().map(|r| r.excess_kurtosis).collect()),
        ("var_gamma", rows.iter().map(|r| r.chaos.var_gamma).collect()),
        ("d_w", rows.iter().map(|r| r.d_w).collect()),
    ];
    for (name, values) in series {
        let t = trend(&ns, &values);
        out.exact(format!("slope/{name}"), t.slope);
        out.check(
            format!("ladder/{name}"),
            t.decreasing(),
            format!("log-log slope {:.3}, {}/{} steps down, monotone within 2 stderr: {}", t.slope, t.decreasing_steps, t.steps, t.monotone),
        );
    }
    out.tables = vec![products, ladder];
    Ok(out)
}
