use std::sync::Arc;

use smlab_core::gaussian_chaos::SymmetricKernel;
use smlab_core::np_bound::trend;
use smlab_core::rng::{block_rng, derive_seed};
use smlab_core::stats::Estimate;
use smlab_core::wiener_poisson::{
    constant_atom_sequence, product_residual_wp, shrinking_atom_sequence, wp_fourth_moment_report, JumpAtom, LevyGrid, WPKernel, WpCaps, WpRow,
};
use smlab_core::Result;

use super::{num, Outcome, Table};
use crate::config::ExperimentConfig;

/// Two small grids mixing Brownian and jump cells.
fn product_grids() -> Result<Vec<(&'static str, Arc<LevyGrid>)>> {
    Ok(vec![
        ("one_atom", Arc::new(LevyGrid::uniform(2, 1.0, vec![JumpAtom { x: 0.5, nu: 3.0 }], 1.0)?)),
        ("two_atoms", Arc::new(LevyGrid::uniform(2, 1.0, vec![JumpAtom { x: 0.4, nu: 2.0 }, JumpAtom { x: -0.3, nu: 4.0 }], 0.5)?)),
    ])
}

fn ladder_rows(table: &mut Table, label: &str, rows: &[WpRow]) {
    for r in rows {
        table.push(vec![
            label.to_string(),
            r.time_cells.to_string(),
            r.cells.to_string(),
            num(r.max_flagged),
            num(r.fourth_moment.value),
            num(r.fourth_moment.stderr),
            r.fourth_moment_exact.map(num).unwrap_or_default(),
            num(r.d_w.value),
            num(r.d_w.stderr),
            num(r.var_gamma.value),
            num(r.var_gamma.stderr),
            num(r.jump_term.value),
            num(r.jump_term.stderr),
        ]);
    }
}

pub(super) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let c = &config.wp;
    let tol = &config.tolerances;
    let mut out = Outcome::default();

    let mut products = Table::new("wp_products.csv", &["grid", "q", "p", "residual_mean", "residual_mean_se", "residual_sq", "residual_sq_se"]);
    let mut rng = block_rng(derive_seed(config.seed, 0), 0);
    let mut tag = 1;
    for (label, levy) in product_grids()? {
        let grid = levy.measure()?;
        let kernels = (1..=c.max_order)
            .map(|q| WPKernel::from_kernel(&levy, SymmetricKernel::random(&grid, q, &mut rng)?))
            .collect::<Result<Vec<_>>>()?;
        for f in &kernels {
            for g in &kernels {
                let r = product_residual_wp(f, g, c.product_paths, derive_seed(config.seed, tag), WpCaps::default())?;
                tag += 1;
                let (q, p) = r.orders;
                out.estimate(format!("product_residual/{label}/{q},{p}"), r.mean);
                out.estimate(format!("product_residual_sq/{label}/{q},{p}"), r.mean_square);
                out.check(
                    format!("product/{label}/{q},{p}"),
                    r.consistent_with_zero(tol.k_product, 1e-12),
                    format!("mean {:.2e} +- {:.1e}, mean square {:.2e} +- {:.1e}", r.mean.value, r.mean.stderr, r.mean_square.value, r.mean_square.stderr),
                );
                products.push(vec![
                    label.to_string(),
                    q.to_string(),
                    p.to_string(),
                    num(r.mean.value),
                    num(r.mean.stderr),
                    num(r.mean_square.value),
                    num(r.mean_square.stderr),
                ]);
            }
        }
    }

    let mut ladder = Table::new(
        "wp_ladder.csv",
        &[
            "sequence",
            "time_cells",
            "cells",
            "max_flagged",
            "fourth_moment",
            "fourth_moment_se",
            "fourth_moment_exact",
            "d_w",
            "d_w_se",
            "var_gamma",
            "var_gamma_se",
            "jump_term",
            "jump_term_se",
        ],
    );

    let shrinking = wp_fourth_moment_report(&shrinking_atom_sequence(&c.shrinking)?, c.ladder_paths, derive_seed(config.seed, 1 << 20), WpCaps::ladder())?;
    for r in &shrinking {
        let n = r.time_cells;
        out.exact(format!("max_flagged/shrinking/{n}"), r.max_flagged);
        for fl in &r.flagged {
            out.exact(format!("flagged/shrinking/{n}/{},{}", fl.r, fl.s), fl.norm);
        }
        out.estimate(format!("fourth_moment/shrinking/{n}"), r.fourth_moment);
        out.estimate(format!("jump_term/shrinking/{n}"), r.jump_term);
        out.estimate(format!("d_w/shrinking/{n}"), r.d_w);
    }
    ladder_rows(&mut ladder, "shrinking", &shrinking);
    let ns: Vec<usize> = shrinking.iter().map(|r| r.time_cells).collect();
    for (name, values) in [
        ("flagged", shrinking.iter().map(|r| Estimate::exact(r.max_flagged)).collect::<Vec<_>>()),
        ("jump_term", shrinking.iter().map(|r| r.jump_term).collect()),
    ] {
        let t = trend(&ns, &values);
        out.exact(format!("slope/{name}"), t.slope);
        out.check(
            format!("shrinking/{name}"),
            t.decreasing(),
            format!("log-log slope {:.3}, {}/{} steps down, monotone within 2 stderr: {}", t.slope, t.decreasing_steps, t.steps, t.monotone),
        );
    }
    let top = shrinking.last().expect("validated ladder is nonempty").fourth_moment;
    out.check(
        "shrinking/terminal_fourth_moment",
        top.covers(3.0, tol.k_wp_terminal, 0.0),
        format!("E[X^4] = {:.4} +- {:.4}, {:.2} stderr from 3", top.value, top.stderr, (top.value - 3.0) / top.stderr),
    );

    let control = wp_fourth_moment_report(&constant_atom_sequence(&c.control)?, c.ladder_paths, derive_seed(config.seed, 1 << 21), WpCaps::ladder())?;
    for r in &control {
        let n = r.time_cells;
        let m4 = r.fourth_moment;
        out.estimate(format!("fourth_moment/control/{n}"), m4);
        out.exact(format!("max_flagged/control/{n}"), r.max_flagged);
        let z = (m4.value - 3.0).abs() / m4.stderr;
        out.check(format!("control/{n}"), z > tol.k_control, format!("E[X^4] = {:.3} +- {:.3}, {z:.1} stderr from 3", m4.value, m4.stderr));
    }
    ladder_rows(&mut ladder, "control", &control);
    out.tables = vec![products, ladder];
    Ok(out)
}
