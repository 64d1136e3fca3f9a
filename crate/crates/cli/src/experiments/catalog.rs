use smlab_core::reference_laws::{check_assumptions, check_growth, density_from_gstar_grid, gstar_from_density, ReferenceLaw, Support};
use smlab_core::stein_solver::ab_functions;
use smlab_core::Result;

use super::{num, Outcome, Table};
use crate::config::ExperimentConfig;

pub(super) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let c = &config.catalog;
    let tol = &config.tolerances;
    let mut out = Outcome::default();
    let mut table = Table::new("catalog.csv", &["law", "support_l", "support_u", "gstar_max_rel_err", "density_max_err", "a_max", "b_max", "assumptions"]);

    for spec in &c.laws {
        let law = ReferenceLaw::from_spec(spec)?;
        let name = law.name();
        let support = law.support();
        let grid = law.interior_grid(c.grid_points);
        let rho = |z: f64| law.density(z);

        let mut gstar_err = 0.0f64;
        for &z in &grid {
            let g = law.gstar(z);
            gstar_err = gstar_err.max((gstar_from_density(&rho, support, z)? - g).abs() / (1.0 + g.abs()));
        }
        out.exact(format!("gstar_rel_err/{name}"), gstar_err);
        out.check(format!("gstar/{name}"), gstar_err < tol.gstar_rel, format!("max rel err {gstar_err:.3e}"));

        let g = |z: f64| gstar_from_density(&rho, support, z).unwrap_or(f64::NAN);
        let back = density_from_gstar_grid(&g, law.abs_mean(), support, &grid)?;
        let density_err = grid.iter().zip(&back).map(|(&z, &b)| (b - law.density(z)).abs()).fold(0.0, f64::max);
        out.exact(format!("density_err/{name}"), density_err);
        out.check(format!("density/{name}"), density_err < tol.density_sup, format!("sup err {density_err:.3e}"));

        let rep = check_assumptions(&law)?;
        let assumptions = rep.a.passed && rep.b.passed;
        out.check(format!("assumptions/{name}"), assumptions, format!("A: {}; B: {}", rep.a.witness, rep.b.witness));

        let (mut a_max, mut b_max) = (f64::NAN, f64::NAN);
        if support.is_full_line() {
            (a_max, b_max) = grid.iter().map(|&x| ab_functions(&law, x)).fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), (x, y)| (a.max(x), b.max(y)));
            out.exact(format!("a_max/{name}"), a_max);
            out.exact(format!("b_max/{name}"), b_max);
            let ok = a_max <= tol.ab_slack && b_max <= tol.ab_slack;
            out.check(format!("ab_sign/{name}"), ok, format!("max A {a_max:.3e}, max B {b_max:.3e}"));
        }
        table.push(vec![
            name.to_string(),
            num(support.l),
            num(support.u),
            num(gstar_err),
            num(density_err),
            num(a_max),
            num(b_max),
            assumptions.to_string(),
        ]);
    }

    let mut growth = Table::new("growth.csv", &["p", "expected", "passes", "left_slope", "right_slope"]);
    let support = Support { l: -1.0, u: f64::INFINITY };
    for &p in &c.growth_powers {
        let g = move |x: f64| (x + 1.0).powf(p);
        let rep = check_growth(&g, support)?;
        let passes = rep.passes()?;
        let expected = (1.0..=2.0).contains(&p);
        out.check(format!("growth/p={p}"), passes == expected, format!("checker says {passes}, threshold says {expected}"));
        growth.push(vec![num(p), expected.to_string(), passes.to_string(), num(rep.left_slope), num(rep.right_slope)]);
    }
    out.tables = vec![table, growth];
    Ok(out)
}
