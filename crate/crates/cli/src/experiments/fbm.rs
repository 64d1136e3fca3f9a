use smlab_core::fbm_lab::{covariance_mass, lt_scaling_probe, moment_ladder, random_forest_exponents, Regime};
use smlab_core::rng::{block_rng, derive_seed};
use smlab_core::Result;

use super::{num, Outcome, Table};
use crate::config::ExperimentConfig;

pub(super) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let c = &config.fbm;
    let tol = &config.tolerances;
    let mut out = Outcome::default();

    let lad = moment_ladder(&c.fgn(derive_seed(config.seed, 0)), &c.t_ladder)?;
    let mut ladder = Table::new("fbm_ladder.csv", &["T", "m2", "m2_se", "m3", "m3_se", "m4", "m4_se"]);
    for r in &lad.rows {
        for (k, e) in [(2, r.m2), (3, r.m3), (4, r.m4)] {
            out.estimate(format!("m{k}/{}", r.t), e);
        }
        out.estimate(format!("mean_f_tilde/{}", r.t), r.mean_f_tilde);
        ladder.push(vec![r.t.to_string(), num(r.m2.value), num(r.m2.stderr), num(r.m3.value), num(r.m3.stderr), num(r.m4.value), num(r.m4.stderr)]);
    }
    let mut targets = Table::new("fbm_targets.csv", &["moment", "target", "terminal", "terminal_se", "band", "within_band", "approaching"]);
    for v in lad.verdicts(tol.fbm_bands) {
        out.check(
            format!("moment/m{}", v.moment),
            v.within_band && v.approaching,
            format!(
                "terminal {:.3} +- {:.3} vs {} +- {}; approaching: {}",
                v.terminal.value, v.terminal.stderr, v.target, v.band, v.approaching
            ),
        );
        targets.push(vec![
            v.moment.to_string(),
            num(v.target),
            num(v.terminal.value),
            num(v.terminal.stderr),
            num(v.band),
            v.within_band.to_string(),
            v.approaching.to_string(),
        ]);
    }

    let mut mass = Table::new("fbm_mass.csv", &["T", "covariance_mass", "target"]);
    let mut last = f64::NAN;
    for &t in &c.t_ladder {
        last = covariance_mass(c.hurst, t);
        out.exact(format!("covariance_mass/{t}"), last);
        mass.push(vec![t.to_string(), num(last), num(c.covariance_mass_target)]);
    }
    out.check(
        "covariance_mass",
        (last - c.covariance_mass_target).abs() <= tol.covariance_mass,
        format!("T^(-2H) sum C = {last:.6} at T = {}, claimed limit {}", c.t_ladder.last().unwrap(), c.covariance_mass_target),
    );

    let mut scaling = Table::new("fbm_scaling.csv", &["P", "S", "edges", "slope", "envelope", "regime", "respects_envelope"]);
    let mut rng = block_rng(derive_seed(config.seed, 1), 0);
    for &p in &c.forest_sizes {
        for i in 0..c.forests {
            let g = random_forest_exponents(p, &mut rng)?;
            let probe = lt_scaling_probe(c.hurst, &g, &c.probe_horizons, c.probe_points)?;
            let ok = probe.respects_envelope(tol.envelope_slack);
            out.exact(format!("lt_slope/P={p}/{i}"), probe.slope);
            out.check(format!("lt_envelope/P={p}/{i}"), ok, format!("slope {:.3}, envelope {:.3}", probe.slope, probe.envelope));
            let edges = g.edges.iter().map(|(a, b, e)| format!("{a}-{b}^{e}")).collect::<Vec<_>>().join(" ");
            let regime = match probe.regime {
                Regime::Decays => "decays",
                Regime::Bounded => "bounded",
            };
            scaling.push(vec![p.to_string(), g.s().to_string(), edges, num(probe.slope), num(probe.envelope), regime.into(), ok.to_string()]);
        }
    }
    out.tables = vec![ladder, targets, mass, scaling];
    Ok(out)
}
