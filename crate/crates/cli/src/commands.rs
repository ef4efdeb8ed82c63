//! Dispatch from a resolved spec to the simulation routines.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use twistlab::baselines::{ghz_bound_points, squeezing_curve, QcrbAxis};
use twistlab::dissipation::sigma_plateau;
use twistlab::oracle::oracle_check;
use twistlab::rydberg::{largest_feasible_atoms, rydberg_gain_point};
use twistlab::{
    best_squeezing, cavity_map, critical_atom_number, detuning_window, gain_sweep, make_css, optimal_twisting,
    optimize_cavity, qcrb_curve, wigner_grid, CavityOptimum, DetectionNoise, Detuning, GridSpec, SweepAxis,
    TwistSign,
};

use crate::config::{Command, SweepSpec};
use crate::error::CliError;
use crate::table::{columns, ResultTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

type Out = Result<ResultTable, CliError>;

/// Evaluates the spec. Deterministic: the same spec gives the same table.
pub fn run(spec: &SweepSpec) -> Out {
    let mut table = match spec.command {
        Command::EchoSweep => echo_sweep(spec),
        Command::NoiseSweep => noise_sweep(spec),
        Command::CavityGain => cavity_gain(spec),
        Command::CavityMap => cavity_map_table(spec),
        Command::RydbergDesign => rydberg_design(spec),
        Command::Baselines => baselines(spec),
        Command::Wigner => wigner(spec),
        Command::OracleCheck => oracle(spec),
    }?;
    let mut head = vec![
        ("command".to_string(), spec.command.to_string()),
        ("version".to_string(), VERSION.to_string()),
    ];
    head.extend(spec.echo());
    head.append(&mut table.metadata);
    table.metadata = head;
    Ok(table)
}

/// Inserts the acquisition time after the version line.
pub fn stamp(table: &mut ResultTable, timestamp: &str) {
    let at = table.metadata.iter().position(|(k, _)| k == "version").map_or(0, |i| i + 1);
    table.metadata.insert(at, ("timestamp".to_string(), timestamp.to_string()));
}

fn core(command: Command) -> impl Fn(twistlab::Error) -> CliError {
    move |e| CliError::from_core(command, e)
}

fn twist_grid(spec: &SweepSpec) -> Result<Vec<f64>, CliError> {
    let n = spec.int("n");
    let q_max = spec.float_or_keyword("q-max").unwrap_or(n as f64 * FRAC_PI_2);
    GridSpec::range(spec.float("q-min"), q_max, spec.int("points"), spec.scale("scale"))
        .values()
        .map_err(|e| CliError::config("q-min", format!("twisting grid: {e}")))
}

/// The keyword `opt` resolves to the optimal twisting strength.
fn twist_or_optimum(spec: &SweepSpec) -> Result<f64, CliError> {
    match spec.float_or_keyword("q") {
        Some(q) => Ok(q),
        None => optimal_twisting(spec.int("n"))
            .map(|o| o.q_opt)
            .map_err(core(spec.command)),
    }
}

fn echo_sweep(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let n = spec.int("n");
    let mut grid = twist_grid(spec)?;
    let optimum = if n >= 2 { Some(optimal_twisting(n).map_err(core(cmd))?) } else { None };
    let mut inserted = None;
    if let (true, Some(o)) = (spec.flag("include-optimum"), optimum) {
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        if o.q_opt >= lo && o.q_opt <= hi {
            let at = grid.partition_point(|&q| q < o.q_opt);
            if grid.get(at) != Some(&o.q_opt) {
                grid.insert(at, o.q_opt);
            }
            inserted = Some(at);
        }
    }
    let noise = DetectionNoise::new(spec.float("r-det")).map_err(core(cmd))?;
    let rows = gain_sweep(n, &SweepAxis::Twist { q: grid, noise }).map_err(core(cmd))?;
    if rows.iter().all(|r| r.delta_phi.is_none()) {
        return Err(CliError::numeric(cmd, "echo slope vanishes at every grid point; sensitivity undefined"));
    }

    let mut t = ResultTable::new(columns(&[
        ("q", None),
        ("delta_phi", Some("rad")),
        ("gain", Some("dB")),
        ("gain_linear", None),
        ("optimum", None),
    ]));
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![
            r.parameter.into(),
            r.delta_phi.into(),
            r.gain_db.into(),
            r.gain_linear.into(),
            (inserted == Some(i)).into(),
        ]);
    }
    if let Some(o) = optimum {
        t.meta("q_opt", format!("{:?}", o.q_opt));
        t.meta("delta_phi_min", format!("{:?}", o.delta_phi_min));
    }
    Ok(t)
}

fn noise_sweep(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let n = spec.int("n");
    let q = twist_or_optimum(spec)?;
    let delta_n = spec.grid("delta-n").expect("delta-n is a grid");
    let echo = gain_sweep(n, &SweepAxis::Resolution { delta_n: delta_n.clone(), q }).map_err(core(cmd))?;
    let squeezing: Vec<_> = delta_n
        .par_iter()
        .map(|&dn| best_squeezing(n, DetectionNoise::from_delta_n(n, dn)?))
        .collect::<twistlab::Result<_>>()
        .map_err(core(cmd))?;
    let ghz = ghz_bound_points(n, &delta_n).map_err(core(cmd))?;

    let mut t = ResultTable::new(columns(&[
        ("delta_n", Some("atoms")),
        ("r_det", None),
        ("echo_delta_phi", Some("rad")),
        ("echo_gain", Some("dB")),
        ("squeezing_q", None),
        ("squeezing_gain", Some("dB")),
        ("ghz_gain", Some("dB")),
    ]));
    for ((e, s), g) in echo.iter().zip(&squeezing).zip(&ghz) {
        let r_det = DetectionNoise::from_delta_n(n, e.parameter).map_err(core(cmd))?.r_det;
        t.push(vec![
            e.parameter.into(),
            r_det.into(),
            e.delta_phi.into(),
            e.gain_db.into(),
            s.q.into(),
            s.delta_phi.map(|d| gain_db(n, d)).into(),
            gain_db(n, g.delta_phi).into(),
        ]);
    }
    t.meta("q_echo", format!("{q:?}"));
    Ok(t)
}

fn gain_db(n: usize, delta_phi: f64) -> f64 {
    twistlab::echo::gain_db(n, delta_phi)
}

fn cavity_gain(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let r = spec.float("r");
    let detunings: Vec<Detuning> = match spec.grid("d") {
        Some(ds) => ds.into_iter().map(Detuning::Fixed).collect(),
        None => vec![Detuning::Free],
    };
    let mut points = Vec::new();
    for &n in &spec.atoms("n") {
        for &eta in &spec.grid("eta").expect("eta is a grid") {
            for &d in &detunings {
                points.push((n, eta, d));
            }
        }
    }
    let results: Vec<CavityOptimum> = points
        .par_iter()
        .map(|&(n, eta, d)| optimize_cavity(n, eta, r, d))
        .collect::<twistlab::Result<_>>()
        .map_err(core(cmd))?;

    let mut t = ResultTable::new(columns(&[
        ("n", Some("atoms")),
        ("eta", None),
        ("d", None),
        ("q", None),
        ("sigma0_sq", None),
        ("sigma_dephasing_sq", None),
        ("sigma_scatter_sq", None),
        ("sigma_sq", None),
        ("gain", Some("dB")),
        ("plateau_gain", Some("dB")),
    ]));
    for (&(n, eta, _), o) in points.iter().zip(&results) {
        let s = &o.sigma;
        t.push(vec![
            n.into(),
            eta.into(),
            o.d.into(),
            o.q.into(),
            s.sigma0_sq.into(),
            s.sigma_dephasing_sq.into(),
            s.sigma_scatter_sq.into(),
            s.sigma_total_sq.into(),
            s.gain_db().into(),
            (-10.0 * sigma_plateau(n, eta, r).log10()).into(),
        ]);
    }
    Ok(t)
}

fn cavity_map_table(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let n = spec.int("n");
    let (phase, d, eta) = (spec.float("phase"), spec.float("d"), spec.float("eta"));
    let mut t = ResultTable::new(columns(&[
        ("photons", None),
        ("chi_t", Some("rad")),
        ("gamma_t", None),
        ("gamma_sc_t", None),
        ("q", None),
        ("dephasing_per_twist", None),
        ("scattering_per_twist", None),
    ]));
    for p in spec.grid("photons").expect("photons is a grid") {
        let m = cavity_map(p, phase, d, eta).map_err(core(cmd))?;
        t.push(vec![
            p.into(),
            m.chi_t.into(),
            m.gamma_t.into(),
            m.gamma_sc_t.into(),
            m.q(n).into(),
            m.dephasing_per_twist().into(),
            m.scattering_per_twist().into(),
        ]);
    }
    Ok(t)
}

fn rydberg_design(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let eps = spec.float("epsilon");
    let (c_lo, c_hi) = (spec.float("c-tilde-min"), spec.float("c-tilde-max"));
    if c_lo > c_hi {
        return Err(CliError::config("c-tilde-min", "'c-tilde-min' exceeds 'c-tilde-max'"));
    }
    let atoms = spec.atoms("n");
    let rows: Vec<_> = atoms
        .par_iter()
        .map(|&n| -> twistlab::Result<_> {
            Ok((
                detuning_window(n, eps, c_lo)?,
                detuning_window(n, eps, c_hi)?,
                rydberg_gain_point(n, eps, c_lo)?,
                rydberg_gain_point(n, eps, c_hi)?,
            ))
        })
        .collect::<twistlab::Result<_>>()
        .map_err(core(cmd))?;

    let mut t = ResultTable::new(columns(&[
        ("n", Some("atoms")),
        ("delta_min", Some("Gamma")),
        ("delta_max_low", Some("Gamma")),
        ("delta_max_high", Some("Gamma")),
        ("feasible_low", None),
        ("feasible_high", None),
        ("q_ideal", None),
        ("gain_ideal", Some("dB")),
        ("q_low", None),
        ("gain_low", Some("dB")),
        ("q_high", None),
        ("gain_high", Some("dB")),
        ("equivalent_atoms_high", Some("atoms")),
    ]));
    for (&n, (wl, wh, gl, gh)) in atoms.iter().zip(&rows) {
        t.push(vec![
            n.into(),
            wl.delta_min.into(),
            wl.delta_max.into(),
            wh.delta_max.into(),
            wl.feasible.into(),
            wh.feasible.into(),
            gh.q_ideal.into(),
            gh.gain_ideal_db.into(),
            gl.q.into(),
            gl.gain_db.into(),
            gh.q.into(),
            gh.gain_db.into(),
            gh.equivalent_atoms.into(),
        ]);
    }
    for (label, c) in [("low", c_lo), ("high", c_hi)] {
        let n_cr = critical_atom_number(eps, c).map_err(core(cmd))?;
        let largest = largest_feasible_atoms(eps, c).map_err(core(cmd))?;
        t.meta(format!("n_cr_{label}"), format!("{n_cr:?}"));
        t.meta(
            format!("largest_feasible_{label}"),
            largest.map_or_else(|| "none".to_string(), |n| n.to_string()),
        );
    }
    Ok(t)
}

fn baselines(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let n = spec.int("n");
    let grid = twist_grid(spec)?;
    let echo = gain_sweep(
        n,
        &SweepAxis::Twist {
            q: grid.clone(),
            noise: DetectionNoise::NONE,
        },
    )
    .map_err(core(cmd))?;
    let qcrb = qcrb_curve(n, &grid, QcrbAxis::Optimal).map_err(core(cmd))?;
    let qcrb_sy = qcrb_curve(n, &grid, QcrbAxis::Y).map_err(core(cmd))?;
    let squeezing = squeezing_curve(n, &grid, DetectionNoise::NONE).map_err(core(cmd))?;
    let heisenberg = 10.0 * (n as f64).log10();

    let mut t = ResultTable::new(columns(&[
        ("q", None),
        ("echo_gain", Some("dB")),
        ("qcrb_gain", Some("dB")),
        ("qcrb_sy_gain", Some("dB")),
        ("squeezing_gain", Some("dB")),
        ("sql_gain", Some("dB")),
        ("heisenberg_gain", Some("dB")),
    ]));
    for (i, &q) in grid.iter().enumerate() {
        t.push(vec![
            q.into(),
            echo[i].gain_db.into(),
            qcrb.points[i].gain_db.into(),
            qcrb_sy.points[i].gain_db.into(),
            squeezing.points[i].gain_db.into(),
            0.0.into(),
            heisenberg.into(),
        ]);
    }
    if n >= 2 {
        t.meta("q_opt", format!("{:?}", optimal_twisting(n).map_err(core(cmd))?.q_opt));
    }
    t.meta("q_ghz", format!("{:?}", n as f64 * FRAC_PI_2));
    Ok(t)
}

fn wigner(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let n = spec.int("n");
    let q = twist_or_optimum(spec)?;
    let state = make_css(n)
        .and_then(|s| s.twisted(q, TwistSign::Forward))
        .map_err(core(cmd))?;
    let g = wigner_grid(&state, spec.int("n-theta"), spec.int("n-phi")).map_err(core(cmd))?;

    let mut t = ResultTable::new(columns(&[("theta", Some("rad")), ("phi", Some("rad")), ("w", None)]));
    for (i, &theta) in g.theta.iter().enumerate() {
        for (j, &phi) in g.phi.iter().enumerate() {
            t.push(vec![theta.into(), phi.into(), g.at(i, j).into()]);
        }
    }
    t.meta("q_resolved", format!("{q:?}"));
    t.meta("w_min", format!("{:?}", g.min()));
    t.meta("w_max", format!("{:?}", g.max()));
    t.meta("integral", format!("{:?}", g.integrate()));
    t.meta("negative_volume", format!("{:?}", g.negative_volume()));
    Ok(t)
}

fn oracle(spec: &SweepSpec) -> Out {
    let cmd = spec.command;
    let q = twist_or_optimum(spec)?;
    let report = oracle_check(spec.int("n"), q, spec.float("phi")).map_err(core(cmd))?;
    let mut t = ResultTable::new(columns(&[
        ("quantity", None),
        ("pipeline", None),
        ("oracle", None),
        ("abs_error", None),
        ("pass", None),
    ]));
    for row in &report.rows {
        t.push(vec![
            row.quantity.as_str().into(),
            row.pipeline.into(),
            row.oracle.into(),
            row.abs_error().into(),
            row.passed(report.tolerance).into(),
        ]);
    }
    t.meta("q_resolved", format!("{q:?}"));
    t.meta("tolerance", format!("{:?}", report.tolerance));
    t.meta("max_error", format!("{:?}", report.max_error()));
    t.meta("verdict", if report.passed() { "PASS" } else { "FAIL" });
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::resolve;
    use crate::table::Cell;

    fn spec(command: Command, pairs: &[(&str, &str)]) -> SweepSpec {
        let flags: Vec<_> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        resolve(command, &[], &flags).unwrap()
    }

    #[test]
    fn echo_sweep_marks_the_optimum() {
        let t = run(&spec(Command::EchoSweep, &[("n", "100"), ("points", "20")])).unwrap();
        assert_eq!(t.rows.len(), 21);
        let flagged: Vec<_> = t.rows.iter().filter(|r| r[4] == Cell::Bool(true)).collect();
        assert_eq!(flagged.len(), 1);
        let q: Vec<f64> = t.column_f64("q").unwrap().into_iter().map(Option::unwrap).collect();
        assert!(q.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_atom_has_no_slope() {
        let err = run(&spec(Command::EchoSweep, &[("n", "1"), ("points", "5")])).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn oversize_requests_are_config_errors() {
        let err = run(&spec(Command::Wigner, &[("n", "500")])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = run(&spec(Command::OracleCheck, &[("n", "40")])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn metadata_echoes_every_parameter() {
        let s = spec(Command::CavityMap, &[("photons", "1e4,1e5")]);
        let t = run(&s).unwrap();
        for key in s.params.keys() {
            assert!(t.meta_value(key).is_some(), "{key}");
        }
        assert_eq!(t.meta_value("command"), Some("cavity-map"));
        let mut stamped = t.clone();
        stamp(&mut stamped, "now");
        assert_eq!(stamped.metadata[2], ("timestamp".to_string(), "now".to_string()));
    }

    #[test]
    fn cavity_grid_is_row_major_in_n() {
        let t = run(&spec(Command::CavityGain, &[("n", "100,1000"), ("eta", "1,10"), ("d", "10")])).unwrap();
        let n: Vec<_> = t.column_f64("n").unwrap().into_iter().map(Option::unwrap).collect();
        let eta: Vec<_> = t.column_f64("eta").unwrap().into_iter().map(Option::unwrap).collect();
        assert_eq!(n, vec![100.0, 100.0, 1000.0, 1000.0]);
        assert_eq!(eta, vec![1.0, 10.0, 1.0, 10.0]);
    }
}
