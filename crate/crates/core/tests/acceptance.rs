//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs the reference configuration (N = 128, L = 16π,
//! n = 40, dt = 2·10⁻³, T = 1) plus the refinement and cutoff variants, so
//! expect a few minutes on one core.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use ddmx::calibration::{self, Calibration};
use ddmx::integrator::{friedrichs_sequence, simulate, Simulation};
use ddmx::littlewood_paley::{decompose, reconstruct, DyadicFilterBank};
use ddmx::presets::build_initial_state;
use ddmx::synth::{gaussian_bump, random_band_limited};
use ddmx::verification::{
    bernstein_ratios, check_bernstein, check_gauss_law, check_gn, check_growth_bound, check_lp_log_bound,
    check_scalar_inequalities, contraction_probe, energy_balance, field_corpus, gn_ratio, random_pairs,
    GrowthConstants, CONTRACTION_DELTA, CORPUS_SIZE, ENERGY_TOLERANCE, GAUSS_TOLERANCE,
};
use ddmx::{Coupling, Grid, IntegratorConfig, Preset, RunConfig, ScalarField, State, TrajectoryRecord, VectorField3};

// Regression pins, fixed from the first full run of this suite.
const PIN_FRIEDRICHS: [f64; 2] = [1.290766742419907, 0.1602764287989872];
const PIN_GROWTH_MARGIN: f64 = 12.021704331;
const PIN_CONTRACTION_RATE: f64 = -0.085181517;
const PIN_TOLERANCE: f64 = 1e-5;

type Outcome = Result<String, String>;

fn reference() -> RunConfig {
    RunConfig {
        grid_n: 128,
        domain_length: 16.0 * PI,
        cutoff_n: Some(40.0),
        dt: 2e-3,
        t_end: 1.0,
        preset: Preset::GaussianPair,
        seed: 1,
        amplitude: 0.5,
        ..RunConfig::default()
    }
}

fn run(cfg: &RunConfig) -> (State, TrajectoryRecord) {
    let s = build_initial_state(cfg).expect("valid configuration");
    let traj = simulate(&s, &cfg.integrator_config()).expect("no blow-up");
    (s, traj)
}

fn pinned(name: &str, got: f64, pin: f64) -> Result<(), String> {
    if ((got - pin) / pin).abs() <= PIN_TOLERANCE {
        Ok(())
    } else {
        Err(format!("{name} {got:.9} drifted from pinned {pin:.9}"))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn maxwell_isometry() -> Outcome {
    let cfg = RunConfig {
        preset: Preset::MaxwellOnly,
        cutoff_n: None,
        ..reference()
    };
    let s0 = build_initial_state(&cfg).unwrap();
    let mut sim = Simulation::new(&s0, &cfg.integrator_config()).unwrap();
    let start = Instant::now();
    for _ in 0..1000 {
        sim.advance(2e-3).map_err(|e| e.to_string())?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let s = sim.state();
    let norm = |s: &State| (s.e.components().iter().chain(s.b.components()).map(|c| l2_sq(c)).sum::<f64>()).sqrt();
    let drift = (norm(&s) / norm(&s0) - 1.0).abs();
    ensure(drift <= 1e-12, || format!("relative drift {drift:.3e} > 1e-12"))?;
    ensure(elapsed <= 10.0, || format!("1000 steps took {elapsed:.2} s > 10 s"))?;
    Ok(format!("relative L2 drift {drift:.2e} after 1000 steps in {elapsed:.2} s"))
}

/// Quadrature `∫u²` straight from the samples.
fn l2_sq(u: &ScalarField) -> f64 {
    let g = u.grid();
    u.values().iter().map(|v| v * v).sum::<f64>() * g.cell_area()
}

fn heat_exactness() -> Outcome {
    let g = Grid::new(128, 16.0 * PI).unwrap();
    let k0 = 2.0 * PI / g.length();
    // (m₁, m₂, amplitude, phase): ρ₀ = Σ a cos(k₀(m₁x + m₂y) + φ)
    let modes = [(1, 0, 0.4, 0.3), (3, -2, 0.2, 1.1), (7, 5, 0.1, -0.4), (0, 12, 0.05, 2.0), (20, -17, 0.3, 0.0)];
    let eval = |t: f64| {
        ScalarField::from_fn(&g, |x, y| {
            modes
                .iter()
                .map(|&(m1, m2, a, ph)| {
                    let k2 = k0 * k0 * ((m1 * m1 + m2 * m2) as f64);
                    a * (-k2 * t).exp() * (k0 * (m1 as f64 * x + m2 as f64 * y) + ph).cos()
                })
                .sum()
        })
    };
    let s0 = State::new(eval(0.0), VectorField3::zeros(&g), VectorField3::zeros(&g), 0.0).unwrap();
    let cfg = IntegratorConfig {
        dt: 2e-3,
        t_end: 1.0,
        record_every: 500,
        coupling: Coupling::Decoupled,
        ..IntegratorConfig::default()
    };
    let traj = simulate(&s0, &cfg).map_err(|e| e.to_string())?;
    let got = &traj.final_state().unwrap().rho;
    let want = eval(1.0);
    let phys = got.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let modal = got
        .spectrum()
        .iter()
        .zip(want.spectrum())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    // the heat_only preset, mode by mode against its own initial spectrum
    let preset = RunConfig {
        preset: Preset::HeatOnly,
        cutoff_n: None,
        record_every: 500,
        ..reference()
    };
    let (p0, ptraj) = run(&preset);
    let pg = p0.grid().clone();
    let pmodal = ptraj
        .final_state()
        .unwrap()
        .rho
        .spectrum()
        .iter()
        .zip(p0.rho.spectrum())
        .enumerate()
        .map(|(idx, (a, b))| {
            let (i, j) = pg.split(idx);
            let k2 = pg.wavenumber(i).powi(2) + pg.wavenumber(j).powi(2);
            (a - b * (-k2).exp()).norm()
        })
        .fold(0.0, f64::max);
    let worst = phys.max(modal).max(pmodal);
    ensure(worst <= 1e-12, || {
        format!("pointwise {phys:.2e}, modal {modal:.2e}, preset modal {pmodal:.2e}")
    })?;
    Ok(format!("pointwise {phys:.2e}, modal {modal:.2e}, heat_only preset modal {pmodal:.2e}"))
}

fn gauss_transport(traj: &TrajectoryRecord) -> Outcome {
    let r = check_gauss_law(traj, GAUSS_TOLERANCE).map_err(|e| e.to_string())?;
    ensure(r.passed, || r.to_string())?;
    Ok(r.note)
}

/// Criteria 4 and 5 share this: residual, order and bound at one cutoff.
fn energy_at(coarse: &TrajectoryRecord, fine: &TrajectoryRecord) -> Outcome {
    let a = energy_balance(coarse).map_err(|e| e.to_string())?;
    let b = energy_balance(fine).map_err(|e| e.to_string())?;
    let ratio = a.max_residual / b.max_residual;
    let last = coarse.rows().last().unwrap();
    let detail = format!(
        "residual {:.2e} -> {:.2e} (ratio {ratio:.2}), bound excess {:.2e}; at T: I1 {:+.3e} I2 {:+.3e} I3 {:+.3e} I4 {:+.3e}",
        a.max_residual, b.max_residual, a.max_excess, last.i1, last.i2, last.i3, last.i4
    );
    let ok = a.max_residual <= ENERGY_TOLERANCE
        && b.max_residual <= ENERGY_TOLERANCE
        && ratio >= 3.5
        && a.max_excess <= ENERGY_TOLERANCE
        && b.max_excess <= ENERGY_TOLERANCE;
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn cutoff_energy(reference_pair: (&TrajectoryRecord, &TrajectoryRecord)) -> Outcome {
    let mut lines = Vec::new();
    let mut failed = false;
    for n in [21.0, 32.0, 40.0] {
        let outcome = if n == 40.0 {
            energy_at(reference_pair.0, reference_pair.1)
        } else {
            let c = RunConfig {
                cutoff_n: Some(n),
                ..reference()
            };
            let f = RunConfig { dt: c.dt / 2.0, ..c.clone() };
            energy_at(&run(&c).1, &run(&f).1)
        };
        failed |= outcome.is_err();
        lines.push(format!("n = {n}: {}", outcome.unwrap_or_else(|e| e)));
    }
    let joined = lines.join("; ");
    if failed {
        Err(joined)
    } else {
        Ok(joined)
    }
}

fn friedrichs_convergence() -> Outcome {
    let cfg = RunConfig {
        cutoff_n: None,
        record_every: 100,
        ..reference()
    };
    let s0 = build_initial_state(&cfg).unwrap();
    let rep = friedrichs_sequence(&s0, &cfg.integrator_config(), &[8.0, 16.0, 32.0]).map_err(|e| e.to_string())?;
    let d = &rep.distances;
    let detail = format!("sup-in-time distances {:.6e}, {:.6e} (ratio {:.2})", d[0], d[1], d[0] / d[1]);
    ensure(d[1] < d[0] && d[0] >= 4.0 * d[1], || detail.clone())?;
    for (got, pin) in d.iter().zip(PIN_FRIEDRICHS) {
        pinned("distance", *got, pin)?;
    }
    Ok(detail)
}

fn growth_bound(traj: &TrajectoryRecord) -> Outcome {
    let k = GrowthConstants::from_trajectory(traj, 1.0).map_err(|e| e.to_string())?;
    let r = check_growth_bound(traj, k).map_err(|e| e.to_string())?;
    ensure(r.passed, || r.to_string())?;
    pinned("log margin", r.margin, PIN_GROWTH_MARGIN)?;
    Ok(format!("C0 = {:.4}, tightest log margin {:.6}", k.c0, r.margin))
}

fn inequality_suite(traj: &TrajectoryRecord, cal: &Calibration) -> Outcome {
    let grid = traj.final_state().unwrap().grid().clone();
    let bank = DyadicFilterBank::default();
    let c_gn = cal.get(calibration::C_GN).map_err(|e| e.to_string())?;

    let corpus = field_corpus(&grid, 2, CORPUS_SIZE);
    let gn = check_gn(&corpus, c_gn).map_err(|e| e.to_string())?;
    ensure(gn.passed, || gn.to_string())?;
    let fine = Grid::new(128, 2.0 * PI).unwrap();
    let bump = gaussian_bump(&fine, (PI, PI), 2.0 * PI / 20.0);
    let analytic = (PI / 2.0).sqrt() / PI;
    let bump_ratio = gn_ratio(&bump).unwrap();
    ensure((bump_ratio / analytic - 1.0).abs() <= 0.02, || {
        format!("Gaussian ratio {bump_ratio:.5} vs {analytic:.5}")
    })?;

    let scalar = check_scalar_inequalities(&random_pairs(11, 100_000)).map_err(|e| e.to_string())?;
    ensure(scalar.passed && scalar.note.ends_with(" 0 violations"), || scalar.to_string())?;

    let ratios: Vec<_> = [2u64, 3, 4]
        .iter()
        .map(|&s| bernstein_ratios(&field_corpus(&grid, s, CORPUS_SIZE), &bank))
        .collect();
    let spread = |f: fn(&ddmx::verification::BernsteinRatios) -> f64| {
        let v: Vec<f64> = ratios.iter().map(f).collect();
        v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0
    };
    let (s_linf, s_grad) = (spread(|r| r.linf), spread(|r| r.grad));
    ensure(s_linf <= 0.1 && s_grad <= 0.1, || {
        format!("Bernstein spread across seeds {s_linf:.3} / {s_grad:.3} > 10%")
    })?;
    let bern = check_bernstein(&corpus, &bank, cal).map_err(|e| e.to_string())?;
    ensure(bern.passed, || bern.to_string())?;

    let growth = GrowthConstants::from_trajectory(traj, cal.get(calibration::C_GROWTH).unwrap()).unwrap();
    let lp = check_lp_log_bound(traj, &bank, cal, growth).map_err(|e| e.to_string())?;
    ensure(lp.passed, || lp.to_string())?;
    Ok(format!(
        "GN max {:.4} <= {c_gn:.4}, Gaussian {bump_ratio:.4} vs {analytic:.4}; {}; Bernstein spread {:.1}%/{:.1}%; \
         log bound {:.4} <= {:.4}, {}",
        gn.lhs,
        scalar.note,
        100.0 * s_linf,
        100.0 * s_grad,
        lp.lhs,
        lp.rhs,
        lp.note
    ))
}

fn littlewood_paley() -> Outcome {
    let bank = DyadicFilterBank::default();
    let g = Grid::new(128, 16.0 * PI).unwrap();
    let q_max = bank.q_max(&g);
    let mut pou = 0.0_f64;
    for idx in 0..g.len() {
        let r = g.wavenumber_norm(idx);
        let full = bank.chi(r) + (0..=q_max).map(|q| bank.phi_scaled(q, r)).sum::<f64>();
        let split = bank.chi_scaled(1, r) + (1..=q_max).map(|q| bank.phi_scaled(q, r)).sum::<f64>();
        pou = pou.max((1.0 - full).abs()).max((1.0 - split).abs());
    }
    ensure(pou <= 1e-12, || format!("partition of unity off by {pou:.2e}"))?;
    let mut worst = 0.0_f64;
    for seed in 0..10 {
        let u = random_band_limited(&g, seed, 60, 0.5);
        let back = reconstruct(&decompose(&u, &bank));
        let diff: Vec<f64> = u.values().iter().zip(back.values()).map(|(a, b)| a - b).collect();
        let err = (diff.iter().map(|d| d * d).sum::<f64>() / u.values().iter().map(|v| v * v).sum::<f64>()).sqrt();
        worst = worst.max(err);
    }
    ensure(worst <= 1e-10, || format!("reconstruction error {worst:.2e}"))?;
    Ok(format!("partition deviation {pou:.2e}, relative reconstruction error {worst:.2e}"))
}

fn contraction(s0: &State, traj: &TrajectoryRecord, cal: &Calibration) -> Outcome {
    let cfg = reference();
    let k = cal.get(calibration::K_GRONWALL).map_err(|e| e.to_string())?;
    let p = contraction_probe(s0, &cfg.integrator_config(), CONTRACTION_DELTA, k, cfg.seed).map_err(|e| e.to_string())?;
    ensure(p.check.passed, || p.check.to_string())?;
    pinned("contraction rate", p.measured_rate, PIN_CONTRACTION_RATE)?;
    let again = simulate(
        s0,
        &IntegratorConfig {
            record_every: 500,
            ..cfg.integrator_config()
        },
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (traj.final_state().unwrap(), again.final_state().unwrap());
    let identical = a
        .planes()
        .iter()
        .zip(b.planes())
        .all(|(x, y)| x.values().iter().zip(y.values()).all(|(u, v)| u.to_bits() == v.to_bits()));
    ensure(identical, || "repeated run differs".into())?;
    Ok(format!(
        "measured rate {:.6}, envelope margin {:.3e} with K = {k}, repeated run bit-identical",
        p.measured_rate, p.check.margin
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cal = Calibration::builtin();
    let cfg = reference();
    let (s0, traj) = run(&cfg);
    let (_, fine) = run(&RunConfig { dt: cfg.dt / 2.0, ..cfg.clone() });

    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut timed = |name, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f().map(|s| format!("{s} [{:.1} s]", t.elapsed().as_secs_f64()));
        results.push((name, out));
    };
    timed("1 Maxwell isometry", &mut maxwell_isometry);
    timed("2 heat exactness", &mut heat_exactness);
    timed("3 Gauss-law transport", &mut || gauss_transport(&traj));
    timed("4 energy identity", &mut || energy_at(&traj, &fine));
    timed("5 cutoff energy identity", &mut || cutoff_energy((&traj, &fine)));
    timed("6 Friedrichs convergence", &mut friedrichs_convergence);
    timed("7 growth bound", &mut || growth_bound(&traj));
    timed("8 inequality suite", &mut || inequality_suite(&traj, &cal));
    timed("9 Littlewood-Paley", &mut littlewood_paley);
    timed("10 contraction", &mut || contraction(&s0, &traj, &cal));

    let mut failures = 0;
    for (name, out) in &results {
        match out {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failures,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
