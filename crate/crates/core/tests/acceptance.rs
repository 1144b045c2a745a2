//! Acceptance criteria for the reference rendezvous scenario. Prints one
//! PASS/FAIL line per criterion and exits non-zero only when a criterion
//! outside `EXPECTED_RED` fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use rendezvous_core::dynamics::*;
use rendezvous_core::simulator::*;
use rendezvous_core::synthesis::*;

/// Criteria that are known not to hold, with the reason recorded alongside.
const EXPECTED_RED: &[(u32, &str)] = &[
    (4, "informational: the out-of-plane optimum is non-unique (gamma infimum reached as K_q grows)"),
    (8, "the reference gains themselves reach 10 m only after ~5500 s"),
];

const N_REF: f64 = 1.059e-3;
const PERIOD_REF: f64 = 5931.53;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

fn disturbance() -> DisturbanceSpec<f64> {
    DisturbanceSpec {
        terms: vec![
            SineTerm { amplitude: 4.3, omega: 1.059e-3, phase: 0.0 },
            SineTerm { amplitude: 0.5, omega: 0.1059, phase: 0.0 },
        ],
    }
}

fn x0() -> RelativeState<f64> {
    RelativeState::from_array([-5000.0, 5000.0, 0.0, 5.0, -5.0, 0.0])
}

fn ms(d: Duration) -> String {
    format!("{:.0} ms", d.as_secs_f64() * 1e3)
}

fn entrywise_within(k: &DMatrix<f64>, reference: &DMatrix<f64>, tol: f64) -> (bool, f64) {
    let worst = k
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    (worst <= tol, worst)
}

fn simulate(
    orbit: &OrbitConfig<f64>,
    chaser: &ChaserConfig<f64>,
    k: &DMatrix<f64>,
    dist: &DisturbanceSpec<f64>,
    sim: &SimConfig<f64>,
) -> Result<Trajectory<f64>, String> {
    run(orbit, chaser, k, dist, sim).map_err(|e| e.to_string())
}

fn main() {
    let orbit = OrbitConfig::earth(7082.253e3, 0.05).unwrap();
    let chaser = ChaserConfig::new(500.0, 15.0, 15.0, 5.0).unwrap();
    let plant = build_plant(&orbit, &chaser);
    let in_plane = split_in_plane(&plant);
    let out_of_plane = split_out_of_plane(&plant);
    let opts = SynthesisOptions::default();
    let p0 = DVector::from_vec(vec![-5000.0, 5000.0, 5.0, -5.0]);
    let mut out: Vec<Outcome> = Vec::new();

    // 1
    let n = orbit.mean_motion();
    let period = orbit.period();
    let (dn, dt) = ((n - N_REF).abs() / N_REF, (period - PERIOD_REF).abs() / PERIOD_REF);
    out.push(Outcome {
        id: 1,
        pass: dn <= 5e-4 && dt <= 5e-4,
        detail: format!("n = {n:.6e} rad/s ({:.3}%), T = {period:.2} s ({:.3}%)", dn * 100.0, dt * 100.0),
    });

    // 2
    let t = Instant::now();
    let hinf = synth_out_of_plane(&out_of_plane, &eye(2), 1.0, &opts);
    let hinf_time = t.elapsed();
    let gamma = hinf.as_ref().map(|r| r.bound.value()).unwrap_or(f64::NAN);
    let rel = (gamma - reference::GAMMA).abs() / reference::GAMMA;
    out.push(Outcome {
        id: 2,
        pass: rel <= 1e-3 && hinf_time < Duration::from_secs(5),
        detail: format!("gamma = {gamma:.10} (rel. dev. {rel:.2e}), {}", ms(hinf_time)),
    });

    // 3
    let t = Instant::now();
    let min = min_feasible_thrust(&in_plane, &eye(4), &eye(2), &p0, ThrustSearch::default(), &opts);
    let min_time = t.elapsed();
    out.push(match &min {
        Ok(m) => Outcome {
            id: 3,
            pass: (m.thrust - 6.8).abs() <= 0.2 && m.monotone && min_time < Duration::from_secs(60),
            detail: format!("{:.3} N after {} probes (monotone: {}), {}", m.thrust, m.probes.len(), m.monotone, ms(min_time)),
        },
        Err(e) => Outcome { id: 3, pass: false, detail: e.to_string() },
    });

    // 4 (informational)
    let t = Instant::now();
    let cost = synth_in_plane(&in_plane, &eye(4), &eye(2), &p0, [15.0, 15.0], &opts);
    let cost_time = t.elapsed();
    match (&cost, &hinf) {
        (Ok(c), Ok(h)) => {
            let (okp, wp) = entrywise_within(&c.k, &reference::k_p(), 0.25);
            let (okq, wq) = entrywise_within(&h.k, &reference::k_q(), 0.25);
            out.push(Outcome {
                id: 4,
                pass: okp && okq,
                detail: format!(
                    "K_p worst rel. dev. {:.2}%, K_q worst rel. dev. {:.3e} (K_q = [{:.4}, {:.4e}])",
                    wp * 100.0,
                    wq,
                    h.k[(0, 0)],
                    h.k[(0, 1)]
                ),
            });
        }
        _ => out.push(Outcome { id: 4, pass: false, detail: "synthesis failed".into() }),
    }

    // 5
    match (&cost, &hinf) {
        (Ok(c), Ok(h)) => {
            let worst = |r: &SynthesisReport<f64>| r.verification.lmi_residuals.iter().map(|p| p.1).fold(f64::MIN, f64::max);
            let pass = c.certificate_max_eigenvalue < 0.0
                && h.certificate_max_eigenvalue < 0.0
                && worst(c) <= 1e-7
                && worst(h) <= 1e-7;
            out.push(Outcome {
                id: 5,
                pass,
                detail: format!(
                    "in-plane lambda_max {:.3e} (residual {:.2e}, {}), out-of-plane lambda_max {:.3e} (residual {:.2e})",
                    c.certificate_max_eigenvalue,
                    worst(c),
                    ms(cost_time),
                    h.certificate_max_eigenvalue,
                    worst(h)
                ),
            });
        }
        _ => out.push(Outcome { id: 5, pass: false, detail: "synthesis failed".into() }),
    }

    let k_pic = match (&cost, &hinf) {
        (Ok(c), Ok(h)) => Some(assemble_partially_independent(&c.k, &h.k).unwrap().k_pic),
        _ => None,
    };

    // 6
    match (&cost, &k_pic) {
        (Ok(c), Some(k)) => {
            let rho = c.bound.value();
            let mut sim = SimConfig::new(x0(), 10.0 * period);
            sim.plant_mode = PlantMode::LinearTimeVarying;
            sim.saturation = SaturationMode::Assert;
            sim.record_interval = 10.0;
            let t = Instant::now();
            out.push(match simulate(&orbit, &chaser, k, &DisturbanceSpec::none(), &sim) {
                Ok(tr) => {
                    let s = tr.last().unwrap();
                    let f = tr.max_thrust();
                    Outcome {
                        id: 6,
                        pass: s.jp <= 1.01 * rho && f.x <= 15.0 && f.y <= 15.0,
                        detail: format!(
                            "J_p = {:.4e} <= 1.01 rho = {:.4e}; max |f_x|, |f_y| = {:.3}, {:.3} N; {}",
                            s.jp,
                            1.01 * rho,
                            f.x,
                            f.y,
                            ms(t.elapsed())
                        ),
                    }
                }
                Err(e) => Outcome { id: 6, pass: false, detail: e },
            });
        }
        _ => out.push(Outcome { id: 6, pass: false, detail: "synthesis failed".into() }),
    }

    // 7
    match &k_pic {
        Some(k) => {
            let mut sim = SimConfig::new(RelativeState::zero(), 10.0 * period);
            sim.plant_mode = PlantMode::LinearTimeVarying;
            sim.record_interval = 10.0;
            let t = Instant::now();
            out.push(match simulate(&orbit, &chaser, k, &disturbance(), &sim) {
                Ok(tr) => {
                    let ratio = tr.attenuation_ratio().unwrap_or(f64::NAN);
                    Outcome {
                        id: 7,
                        pass: ratio <= gamma + 0.05,
                        detail: format!(
                            "||z_q||/||w_q|| = {ratio:.6} <= gamma + 0.05 = {:.6}; max |f_z| = {:.3} N; {}",
                            gamma + 0.05,
                            tr.max_thrust().z,
                            ms(t.elapsed())
                        ),
                    }
                }
                Err(e) => Outcome { id: 7, pass: false, detail: e },
            });
        }
        None => out.push(Outcome { id: 7, pass: false, detail: "synthesis failed".into() }),
    }

    // 8-10 on the two-body model
    let k_cc = reference::k_cc();
    let sim = SimConfig::new(x0(), 10_000.0);
    let t = Instant::now();
    let pic = k_pic.as_ref().map(|k| simulate(&orbit, &chaser, k, &disturbance(), &sim));
    let pic_time = t.elapsed();
    let cc = simulate(&orbit, &chaser, &k_cc, &disturbance(), &sim);
    let bounds = Vector3::new(15.0, 15.0, 5.0);
    match (&pic, &cc) {
        (Some(Ok(p)), Ok(c)) => {
            let dp = p.at(5000.0).unwrap().state.in_plane_distance();
            let dc = c.at(5000.0).unwrap().state.in_plane_distance();
            let fp = p.max_thrust();
            let within = fp.iter().zip(bounds.iter()).all(|(f, b)| f <= b);
            out.push(Outcome {
                id: 8,
                pass: dp < 10.0 && within && dc >= 10.0 && pic_time < Duration::from_secs(60),
                detail: format!(
                    "pic distance at 5000 s = {dp:.3} m (below 10 m from t = {:?} s), cc = {dc:.1} m; pic max |f| = [{:.3}, {:.3}, {:.3}] N; {}",
                    p.settling_time(10.0),
                    fp.x,
                    fp.y,
                    fp.z,
                    ms(pic_time)
                ),
            });
            let (zp, zc) = (p.max_abs_z(), c.max_abs_z());
            out.push(Outcome {
                id: 9,
                pass: zc >= 10.0 * zp && fp.z <= 5.0,
                detail: format!("max |z|: pic {zp:.4e} m, cc {zc:.4e} m (ratio {:.3e}); pic max |f_z| = {:.3} N", zc / zp, fp.z),
            });
            let (jp, jc) = (p.at(5000.0).unwrap().j_total, c.at(5000.0).unwrap().j_total);
            out.push(Outcome {
                id: 10,
                pass: jp < jc,
                detail: format!("J_total(5000 s): pic {jp:.4e}, cc {jc:.4e}"),
            });
        }
        _ => {
            for id in 8..=10 {
                out.push(Outcome { id, pass: false, detail: "simulation failed".into() });
            }
        }
    }

    // 11
    out.push(property_suites(&orbit, &plant));

    let mut unexpected = 0;
    for o in &out {
        let red = EXPECTED_RED.iter().find(|(id, _)| *id == o.id);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, red) {
            (false, Some((_, why))) => format!(" [expected: {why}]"),
            (true, Some(_)) => " [listed as expected red but passed]".into(),
            _ => String::new(),
        };
        println!("criterion {:>2}: {tag} {}{note}", o.id, o.detail);
        if !o.pass && red.is_none() {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion(s) failed unexpectedly");
        std::process::exit(1);
    }
}

fn property_suites(orbit: &OrbitConfig<f64>, plant: &PlantModel<f64>) -> Outcome {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let grid: Vec<f64> = (0..720).map(|i| std::f64::consts::TAU * i as f64 / 720.0).collect();

    let fac = grid.iter().all(|&m| {
        let lhs = plant.delta_a(m);
        let rhs = plant.e1() * plant.lambda(m) * plant.e2();
        let lam = plant.lambda(m);
        let contraction = (lam.transpose() * lam).symmetric_eigenvalues().max() <= 1.0 + 1e-12;
        (lhs - rhs).amax() <= 1e-12 * plant.delta_a(0.0).amax() && contraction
    });
    checks.push(("factorization", fac));

    let kepler = grid.iter().all(|&m| {
        let e = solve_kepler(m, orbit.e).unwrap();
        (e - orbit.e * e.sin() - m).abs() < 1e-13
    });
    checks.push(("kepler residual", kepler));

    let trunc = {
        let n = orbit.mean_motion();
        let worst = grid
            .iter()
            .map(|&m| {
                let ea = solve_kepler(m, orbit.e).unwrap();
                (exact_orbital_terms(orbit, ea).omega - truncated_orbital_terms(orbit, m).omega).abs()
            })
            .fold(0.0, f64::max);
        worst <= 5.0 * orbit.e * orbit.e * n
    };
    checks.push(("truncation order", trunc));

    let conservation = {
        let (r, v) = target_on_orbit(orbit, 0.0).unwrap();
        let y0 = DVector::from_vec(vec![r.x, r.y, r.z, v.x, v.y, v.z]);
        let mut f = |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>, ()> {
            let a = gravity(orbit.mu, &Vector3::new(y[0], y[1], y[2]));
            Ok(DVector::from_vec(vec![y[3], y[4], y[5], a.x, a.y, a.z]))
        };
        let s = DVector::from_vec(vec![orbit.a; 3].into_iter().chain(vec![orbit.a * orbit.mean_motion(); 3]).collect());
        let mut radau = Radau5::new(s);
        let h = 0.1;
        let steps = (orbit.period() / h).round() as usize;
        let mut y = y0.clone();
        for i in 0..steps {
            y = radau.step(&mut f, i as f64 * h, &y, h).unwrap();
        }
        let inv = |y: &DVector<f64>| {
            let r = Vector3::new(y[0], y[1], y[2]);
            let v = Vector3::new(y[3], y[4], y[5]);
            (0.5 * v.norm_squared() - orbit.mu / r.norm(), r.cross(&v).norm())
        };
        let ((e0, h0), (e1, h1)) = (inv(&y0), inv(&y));
        ((e1 - e0) / e0).abs() < 1e-9 && ((h1 - h0) / h0).abs() < 1e-9
    };
    checks.push(("integrator conservation", conservation));

    let round_trip = {
        let s = init_inertial(orbit, &x0()).unwrap();
        let back = lvlh_relative_state(&s).unwrap();
        (back.position() - x0().position()).norm() < 1e-9 && (back.velocity() - x0().velocity()).norm() < 1e-12
    };
    checks.push(("frame round-trip", round_trip));

    let determinism = {
        let q = split_out_of_plane(plant);
        let a = synth_out_of_plane(&q, &eye(2), 1.0, &SynthesisOptions::default());
        let b = synth_out_of_plane(&q, &eye(2), 1.0, &SynthesisOptions::default());
        matches!((a, b), (Ok(a), Ok(b)) if a == b)
    };
    checks.push(("solver determinism", determinism));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome {
        id: 11,
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} suites hold", checks.len())
        } else {
            format!("failing: {}", failed.join(", "))
        },
    }
}
