//! Full reference-example run: synthesis, minimum thrust, linear checks,
//! two-body simulations and the cost comparison.

use std::fmt::Write as _;

use anyhow::Context;
use nalgebra::DMatrix;

use rendezvous_core::dynamics::RelativeState;
use rendezvous_core::simulator::{compare, DisturbanceSpec, Lower, PlantMode, SaturationMode, Trajectory};
use rendezvous_core::synthesis::{assemble_partially_independent, reference};

use crate::gains::GainsFile;
use crate::report::{matrix_literal, write_atomic};
use crate::scenario::Scenario;
use crate::{min_thrust, saturation_note, simulate_to_csv, synth_report, write_reports, CliError, ReproduceArgs, Which};

const REFERENCE_MEAN_MOTION: f64 = 1.059e-3;
const REFERENCE_PERIOD: f64 = 5931.53;
const REFERENCE_MIN_THRUST: f64 = 6.8;
const GAIN_TOLERANCE: f64 = 0.25;
const COMPARISON_TIME: f64 = 5000.0;

struct Summary {
    text: String,
}

impl Summary {
    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn check(&mut self, id: u32, pass: bool, detail: impl AsRef<str>) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let _ = writeln!(self.text, "criterion {id:>2}: {tag} {}", detail.as_ref());
    }
}

pub fn cmd_reproduce_paper(a: &ReproduceArgs) -> Result<(), CliError> {
    let mut s = Scenario::bundled();
    if let Some(d) = a.duration {
        s.sim.duration = d;
    }
    if let Some(h) = a.step {
        s.sim.step = h;
    }
    s.sim.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = a.out.as_path();
    let mut sum = Summary { text: String::new() };

    let n = s.orbit.mean_motion();
    let period = s.orbit.period();
    sum.line(format!("mean motion n = {n:.6e} rad/s, period T = {period:.3} s"));
    let (dn, dt) = ((n / REFERENCE_MEAN_MOTION - 1.0).abs(), (period / REFERENCE_PERIOD - 1.0).abs());
    sum.check(1, dn <= 5e-4 && dt <= 5e-4, format!("n = {n:.6e} rad/s, T = {period:.3} s"));

    log::info!("synthesizing in-plane and out-of-plane controllers");
    let reports = synth_report(&s, Which::PartiallyIndependent)?;
    let gains = write_reports(out, Which::PartiallyIndependent, &reports)?;
    let (cost, hinf) = (&reports[0].1, &reports[1].1);
    let rho = cost.bound.value();
    let gamma = hinf.bound.value();
    sum.line(format!("in-plane cost bound rho = {rho:.6e}"));
    sum.line(format!("K_p = {}", matrix_literal(&cost.k)));
    sum.line(format!("out-of-plane level gamma = {gamma:.10}"));
    sum.line(format!("K_q = {}", matrix_literal(&hinf.k)));
    let rel = (gamma - reference::GAMMA).abs() / reference::GAMMA;
    sum.check(2, rel <= 1e-3, format!("gamma = {gamma:.10} (relative deviation {rel:.2e})"));

    log::info!("bisecting for the minimum thrust");
    let mt = min_thrust(&s)?;
    write_atomic(&out.join("min_thrust.toml"), toml::to_string_pretty(&mt).context("serializing report")?.as_bytes())?;
    sum.line(format!("minimum feasible in-plane thrust = {:.3} N", mt.thrust_N));
    sum.check(
        3,
        (mt.thrust_N - REFERENCE_MIN_THRUST).abs() <= 0.2 && mt.monotone,
        format!("{:.3} N over {} probes (monotone: {})", mt.thrust_N, mt.probes_N.len(), mt.monotone),
    );

    let printed = GainsFile::bundled();
    let k_p_ref = printed.k_p()?;
    let k_q_ref = printed.k_q()?;
    let dev = |k: &DMatrix<f64>, r: &DMatrix<f64>| {
        k.iter().zip(r.iter()).map(|(a, b)| (a - b).abs() / b.abs()).fold(0.0, f64::max)
    };
    let (dp, dq) = (dev(&cost.k, &k_p_ref), dev(&hinf.k, &k_q_ref));
    sum.check(
        4,
        dp <= GAIN_TOLERANCE && dq <= GAIN_TOLERANCE,
        format!("largest relative gain deviation from the printed values: K_p {dp:.3e}, K_q {dq:.3e} (informational)"),
    );
    let worst = |r: &rendezvous_core::synthesis::SynthesisReport<f64>| {
        r.verification.lmi_residuals.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max)
    };
    sum.check(
        5,
        cost.certificate_max_eigenvalue < 0.0
            && hinf.certificate_max_eigenvalue < 0.0
            && worst(cost) <= 1e-7
            && worst(hinf) <= 1e-7,
        format!(
            "certificate lambda_max: in-plane {:.3e}, out-of-plane {:.3e}",
            cost.certificate_max_eigenvalue, hinf.certificate_max_eigenvalue
        ),
    );

    let k_pic = gains.select(crate::gains::GainChoice::K)?;
    let k_pic_printed = assemble_partially_independent(&k_p_ref, &k_q_ref)?.k_pic;
    let k_cc = printed.k_cc()?;

    let mut ltv_cost = s.clone();
    ltv_cost.sim.duration = 10.0 * period;
    ltv_cost.sim.plant_mode = PlantMode::LinearTimeVarying;
    ltv_cost.sim.saturation = SaturationMode::Assert;
    ltv_cost.disturbance = DisturbanceSpec::none();
    let mut ltv_hinf = s.clone();
    ltv_hinf.sim.duration = 10.0 * period;
    ltv_hinf.sim.plant_mode = PlantMode::LinearTimeVarying;
    ltv_hinf.sim.x0 = RelativeState::zero();

    log::info!("running linear and two-body simulations");
    let runs: Vec<(&str, &Scenario, &DMatrix<f64>)> = vec![
        ("ltv_cost.csv", &ltv_cost, &k_pic),
        ("ltv_disturbance.csv", &ltv_hinf, &k_pic),
        ("pic.csv", &s, &k_pic),
        ("pic_printed.csv", &s, &k_pic_printed),
        ("cc.csv", &s, &k_cc),
    ];
    let results: Vec<Result<Trajectory<f64>, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(name, sc, k)| scope.spawn(move || simulate_to_csv(sc, k, &out.join(name))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut it = results.into_iter();
    let (t_cost, t_hinf, pic, pic_printed, cc) =
        (it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?);

    let jp = t_cost.last().map(|x| x.jp).unwrap_or(f64::NAN);
    let f = t_cost.max_thrust();
    sum.check(
        6,
        jp <= 1.01 * rho && f.x <= s.chaser.u_px_max && f.y <= s.chaser.u_py_max,
        format!("J_p = {jp:.4e} <= 1.01 rho = {:.4e}; max |f_x|, |f_y| = {:.3}, {:.3} N", 1.01 * rho, f.x, f.y),
    );
    let ratio = t_hinf.attenuation_ratio().unwrap_or(f64::NAN);
    sum.check(
        7,
        ratio <= gamma + 0.05,
        format!("||z_q|| / ||w_q|| = {ratio:.6} <= gamma + 0.05 = {:.6}", gamma + 0.05),
    );

    sum.line(format!("two-body runs: {} over {} s", saturation_note(s.sim.saturation), s.sim.duration));
    let at = |t: &Trajectory<f64>| t.at(COMPARISON_TIME).map(|x| (x.state.in_plane_distance(), x.j_total));
    for (name, t) in [("pic", &pic), ("pic (printed gains)", &pic_printed), ("cc", &cc)] {
        let fm = t.max_thrust();
        sum.line(format!(
            "{name}: max |z| = {:.4e} m, max |f| = [{:.3}, {:.3}, {:.3}] N, in-plane distance below 10 m from {}",
            t.max_abs_z(),
            fm.x,
            fm.y,
            fm.z,
            t.settling_time(10.0).map_or("never".into(), |v| format!("t = {v:.1} s"))
        ));
    }
    let fp = pic.max_thrust();
    let within = fp.x <= s.chaser.u_px_max && fp.y <= s.chaser.u_py_max && fp.z <= s.chaser.u_q_max;
    match (at(&pic), at(&cc)) {
        (Some((dp, jp)), Some((dc, jc))) => {
            sum.check(
                8,
                dp < 10.0 && dc >= 10.0 && within,
                format!("in-plane distance at {COMPARISON_TIME} s: pic {dp:.3} m, cc {dc:.1} m"),
            );
            let (zp, zc) = (pic.max_abs_z(), cc.max_abs_z());
            sum.check(9, zc >= 10.0 * zp && fp.z <= s.chaser.u_q_max, format!("max |z|: pic {zp:.4e} m, cc {zc:.4e} m"));
            sum.check(10, jp < jc, format!("J_total({COMPARISON_TIME} s): pic {jp:.6e}, cc {jc:.6e}"));
        }
        _ => sum.line(format!("criteria 8-10 need a horizon of at least {COMPARISON_TIME} s")),
    }
    let c = compare(&pic, &cc).map_err(|e| CliError::Config(e.into()))?;
    sum.line(format!(
        "terminal J_total: pic {:.6e}, cc {:.6e} ({} lower)",
        c.terminal_a,
        c.terminal_b,
        match c.lower {
            Lower::A => "pic",
            Lower::B => "cc",
            Lower::Equal => "neither",
        }
    ));

    write_atomic(&out.join("summary.txt"), sum.text.as_bytes())?;
    print!("{}", sum.text);
    Ok(())
}
