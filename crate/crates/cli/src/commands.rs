use crate::output::Output;
use crate::{Failure, Global, Kind, Mode};
use elastobeam::beams::{BeamAmplitude, GaussianBeam};
use elastobeam::geodesics::{orthonormal_complement, trace_geodesic, TraceOptions};
use elastobeam::interaction::stationary::{oscillatory_interaction_integral, QuadratureOptions, SspBeams};
use elastobeam::interaction::{amplitude_a, BeamNormalizers, ConfigKind, InteractionConfig};
use elastobeam::medium::validate_medium;
use elastobeam::recovery::{recover_from_samples, relative_errors, synthesize_samples, AngleGrids, SweepSample};
use elastobeam::reflection::{reflection_tree, BranchAmplitude, ReflectionNode};
use elastobeam::riccati::C64;
use elastobeam::{ConvexDomain, IsotropicMedium, PointModuli, WaveMode};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub fn config(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .filter(|w| !w.trim().is_empty())
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| config(format!("cannot parse number `{w}` in `{s}`")))
        })
        .collect()
}

pub fn parse_vec3(s: &str) -> Result<Vector3<f64>, Failure> {
    let v = parse_list(s)?;
    if v.len() != 3 {
        return Err(config(format!("expected three components, got `{s}`")));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

pub fn reference_moduli() -> PointModuli {
    PointModuli::new(2.0, 1.0, 1.0, 0.3, 0.2, 0.0)
}

pub fn load_medium(g: &Global) -> Result<IsotropicMedium, Failure> {
    match &g.medium {
        Some(p) => Ok(IsotropicMedium::load(p).map_err(|e| config(format!("{}: {e}", p.display())))?),
        None => Ok(IsotropicMedium::constant(reference_moduli())),
    }
}

pub fn domain(g: &Global) -> Result<ConvexDomain, Failure> {
    Ok(ConvexDomain::parse(&g.domain)?)
}

pub fn wave_mode(g: &Global) -> WaveMode {
    match g.mode {
        Mode::P => WaveMode::P,
        Mode::S => WaveMode::S,
    }
}

/// Uniform points in the domain by rejection from its bounding box.
pub fn interior_points(dom: &ConvexDomain, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let (c, a) = match dom {
        ConvexDomain::Ball { center, radius } => (Vector3::from(*center), Vector3::repeat(*radius)),
        ConvexDomain::Ellipsoid { center, semi_axes } => (Vector3::from(*center), Vector3::from(*semi_axes)),
    };
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let x = c + Vector3::from_fn(|i, _| a[i] * rng.gen_range(-1.0..1.0));
        if dom.contains(&x) {
            pts.push(x);
        }
    }
    pts
}

#[derive(Serialize)]
struct ValidateReport {
    passed: bool,
    samples: usize,
    violations: Vec<elastobeam::medium::Violation>,
    evaluation_errors: Vec<(usize, String)>,
}

pub fn validate(g: &Global, out: &Output, samples: usize) -> Result<(), Failure> {
    let m = load_medium(g)?;
    let dom = domain(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let pts = interior_points(&dom, samples.max(1), &mut rng);
    let r = validate_medium(&m, &pts)?;
    let passed = r.passed();
    out.json(
        "validate.json",
        &ValidateReport {
            passed,
            samples: r.samples,
            violations: r.violations,
            evaluation_errors: r.evaluation_errors,
        },
    )?;
    if passed {
        eprintln!("all invariants hold");
        Ok(())
    } else {
        Err(Failure::Check("medium is not admissible at some sampled points".into()))
    }
}

#[derive(Serialize)]
struct PathRow {
    s: f64,
    t: f64,
    x1: f64,
    x2: f64,
    x3: f64,
    v1: f64,
    v2: f64,
    v3: f64,
}

#[derive(Serialize)]
struct TraceReport {
    mode: WaveMode,
    t0: f64,
    length: f64,
    samples: usize,
    entry: elastobeam::geodesics::BoundaryEvent,
    exit: elastobeam::geodesics::BoundaryEvent,
    unit_speed_defect: f64,
    min_curvature_radius: f64,
}

pub fn trace(g: &Global, out: &Output, x0: &str, dir: &str, t0: f64) -> Result<(), Failure> {
    let m = load_medium(g)?;
    let dom = domain(g)?;
    let path = trace_geodesic(
        &m,
        wave_mode(g),
        &parse_vec3(x0)?,
        &parse_vec3(dir)?,
        &dom,
        t0,
        &TraceOptions::default(),
    )?;
    let rows: Vec<PathRow> = path
        .samples
        .iter()
        .map(|q| PathRow {
            s: q.s,
            t: q.t,
            x1: q.x[0],
            x2: q.x[1],
            x3: q.x[2],
            v1: q.v[0],
            v2: q.v[1],
            v3: q.v[2],
        })
        .collect();
    out.csv("path.csv", &rows)?;
    out.json(
        "trace.json",
        &TraceReport {
            mode: path.mode,
            t0,
            length: path.length(),
            samples: rows.len(),
            entry: path.entry,
            exit: path.exit,
            unit_speed_defect: path.unit_speed_defect()?,
            min_curvature_radius: path.min_curvature_radius()?,
        },
    )
}

#[derive(Serialize)]
struct BeamRow {
    tau: f64,
    a1_re: f64,
    a1_im: f64,
    a2_re: f64,
    a2_im: f64,
    a3_re: f64,
    a3_im: f64,
    transport_residual: f64,
}

#[derive(Serialize)]
struct BeamReport {
    mode: WaveMode,
    delta: f64,
    tau_range: (f64, f64),
    max_transport_residual: f64,
    conservation_drift: f64,
    min_imag_eigenvalue: f64,
}

pub fn beam(
    g: &Global,
    out: &Output,
    x0: &str,
    dir: &str,
    amp: &str,
    delta: Option<f64>,
    taus: usize,
) -> Result<(), Failure> {
    let m = load_medium(g)?;
    let dom = domain(g)?;
    let a = parse_list(amp)?;
    let amplitude = match (wave_mode(g), a.as_slice()) {
        (WaveMode::S, [c2, c3]) => BeamAmplitude::S {
            c2: C64::new(*c2, 0.0),
            c3: C64::new(*c3, 0.0),
        },
        (WaveMode::P, [c]) | (WaveMode::P, [c, _]) => BeamAmplitude::P { c: C64::new(*c, 0.0) },
        _ => return Err(config("--amp takes `c2,c3` for S beams and `c` for P beams")),
    };
    let b = GaussianBeam::build(&m, &parse_vec3(x0)?, &parse_vec3(dir)?, &dom, 0.0, amplitude, delta)?;
    let (lo, hi) = b.riccati.tau_range();
    let h = 4e-3;
    let (lo, hi) = (lo + 3.0 * h, hi - 3.0 * h);
    let n = taus.max(2);
    let rows = (0..n)
        .into_par_iter()
        .map(|k| {
            let tau = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let v = b.axis_amplitude(tau)?.vector;
            Ok(BeamRow {
                tau,
                a1_re: v[0].re,
                a1_im: v[0].im,
                a2_re: v[1].re,
                a2_im: v[1].im,
                a3_re: v[2].re,
                a3_im: v[2].im,
                transport_residual: b.transport_residual(tau, h)?,
            })
        })
        .collect::<elastobeam::Result<Vec<_>>>()?;
    out.csv("beam.csv", &rows)?;
    out.json(
        "beam.json",
        &BeamReport {
            mode: b.mode(),
            delta: b.delta(),
            tau_range: b.riccati.tau_range(),
            max_transport_residual: rows.iter().map(|r| r.transport_residual).fold(0.0, f64::max),
            conservation_drift: b.riccati.max_conservation_drift()?,
            min_imag_eigenvalue: b.riccati.min_imag_eigenvalue()?,
        },
    )
}

#[derive(Serialize)]
struct NodeRow {
    depth: usize,
    mode: WaveMode,
    start_t: f64,
    exit: [f64; 3],
    exit_t: f64,
    amplitude: f64,
    evanescent: Option<bool>,
    a_p_minus: Option<C64>,
    a_s_minus: Option<f64>,
    traction_residual: Option<f64>,
}

#[derive(Serialize)]
struct ReflectReport {
    count: usize,
    max_traction_residual: f64,
    nodes: Vec<NodeRow>,
}

fn flatten(n: &ReflectionNode, m: &IsotropicMedium, rows: &mut Vec<NodeRow>) -> elastobeam::Result<()> {
    let amplitude = match n.amplitude {
        BranchAmplitude::P(a) => a.norm(),
        BranchAmplitude::S(a) => a.norm(),
    };
    let p = m.moduli_at(&Vector3::from(n.path.exit.x))?;
    rows.push(NodeRow {
        depth: n.depth,
        mode: n.path.mode,
        start_t: n.path.t0,
        exit: n.path.exit.x,
        exit_t: n.path.exit.t,
        amplitude,
        evanescent: n.reflection.map(|r| r.evanescent()),
        a_p_minus: n.reflection.map(|r| r.a_p_minus),
        a_s_minus: n.reflection.map(|r| r.a_s_minus.norm()),
        traction_residual: n.reflection.map(|r| r.traction_residual(&p)),
    });
    for c in &n.children {
        flatten(c, m, rows)?;
    }
    Ok(())
}

pub fn reflect(g: &Global, out: &Output, x0: &str, dir: &str, depth: usize) -> Result<(), Failure> {
    let m = load_medium(g)?;
    let dom = domain(g)?;
    let d = parse_vec3(dir)?;
    if d.norm() == 0.0 {
        return Err(config("--dir must be nonzero"));
    }
    let amp = match wave_mode(g) {
        WaveMode::P => BranchAmplitude::P(C64::new(1.0, 0.0)),
        WaveMode::S => BranchAmplitude::S(orthonormal_complement(&d.normalize()).0.map(|v| C64::new(v, 0.0))),
    };
    let tree = reflection_tree(&m, &dom, &parse_vec3(x0)?, &d, amp, depth, &TraceOptions::default())?;
    let mut nodes = Vec::new();
    flatten(&tree, &m, &mut nodes)?;
    out.json(
        "reflect.json",
        &ReflectReport {
            count: tree.count(),
            max_traction_residual: tree.max_traction_residual()?,
            nodes,
        },
    )
}

#[derive(Serialize, Clone)]
struct InteractRow {
    angle: f64,
    psi: f64,
    alpha: f64,
    scaled: f64,
    observable: f64,
    closed_form: f64,
}

#[derive(Serialize)]
struct StationaryRow {
    angle: f64,
    amplitude_re: f64,
    amplitude_im: f64,
    limit_re: f64,
    limit_im: f64,
    c1_re: f64,
    c1_im: f64,
    fit_residual: f64,
}

#[derive(Serialize)]
struct InteractReport {
    kind: ConfigKind,
    x0: [f64; 3],
    moduli: PointModuli,
    rows: Vec<InteractRow>,
    stationary: Option<Vec<StationaryRow>>,
}

fn build_config(kind: Kind, angle: f64, c_p: f64, c_s: f64) -> elastobeam::Result<InteractionConfig> {
    match kind {
        Kind::Perp => InteractionConfig::perp_from_psi(angle, c_p, c_s),
        Kind::Inplane => InteractionConfig::inplane_from_alpha(angle, c_p, c_s),
    }
}

pub fn interact(
    g: &Global,
    out: &Output,
    kind: Kind,
    x0: &str,
    angles: &str,
    varrho: Option<&str>,
    nodes: usize,
) -> Result<(), Failure> {
    let m = load_medium(g)?;
    let x = parse_vec3(x0)?;
    let p = m.moduli_at(&x)?;
    let (cp, cs) = (p.c_p(), p.c_s());
    let angles = parse_list(angles)?;
    let mut rows = Vec::new();
    let mut cfgs = Vec::new();
    for &a in &angles {
        let cfg = build_config(kind, a, cp, cs)?;
        let r = amplitude_a(&cfg, &p, &BeamNormalizers::default())?;
        rows.push(InteractRow {
            angle: a,
            psi: cfg.psi(),
            alpha: cfg.alpha(),
            scaled: r.scaled.re,
            observable: r.observable,
            closed_form: r.closed_form,
        });
        cfgs.push((cfg, r.value));
    }
    let stationary = match varrho {
        None => None,
        Some(v) => {
            if !m.is_homogeneous() {
                return Err(config("the stationary-phase integral needs a homogeneous medium"));
            }
            let rs = parse_list(v)?;
            let opts = QuadratureOptions {
                nodes,
                ..Default::default()
            };
            let mut st = Vec::new();
            for (&a, (cfg, value)) in angles.iter().zip(&cfgs) {
                let beams = SspBeams::new(cfg, &p, x, 4.0)?;
                let f = oscillatory_interaction_integral(&beams, &rs, &opts)?;
                st.push(StationaryRow {
                    angle: a,
                    amplitude_re: value.re,
                    amplitude_im: value.im,
                    limit_re: f.limit.re,
                    limit_im: f.limit.im,
                    c1_re: f.c1.re,
                    c1_im: f.c1.im,
                    fit_residual: f.residual,
                });
            }
            out.csv("stationary.csv", &st)?;
            Some(st)
        }
    };
    out.csv("interact.csv", &rows)?;
    out.json(
        "interact.json",
        &InteractReport {
            kind: match kind {
                Kind::Perp => ConfigKind::Perp,
                Kind::Inplane => ConfigKind::InPlane,
            },
            x0: x.into(),
            moduli: p,
            rows,
            stationary,
        },
    )
}

#[derive(Serialize)]
struct SweepRow {
    point: usize,
    kind: ConfigKind,
    angle: f64,
    value: f64,
}

#[derive(Serialize)]
struct RecoverEntry {
    x0: [f64; 3],
    k1: f64,
    k2: f64,
    k3: f64,
    lambda: f64,
    mu: f64,
    rho: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "C")]
    c: &'static str,
    psi_residual: f64,
    alpha_residual: f64,
    condition: f64,
    truth: PointModuli,
    relative_errors: [f64; 5],
}

#[derive(Serialize)]
struct RecoverReport {
    noise: f64,
    seed: u64,
    points: Vec<RecoverEntry>,
}

pub fn recover(
    g: &Global,
    out: &Output,
    points: &str,
    psi: Option<&str>,
    alpha: Option<&str>,
    noise: f64,
) -> Result<(), Failure> {
    let m = load_medium(g)?;
    if !(noise >= 0.0) {
        return Err(config("--noise must be nonnegative"));
    }
    let pts = points
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(parse_vec3)
        .collect::<Result<Vec<_>, _>>()?;
    let psi = psi.map(parse_list).transpose()?;
    let alpha = alpha.map(parse_list).transpose()?;
    let results = pts
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> elastobeam::Result<(RecoverEntry, Vec<SweepRow>)> {
            let p = m.moduli_at(x)?;
            let (cp, cs) = (p.c_p(), p.c_s());
            let def = AngleGrids::default_for(cp, cs);
            let grids = AngleGrids {
                psi: psi.clone().unwrap_or(def.psi),
                alpha: alpha.clone().unwrap_or(def.alpha),
            };
            let (mut perp, mut inplane) = synthesize_samples(&p, &grids)?;
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            rng.set_stream(i as u64);
            for s in perp.iter_mut().chain(inplane.iter_mut()) {
                s.value *= 1.0 + noise * rng.gen_range(-1.0..1.0);
            }
            let r = recover_from_samples(&perp, &inplane, cp, cs)?;
            let rows = perp
                .iter()
                .chain(&inplane)
                .map(|s: &SweepSample| SweepRow {
                    point: i,
                    kind: s.kind,
                    angle: s.angle,
                    value: s.value,
                })
                .collect();
            Ok((
                RecoverEntry {
                    x0: (*x).into(),
                    k1: r.k1,
                    k2: r.k2,
                    k3: r.k3,
                    lambda: r.lambda,
                    mu: r.mu,
                    rho: r.rho,
                    a: r.a,
                    b: r.b,
                    c: "not determined by this pipeline",
                    psi_residual: r.psi_residual,
                    alpha_residual: r.alpha_residual,
                    condition: r.condition,
                    truth: p,
                    relative_errors: relative_errors(&p, &r),
                },
                rows,
            ))
        })
        .collect::<elastobeam::Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    let mut sweep = Vec::new();
    for (e, rows) in results {
        entries.push(e);
        sweep.extend(rows);
    }
    out.csv("sweeps.csv", &sweep)?;
    out.json(
        "recover.json",
        &RecoverReport {
            noise,
            seed: g.seed,
            points: entries,
        },
    )
}
