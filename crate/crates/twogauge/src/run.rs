//! Command dispatch: each command turns a config into a report.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use twogauge_core::algebra2group::{check_crossed_module, CrossedModule, MatrixCrossedModule, MatrixFamily};
use twogauge_core::forms::{fake_flatness_residual, grid, one_form_on, three_curvature_k, ConnectionField, TwoConnection, BIANCHI_TOL, FAKE_FLAT_TOL};
use twogauge_core::geometry::{bigon_source, reparameterize, Map};
use twogauge_core::lie2algebra::LieTwoAlgebra;
use twogauge_core::matrix::{CMat, C64};
use twogauge_core::morphisms::{
    apply_twomorphism, gauge_transform, target_connection_defect, verify_gauge_naturality, verify_onemorphism_compat,
    verify_pullback_a, SharedConnection, TwoMorphismForm,
};
use twogauge_core::sampling::{rng, SamplePlan};
use twogauge_core::torsor2::torsor_selftest;
use twogauge_core::transport::{
    ambrose_singer_check, convergence_table, holonomy2_h, path_ordered_exp, path_ordered_exp_with_order, reconstruct_a,
    reconstruct_b, self_convergence_table, surface_transport, surface_transport_with_order, verify_higher_stokes,
    verify_nonabelian_stokes, AmbroseSingerInput, BasePoint, ConvergenceRow, TransportError,
};
use twogauge_core::{demo, morphisms::MorphismError};

use crate::config::{LoadedConfig, ModuleKind, RunConfig, SchemaError, ShapeKind};
use crate::report::{MatrixValue, Report};

pub const GROUP_TOL: f64 = 1e-10;
pub const TARGET_TOL: f64 = 1e-6;
pub const STOKES_TOL: f64 = 1e-6;
pub const ABELIAN_STOKES_TOL: f64 = 1e-8;
pub const STOKES_MIN_ORDER: f64 = 3.5;
pub const PATH_MIN_ORDER: f64 = 3.8;
pub const HIGHER_STOKES_TOL: f64 = 1e-5;
pub const ABELIAN_HIGHER_TOL: f64 = 1e-6;
pub const THIN_TOL: f64 = 1e-7;
pub const RECONSTRUCT_A_TOL: f64 = 1e-5;
pub const RECONSTRUCT_B_TOL: f64 = 1e-4;
pub const GAUGE_TOL: f64 = 1e-6;
pub const PULLBACK_TOL: f64 = 1e-7;
pub const CONTAINMENT_TOL: f64 = 1e-5;
pub const IDENTITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyKind {
    Stokes,
    HigherStokes,
    FakeFlat,
    Gauge,
    Thin,
    AmbroseSinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckCrossedModule,
    TorsorSelftest,
    Transport,
    SurfaceTransport,
    Verify(VerifyKind),
    ReconstructA,
    ReconstructB,
    Holonomy2,
    GaugeTransform,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckCrossedModule => "check-crossed-module",
            Command::TorsorSelftest => "torsor-selftest",
            Command::Transport => "transport",
            Command::SurfaceTransport => "surface-transport",
            Command::Verify(VerifyKind::Stokes) => "verify-stokes",
            Command::Verify(VerifyKind::HigherStokes) => "verify-higher-stokes",
            Command::Verify(VerifyKind::FakeFlat) => "verify-fake-flat",
            Command::Verify(VerifyKind::Gauge) => "verify-gauge",
            Command::Verify(VerifyKind::Thin) => "verify-thin",
            Command::Verify(VerifyKind::AmbroseSinger) => "verify-ambrose-singer",
            Command::ReconstructA => "reconstruct-a",
            Command::ReconstructB => "reconstruct-b",
            Command::Holonomy2 => "holonomy2",
            Command::GaugeTransform => "gauge-transform",
            Command::Report => "report",
        }
    }
}

/// Command-line overrides of the config's numerics.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub sweep: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum RunError {
    Schema(SchemaError),
    Numeric { case: String, message: String },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Schema(e) => write!(f, "config error at {e}"),
            RunError::Numeric { case, message } => write!(f, "numerical failure in {case}: {message}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<SchemaError> for RunError {
    fn from(e: SchemaError) -> Self {
        RunError::Schema(e)
    }
}

impl RunError {
    /// 2 for schema violations, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numeric { .. } => 3,
        }
    }
}

fn numeric<E: fmt::Display>(case: &str) -> impl FnOnce(E) -> RunError + '_ {
    move |e| RunError::Numeric { case: case.to_string(), message: e.to_string() }
}

/// A finished run: the report and any convergence tables by file stem.
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<(String, Vec<ConvergenceRow>)>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    steps: usize,
    sweep: usize,
    seed: u64,
    report: Report,
    tables: Vec<(String, Vec<ConvergenceRow>)>,
}

impl Ctx<'_> {
    fn table(&mut self, stem: String, rows: Vec<ConvergenceRow>) {
        self.report.tables.push(format!("{stem}.csv"));
        self.tables.push((stem, rows));
    }
}

pub fn execute(cmd: Command, loaded: &LoadedConfig, overrides: Overrides) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let cfg = &loaded.config;
    let mut ctx = Ctx {
        cfg,
        steps: overrides.steps.unwrap_or(cfg.numerics.steps),
        sweep: overrides.sweep.unwrap_or(cfg.numerics.sweep),
        seed: overrides.seed.unwrap_or(cfg.seed),
        report: Report::new(cmd.name(), loaded.hash.clone()),
        tables: Vec::new(),
    };
    if ctx.steps < twogauge_core::transport::MIN_STEPS || ctx.steps % 2 == 1 {
        return Err(SchemaError { path: "$.numerics.steps".into(), message: format!("need an even count of at least 8, got {}", ctx.steps) }.into());
    }
    dispatch(cmd, &mut ctx)?;
    let mut report = ctx.report;
    report.timing.seconds = start.elapsed().as_secs_f64();
    Ok(Outcome { report, tables: ctx.tables })
}

fn dispatch(cmd: Command, ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    match cmd {
        Command::CheckCrossedModule => check_module(ctx),
        Command::TorsorSelftest => torsor(ctx),
        Command::Transport => transport(ctx),
        Command::SurfaceTransport => surface(ctx),
        Command::Verify(VerifyKind::Stokes) => stokes(ctx),
        Command::Verify(VerifyKind::HigherStokes) => higher_stokes(ctx),
        Command::Verify(VerifyKind::FakeFlat) => fake_flat(ctx),
        Command::Verify(VerifyKind::Gauge) => gauge(ctx),
        Command::Verify(VerifyKind::Thin) => thin(ctx),
        Command::Verify(VerifyKind::AmbroseSinger) => ambrose_singer(ctx),
        Command::ReconstructA => reconstruct(ctx, false),
        Command::ReconstructB => reconstruct(ctx, true),
        Command::Holonomy2 => holonomy2(ctx),
        Command::GaugeTransform => gauge_transform_cmd(ctx),
        Command::Report => full_report(ctx),
    }
}

fn is_abelian(cm: &MatrixCrossedModule) -> bool {
    matches!(cm.family(), MatrixFamily::U1Id | MatrixFamily::U1Trivial)
}

fn phase(theta: f64) -> CMat {
    CMat::scalar(C64::from_polar(1.0, theta))
}

fn start_of(map: &Map) -> Vec<f64> {
    map.eval(&vec![0.0; map.arity()])
}

fn setup(ctx: &Ctx<'_>) -> Result<(Arc<TwoConnection>, CMat), RunError> {
    let conn = ctx.cfg.connection()?;
    let frame = ctx.cfg.frame(conn.module())?;
    Ok((conn, frame))
}

fn check_module(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (rep, lie) = match ctx.cfg.module()? {
        ModuleKind::Finite(cm) => (check_crossed_module(&cm, SamplePlan::Exhaustive).map_err(numeric("axioms"))?, None),
        ModuleKind::Matrix(cm) => {
            let plan = SamplePlan::random(ctx.cfg.numerics.samples, ctx.seed);
            let rep = check_crossed_module(cm.as_ref(), plan).map_err(numeric("axioms"))?;
            let lie = ctx.cfg.lie2algebra.as_ref().filter(|l| l.validate).map(|_| LieTwoAlgebra::new(&cm).validate());
            (rep, lie)
        }
    };
    for c in &rep.checks {
        ctx.report.defect(c.name, "max_defect", c.max_defect, rep.tolerance);
        if let Some(w) = &c.witness {
            ctx.report.note(format!("{} fails at {w}", c.name));
        }
    }
    for law in lie.into_iter().flatten() {
        ctx.report.defect(format!("lie2algebra/{}", law.name), "defect", law.defect, law.tolerance);
    }
    Ok(())
}

fn torsor(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (laws, tol) = match ctx.cfg.module()? {
        ModuleKind::Finite(cm) => (torsor_selftest(&cm, SamplePlan::Exhaustive).map_err(numeric("torsor"))?, cm.tolerance()),
        ModuleKind::Matrix(cm) => {
            let plan = SamplePlan::random(ctx.cfg.numerics.samples, ctx.seed);
            (torsor_selftest(cm.as_ref(), plan).map_err(numeric("torsor"))?, cm.tolerance())
        }
    };
    for law in laws {
        ctx.report.defect(law.law, "max_defect", law.max_defect, tol);
        let status = if law.max_defect == 0.0 && law.pass() { "exact" } else if law.pass() { "within tolerance" } else { "failed" };
        ctx.report.note(format!("{}: {} over {} cases", law.law, status, law.cases));
    }
    Ok(())
}

fn transport(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    let dim = conn.chart().dim;
    for (name, path, expected) in ctx.cfg.shapes(ShapeKind::Path, dim)? {
        let r = path_ordered_exp_with_order(conn.as_ref(), &path, ctx.steps).map_err(numeric(&name))?;
        ctx.report.defect(&name, "group_defect", r.group_defect, GROUP_TOL);
        ctx.report.order(&name, r.order, Some(PATH_MIN_ORDER));
        let end = &r.value * &frame;
        ctx.report.values.push(MatrixValue::new(&name, "fibre_element", &end));
        if let Some(theta) = expected {
            ctx.report.defect(&name, "oracle", r.value.dist(&phase(theta)), ABELIAN_STOKES_TOL);
        }
        if ctx.sweep > 0 {
            let rows = self_convergence_table(ctx.steps, ctx.sweep, |n| path_ordered_exp(conn.as_ref(), &path, n).map(|r| r.value))
                .map_err(numeric(&name))?;
            ctx.table(format!("transport_{name}"), rows);
        }
    }
    Ok(())
}

fn surface(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    let cm = conn.module().clone();
    for (name, bigon, expected) in ctx.cfg.shapes(ShapeKind::Bigon, conn.chart().dim)? {
        let p = BasePoint::new(start_of(&bigon), frame.clone());
        let r = surface_transport_with_order(conn.as_ref(), &bigon, &p, ctx.steps).map_err(numeric(&name))?;
        ctx.report.defect(&name, "target_identity", cm.t(&r.h).dist(&r.boundary_quotient()), TARGET_TOL);
        ctx.report.defect(&name, "group_defect", r.group_defect, GROUP_TOL);
        ctx.report.defect(&name, "fake_flat_residual", r.fake_flat_residual, FAKE_FLAT_TOL);
        ctx.report.order(&name, r.order, None);
        ctx.report.values.push(MatrixValue::new(&name, "h", &r.h));
        if let Some(theta) = expected {
            ctx.report.defect(&name, "oracle", r.h.dist(&phase(theta)), ABELIAN_STOKES_TOL);
        }
        if ctx.sweep > 0 {
            let rows = self_convergence_table(ctx.steps, ctx.sweep, |n| surface_transport(conn.as_ref(), &bigon, &p, n, n).map(|r| r.h))
                .map_err(numeric(&name))?;
            ctx.table(format!("surface_{name}"), rows);
        }
    }
    Ok(())
}

fn stokes(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    let abelian = is_abelian(conn.module());
    let tol = if abelian { ABELIAN_STOKES_TOL } else { STOKES_TOL };
    for (name, bigon, expected) in ctx.cfg.shapes(ShapeKind::Bigon, conn.chart().dim)? {
        let p = BasePoint::new(start_of(&bigon), frame.clone());
        let rep = verify_nonabelian_stokes(conn.as_ref(), &bigon, &p, ctx.steps).map_err(numeric(&name))?;
        ctx.report.defect(&name, "stokes", rep.defect, tol);
        let minimum = if abelian { None } else { Some(STOKES_MIN_ORDER) };
        ctx.report.order(&name, rep.order, minimum);
        if let Some(theta) = expected {
            let h = surface_transport(conn.as_ref(), &bigon, &p, ctx.steps, ctx.steps).map_err(numeric(&name))?.h;
            ctx.report.defect(&name, "oracle", h.dist(&phase(theta)), ABELIAN_STOKES_TOL);
        }
        if ctx.sweep > 0 {
            let rows = convergence_table(ctx.steps, ctx.sweep, |n| verify_nonabelian_stokes(conn.as_ref(), &bigon, &p, n).map(|r| r.defect))
                .map_err(numeric(&name))?;
            ctx.table(format!("stokes_{name}"), rows);
        }
    }
    Ok(())
}

fn higher_stokes(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    let tol = if is_abelian(conn.module()) { ABELIAN_HIGHER_TOL } else { HIGHER_STOKES_TOL };
    for (name, cube, expected) in ctx.cfg.shapes(ShapeKind::Cube, conn.chart().dim)? {
        let p = BasePoint::new(start_of(&cube), frame.clone());
        let rep = verify_higher_stokes(conn.as_ref(), &cube, &p, ctx.steps).map_err(numeric(&name))?;
        ctx.report.defect(&name, "higher_stokes", rep.defect, tol);
        ctx.report.values.push(MatrixValue::new(&name, "boundary_holonomy", &rep.lhs));
        if let Some(theta) = expected {
            ctx.report.defect(&name, "oracle", rep.rhs.dist(&phase(theta)), ABELIAN_HIGHER_TOL);
        }
        if ctx.sweep > 0 {
            let rows = convergence_table(ctx.steps, ctx.sweep, |n| verify_higher_stokes(conn.as_ref(), &cube, &p, n).map(|r| r.defect))
                .map_err(numeric(&name))?;
            ctx.table(format!("higher_stokes_{name}"), rows);
        }
    }
    Ok(())
}

fn chart_grid(conn: &TwoConnection, n: usize) -> Vec<Vec<f64>> {
    let d = conn.chart().dim;
    let bounds = conn.chart().bounds.clone().unwrap_or_else(|| vec![(-0.5, 0.5); d]);
    grid(&bounds, n.max(2))
}

fn fake_flat(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, _) = setup(ctx)?;
    let pts = chart_grid(&conn, ctx.cfg.numerics.grid);
    let r = fake_flatness_residual(conn.as_ref(), &pts);
    ctx.report.defect("grid", "fake_flat_residual", r.max, r.tolerance);
    let d = conn.chart().dim;
    if d >= 3 {
        let mut worst: f64 = 0.0;
        for x in &pts {
            let e = |i: usize| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
            let k = three_curvature_k(conn.as_ref(), x, &e(0), &e(1), &e(2)).map_err(numeric("grid"))?;
            worst = worst.max(k.bianchi_defect);
        }
        ctx.report.defect("grid", "bianchi", worst, BIANCHI_TOL);
    }
    Ok(())
}

fn morph_err(case: &str) -> impl FnOnce(MorphismError) -> RunError + '_ {
    numeric(case)
}

fn gauge(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    let cm = conn.module().clone();
    let dim = conn.chart().dim;
    let m = ctx.cfg.morphism(&cm, dim)?;
    let shared: SharedConnection = conn.clone();
    let bigons = ctx.cfg.shapes(ShapeKind::Bigon, dim)?;
    let pts = chart_grid(&conn, ctx.cfg.numerics.grid.min(4));

    let transformed = gauge_transform(shared.clone(), &m);
    if conn.is_declared_fake_flat() {
        ctx.report.defect("transformed", "fake_flat_residual", fake_flatness_residual(&transformed, &pts).max, 1e-7);
    }
    ctx.report.defect("morphism", "group_defect", m.group_defect(&pts), GROUP_TOL);
    let mut r = rng(ctx.seed ^ 0x6a09);
    let fibre = vec![cm.g_identity(), frame.clone(), cm.sample_g(&mut r)];
    let xi = cm.sample_g_alg(&mut r, 1.0);
    ctx.report.defect("grid", "pullback_a", verify_pullback_a(&shared, &m, &pts, &fibre, &xi), PULLBACK_TOL);

    for (name, bigon, _) in &bigons {
        let p = BasePoint::new(start_of(bigon), frame.clone());
        let nat = verify_gauge_naturality(&shared, &m, &bigon_source(bigon), &p, ctx.steps).map_err(numeric(name))?;
        ctx.report.defect(name, "naturality", nat.defect, GAUGE_TOL);
        let rep = verify_onemorphism_compat(&shared, &transformed, &m, bigon, &p, ctx.steps).map_err(morph_err(name))?;
        ctx.report.defect(name, "compat", rep.defect, GAUGE_TOL);
    }

    if let Some((a, form)) = ctx.cfg.two_morphism(&cm, dim)? {
        let moved = apply_twomorphism(&shared, &m, &a, form);
        ctx.report.defect("two_morphism", "group_defect", moved.group_defect(&pts).max(a.group_defect(&cm, &pts)), GROUP_TOL);
        let target_def = target_connection_defect(&shared, &m, &apply_twomorphism(&shared, &m, &a, TwoMorphismForm::Definition), &pts);
        let target_lem = target_connection_defect(&shared, &m, &apply_twomorphism(&shared, &m, &a, TwoMorphismForm::Lemma), &pts);
        if form == TwoMorphismForm::Definition {
            ctx.report.defect("two_morphism", "target_connection", target_def, PULLBACK_TOL);
        } else {
            ctx.report.defect("two_morphism", "target_connection", target_lem, PULLBACK_TOL);
        }
        ctx.report.note(format!(
            "phi update sign: the -da·a^-1 form changes the target connection by {target_def:.3e}, the +da·a^-1 form by {target_lem:.3e}"
        ));
        let moved_conn = gauge_transform(shared.clone(), &moved);
        for (name, bigon, _) in &bigons {
            let p = BasePoint::new(start_of(bigon), frame.clone());
            let case = format!("{name}/two_morphism");
            let rep = verify_onemorphism_compat(&shared, &moved_conn, &moved, bigon, &p, ctx.steps).map_err(morph_err(&case))?;
            ctx.report.defect(&case, "compat", rep.defect, GAUGE_TOL);
        }
    }
    Ok(())
}

fn thin(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    for (name, bigon, _) in ctx.cfg.shapes(ShapeKind::Bigon, conn.chart().dim)? {
        let p = BasePoint::new(start_of(&bigon), frame.clone());
        let reference = surface_transport(conn.as_ref(), &bigon, &p, ctx.steps, ctx.steps).map_err(numeric(&name))?.h;
        for (label, phi) in demo::reparameterizations() {
            let moved = reparameterize(&bigon, &phi).map_err(numeric(&name))?;
            let h = surface_transport(conn.as_ref(), &moved, &p, ctx.steps, ctx.steps).map_err(numeric(&name))?.h;
            ctx.report.defect(format!("{name}/{label}"), "thin", h.dist(&reference), THIN_TOL);
        }
    }
    Ok(())
}

fn ambrose_singer(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    let spec = ctx.cfg.ambrose_singer.as_ref().ok_or_else(|| SchemaError { path: "$.ambrose_singer".into(), message: "missing key".into() })?;
    let cubes: Vec<Map> = ctx.cfg.shapes(ShapeKind::Cube, conn.chart().dim)?.into_iter().map(|(_, c, _)| c).collect();
    let x0 = start_of(&cubes[0]);
    let input = AmbroseSingerInput { sample_points: spec.sample_points.clone(), cubes, steps: ctx.steps, probe_size: spec.probe_size };
    let rep = ambrose_singer_check(conn.as_ref(), &BasePoint::new(x0, frame), &input).map_err(numeric("ambrose_singer"))?;
    ctx.report.note(format!("span of sampled K has dimension {}", rep.span_dim));
    if rep.span_dim == 0 {
        ctx.report.defect("cubes", "identity", rep.identity_defect, IDENTITY_TOL);
    } else {
        ctx.report.defect("cubes", "containment", rep.containment_residual, CONTAINMENT_TOL);
    }
    ctx.report.defect("probes", "relative_k_defect", rep.probe_defect, 1e-3);
    for (i, h) in rep.reduced_holonomies.iter().enumerate() {
        ctx.report.values.push(MatrixValue::new(format!("cube{i}"), "reduced_holonomy", h));
    }
    Ok(())
}

fn reconstruct(ctx: &mut Ctx<'_>, surface: bool) -> Result<(), RunError> {
    let (conn, _) = setup(ctx)?;
    let cm = conn.module().clone();
    let spec = ctx.cfg.reconstruct.clone().unwrap_or_default();
    let d = conn.chart().dim;
    let mut r = rng(ctx.seed ^ if surface { 0xb0 } else { 0xa0 });
    let steps = spec.oracle_steps;
    for i in 0..spec.points {
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-spec.radius..spec.radius)).collect();
        let g0 = cm.sample_g(&mut r);
        let unit = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            let v: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-3);
            v.into_iter().map(|c| c / n).collect()
        };
        let v = unit(&mut r);
        let p = BasePoint::new(x.clone(), g0.clone());
        let case = format!("point{i}");
        if surface {
            let w = unit(&mut r);
            let oracle = |sigma: &Map| -> Result<CMat, TransportError> { Ok(surface_transport(conn.as_ref(), sigma, &p, steps, steps)?.h) };
            let got = reconstruct_b(&oracle, conn.chart(), &p, &v, &w, spec.delta).map_err(numeric(&case))?;
            let expect = twogauge_core::forms::bundle_form_b(conn.as_ref(), &x, &g0, &v, &w);
            ctx.report.defect(&case, "reconstruct_b", got.dist(&expect), RECONSTRUCT_B_TOL);
        } else {
            let oracle = |path: &Map| -> Result<CMat, TransportError> { Ok(&path_ordered_exp(conn.as_ref(), path, steps)?.value * &g0) };
            let got = reconstruct_a(&oracle, &p, &v, spec.delta).map_err(numeric(&case))?;
            let expect = &(&g0.adjoint() * &one_form_on(&conn.a(&x), &v)) * &g0;
            ctx.report.defect(&case, "reconstruct_a", got.dist(&expect), RECONSTRUCT_A_TOL);
        }
    }
    Ok(())
}

fn holonomy2(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, frame) = setup(ctx)?;
    for (name, bigon, _) in ctx.cfg.shapes(ShapeKind::Bigon, conn.chart().dim)? {
        let p = BasePoint::new(start_of(&bigon), frame.clone());
        let hol = holonomy2_h(conn.as_ref(), &bigon, &p, ctx.steps).map_err(numeric(&name))?;
        ctx.report.values.push(MatrixValue::new(&name, "h", &hol.h));
        match hol.kernel_defect {
            Some(k) => ctx.report.defect(&name, "kernel", k, TARGET_TOL),
            None => ctx.report.note(format!("{name}: source and target paths differ by up to {:.3e}, so h need not lie in ker t", hol.path_gap)),
        }
    }
    Ok(())
}

fn gauge_transform_cmd(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let (conn, _) = setup(ctx)?;
    let cm = conn.module().clone();
    let m = ctx.cfg.morphism(&cm, conn.chart().dim)?;
    let transformed = gauge_transform(conn.clone(), &m);
    let pts = chart_grid(&conn, ctx.cfg.numerics.grid);
    if conn.is_declared_fake_flat() {
        ctx.report.defect("grid", "fake_flat_residual", fake_flatness_residual(&transformed, &pts).max, 1e-7);
    }
    for x in &pts {
        let label = format!("{x:?}");
        for (k, a) in transformed.a(x).iter().enumerate() {
            ctx.report.values.push(MatrixValue::new(&label, format!("a{}", k + 1), a));
        }
        for (k, b) in transformed.b(x).iter().enumerate() {
            ctx.report.values.push(MatrixValue::new(&label, format!("b{}", k + 1), b));
        }
    }
    Ok(())
}

fn full_report(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let mut plan = vec![Command::CheckCrossedModule];
    if matches!(cfg.module()?, ModuleKind::Finite(_)) {
        plan.push(Command::TorsorSelftest);
    }
    if cfg.connection.is_some() {
        plan.push(Command::Verify(VerifyKind::FakeFlat));
        if !cfg.bigons.is_empty() {
            plan.extend([Command::SurfaceTransport, Command::Verify(VerifyKind::Stokes), Command::Verify(VerifyKind::Thin)]);
            if cfg.morphism.is_some() {
                plan.push(Command::Verify(VerifyKind::Gauge));
            }
        }
        if !cfg.cubes.is_empty() {
            plan.push(Command::Verify(VerifyKind::HigherStokes));
            if cfg.ambrose_singer.is_some() {
                plan.push(Command::Verify(VerifyKind::AmbroseSinger));
            }
        }
        if cfg.reconstruct.is_some() {
            plan.extend([Command::ReconstructA, Command::ReconstructB]);
        }
    }
    for cmd in plan {
        let mut sub = Ctx { cfg, steps: ctx.steps, sweep: ctx.sweep, seed: ctx.seed, report: Report::new(cmd.name(), ""), tables: Vec::new() };
        dispatch(cmd, &mut sub)?;
        ctx.tables.append(&mut sub.tables);
        ctx.report.absorb(sub.report);
    }
    Ok(())
}
