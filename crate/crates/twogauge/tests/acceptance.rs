//! One pass/fail line per acceptance criterion. Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use twogauge::report::without_timing;
use twogauge::{execute, load_str, Command, LoadedConfig, Overrides, Report, VerifyKind};

fn text(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn load(name: &str) -> LoadedConfig {
    load_str(&text(name)).expect("shipped config loads")
}

fn run_with(cmd: Command, cfg: &LoadedConfig, overrides: Overrides) -> Result<Report, String> {
    execute(cmd, cfg, overrides).map(|o| o.report).map_err(|e| format!("{} failed: {e}", cmd.name()))
}

fn run(cmd: Command, name: &str) -> Result<Report, String> {
    run_with(cmd, &load(name), Overrides::default())
}

fn max_of(r: &Report, quantity: &str) -> Option<f64> {
    r.defects.iter().filter(|d| d.quantity == quantity).map(|d| d.value).reduce(f64::max)
}

fn count_of(r: &Report, quantity: &str) -> usize {
    r.defects.iter().filter(|d| d.quantity == quantity).count()
}

fn min_order(r: &Report) -> Option<f64> {
    r.order_estimates.iter().filter_map(|o| o.value).reduce(f64::min)
}

/// Outcome of one criterion: pass flag and a short detail line.
struct Verdict(bool, String);

struct Check {
    ok: bool,
    parts: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, parts: Vec::new() }
    }

    fn le(&mut self, label: &str, value: Option<f64>, tol: f64) {
        match value {
            Some(v) => {
                self.ok &= v <= tol;
                self.parts.push(format!("{label} {v:.2e} (<= {tol:.0e})"));
            }
            None => {
                self.ok = false;
                self.parts.push(format!("{label} missing"));
            }
        }
    }

    fn ge(&mut self, label: &str, value: Option<f64>, min: f64) {
        match value {
            Some(v) => {
                self.ok &= v >= min;
                self.parts.push(format!("{label} {v:.3} (>= {min})"));
            }
            None => {
                self.ok = false;
                self.parts.push(format!("{label} missing"));
            }
        }
    }

    fn holds(&mut self, label: &str, cond: bool) {
        self.ok &= cond;
        self.parts.push(format!("{label}: {}", if cond { "yes" } else { "no" }));
    }

    fn done(self) -> Verdict {
        Verdict(self.ok, self.parts.join("; "))
    }
}

fn torsor_laws() -> Result<Verdict, String> {
    let mut c = Check::new();
    let start = Instant::now();
    for name in ["z2_z3", "z4_id"] {
        let r = run(Command::TorsorSelftest, name)?;
        let laws = ["division_uniqueness", "functor_extension", "vertical_composition", "horizontal_formulas_agree", "interchange"];
        let present = laws.iter().all(|l| r.defects.iter().any(|d| d.case == *l));
        c.holds(&format!("{name} laws present"), present);
        c.le(&format!("{name} max"), max_of(&r, "max_defect"), 0.0);
    }
    let secs = start.elapsed().as_secs_f64();
    c.le("seconds", Some(secs), 5.0);
    Ok(c.done())
}

fn module_axioms() -> Result<Verdict, String> {
    let mut c = Check::new();
    for name in ["su2_axioms", "u2_axioms"] {
        let cfg = load(name);
        c.ge(&format!("{name} samples"), Some(cfg.config.numerics.samples as f64), 200.0);
        let r = run_with(Command::CheckCrossedModule, &cfg, Overrides::default())?;
        for law in ["t_equivariance", "peiffer", "ker_t_central"] {
            let v = r.defects.iter().find(|d| d.case == law).map(|d| d.value);
            c.le(&format!("{name} {law}"), v, 1e-9);
        }
    }
    let r = run(Command::CheckCrossedModule, "z2_z4_inversion")?;
    let rejected = r.defects.iter().any(|d| d.case == "peiffer" && !d.pass);
    let witness = r.notes.iter().any(|n| n.starts_with("peiffer fails at"));
    c.holds("inversion rejected with peiffer witness", rejected && witness);
    Ok(c.done())
}

fn stokes() -> Result<Verdict, String> {
    let mut c = Check::new();
    let r = run(Command::Verify(VerifyKind::Stokes), "abelian")?;
    c.holds("abelian oracles >= 3", count_of(&r, "oracle") >= 3);
    c.le("abelian closed form", max_of(&r, "oracle"), 1e-8);
    let cfg = load("su2");
    c.ge("su2 steps", Some(cfg.config.numerics.steps as f64), 128.0);
    let r = run_with(Command::Verify(VerifyKind::Stokes), &cfg, Overrides::default())?;
    c.le("su2 defect", max_of(&r, "stokes"), 1e-6);
    c.ge("su2 order", min_order(&r), 3.5);
    let per_case = r.timing.seconds / r.order_estimates.len().max(1) as f64;
    c.le("seconds per case", Some(per_case), 30.0);
    Ok(c.done())
}

fn target_identity() -> Result<Verdict, String> {
    let mut c = Check::new();
    for name in ["su2", "u2"] {
        let r = run(Command::SurfaceTransport, name)?;
        c.holds(&format!("{name} bigons >= 5"), count_of(&r, "target_identity") >= 5);
        c.le(name, max_of(&r, "target_identity"), 1e-6);
    }
    Ok(c.done())
}

fn higher_stokes() -> Result<Verdict, String> {
    let mut c = Check::new();
    let r = run(Command::Verify(VerifyKind::HigherStokes), "abelian_cube")?;
    c.le("abelian triple integral", max_of(&r, "oracle"), 1e-6);
    let r = run(Command::Verify(VerifyKind::HigherStokes), "u2")?;
    c.le("u2 trace part", max_of(&r, "higher_stokes"), 1e-5);
    let per_cube = r.timing.seconds / count_of(&r, "higher_stokes").max(1) as f64;
    c.le("seconds per cube", Some(per_cube), 120.0);
    Ok(c.done())
}

fn thin() -> Result<Verdict, String> {
    let mut c = Check::new();
    for name in ["abelian", "su2"] {
        let r = run(Command::Verify(VerifyKind::Thin), name)?;
        c.holds(&format!("{name} cases >= 30"), count_of(&r, "thin") >= 30);
        c.le(name, max_of(&r, "thin"), 1e-7);
    }
    Ok(c.done())
}

fn round_trips() -> Result<Verdict, String> {
    let mut c = Check::new();
    for name in ["su2", "abelian", "u2", "zero_k"] {
        let a = run(Command::ReconstructA, name)?;
        let b = run(Command::ReconstructB, name)?;
        c.holds(&format!("{name} points >= 10"), count_of(&a, "reconstruct_a") >= 10 && count_of(&b, "reconstruct_b") >= 10);
        c.le(&format!("{name} a"), max_of(&a, "reconstruct_a"), 1e-5);
        c.le(&format!("{name} b"), max_of(&b, "reconstruct_b"), 1e-4);
    }
    Ok(c.done())
}

/// An affine coefficient such as `0.1234 - 0.0567*x1 + 0.2*x2`.
fn affine(rng: &mut ChaCha8Rng, dim: usize) -> String {
    let mut s = format!("{:.4}", rng.gen_range(-0.3..0.3));
    for k in 1..=dim {
        let c: f64 = rng.gen_range(-0.3..0.3);
        let sign = if c < 0.0 { '-' } else { '+' };
        s.push_str(&format!(" {sign} {:.4}*x{k}", c.abs()));
    }
    s
}

fn random_morphism(base: &str, seed: u64, dim: usize, g_dim: usize, h_dim: usize) -> LoadedConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Value = serde_json::from_str(&text(base)).expect("config JSON");
    let g: Vec<String> = (0..g_dim).map(|_| affine(&mut rng, dim)).collect();
    let phi: Vec<Vec<String>> = (0..dim).map(|_| (0..h_dim).map(|_| affine(&mut rng, dim)).collect()).collect();
    let a: Vec<String> = (0..h_dim).map(|_| affine(&mut rng, dim)).collect();
    v["morphism"] = json!({"g": g, "phi": phi});
    v["two_morphism"] = json!({"a": a, "form": "definition"});
    load_str(&v.to_string()).expect("randomized config loads")
}

fn gauge() -> Result<Verdict, String> {
    let mut c = Check::new();
    let fast = Overrides { steps: Some(64), ..Overrides::default() };
    let mut cases: Vec<(String, LoadedConfig, Overrides)> = vec![
        ("su2".into(), load("su2"), fast),
        ("u2".into(), load("u2"), Overrides::default()),
    ];
    cases.push(("su2 random".into(), random_morphism("su2", 101, 2, 3, 3), fast));
    for seed in [202, 303] {
        cases.push((format!("u2 random {seed}"), random_morphism("u2", seed, 3, 3, 4), Overrides::default()));
    }
    let mut logged = false;
    for (label, cfg, ov) in &cases {
        let r = run_with(Command::Verify(VerifyKind::Gauge), cfg, *ov)?;
        let compat = r.defects.iter().filter(|d| d.quantity == "compat" && !d.case.ends_with("two_morphism")).map(|d| d.value).reduce(f64::max);
        let two = r.defects.iter().filter(|d| d.quantity == "compat" && d.case.ends_with("two_morphism")).map(|d| d.value).reduce(f64::max);
        c.le(&format!("{label} compat"), compat, 1e-6);
        c.le(&format!("{label} pullback"), max_of(&r, "pullback_a"), 1e-7);
        if cfg.config.two_morphism.is_some() {
            c.le(&format!("{label} two-morphism"), two, 1e-6);
        }
        logged |= r.notes.iter().any(|n| n.starts_with("phi update sign"));
    }
    c.holds("sign finding logged", logged);
    Ok(c.done())
}

fn ambrose_singer() -> Result<Verdict, String> {
    let mut c = Check::new();
    let r = run(Command::Verify(VerifyKind::AmbroseSinger), "u2")?;
    c.le("u2 containment", max_of(&r, "containment"), 1e-5);
    let r = run(Command::Verify(VerifyKind::AmbroseSinger), "zero_k")?;
    c.le("zero-K identity", max_of(&r, "identity"), 1e-7);
    Ok(c.done())
}

fn determinism() -> Result<Verdict, String> {
    let mut c = Check::new();
    for (cmd, name) in [(Command::CheckCrossedModule, "su2_axioms"), (Command::SurfaceTransport, "u2"), (Command::ReconstructB, "su2")] {
        let first = run(cmd, name)?.to_json();
        let second = run(cmd, name)?.to_json();
        c.holds(&format!("{} on {name}", cmd.name()), without_timing(&first) == without_timing(&second));
    }
    Ok(c.done())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Verdict, String>); 10] = [
        ("exact torsor algebra", torsor_laws),
        ("crossed-module axioms", module_axioms),
        ("surface Stokes", stokes),
        ("fake-flat target identity", target_identity),
        ("higher Stokes", higher_stokes),
        ("thin invariance", thin),
        ("round trips", round_trips),
        ("gauge covariance", gauge),
        ("Ambrose-Singer", ambrose_singer),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let Verdict(ok, detail) = f().unwrap_or_else(|e| Verdict(false, e));
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<26} {} [{:.1}s] {}",
            i + 1,
            title,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
