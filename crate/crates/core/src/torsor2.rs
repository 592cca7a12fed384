//! 2-torsors over a crossed module, in the regular model: labeled copies of
//! `G` (objects) and `G⋉H` (arrows) acted on from the right by the 2-group.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;

use crate::algebra2group::{
    compose_unchecked, identity_cell, mul_unchecked, multiplicative_inverse, target, Cell, CrossedModule,
    TwoGroupElement,
};
use crate::sampling::{rng, SamplePlan};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TorsorError {
    #[error("elements live in different torsors ({left} vs {right})")]
    MixedTorsors { left: u32, right: u32 },
    #[error("point map is not equivariant at {witness}")]
    NotEquivariant { witness: String },
    #[error("transformation is not natural or not equivariant at {witness}")]
    NotNatural { witness: String },
    #[error("morphisms do not compose: {0}")]
    NotComposable(String),
    #[error("exhaustive enumeration requested for a continuum group")]
    NotEnumerable,
}

/// Object `(label, g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsorObject<G> {
    pub label: u32,
    pub g: G,
}

/// Arrow `(label, (g, h))` from `(label, g)` to `(label, t(h)g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsorArrow<G, H> {
    pub label: u32,
    pub cell: TwoGroupElement<G, H>,
}

pub type Obj<C> = TorsorObject<<C as CrossedModule>::G>;
pub type Arrow<C> = TorsorArrow<<C as CrossedModule>::G, <C as CrossedModule>::H>;

/// The regular 2-torsor with a given label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Torsor2 {
    pub label: u32,
}

impl Torsor2 {
    pub fn new(label: u32) -> Self {
        Torsor2 { label }
    }

    pub fn object<C: CrossedModule>(&self, g: C::G) -> Obj<C> {
        TorsorObject { label: self.label, g }
    }

    pub fn arrow<C: CrossedModule>(&self, cell: Cell<C>) -> Arrow<C> {
        TorsorArrow { label: self.label, cell }
    }

    pub fn base<C: CrossedModule>(&self, cm: &C) -> Obj<C> {
        self.object::<C>(cm.g_id())
    }
}

pub fn act_object<C: CrossedModule>(cm: &C, p: &Obj<C>, g: &C::G) -> Obj<C> {
    TorsorObject { label: p.label, g: cm.g_mul(&p.g, g) }
}

pub fn act_arrow<C: CrossedModule>(cm: &C, x: &Arrow<C>, q: &Cell<C>) -> Arrow<C> {
    TorsorArrow { label: x.label, cell: mul_unchecked(cm, &x.cell, q) }
}

pub fn arrow_source<C: CrossedModule>(_cm: &C, x: &Arrow<C>) -> Obj<C> {
    TorsorObject { label: x.label, g: x.cell.g.clone() }
}

pub fn arrow_target<C: CrossedModule>(cm: &C, x: &Arrow<C>) -> Obj<C> {
    TorsorObject { label: x.label, g: target(cm, &x.cell) }
}

pub fn identity_arrow<C: CrossedModule>(cm: &C, p: &Obj<C>) -> Arrow<C> {
    TorsorArrow { label: p.label, cell: identity_cell(cm, &p.g) }
}

/// Composition inside a torsor; `None` if not composable.
pub fn compose_arrows<C: CrossedModule>(cm: &C, y: &Arrow<C>, x: &Arrow<C>) -> Result<Arrow<C>, TorsorError> {
    if x.label != y.label {
        return Err(TorsorError::MixedTorsors { left: y.label, right: x.label });
    }
    let cell = compose_unchecked(cm, &y.cell, &x.cell).map_err(|e| TorsorError::NotComposable(format!("{}", e)))?;
    Ok(TorsorArrow { label: x.label, cell })
}

/// Division of objects: the unique `g` with `p·g = q`.
pub fn divide_objects<C: CrossedModule>(cm: &C, q: &Obj<C>, p: &Obj<C>) -> Result<C::G, TorsorError> {
    if p.label != q.label {
        return Err(TorsorError::MixedTorsors { left: q.label, right: p.label });
    }
    Ok(cm.g_mul(&cm.g_inv(&p.g), &q.g))
}

/// `Y:X`, the unique 2-group element with `X·(Y:X) = Y`.
pub fn torsor_divide<C: CrossedModule>(cm: &C, y: &Arrow<C>, x: &Arrow<C>) -> Result<Cell<C>, TorsorError> {
    if x.label != y.label {
        return Err(TorsorError::MixedTorsors { left: y.label, right: x.label });
    }
    Ok(mul_unchecked(cm, &multiplicative_inverse(cm, &x.cell), &y.cell))
}

/// An equivariant functor between regular torsors, determined by `F₀(base) = c`,
/// so that `F₀(ℓ, g) = (ℓ', c·g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsorMorphism<G> {
    pub from: u32,
    pub to: u32,
    pub image_of_base: G,
}

impl<G: Clone> TorsorMorphism<G> {
    pub fn on_object<C: CrossedModule<G = G>>(&self, cm: &C, p: &Obj<C>) -> Obj<C> {
        TorsorObject { label: self.to, g: cm.g_mul(&self.image_of_base, &p.g) }
    }

    /// `F(X) = id_{F₀(p)}·(X:id_p)` with `p` the source of `X`.
    pub fn on_arrow<C: CrossedModule<G = G>>(&self, cm: &C, x: &Arrow<C>) -> Arrow<C> {
        let p = arrow_source(cm, x);
        let quotient = torsor_divide(cm, x, &identity_arrow(cm, &p)).expect("same torsor");
        act_arrow(cm, &identity_arrow(cm, &self.on_object(cm, &p)), &quotient)
    }

    pub fn identity<C: CrossedModule<G = G>>(cm: &C, label: u32) -> Self {
        TorsorMorphism { from: label, to: label, image_of_base: cm.g_id() }
    }

    /// `other ∘ self`.
    pub fn then<C: CrossedModule<G = G>>(&self, cm: &C, other: &Self) -> Result<Self, TorsorError> {
        if self.to != other.from {
            return Err(TorsorError::NotComposable(format!("target {} vs source {}", self.to, other.from)));
        }
        Ok(TorsorMorphism { from: self.from, to: other.to, image_of_base: cm.g_mul(&other.image_of_base, &self.image_of_base) })
    }
}

fn g_samples<C: CrossedModule>(cm: &C, plan: SamplePlan, salt: u64) -> Result<Vec<C::G>, TorsorError> {
    match plan {
        SamplePlan::Exhaustive => cm.all_g().ok_or(TorsorError::NotEnumerable),
        SamplePlan::Random { count, seed } => {
            let mut r = rng(seed ^ salt);
            Ok((0..count).map(|_| cm.sample_g(&mut r)).collect())
        }
    }
}

/// All 2-group elements (exhaustive) or seeded samples.
pub fn cell_samples<C: CrossedModule>(cm: &C, plan: SamplePlan, salt: u64) -> Result<Vec<Cell<C>>, TorsorError> {
    match plan {
        SamplePlan::Exhaustive => {
            let gs = cm.all_g().ok_or(TorsorError::NotEnumerable)?;
            let hs = cm.all_h().ok_or(TorsorError::NotEnumerable)?;
            let mut out = Vec::new();
            for g in &gs {
                for h in &hs {
                    out.push(TwoGroupElement::new(g.clone(), h.clone()));
                }
            }
            Ok(out)
        }
        SamplePlan::Random { count, seed } => {
            let mut r = rng(seed ^ salt);
            Ok((0..count).map(|_| sample_cell(cm, &mut r)).collect())
        }
    }
}

pub fn sample_cell<C: CrossedModule>(cm: &C, r: &mut dyn RngCore) -> Cell<C> {
    let g = cm.sample_g(r);
    let h = cm.sample_h(r);
    TwoGroupElement::new(g, h)
}

/// Extend an equivariant point map to a functor; equivariance is checked over `plan`.
pub fn extend_functor<C: CrossedModule>(
    cm: &C,
    from: Torsor2,
    to: Torsor2,
    f0: impl Fn(&Obj<C>) -> Obj<C>,
    plan: SamplePlan,
) -> Result<TorsorMorphism<C::G>, TorsorError> {
    let tol = cm.tolerance();
    let gs = g_samples(cm, plan, 0xF0)?;
    let ks = g_samples(cm, plan, 0xF1)?;
    for (i, p) in gs.iter().enumerate() {
        let obj = from.object::<C>(p.clone());
        let image = f0(&obj);
        if image.label != to.label {
            return Err(TorsorError::MixedTorsors { left: image.label, right: to.label });
        }
        let partners: &[C::G] = match plan {
            SamplePlan::Exhaustive => &gs,
            SamplePlan::Random { .. } => core::slice::from_ref(&ks[i]),
        };
        for g in partners {
            let lhs = f0(&act_object(cm, &obj, g));
            let rhs = act_object(cm, &image, g);
            if lhs.label != rhs.label || cm.g_dist(&lhs.g, &rhs.g) > tol {
                return Err(TorsorError::NotEquivariant {
                    witness: format!("p={}, g={}", cm.describe_g(p), cm.describe_g(g)),
                });
            }
        }
    }
    let base = f0(&from.base(cm));
    Ok(TorsorMorphism { from: from.label, to: to.label, image_of_base: base.g })
}

/// A natural transformation `F ⇒ F'` in arrow form, determined by its component at the base object.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalTransformation<G, H> {
    pub from: TorsorMorphism<G>,
    pub to: TorsorMorphism<G>,
    pub at_base: TorsorArrow<G, H>,
}

impl<G: Clone, H: Clone> NaturalTransformation<G, H> {
    /// `η(p·g) = η(p)·id_g`.
    pub fn at<C: CrossedModule<G = G, H = H>>(&self, cm: &C, p: &Obj<C>) -> Arrow<C> {
        act_arrow(cm, &self.at_base, &identity_cell(cm, &p.g))
    }
}

/// `η_H`, determined by its value at the base object: `η_H(p·g) = α_{g⁻¹}(η_H(p))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaH<G, H> {
    pub from: TorsorMorphism<G>,
    pub to: TorsorMorphism<G>,
    pub at_base: H,
}

impl<G: Clone, H: Clone> EtaH<G, H> {
    pub fn at<C: CrossedModule<G = G, H = H>>(&self, cm: &C, p: &Obj<C>) -> H {
        cm.alpha(&cm.g_inv(&p.g), &self.at_base)
    }

    /// The identity 2-morphism on `f`.
    pub fn identity<C: CrossedModule<G = G, H = H>>(cm: &C, f: &TorsorMorphism<G>) -> Self {
        EtaH { from: f.clone(), to: f.clone(), at_base: cm.h_id() }
    }
}

/// Convert `η` (given pointwise) to `η_H(p) = η(p):id_{F(p)}`, checking naturality and equivariance over `plan`.
pub fn eta_to_eta_h<C: CrossedModule>(
    cm: &C,
    source: Torsor2,
    from: &TorsorMorphism<C::G>,
    to: &TorsorMorphism<C::G>,
    eta: impl Fn(&Obj<C>) -> Arrow<C>,
    plan: SamplePlan,
) -> Result<EtaH<C::G, C::H>, TorsorError> {
    let tol = cm.tolerance();
    let gs = g_samples(cm, plan, 0xE1)?;
    let ks = g_samples(cm, plan, 0xE3)?;
    let cells = cell_samples(cm, plan, 0xE2)?;
    let bad = |what: &str| TorsorError::NotNatural { witness: String::from(what) };
    for (i, p) in gs.iter().enumerate() {
        let obj = source.object::<C>(p.clone());
        let comp = eta(&obj);
        let (s, t) = (arrow_source(cm, &comp), arrow_target(cm, &comp));
        let (fp, fpp) = (from.on_object(cm, &obj), to.on_object(cm, &obj));
        if s.label != fp.label || cm.g_dist(&s.g, &fp.g) > tol || cm.g_dist(&t.g, &fpp.g) > tol {
            return Err(bad(&format!("component at p={} has wrong source/target", cm.describe_g(p))));
        }
        let partners: &[C::G] = match plan {
            SamplePlan::Exhaustive => &gs,
            SamplePlan::Random { .. } => core::slice::from_ref(&ks[i]),
        };
        for g in partners {
            let lhs = eta(&act_object(cm, &obj, g));
            let rhs = act_arrow(cm, &comp, &identity_cell(cm, g));
            if cm.g_dist(&lhs.cell.g, &rhs.cell.g) > tol || cm.h_dist(&lhs.cell.h, &rhs.cell.h) > tol {
                return Err(bad(&format!("eta(p.g) != eta(p).id_g at p={}, g={}", cm.describe_g(p), cm.describe_g(g))));
            }
        }
    }
    // naturality: η(q) ∘ F(X) = F'(X) ∘ η(p) for arrows X: p → q
    for cell in &cells {
        let x = source.arrow::<C>(cell.clone());
        let (p, q) = (arrow_source(cm, &x), arrow_target(cm, &x));
        let lhs = compose_arrows(cm, &eta(&q), &from.on_arrow(cm, &x))?;
        let rhs = compose_arrows(cm, &to.on_arrow(cm, &x), &eta(&p))?;
        if cm.g_dist(&lhs.cell.g, &rhs.cell.g) > tol || cm.h_dist(&lhs.cell.h, &rhs.cell.h) > tol {
            return Err(bad(&format!("naturality square at X=({}, {})", cm.describe_g(&cell.g), cm.describe_h(&cell.h))));
        }
    }
    let base = source.base(cm);
    let comp = eta(&base);
    let q = torsor_divide(cm, &comp, &identity_arrow(cm, &from.on_object(cm, &base)))?;
    Ok(EtaH { from: from.clone(), to: to.clone(), at_base: q.h })
}

/// Inverse of [`eta_to_eta_h`]: `η(p) = id_{F(p)}·(e, η_H(p))`.
pub fn eta_h_to_eta<C: CrossedModule>(cm: &C, source: Torsor2, eta_h: &EtaH<C::G, C::H>) -> NaturalTransformation<C::G, C::H> {
    let base = source.base(cm);
    let fb = eta_h.from.on_object(cm, &base);
    let at_base = act_arrow(cm, &identity_arrow(cm, &fb), &TwoGroupElement::new(cm.g_id(), eta_h.at_base.clone()));
    NaturalTransformation { from: eta_h.from.clone(), to: eta_h.to.clone(), at_base }
}

/// `(η' • η)_H(p) = η_H(p)·η'_H(p)`.
pub fn vertical_compose_eta_h<C: CrossedModule>(
    cm: &C,
    eta: &EtaH<C::G, C::H>,
    eta2: &EtaH<C::G, C::H>,
) -> Result<EtaH<C::G, C::H>, TorsorError> {
    if eta.to.to != eta2.from.to
        || eta.to.from != eta2.from.from
        || cm.g_dist(&eta.to.image_of_base, &eta2.from.image_of_base) > cm.tolerance()
    {
        return Err(TorsorError::NotComposable("target of the first 2-morphism is not the source of the second".into()));
    }
    Ok(EtaH { from: eta.from.clone(), to: eta2.to.clone(), at_base: cm.h_mul(&eta.at_base, &eta2.at_base) })
}

/// `(η₂ ∘ η₁)_H(p) = η₁,H(p)·η₂,H(F₁'(p))` for `η₁: F₁ ⇒ F₁'`, `η₂: F₂ ⇒ F₂'`.
pub fn horizontal_compose_eta_h<C: CrossedModule>(
    cm: &C,
    source: Torsor2,
    eta1: &EtaH<C::G, C::H>,
    eta2: &EtaH<C::G, C::H>,
) -> Result<EtaH<C::G, C::H>, TorsorError> {
    if eta1.from.to != eta2.from.from || eta1.to.to != eta2.to.from {
        return Err(TorsorError::NotComposable("target torsor of the first pair is not the source of the second".into()));
    }
    let base = source.base(cm);
    let f1p = eta1.to.on_object(cm, &base);
    let at_base = cm.h_mul(&eta1.at_base, &eta2.at(cm, &f1p));
    Ok(EtaH { from: eta1.from.then(cm, &eta2.from)?, to: eta1.to.then(cm, &eta2.to)?, at_base })
}

/// The other horizontal formula, `η₂,H(F₁(p))·η₁,H(p)`, evaluated pointwise.
pub fn horizontal_alternative_at<C: CrossedModule>(
    cm: &C,
    eta1: &EtaH<C::G, C::H>,
    eta2: &EtaH<C::G, C::H>,
    p: &Obj<C>,
) -> C::H {
    cm.h_mul(&eta2.at(cm, &eta1.from.on_object(cm, p)), &eta1.at(cm, p))
}

/// All `η_H` between two morphisms (finite backends): every `h` with `t(h) = F'(e):F(e)`.
pub fn all_eta_h<C: CrossedModule>(
    cm: &C,
    from: &TorsorMorphism<C::G>,
    to: &TorsorMorphism<C::G>,
) -> Result<Vec<EtaH<C::G, C::H>>, TorsorError> {
    let hs = cm.all_h().ok_or(TorsorError::NotEnumerable)?;
    let want = cm.g_mul(&cm.g_inv(&from.image_of_base), &to.image_of_base);
    Ok(hs
        .into_iter()
        .filter(|h| cm.g_dist(&cm.t(h), &want) <= cm.tolerance())
        .map(|h| EtaH { from: from.clone(), to: to.clone(), at_base: h })
        .collect())
}

/// One line of the self-test table.
#[derive(Debug, Clone, PartialEq)]
pub struct LawResult {
    pub law: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub max_defect: f64,
}

impl LawResult {
    fn new(law: &'static str) -> Self {
        LawResult { law, cases: 0, failures: 0, max_defect: 0.0 }
    }

    fn record(&mut self, defect: f64, tol: f64) {
        self.cases += 1;
        if !(defect <= tol) {
            self.failures += 1;
        }
        if defect > self.max_defect || defect.is_nan() {
            self.max_defect = if defect.is_nan() { f64::INFINITY } else { defect };
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

fn cell_dist<C: CrossedModule>(cm: &C, a: &Cell<C>, b: &Cell<C>) -> f64 {
    cm.g_dist(&a.g, &b.g).max(cm.h_dist(&a.h, &b.h))
}

/// Run every torsor law over `plan` (exhaustive for finite crossed modules).
pub fn torsor_selftest<C: CrossedModule>(cm: &C, plan: SamplePlan) -> Result<Vec<LawResult>, TorsorError> {
    let tol = cm.tolerance();
    let tor = Torsor2::new(0);
    let tor2 = Torsor2::new(1);
    let tor3 = Torsor2::new(2);
    let cells = cell_samples(cm, plan, 0xA1)?;
    let mut gs = g_samples(cm, plan, 0xA2)?;
    if !matches!(plan, SamplePlan::Exhaustive) {
        gs.truncate(64);
    }
    let mut out = Vec::new();

    // division: X·(Y:X) = Y, and uniqueness
    let mut division = LawResult::new("division");
    let mut uniqueness = LawResult::new("division_uniqueness");
    for x in &cells {
        for y in &cells {
            let (xa, ya) = (tor.arrow::<C>(x.clone()), tor.arrow::<C>(y.clone()));
            let q = torsor_divide(cm, &ya, &xa)?;
            division.record(cell_dist(cm, &act_arrow(cm, &xa, &q).cell, y), tol);
            if matches!(plan, SamplePlan::Exhaustive) {
                let hits = cells.iter().filter(|q2| cell_dist(cm, &act_arrow(cm, &xa, q2).cell, y) <= tol).count();
                uniqueness.record(if hits == 1 { 0.0 } else { hits as f64 }, 0.0);
            }
        }
    }
    out.push(division);
    if uniqueness.cases > 0 {
        out.push(uniqueness);
    }

    // (Y:Y')∘(X:X') = (Y∘X):(Y'∘X') for composable pairs
    let mut div_functorial = LawResult::new("division_functorial");
    let mut action_compose = LawResult::new("action_respects_composition");
    let limit = cells.len().min(64);
    let pairs = composable_pairs(cm, &cells, plan, limit);
    let inner = pairs.len().min(48);
    for (x, y) in &pairs {
        for (xp, yp) in pairs.iter().take(inner) {
            let (xa, ya, xpa, ypa) = (
                tor.arrow::<C>(x.clone()),
                tor.arrow::<C>(y.clone()),
                tor.arrow::<C>(xp.clone()),
                tor.arrow::<C>(yp.clone()),
            );
            let lhs_parts = (torsor_divide(cm, &ya, &ypa)?, torsor_divide(cm, &xa, &xpa)?);
            let yx = compose_arrows(cm, &ya, &xa)?;
            let ypxp = compose_arrows(cm, &ypa, &xpa)?;
            let rhs = torsor_divide(cm, &yx, &ypxp)?;
            match compose_unchecked(cm, &lhs_parts.0, &lhs_parts.1) {
                Ok(lhs) => div_functorial.record(cell_dist(cm, &lhs, &rhs), tol),
                Err(_) => div_functorial.record(f64::INFINITY, tol),
            }
            // (X·g)∘(Y·h) = (X∘Y)·(g∘h) with X = y, Y = x, g = y', h = x'
            let left = compose_unchecked(cm, &mul_unchecked(cm, y, yp), &mul_unchecked(cm, x, xp));
            let right_inner = compose_unchecked(cm, y, x);
            let right_outer = compose_unchecked(cm, yp, xp);
            match (left, right_inner, right_outer) {
                (Ok(l), Ok(ri), Ok(ro)) => action_compose.record(cell_dist(cm, &l, &mul_unchecked(cm, &ri, &ro)), tol),
                _ => action_compose.record(f64::INFINITY, tol),
            }
        }
    }
    out.push(div_functorial);
    out.push(action_compose);

    // every equivariant point map extends to an equivariant functor
    let mut extension = LawResult::new("functor_extension");
    let mut functoriality = LawResult::new("functor_functoriality");
    let morphisms: Vec<TorsorMorphism<C::G>> = gs
        .iter()
        .take(6)
        .map(|c0| {
            let c0 = c0.clone();
            extend_functor(cm, tor, tor2, |p| TorsorObject { label: 1, g: cm.g_mul(&c0, &p.g) }, plan)
        })
        .collect::<Result<_, _>>()?;
    for f in &morphisms {
        for x in cells.iter().take(limit) {
            let xa = tor.arrow::<C>(x.clone());
            let fx = f.on_arrow(cm, &xa);
            // reproduces F₀ on identities
            let p = arrow_source(cm, &xa);
            let fid = f.on_arrow(cm, &identity_arrow(cm, &p));
            extension.record(cell_dist(cm, &fid.cell, &identity_arrow(cm, &f.on_object(cm, &p)).cell), tol);
            // source/target match F₀
            extension.record(cm.g_dist(&arrow_source(cm, &fx).g, &f.on_object(cm, &p).g), tol);
            extension.record(cm.g_dist(&arrow_target(cm, &fx).g, &f.on_object(cm, &arrow_target(cm, &xa)).g), tol);
            for q in cells.iter().take(limit.min(24)) {
                let lhs = f.on_arrow(cm, &act_arrow(cm, &xa, q));
                let rhs = act_arrow(cm, &fx, q);
                extension.record(cell_dist(cm, &lhs.cell, &rhs.cell), tol);
            }
        }
    }
    let functor_pairs = match plan {
        SamplePlan::Exhaustive => pairs.clone(),
        SamplePlan::Random { .. } => composable_pairs(cm, &cells, plan, cells.len()),
    };
    for f in &morphisms {
        for (x, y) in &functor_pairs {
            let (xa, ya) = (tor.arrow::<C>(x.clone()), tor.arrow::<C>(y.clone()));
            let lhs = f.on_arrow(cm, &compose_arrows(cm, &ya, &xa)?);
            let rhs = compose_arrows(cm, &f.on_arrow(cm, &ya), &f.on_arrow(cm, &xa))?;
            functoriality.record(cell_dist(cm, &lhs.cell, &rhs.cell), tol);
        }
    }
    out.push(extension);
    out.push(functoriality);

    // η_H laws over all pairs of morphisms (finite) or sampled pairs
    let mut round_trip = LawResult::new("eta_round_trip");
    let mut t_of_eta = LawResult::new("eta_h_target");
    let mut eq_eta = LawResult::new("eta_h_equivariance");
    let mut vertical = LawResult::new("vertical_composition");
    let mut horizontal = LawResult::new("horizontal_formulas_agree");
    let mut interchange = LawResult::new("interchange");

    let eta_h_between = |f: &TorsorMorphism<C::G>, fp: &TorsorMorphism<C::G>, salt: u64| -> Vec<EtaH<C::G, C::H>> {
        match cm.all_h() {
            Some(_) => all_eta_h(cm, f, fp).unwrap_or_default(),
            None => sample_eta_h(cm, f, fp, plan, salt),
        }
    };

    let mlimit = morphisms.len().min(6);
    for f in morphisms.iter().take(mlimit) {
        for fp in morphisms.iter().take(mlimit) {
            for eh in eta_h_between(f, fp, 1) {
                let nat = eta_h_to_eta(cm, tor, &eh);
                let back = eta_to_eta_h(cm, tor, f, fp, |p| nat.at(cm, p), plan)?;
                round_trip.record(cm.h_dist(&back.at_base, &eh.at_base), tol);
                for g in &gs {
                    let p = tor.object::<C>(g.clone());
                    let want = divide_objects(cm, &fp.on_object(cm, &p), &f.on_object(cm, &p))?;
                    t_of_eta.record(cm.g_dist(&cm.t(&eh.at(cm, &p)), &want), tol);
                    // η(p) agrees with the pointwise definition η(p):id_{F(p)}
                    let q = torsor_divide(cm, &nat.at(cm, &p), &identity_arrow(cm, &f.on_object(cm, &p)))?;
                    round_trip.record(cm.h_dist(&q.h, &eh.at(cm, &p)).max(cm.g_dist(&q.g, &cm.g_id())), tol);
                    for k in gs.iter().take(8) {
                        let pk = act_object(cm, &p, k);
                        eq_eta.record(cm.h_dist(&eh.at(cm, &pk), &cm.alpha(&cm.g_inv(k), &eh.at(cm, &p))), tol);
                    }
                }
                for fpp in morphisms.iter().take(mlimit) {
                    for eh2 in eta_h_between(fp, fpp, 2) {
                        let v = vertical_compose_eta_h(cm, &eh, &eh2)?;
                        for g in &gs {
                            let p = tor.object::<C>(g.clone());
                            let want = cm.h_mul(&eh.at(cm, &p), &eh2.at(cm, &p));
                            vertical.record(cm.h_dist(&v.at(cm, &p), &want), tol);
                            // the composite, read back through arrow form, is the composite of arrows
                            let arrows = compose_arrows(
                                cm,
                                &eta_h_to_eta(cm, tor, &eh2).at(cm, &p),
                                &eta_h_to_eta(cm, tor, &eh).at(cm, &p),
                            )?;
                            let composed = eta_h_to_eta(cm, tor, &v).at(cm, &p);
                            vertical.record(cell_dist(cm, &arrows.cell, &composed.cell), tol);
                        }
                    }
                }
            }
        }
    }

    // horizontal composition and interchange, with a second layer of morphisms tor2 → tor3
    let second: Vec<TorsorMorphism<C::G>> = gs
        .iter()
        .take(mlimit)
        .map(|c0| TorsorMorphism { from: tor2.label, to: tor3.label, image_of_base: c0.clone() })
        .collect();
    let firsts: Vec<&TorsorMorphism<C::G>> = morphisms.iter().take(mlimit.min(4)).collect();
    let seconds: Vec<&TorsorMorphism<C::G>> = second.iter().take(mlimit.min(4)).collect();
    for f1 in &firsts {
        for f1p in &firsts {
            for e1 in eta_h_between(f1, f1p, 3) {
                for f2 in &seconds {
                    for f2p in &seconds {
                        for e2 in eta_h_between(f2, f2p, 4) {
                            let hc = horizontal_compose_eta_h(cm, tor, &e1, &e2)?;
                            for g in &gs {
                                let p = tor.object::<C>(g.clone());
                                let first = cm.h_mul(&e1.at(cm, &p), &e2.at(cm, &e1.to.on_object(cm, &p)));
                                let second = horizontal_alternative_at(cm, &e1, &e2, &p);
                                horizontal.record(cm.h_dist(&first, &second), tol);
                                horizontal.record(cm.h_dist(&hc.at(cm, &p), &first), tol);
                            }
                            // interchange: (η₂'•η₂)∘(η₁'•η₁) = (η₂'∘η₁')•(η₂∘η₁)
                            for f1pp in &firsts {
                                for e1p in eta_h_between(f1p, f1pp, 5).into_iter().take(3) {
                                    for f2pp in &seconds {
                                        for e2p in eta_h_between(f2p, f2pp, 6).into_iter().take(3) {
                                            let lhs = horizontal_compose_eta_h(
                                                cm,
                                                tor,
                                                &vertical_compose_eta_h(cm, &e1, &e1p)?,
                                                &vertical_compose_eta_h(cm, &e2, &e2p)?,
                                            )?;
                                            let rhs = vertical_compose_eta_h(
                                                cm,
                                                &hc,
                                                &horizontal_compose_eta_h(cm, tor, &e1p, &e2p)?,
                                            )?;
                                            for g in gs.iter().take(8) {
                                                let p = tor.object::<C>(g.clone());
                                                interchange.record(cm.h_dist(&lhs.at(cm, &p), &rhs.at(cm, &p)), tol);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.extend([round_trip, t_of_eta, eq_eta, vertical, horizontal, interchange]);
    Ok(out)
}

/// Composable pairs `(x, y)` with `y ∘ x` defined: all of them for exhaustive plans,
/// otherwise one constructed partner per sampled cell.
fn composable_pairs<C: CrossedModule>(cm: &C, cells: &[Cell<C>], plan: SamplePlan, limit: usize) -> Vec<(Cell<C>, Cell<C>)> {
    match plan {
        SamplePlan::Exhaustive => {
            let mut out = Vec::new();
            for x in cells.iter().take(limit) {
                for y in cells.iter().take(limit) {
                    if cm.g_dist(&y.g, &target(cm, x)) <= cm.tolerance() {
                        out.push((x.clone(), y.clone()));
                    }
                }
            }
            out
        }
        SamplePlan::Random { seed, .. } => {
            let mut r = rng(seed ^ 0xC0);
            cells
                .iter()
                .take(limit)
                .map(|x| (x.clone(), TwoGroupElement::new(target(cm, x), cm.sample_h(&mut r))))
                .collect()
        }
    }
}

/// Sampled `η_H` for continuum groups: `h = k·s` with `s` fixed by `t(s) = F'(e):F(e)` and `k ∈ ker t`.
fn sample_eta_h<C: CrossedModule>(
    cm: &C,
    from: &TorsorMorphism<C::G>,
    to: &TorsorMorphism<C::G>,
    plan: SamplePlan,
    salt: u64,
) -> Vec<EtaH<C::G, C::H>> {
    let seed = match plan {
        SamplePlan::Random { seed, .. } => seed,
        SamplePlan::Exhaustive => 0,
    };
    let mut r = rng(seed ^ (salt << 8));
    let want = cm.g_mul(&cm.g_inv(&from.image_of_base), &to.image_of_base);
    let mut out = Vec::new();
    for k in cm.kernel_elements(&mut r, 2) {
        if let Some(s) = preimage(cm, &want, &mut r) {
            out.push(EtaH { from: from.clone(), to: to.clone(), at_base: cm.h_mul(&k, &s) });
        }
    }
    out
}

fn preimage<C: CrossedModule>(cm: &C, want: &C::G, _r: &mut dyn RngCore) -> Option<C::H> {
    cm.t_preimage(want)
}
