use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hom::{braid_residual, two_leg_dimension, two_leg_operator, u_omega, StarHom, HOM_TOL};
use crate::error::{Error, Result};
use crate::matalg::{
    leg_embedding, pauli_matrices, tensor_chain, AlgElement, Block, BlockAlgebra, DimensionCap, FaithfulState, C64,
    ONE, ZERO,
};
use crate::subalg::{central_projection, generate_subalgebra, Labeled, Subalgebra};
use crate::tuplecomb::IndexTuple;

/// Cap on the total number of entries of a [`MomentTables`] bundle.
pub const MOMENT_TABLE_CAP: u128 = 1 << 24;

/// Largest residual accepted by [`yang_baxter_sequence`].
pub const BRAID_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    IidTensor,
    CodomainPerturbed,
    CoinMixture,
    YangBaxter,
    Custom,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::IidTensor => "iid_tensor",
            ModelKind::CodomainPerturbed => "codomain_perturbed",
            ModelKind::CoinMixture => "coin_mixture",
            ModelKind::YangBaxter => "yang_baxter",
            ModelKind::Custom => "custom",
        }
    }
}

/// The concrete ambient `(M, ψ)` together with the embeddings `ι_0..ι_{L−1}`.
#[derive(Clone, Debug)]
pub struct Ambient {
    pub algebra: BlockAlgebra,
    pub state: FaithfulState,
    pub embeddings: Vec<StarHom>,
}

/// Mixture of product states over `L` legs of the base algebra, with an
/// optional base automorphism per leg. Moments factor leg by leg inside
/// each fibre, so no ambient matrices are needed to evaluate them.
#[derive(Clone, Debug)]
struct LegProduct {
    fibers: Vec<(f64, FaithfulState)>,
    gammas: Vec<Option<StarHom>>,
}

#[derive(Clone, Debug)]
enum Engine {
    Legs(LegProduct),
    Dense(Ambient),
}

/// A random sequence on a finite window `ι_0, …, ι_{L−1}: (A_0, φ_0) → (M, ψ)`.
#[derive(Clone, Debug)]
pub struct RandomSequenceModel {
    kind: ModelKind,
    label: String,
    base: FaithfulState,
    basis: Vec<AlgElement>,
    window: usize,
    shift_semantics: bool,
    engine: Engine,
    lazy_ambient: OnceLock<std::result::Result<Ambient, Error>>,
}

/// Serializable summary of a model (kind and parameters, no matrices).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub label: String,
    pub window: usize,
    pub base_blocks: Vec<usize>,
    pub shift_semantics: bool,
}

impl RandomSequenceModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn base_state(&self) -> &FaithfulState {
        &self.base
    }

    pub fn base(&self) -> &BlockAlgebra {
        self.base.algebra()
    }

    /// Hermitian basis of the base algebra used for basis choices.
    pub fn basis(&self) -> &[AlgElement] {
        &self.basis
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Whether translating index tuples inside the window is meaningful for
    /// this model's construction rule.
    pub fn shift_semantics(&self) -> bool {
        self.shift_semantics
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            kind: self.kind,
            label: self.label.clone(),
            window: self.window,
            base_blocks: self.base().blocks().to_vec(),
            shift_semantics: self.shift_semantics,
        }
    }

    /// Whether moments are evaluated leg by leg rather than in a dense ambient.
    pub fn is_leg_factorized(&self) -> bool {
        matches!(self.engine, Engine::Legs(_))
    }

    /// The ambient algebra and embeddings. For leg-factorised models this is
    /// materialised on first use and fails if the tensor power exceeds the
    /// default dimension cap.
    pub fn ambient(&self) -> Result<&Ambient> {
        match &self.engine {
            Engine::Dense(a) => Ok(a),
            Engine::Legs(legs) => self
                .lazy_ambient
                .get_or_init(|| materialize(&self.base, legs, self.window))
                .as_ref()
                .map_err(|e| e.clone()),
        }
    }

    /// `ι_leg(x)` in the ambient algebra.
    pub fn embed(&self, leg: usize, x: &AlgElement) -> Result<AlgElement> {
        self.check_window("embedding", leg + 1)?;
        self.ambient()?.embeddings[leg].apply(x)
    }

    pub(crate) fn check_window(&self, context: &str, required: usize) -> Result<()> {
        if required > self.window {
            Err(Error::Window {
                context: context.to_string(),
                required,
                available: self.window,
            })
        } else {
            Ok(())
        }
    }

    fn leg_image(legs: &LegProduct, leg: usize, x: &AlgElement) -> AlgElement {
        match &legs.gammas[leg] {
            Some(g) => g.apply_unchecked(x),
            None => x.clone(),
        }
    }

    /// `ψ(ι_{i(1)}(a_1) ··· ι_{i(n)}(a_n))` for basis elements `a_k = basis[basis_choice[k]]`.
    pub fn psi_moment(&self, tuple: &IndexTuple, basis_choice: &[usize]) -> Result<C64> {
        if let Some(&bad) = basis_choice.iter().find(|&&b| b >= self.basis.len()) {
            return Err(Error::Validation(format!(
                "basis index {bad} outside hermitian basis of size {}",
                self.basis.len()
            )));
        }
        let elems: Vec<&AlgElement> = basis_choice.iter().map(|&b| &self.basis[b]).collect();
        self.moment_refs(tuple, &elems)
    }

    /// `ψ(ι_{i(1)}(x_1) ··· ι_{i(n)}(x_n))` for arbitrary base elements.
    pub fn moment_of_elements(&self, tuple: &IndexTuple, elems: &[AlgElement]) -> Result<C64> {
        let refs: Vec<&AlgElement> = elems.iter().collect();
        self.moment_refs(tuple, &refs)
    }

    fn moment_refs(&self, tuple: &IndexTuple, elems: &[&AlgElement]) -> Result<C64> {
        if tuple.len() != elems.len() {
            return Err(Error::LengthMismatch {
                left: tuple.len(),
                right: elems.len(),
            });
        }
        if let Some(m) = tuple.max_entry() {
            self.check_window(&format!("moment of {tuple}"), m + 1)?;
        }
        for x in elems {
            self.base().ensure_same(x.algebra())?;
        }
        Ok(match &self.engine {
            Engine::Legs(legs) => {
                let images: Vec<AlgElement> = tuple
                    .entries()
                    .iter()
                    .zip(elems)
                    .map(|(&leg, x)| Self::leg_image(legs, leg, x))
                    .collect();
                let refs: Vec<&AlgElement> = images.iter().collect();
                leg_moment(legs, tuple.entries(), &refs)
            }
            Engine::Dense(amb) => dense_moment(amb, tuple.entries(), elems),
        })
    }

    /// Moment computed in the materialised ambient, regardless of engine.
    /// Used to cross-check the leg-factorised evaluation.
    pub fn dense_moment_of_elements(&self, tuple: &IndexTuple, elems: &[AlgElement]) -> Result<C64> {
        if tuple.len() != elems.len() {
            return Err(Error::LengthMismatch {
                left: tuple.len(),
                right: elems.len(),
            });
        }
        if let Some(m) = tuple.max_entry() {
            self.check_window(&format!("moment of {tuple}"), m + 1)?;
        }
        let amb = self.ambient()?;
        let refs: Vec<&AlgElement> = elems.iter().collect();
        Ok(dense_moment(amb, tuple.entries(), &refs))
    }

    /// All moments `ψ_ι[i; a]` for tuple lengths `0..=degree`, entries below
    /// `window` and basis choices from [`Self::basis`].
    pub fn moment_tables(&self, degree: usize, window: usize) -> Result<MomentTables> {
        self.moment_tables_for(&self.basis, degree, window)
    }

    /// As [`Self::moment_tables`] with the choices drawn from `elems`.
    pub fn moment_tables_for(&self, elems: &[AlgElement], degree: usize, window: usize) -> Result<MomentTables> {
        self.check_window("moment table", window)?;
        if window == 0 || elems.is_empty() {
            return Err(Error::Validation(
                "moment tables need a window and at least one element".into(),
            ));
        }
        for x in elems {
            self.base().ensure_same(x.algebra())?;
        }
        let nb = elems.len();
        let width = (window * nb) as u128;
        let mut total: u128 = 0;
        for n in 0..=degree {
            total = total.saturating_add(width.saturating_pow(n as u32));
        }
        if total > MOMENT_TABLE_CAP {
            return Err(Error::Resource {
                what: format!("moment tables up to degree {degree} on window {window}"),
                size: total,
                cap: MOMENT_TABLE_CAP,
            });
        }
        let tables = match &self.engine {
            Engine::Legs(legs) => leg_tables(legs, elems, degree, window),
            Engine::Dense(amb) => dense_tables(amb, elems, degree, window),
        };
        Ok(MomentTables {
            window,
            nbasis: nb,
            tables,
        })
    }

    /// The fibre-scalar subalgebra `ℂ^{#fibres}` spanned by the central
    /// projections onto each mixture component.
    pub fn fiber_scalars(&self) -> Result<Subalgebra> {
        let legs = match &self.engine {
            Engine::Legs(l) => l,
            Engine::Dense(_) => {
                return Err(Error::Precondition(
                    "fibre scalars exist only for mixture models".into(),
                ));
            }
        };
        let amb = self.ambient()?;
        let per_fiber = amb.algebra.num_blocks() / legs.fibers.len();
        let gens: Vec<Labeled> = (0..legs.fibers.len())
            .map(|f| {
                Labeled::new(
                    format!("fiber{f}"),
                    central_projection(&amb.algebra, f * per_fiber..(f + 1) * per_fiber),
                )
            })
            .collect();
        generate_subalgebra(&amb.state, &gens, 1e-10)
    }
}

impl RandomSequenceModel {
    /// The first `window` variables. Leg-factorised models shrink their
    /// ambient; dense models keep it.
    pub fn restricted(&self, window: usize) -> Result<RandomSequenceModel> {
        check_window_len(window, 1)?;
        self.check_window("restriction", window)?;
        let mut out = self.clone();
        out.window = window;
        out.label = format!("{} restricted to {window}", self.label);
        match &mut out.engine {
            Engine::Legs(legs) => {
                legs.gammas.truncate(window);
                out.lazy_ambient = OnceLock::new();
            }
            Engine::Dense(amb) => amb.embeddings.truncate(window),
        }
        Ok(out)
    }
}

fn leg_tables(legs: &LegProduct, elems: &[AlgElement], degree: usize, window: usize) -> Vec<Vec<C64>> {
    let nb = elems.len();
    // images[leg][b]
    let images: Vec<Vec<AlgElement>> = (0..window)
        .map(|leg| {
            elems
                .iter()
                .map(|b| RandomSequenceModel::leg_image(legs, leg, b))
                .collect()
        })
        .collect();
    (0..=degree)
        .map(|n| {
            let count = (window * nb).pow(n as u32);
            (0..count)
                .into_par_iter()
                .map(|idx| {
                    let (t, b) = decode(idx, n, window, nb);
                    let refs: Vec<&AlgElement> = t.iter().zip(&b).map(|(&l, &k)| &images[l][k]).collect();
                    leg_moment(legs, &t, &refs)
                })
                .collect()
        })
        .collect()
}

/// Lexicographic (tuple, basis) index decoding.
fn decode(idx: usize, n: usize, window: usize, nb: usize) -> (Vec<usize>, Vec<usize>) {
    let bcount = nb.pow(n as u32);
    let mut tcode = idx / bcount;
    let mut bcode = idx % bcount;
    let mut t = vec![0; n];
    let mut b = vec![0; n];
    for k in (0..n).rev() {
        t[k] = tcode % window;
        tcode /= window;
        b[k] = bcode % nb;
        bcode /= nb;
    }
    (t, b)
}

fn encode(t: &[usize], b: &[usize], window: usize, nb: usize) -> usize {
    let tcode = t.iter().fold(0, |acc, &x| acc * window + x);
    let bcode = b.iter().fold(0, |acc, &x| acc * nb + x);
    tcode * nb.pow(b.len() as u32) + bcode
}

/// Precomputed moments, indexed lexicographically by tuple then basis choice.
#[derive(Clone, Debug)]
pub struct MomentTables {
    pub window: usize,
    pub nbasis: usize,
    tables: Vec<Vec<C64>>,
}

impl MomentTables {
    pub fn degree(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn get(&self, tuple: &[usize], basis_choice: &[usize]) -> C64 {
        self.tables[tuple.len()][encode(tuple, basis_choice, self.window, self.nbasis)]
    }

    /// Number of entries for tuples of length `n`.
    pub fn len_of(&self, n: usize) -> usize {
        self.tables[n].len()
    }

    pub fn decode(&self, n: usize, idx: usize) -> (Vec<usize>, Vec<usize>) {
        decode(idx, n, self.window, self.nbasis)
    }

    pub fn value(&self, n: usize, idx: usize) -> C64 {
        self.tables[n][idx]
    }
}

fn leg_moment(legs: &LegProduct, tuple: &[usize], factors: &[&AlgElement]) -> C64 {
    if tuple.is_empty() {
        return ONE;
    }
    // group factors by leg, preserving their order within each leg
    let mut groups: Vec<(usize, AlgElement)> = Vec::new();
    for (&leg, x) in tuple.iter().zip(factors) {
        match groups.iter_mut().find(|(l, _)| *l == leg) {
            Some((_, acc)) => *acc = &*acc * *x,
            None => groups.push((leg, (*x).clone())),
        }
    }
    legs.fibers
        .iter()
        .map(|(w, phi)| {
            let prod = groups.iter().fold(ONE, |acc, (_, g)| acc * phi.eval_unchecked(g));
            prod * *w
        })
        .fold(ZERO, |a, b| a + b)
}

fn dense_moment(amb: &Ambient, tuple: &[usize], elems: &[&AlgElement]) -> C64 {
    if tuple.is_empty() {
        return ONE;
    }
    let mut acc: Option<AlgElement> = None;
    for (&leg, x) in tuple.iter().zip(elems) {
        let img = amb.embeddings[leg].apply_unchecked(x);
        acc = Some(match acc {
            None => img,
            Some(a) => &a * &img,
        });
    }
    amb.state.eval_unchecked(&acc.expect("nonempty"))
}

/// Depth-first evaluation of all moments, sharing prefix products. The
/// running prefix carries the weighted densities so that each leaf costs a
/// single trace pairing.
fn dense_tables(amb: &Ambient, basis: &[AlgElement], degree: usize, window: usize) -> Vec<Vec<C64>> {
    let nb = basis.len();
    let images: Vec<Vec<Vec<Block>>> = (0..window)
        .map(|leg| {
            basis
                .iter()
                .map(|b| amb.embeddings[leg].apply_unchecked(b).into_blocks())
                .collect()
        })
        .collect();
    let root: Vec<Block> = amb
        .state
        .densities()
        .iter()
        .zip(amb.state.weights())
        .map(|(rho, w)| rho * C64::new(*w, 0.0))
        .collect();

    let mut tables: Vec<Vec<C64>> = (0..=degree).map(|n| vec![ZERO; (window * nb).pow(n as u32)]).collect();
    tables[0][0] = ONE;
    if degree == 0 {
        return tables;
    }
    let firsts: Vec<(usize, usize)> = (0..window).flat_map(|l| (0..nb).map(move |b| (l, b))).collect();
    let results: Vec<Vec<(usize, usize, C64)>> = firsts
        .par_iter()
        .map(|&(l, b)| {
            let mut out = Vec::new();
            let mut t = vec![l];
            let mut bc = vec![b];
            dfs(&images, &root, &mut t, &mut bc, degree, window, nb, &mut out);
            out
        })
        .collect();
    for chunk in results {
        for (n, idx, v) in chunk {
            tables[n][idx] = v;
        }
    }
    tables
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    images: &[Vec<Vec<Block>>],
    prefix: &[Block],
    t: &mut Vec<usize>,
    bc: &mut Vec<usize>,
    degree: usize,
    window: usize,
    nb: usize,
    out: &mut Vec<(usize, usize, C64)>,
) {
    let x = &images[*t.last().unwrap()][*bc.last().unwrap()];
    let value = prefix
        .iter()
        .zip(x)
        .map(|(q, xb)| trace_of_product(q, xb))
        .fold(ZERO, |a, b| a + b);
    out.push((t.len(), encode(t, bc, window, nb), value));
    if t.len() == degree {
        return;
    }
    let next: Vec<Block> = prefix.iter().zip(x).map(|(q, xb)| q * xb).collect();
    for l in 0..window {
        for b in 0..nb {
            t.push(l);
            bc.push(b);
            dfs(images, &next, t, bc, degree, window, nb, out);
            t.pop();
            bc.pop();
        }
    }
}

fn trace_of_product(a: &Block, b: &Block) -> C64 {
    // tr(AB) = Σ_jk A_jk B_kj
    let mut acc = ZERO;
    for j in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

fn materialize(base: &FaithfulState, legs: &LegProduct, window: usize) -> Result<Ambient> {
    let cap = DimensionCap::default();
    let mut chains = Vec::with_capacity(legs.fibers.len());
    for (_, phi) in &legs.fibers {
        chains.push(tensor_chain(base.algebra(), phi, window, cap)?);
    }
    let single = chains.len() == 1;
    let algebra = if single {
        chains[0].0.clone()
    } else {
        BlockAlgebra::direct_sum(&chains.iter().map(|(a, _)| a.clone()).collect::<Vec<_>>())?
    };
    let state = if single {
        chains[0].1.clone()
    } else {
        let parts: Vec<(f64, &FaithfulState)> = legs
            .fibers
            .iter()
            .zip(&chains)
            .map(|((w, _), (_, s))| (*w, s))
            .collect();
        FaithfulState::direct_sum(&parts)?
    };
    let mut embeddings = Vec::with_capacity(window);
    for leg in 0..window {
        let hom = StarHom::from_fn_unchecked(base, &state, |u| {
            let local = match &legs.gammas[leg] {
                Some(g) => g.apply_unchecked(u),
                None => u.clone(),
            };
            let e = leg_embedding(&local, leg, window)?;
            if single {
                Ok(e)
            } else {
                AlgElement::direct_sum(&vec![e; chains.len()])
            }
        })?;
        embeddings.push(hom);
    }
    Ok(Ambient {
        algebra,
        state,
        embeddings,
    })
}

fn check_window_len(window: usize, min: usize) -> Result<()> {
    if window < min {
        return Err(Error::Validation(format!(
            "window must be at least {min}, got {window}"
        )));
    }
    Ok(())
}

fn leg_model(
    kind: ModelKind,
    label: String,
    base: &FaithfulState,
    fibers: Vec<(f64, FaithfulState)>,
    window: usize,
) -> RandomSequenceModel {
    RandomSequenceModel {
        kind,
        label,
        basis: base.algebra().hermitian_basis(),
        base: base.clone(),
        window,
        shift_semantics: true,
        engine: Engine::Legs(LegProduct {
            fibers,
            gammas: vec![None; window],
        }),
        lazy_ambient: OnceLock::new(),
    }
}

/// Canonical tensor-leg embeddings `ι_n(x) = 1 ⊗ … ⊗ x ⊗ … ⊗ 1` into
/// `(A_0, φ_0)^{⊗L}`.
///
/// Moments are evaluated leg by leg; the dense ambient is only built when
/// requested through [`RandomSequenceModel::ambient`], which enforces the
/// dimension cap.
pub fn iid_tensor_sequence(base_state: &FaithfulState, window: usize) -> Result<RandomSequenceModel> {
    check_window_len(window, 1)?;
    Ok(leg_model(
        ModelKind::IidTensor,
        format!("iid_tensor(base={}, L={window})", base_state.algebra()),
        base_state,
        vec![(1.0, base_state.clone())],
        window,
    ))
}

/// Mixture of coin-toss sequences: base `ℂ²`, fibres `⊗ trace_{p_k}` with
/// weights `w_k`, `ι_i` embedding at leg `i` in every fibre.
pub fn coin_mixture_sequence(atoms: &[(f64, f64)], window: usize) -> Result<RandomSequenceModel> {
    check_window_len(window, 1)?;
    if atoms.is_empty() {
        return Err(Error::Validation("mixing measure needs at least one atom".into()));
    }
    let total: f64 = atoms.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("atom weights sum to {total}, not 1")));
    }
    for (k, &(p, w)) in atoms.iter().enumerate() {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Validation(format!("atom {k}: p = {p} outside (0, 1)")));
        }
        if w.is_nan() || w <= 0.0 {
            return Err(Error::Validation(format!("atom {k}: weight {w} is not positive")));
        }
        if atoms[..k].iter().any(|(q, _)| (q - p).abs() <= 1e-12) {
            return Err(Error::Validation(format!("atom {k}: p = {p} repeats an earlier atom")));
        }
    }
    // the base state is the barycentre of the fibre states
    let mean_p: f64 = atoms.iter().map(|(p, w)| p * w).sum();
    let base = FaithfulState::trace_p(mean_p)?;
    let fibers = atoms
        .iter()
        .map(|&(p, w)| Ok((w, FaithfulState::trace_p(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let desc = atoms
        .iter()
        .map(|(p, w)| format!("({p}, {w})"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(leg_model(
        ModelKind::CoinMixture,
        format!("coin_mixture(atoms=[{desc}], L={window})"),
        &base,
        fibers,
        window,
    ))
}

/// Chain `M_2^{⊗L}` with the trace, canonical `ι_n` except
/// `ι_1 = Ad(U_ω on legs 0,1) ∘ ι_0`.
pub fn codomain_perturbed_sequence(omega: C64, window: usize) -> Result<RandomSequenceModel> {
    if (omega.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("|ω| = {} is not 1", omega.norm())));
    }
    check_window_len(window, 4)?;
    let m2 = BlockAlgebra::full(2)?;
    let base = FaithfulState::normalized_trace(&m2);
    let (algebra, state) = tensor_chain(&m2, &base, window, DimensionCap::default())?;
    let u = two_leg_operator(&u_omega(omega), 2, 0, window)?;
    let mut embeddings = Vec::with_capacity(window);
    for leg in 0..window {
        let canonical = StarHom::from_fn_unchecked(&base, &state, |x| leg_embedding(x, leg, window))?;
        embeddings.push(canonical);
    }
    embeddings[1] = embeddings[0].conjugated(&u)?;
    Ok(dense_model(
        ModelKind::CodomainPerturbed,
        format!("codomain_perturbed(omega={}{:+}i, L={window})", omega.re, omega.im),
        &base,
        Ambient {
            algebra,
            state,
            embeddings,
        },
        true,
    ))
}

/// Braided sequence `ι_n = ρ(σ_n ··· σ_1) ι_0` on `M_d^{⊗L}` with the trace,
/// where `ρ(σ_k)` is conjugation by `u` on legs `(k−1, k)`.
pub fn yang_baxter_sequence(u: &AlgElement, window: usize) -> Result<RandomSequenceModel> {
    check_window_len(window, 1)?;
    let d = two_leg_dimension(u)?;
    if !u.is_unitary(1e-10) {
        return Err(Error::Validation("u is not unitary".into()));
    }
    let residual = braid_residual(u)?;
    if residual > BRAID_TOL {
        return Err(Error::Precondition(format!(
            "braid relation violated: residual {residual:.3e}"
        )));
    }
    let md = BlockAlgebra::full(d)?;
    let base = FaithfulState::normalized_trace(&md);
    let (algebra, state) = tensor_chain(&md, &base, window, DimensionCap::default())?;
    let iota0 = StarHom::from_fn_unchecked(&base, &state, |x| leg_embedding(x, 0, window))?;
    let mut embeddings = vec![iota0];
    for n in 1..window {
        let gen = two_leg_operator(u, d, n - 1, window)?;
        let next = embeddings[n - 1].conjugated(&gen)?;
        embeddings.push(next);
    }
    Ok(dense_model(
        ModelKind::YangBaxter,
        format!("yang_baxter(d={d}, L={window})"),
        &base,
        Ambient {
            algebra,
            state,
            embeddings,
        },
        true,
    ))
}

/// Replace `ι_position` by `ι_position ∘ γ` for a `φ_0`-preserving
/// automorphism `γ` of the base.
pub fn perturbed_domain_sequence(
    model: &RandomSequenceModel,
    position: usize,
    gamma: &StarHom,
) -> Result<RandomSequenceModel> {
    model.check_window("domain perturbation", position + 1)?;
    model.base().ensure_same(gamma.domain().algebra())?;
    model.base().ensure_same(gamma.codomain().algebra())?;
    let as_base_map = StarHom::new_unchecked(model.base_state(), model.base_state(), gamma.images().to_vec())?;
    as_base_map.validate(HOM_TOL).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("γ is not a φ₀-preserving automorphism: {m}")),
        other => other,
    })?;
    let mut out = model.clone();
    out.lazy_ambient = OnceLock::new();
    out.label = format!("{} ∘ γ at {position}", model.label);
    match &mut out.engine {
        Engine::Legs(legs) => {
            let composed = match &legs.gammas[position] {
                Some(g) => g.compose(&as_base_map)?,
                None => as_base_map,
            };
            legs.gammas[position] = Some(composed);
        }
        Engine::Dense(amb) => {
            amb.embeddings[position] = amb.embeddings[position].compose(&as_base_map)?;
        }
    }
    Ok(out)
}

/// Replace `ι_position` by `Ad(u) ∘ ι_position` for an ambient unitary `u`.
/// The result is a dense custom model; `u` must keep `ψ ∘ ι_position = φ_0`.
pub fn conjugated_sequence(
    model: &RandomSequenceModel,
    position: usize,
    u: &AlgElement,
) -> Result<RandomSequenceModel> {
    model.check_window("codomain perturbation", position + 1)?;
    let amb = model.ambient()?.clone();
    if !u.is_unitary(1e-10) {
        return Err(Error::Validation("conjugating element is not unitary".into()));
    }
    let mut embeddings = amb.embeddings;
    embeddings[position] = embeddings[position].conjugated(u)?;
    custom_sequence(
        model.base_state(),
        &amb.state,
        embeddings,
        model.shift_semantics,
        format!("{} with Ad(u) at {position}", model.label),
    )
}

/// A model from explicit embeddings; each is validated as a state-compatible
/// injective *-homomorphism.
pub fn custom_sequence(
    base: &FaithfulState,
    ambient_state: &FaithfulState,
    embeddings: Vec<StarHom>,
    shift_semantics: bool,
    label: String,
) -> Result<RandomSequenceModel> {
    if embeddings.is_empty() {
        return Err(Error::Validation("custom model needs at least one embedding".into()));
    }
    for (n, e) in embeddings.iter().enumerate() {
        base.algebra().ensure_same(e.domain().algebra())?;
        ambient_state.algebra().ensure_same(e.codomain().algebra())?;
        let rebased = StarHom::new_unchecked(base, ambient_state, e.images().to_vec())?;
        rebased
            .validate(HOM_TOL)
            .map_err(|err| Error::Validation(format!("embedding {n}: {err}")))?;
    }
    let embeddings = embeddings
        .into_iter()
        .map(|e| StarHom::new_unchecked(base, ambient_state, e.images().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(dense_model(
        ModelKind::Custom,
        label,
        base,
        Ambient {
            algebra: ambient_state.algebra().clone(),
            state: ambient_state.clone(),
            embeddings,
        },
        shift_semantics,
    ))
}

fn dense_model(
    kind: ModelKind,
    label: String,
    base: &FaithfulState,
    ambient: Ambient,
    shift_semantics: bool,
) -> RandomSequenceModel {
    RandomSequenceModel {
        kind,
        label,
        basis: base.algebra().hermitian_basis(),
        base: base.clone(),
        window: ambient.embeddings.len(),
        shift_semantics,
        engine: Engine::Dense(ambient),
        lazy_ambient: OnceLock::new(),
    }
}

/// Calibration model: the iid `M_2` chain with `ι_1` replaced by
/// `Ad(u) ∘ ι_1`, `u = exp(iδ σ_y ⊗ σ_z)` on legs `(0, 1)`, so that
/// `‖u − 1‖ = |sin δ|`.
pub fn calibration_sequence(delta: f64, window: usize) -> Result<RandomSequenceModel> {
    if !delta.is_finite() {
        return Err(Error::Validation(format!("δ = {delta} is not finite")));
    }
    check_window_len(window, 2)?;
    let m2 = BlockAlgebra::full(2)?;
    let base = FaithfulState::normalized_trace(&m2);
    let p = pauli_matrices();
    let h = AlgElement::from_matrix(p[2].kronecker(&p[3]))?;
    let two = BlockAlgebra::full(4)?;
    let gate = &two.identity().scale(C64::new(delta.cos(), 0.0)) + &h.scale(C64::new(0.0, delta.sin()));
    let iid = iid_tensor_sequence(&base, window)?;
    let u = two_leg_operator(&gate, 2, 0, window)?;
    let mut out = conjugated_sequence(&iid, 1, &u)?;
    out.label = format!("calibration(delta={delta}, L={window})");
    Ok(out)
}
