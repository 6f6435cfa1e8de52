//! Integral-action augmentation and MIMO state-feedback gain synthesis by
//! parametric eigenstructure assignment, with closed-loop verification.
//!
//! For each requested eigenvalue λ the synthesizer parameterizes the null
//! space of the pencil `[A − λI | B]`: any null vector splits into a
//! closed-loop eigenvector (top block) and its input direction (bottom
//! block). A free parameter vector per eigenvalue selects one null-space
//! element; the gain is recovered from the assembled eigenvector matrices
//! as `K = −W·V⁻¹`, which satisfies `(A − B·K)·vᵢ = λᵢ·vᵢ`.

use nalgebra::{ComplexField, DMatrix, DVector, Matrix6, Matrix6x2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::LinearModel;

/// Reject gains computed through an eigenvector matrix worse conditioned
/// than this: beyond it the entries are meaningless at the verification
/// tolerance.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

const MAX_EIG_DIM: usize = 16;
const SCHUR_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid PoleSet: {reason}")]
    InvalidPoleSet { reason: String },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("uncontrollable mode at pole {pole}")]
    UncontrollableMode { pole: Complex<f64> },
    #[error(
        "ill-conditioned eigenvector matrix (cond = {cond:.3e} > {MAX_EIGENVECTOR_CONDITION:.0e})"
    )]
    IllConditionedEigenvectors { cond: f64 },
    #[error("pole {pole} repeated {multiplicity} times exceeds the {inputs}-input capacity")]
    Multiplicity { pole: Complex<f64>, multiplicity: usize, inputs: usize },
    #[error("gain matrix is not real: imaginary residue {residue:.3e}")]
    NonRealGain { residue: f64 },
    #[error("eigenvalue iteration did not converge within {SCHUR_MAX_ITERATIONS} iterations")]
    EigNonConvergence,
}

/// Target closed-loop eigenvalues: strictly stable and closed under
/// conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    poles: Vec<Complex<f64>>,
}

impl PoleSet {
    pub fn new(poles: Vec<Complex<f64>>) -> Result<Self, SynthesisError> {
        if poles.is_empty() {
            return Err(SynthesisError::InvalidPoleSet { reason: "pole list is empty".into() });
        }
        for p in &poles {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(SynthesisError::InvalidPoleSet {
                    reason: format!("pole {p} is not finite"),
                });
            }
            if p.re >= 0.0 {
                return Err(SynthesisError::InvalidPoleSet {
                    reason: format!("pole {p} has non-negative real part"),
                });
            }
        }
        // Self-conjugation as a multiset property: pair every non-real
        // pole with an unconsumed exact conjugate.
        let mut used = vec![false; poles.len()];
        for (i, p) in poles.iter().enumerate() {
            if p.im == 0.0 || used[i] {
                continue;
            }
            let partner = poles.iter().enumerate().position(|(j, q)| {
                j != i && !used[j] && q.re == p.re && q.im == -p.im
            });
            match partner {
                Some(j) => {
                    used[i] = true;
                    used[j] = true;
                }
                None => {
                    return Err(SynthesisError::InvalidPoleSet {
                        reason: format!("pole {p} lacks a conjugate partner"),
                    })
                }
            }
        }
        Ok(Self { poles })
    }

    pub fn from_reals(values: &[f64]) -> Result<Self, SynthesisError> {
        Self::new(values.iter().map(|&re| Complex::new(re, 0.0)).collect())
    }

    pub fn poles(&self) -> &[Complex<f64>] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn is_all_real(&self) -> bool {
        self.poles.iter().all(|p| p.im == 0.0)
    }
}

/// How the free parameter vector of each eigenvalue is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterPolicy {
    /// Cycle the m standard basis directions across the eigenvalues in
    /// listed order; a conjugate partner reuses its primary's direction.
    BasisCycle,
    /// Start from the cycling assignment, then greedily re-pick each
    /// direction from a small fixed candidate set (basis vectors and
    /// normalized pairwise sums/differences) to reduce the eigenvector
    /// condition number; two deterministic sweeps.
    GridSearch,
}

/// State-feedback gain; for the augmented tank system this is the 2×6
/// matrix [k₁ k₂] acting on [x₁..x₄, e₁, e₂].
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    k: DMatrix<f64>,
}

impl GainMatrix {
    pub fn new(k: DMatrix<f64>) -> Result<Self, SynthesisError> {
        if k.iter().any(|v| !v.is_finite()) {
            return Err(SynthesisError::DimensionMismatch {
                context: "gain matrix contains non-finite entries".into(),
            });
        }
        Ok(Self { k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Columns acting on the plant states (all but the trailing
    /// output-count columns).
    pub fn state_block(&self, outputs: usize) -> DMatrix<f64> {
        self.k.columns(0, self.k.ncols() - outputs).into_owned()
    }

    /// Columns acting on the integrated tracking errors.
    pub fn integral_block(&self, outputs: usize) -> DMatrix<f64> {
        self.k.columns(self.k.ncols() - outputs, outputs).into_owned()
    }
}

/// Achieved closed-loop spectrum and its distance from the request.
#[derive(Debug, Clone)]
pub struct EigenReport {
    /// Sorted by real part, then imaginary part.
    pub achieved_poles: Vec<Complex<f64>>,
    pub max_abs_deviation: f64,
}

/// Plant model augmented with the integrated tracking errors:
/// Ã = [[A, 0], [−C, 0]], B̃ = [[B], [0]], state [x₁..x₄, e₁, e₂].
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub a: Matrix6<f64>,
    pub b: Matrix6x2<f64>,
}

impl AugmentedModel {
    pub fn a_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_fn(6, 6, |i, j| self.a[(i, j)])
    }

    pub fn b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_fn(6, 2, |i, j| self.b[(i, j)])
    }
}

/// Blockwise integral-action augmentation; purely structural.
pub fn augment(model: &LinearModel) -> AugmentedModel {
    let mut a = Matrix6::zeros();
    for i in 0..4 {
        for j in 0..4 {
            a[(i, j)] = model.a[(i, j)];
        }
    }
    for i in 0..2 {
        for j in 0..4 {
            a[(4 + i, j)] = -model.c[(i, j)];
        }
    }
    let mut b = Matrix6x2::zeros();
    for i in 0..4 {
        for j in 0..2 {
            b[(i, j)] = model.b[(i, j)];
        }
    }
    AugmentedModel { a, b }
}

/// Numerical rank of the controllability matrix [B, AB, …, Aⁿ⁻¹B].
///
/// Singular values below `max(n, n·m) · ε · σ_max` count as zero.
pub fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    assert_eq!(a.ncols(), n, "state matrix must be square");
    assert_eq!(b.nrows(), n, "input matrix row count must match the state dimension");
    let mut gamma = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        gamma.columns_mut(k * m, m).copy_from(&block);
        block = a * &block;
    }
    let sv = gamma.singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let tol = (n.max(n * m)) as f64 * f64::EPSILON * sigma_max;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Eigenvalue multiset of a real square matrix, sorted by real part then
/// imaginary part.
///
/// Backed by a Schur (QR-iteration) reduction, which is backward stable:
/// the result is the exact spectrum of M + E with ‖E‖ = O(ε‖M‖), so
/// well-conditioned spectra are recovered far below the 1e-9 contract.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, SynthesisError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(SynthesisError::DimensionMismatch {
            context: format!("eigenvalues of a {}x{} matrix", m.nrows(), m.ncols()),
        });
    }
    if n > MAX_EIG_DIM {
        return Err(SynthesisError::DimensionMismatch {
            context: format!("matrix dimension {n} exceeds supported maximum {MAX_EIG_DIM}"),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITERATIONS)
        .ok_or(SynthesisError::EigNonConvergence)?;
    let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite eigenvalues"));
    Ok(eigs)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// Null-space basis of a (possibly wide) matrix via Gauss–Jordan
/// elimination with partial pivoting. Pivots smaller than
/// `max(rows, cols) · ε · max|entry|` are treated as zero.
fn null_space_basis<T>(m: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let nr = m.nrows();
    let nc = m.ncols();
    let mut a = m.clone();
    let max_abs = a.iter().map(|v| v.clone().modulus()).fold(0.0, f64::max);
    let tol = nr.max(nc) as f64 * f64::EPSILON * max_abs;
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..nc {
        if row == nr {
            break;
        }
        let (best_row, best_mag) = (row..nr)
            .map(|r| (r, a[(r, col)].clone().modulus()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite pivot magnitudes"))
            .expect("non-empty pivot search");
        if best_mag <= tol {
            continue; // free column
        }
        a.swap_rows(row, best_row);
        let pivot = a[(row, col)].clone();
        for c in col..nc {
            a[(row, c)] = a[(row, c)].clone() / pivot.clone();
        }
        for r in 0..nr {
            if r == row {
                continue;
            }
            let factor = a[(r, col)].clone();
            if factor.clone().modulus() == 0.0 {
                continue;
            }
            for c in col..nc {
                a[(r, c)] = a[(r, c)].clone() - factor.clone() * a[(row, c)].clone();
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    let free_cols: Vec<usize> = (0..nc).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = DMatrix::zeros(nc, free_cols.len());
    for (k, &fc) in free_cols.iter().enumerate() {
        basis[(fc, k)] = T::one();
        for (pr, &pc) in pivot_cols.iter().enumerate() {
            basis[(pc, k)] = -a[(pr, fc)].clone();
        }
    }
    basis
}

fn condition_number<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    let sv = nalgebra::linalg::SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

fn basis_direction<T>(m: usize, index: usize) -> DVector<T>
where
    T: ComplexField<RealField = f64>,
{
    let mut f = DVector::zeros(m);
    f[index] = T::one();
    f
}

/// Candidate parameter directions for the grid-search policy: standard
/// basis vectors plus normalized pairwise sums and differences.
fn grid_candidates<T>(m: usize) -> Vec<DVector<T>>
where
    T: ComplexField<RealField = f64>,
{
    let mut out: Vec<DVector<T>> = (0..m).map(|i| basis_direction(m, i)).collect();
    let inv_sqrt2 = T::from_real(std::f64::consts::FRAC_1_SQRT_2);
    for i in 0..m {
        for j in (i + 1)..m {
            let mut sum = DVector::zeros(m);
            sum[i] = inv_sqrt2.clone();
            sum[j] = inv_sqrt2.clone();
            let mut diff = DVector::zeros(m);
            diff[i] = inv_sqrt2.clone();
            diff[j] = -inv_sqrt2.clone();
            out.push(sum);
            out.push(diff);
        }
    }
    out
}

struct EigPair<T> {
    eigenvectors: DMatrix<T>,
    input_directions: DMatrix<T>,
}

/// Assemble the eigenvector/input-direction matrices for one choice of
/// parameter vectors. `partner[i]` marks the conjugate slot filled from
/// primary index i.
fn build_pair<T>(
    bases: &[Option<DMatrix<T>>],
    lambdas: &[Complex<f64>],
    partner: &[Option<usize>],
    params: &[DVector<T>],
    n: usize,
    m: usize,
) -> Result<EigPair<T>, SynthesisError>
where
    T: ComplexField<RealField = f64>,
{
    let count = lambdas.len();
    let mut v = DMatrix::<T>::zeros(n, count);
    let mut w = DMatrix::<T>::zeros(m, count);
    for i in 0..count {
        let Some(basis) = bases[i].as_ref() else { continue };
        let x = basis * &params[i];
        let xi = x.rows(0, n).into_owned();
        let wi = x.rows(n, m).into_owned();
        if xi.norm() <= 1e-12 * x.norm().max(1.0) {
            return Err(SynthesisError::UncontrollableMode { pole: lambdas[i] });
        }
        v.column_mut(i).copy_from(&xi);
        w.column_mut(i).copy_from(&wi);
        if let Some(j) = partner[i] {
            let xc = xi.map(|e| e.conjugate());
            let wc = wi.map(|e| e.conjugate());
            v.column_mut(j).copy_from(&xc);
            w.column_mut(j).copy_from(&wc);
        }
    }
    Ok(EigPair { eigenvectors: v, input_directions: w })
}

fn gain_from_pair<T>(pair: &EigPair<T>) -> Result<(DMatrix<T>, f64), SynthesisError>
where
    T: ComplexField<RealField = f64>,
{
    let cond = condition_number(&pair.eigenvectors);
    if !(cond <= MAX_EIGENVECTOR_CONDITION) {
        return Err(SynthesisError::IllConditionedEigenvectors { cond });
    }
    // K·V = −W  ⇒  Vᵀ·Kᵀ = −Wᵀ (plain transpose, not adjoint).
    let rhs = -pair.input_directions.transpose();
    let kt = pair
        .eigenvectors
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(SynthesisError::IllConditionedEigenvectors { cond })?;
    Ok((kt.transpose(), cond))
}

fn synthesize<T>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    lambdas_t: &[T],
    lambdas: &[Complex<f64>],
    partner: &[Option<usize>],
    policy: ParameterPolicy,
) -> Result<(DMatrix<T>, DMatrix<T>), SynthesisError>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    let m = b.ncols();
    let count = lambdas.len();
    let is_primary: Vec<bool> = (0..count)
        .map(|i| partner[i].is_some() || !partner.iter().any(|p| *p == Some(i)))
        .collect();

    // One null-space basis per primary eigenvalue; a deficient pencil
    // (basis wider than m) is exactly the PBH test for an uncontrollable
    // mode at that eigenvalue.
    let mut bases: Vec<Option<DMatrix<T>>> = vec![None; count];
    for i in 0..count {
        if !is_primary[i] {
            continue;
        }
        let mut pencil = DMatrix::<T>::zeros(n, n + m);
        pencil.view_mut((0, 0), (n, n)).copy_from(a);
        for d in 0..n {
            pencil[(d, d)] = pencil[(d, d)].clone() - lambdas_t[i].clone();
        }
        pencil.view_mut((0, n), (n, m)).copy_from(b);
        let basis = null_space_basis(&pencil);
        if basis.ncols() != m {
            return Err(SynthesisError::UncontrollableMode { pole: lambdas[i] });
        }
        bases[i] = Some(basis);
    }

    // Cycling start: primaries consume basis directions in listed order.
    let mut params: Vec<DVector<T>> = Vec::with_capacity(count);
    let mut cycle = 0;
    for i in 0..count {
        if is_primary[i] {
            params.push(basis_direction(m, cycle % m));
            cycle += 1;
        } else {
            params.push(DVector::zeros(m));
        }
    }

    if policy == ParameterPolicy::GridSearch {
        let candidates = grid_candidates::<T>(m);
        let evaluate = |params: &[DVector<T>]| -> f64 {
            match build_pair(&bases, lambdas, partner, params, n, m) {
                Ok(pair) => condition_number(&pair.eigenvectors),
                Err(_) => f64::INFINITY,
            }
        };
        let mut best = evaluate(&params);
        for _sweep in 0..2 {
            for i in 0..count {
                if !is_primary[i] {
                    continue;
                }
                for cand in &candidates {
                    let saved = std::mem::replace(&mut params[i], cand.clone());
                    let cond = evaluate(&params);
                    if cond < best {
                        best = cond;
                    } else {
                        params[i] = saved;
                    }
                }
            }
        }
    }

    let pair = build_pair(&bases, lambdas, partner, &params, n, m)?;
    let (k, _cond) = gain_from_pair(&pair)?;
    Ok((k, pair.eigenvectors))
}

/// Synthesizes the feedback gain and also returns the closed-loop
/// eigenvector matrix used to construct it (columns ordered like the
/// requested poles).
pub fn assign_poles_with_eigenvectors(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    poles: &PoleSet,
    policy: ParameterPolicy,
) -> Result<(GainMatrix, DMatrix<Complex<f64>>), SynthesisError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n {
        return Err(SynthesisError::DimensionMismatch {
            context: format!(
                "A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            ),
        });
    }
    if poles.len() != n {
        return Err(SynthesisError::DimensionMismatch {
            context: format!("{} poles requested for a {}-state system", poles.len(), n),
        });
    }
    let lambdas = poles.poles();
    for (i, p) in lambdas.iter().enumerate() {
        let multiplicity = lambdas.iter().filter(|q| **q == *p).count();
        if multiplicity > m && lambdas.iter().position(|q| q == p) == Some(i) {
            return Err(SynthesisError::Multiplicity { pole: *p, multiplicity, inputs: m });
        }
    }

    if poles.is_all_real() {
        // Real spectra stay in real arithmetic end to end.
        let lambdas_t: Vec<f64> = lambdas.iter().map(|p| p.re).collect();
        let partner = vec![None; n];
        let (k, v) = synthesize(a, b, &lambdas_t, lambdas, &partner, policy)?;
        Ok((GainMatrix::new(k)?, to_complex(&v)))
    } else {
        // Pair each non-real pole with its first unconsumed conjugate;
        // the partner column is the conjugate of the primary's, keeping
        // the recovered gain real.
        let mut partner: Vec<Option<usize>> = vec![None; n];
        let mut consumed = vec![false; n];
        for i in 0..n {
            if lambdas[i].im == 0.0 || consumed[i] {
                continue;
            }
            let j = (i + 1..n)
                .find(|&j| {
                    !consumed[j]
                        && lambdas[j].re == lambdas[i].re
                        && lambdas[j].im == -lambdas[i].im
                })
                .expect("validated self-conjugate pole set");
            partner[i] = Some(j);
            consumed[i] = true;
            consumed[j] = true;
        }
        let ac = to_complex(a);
        let bc = to_complex(b);
        let (kc, v) = synthesize(&ac, &bc, lambdas, lambdas, &partner, policy)?;
        let residue = kc.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
        let scale = kc.iter().map(|e| e.re.abs()).fold(1.0, f64::max);
        if residue >= 1e-10 * scale {
            return Err(SynthesisError::NonRealGain { residue });
        }
        Ok((GainMatrix::new(kc.map(|e| e.re))?, v))
    }
}

/// State-feedback gain placing the eigenvalues of (A − B·K) at the
/// requested self-conjugate pole set.
pub fn assign_poles(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    poles: &PoleSet,
    policy: ParameterPolicy,
) -> Result<GainMatrix, SynthesisError> {
    assign_poles_with_eigenvectors(a, b, poles, policy).map(|(k, _)| k)
}

/// Computes the closed-loop spectrum of (A − B·K) and its worst distance
/// from the requested poles after greedy nearest-neighbor matching
/// (adequate at this problem size; requested poles are visited in sorted
/// order, each consuming its closest unmatched achieved eigenvalue).
pub fn verify_closed_loop(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    gain: &GainMatrix,
    poles: &PoleSet,
) -> Result<EigenReport, SynthesisError> {
    let closed = a - b * gain.matrix();
    let mut achieved = eigenvalues(&closed)?;
    let mut requested: Vec<Complex<f64>> = poles.poles().to_vec();
    requested.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite poles"));
    if achieved.len() != requested.len() {
        return Err(SynthesisError::DimensionMismatch {
            context: format!(
                "{} achieved eigenvalues vs {} requested poles",
                achieved.len(),
                requested.len()
            ),
        });
    }
    let mut matched = vec![false; achieved.len()];
    let mut max_dev = 0.0f64;
    for p in &requested {
        let (j, dist) = achieved
            .iter()
            .enumerate()
            .filter(|(j, _)| !matched[*j])
            .map(|(j, e)| (j, (e - p).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).expect("finite distances"))
            .expect("counts checked equal");
        matched[j] = true;
        max_dev = max_dev.max(dist);
    }
    achieved.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite eigenvalues"));
    Ok(EigenReport { achieved_poles: achieved, max_abs_deviation: max_dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{linearize, OperatingPoint, PlantParams};
    use approx::assert_abs_diff_eq;

    fn nominal_augmented() -> AugmentedModel {
        let model =
            linearize(&PlantParams::default(), &OperatingPoint::table_values()).unwrap();
        augment(&model)
    }

    fn paper_pole_set() -> PoleSet {
        PoleSet::from_reals(&[-0.252, -0.184, -0.017, -0.057, -0.073, -0.1]).unwrap()
    }

    #[test]
    fn pole_set_rejects_unstable_and_unpaired() {
        assert!(PoleSet::from_reals(&[-1.0, 0.1]).is_err());
        assert!(PoleSet::new(vec![Complex::new(-1.0, 2.0)]).is_err());
        assert!(PoleSet::new(vec![Complex::new(-1.0, 2.0), Complex::new(-1.0, -2.0)]).is_ok());
    }

    #[test]
    fn augment_blocks() {
        let aug = nominal_augmented();
        // Error rows: −C followed by zeros.
        assert_eq!(aug.a[(4, 0)], -0.5);
        assert_eq!(aug.a[(5, 1)], -0.5);
        for j in 0..6 {
            if j != 0 {
                assert_eq!(aug.a[(4, j)], 0.0);
            }
            if j != 1 {
                assert_eq!(aug.a[(5, j)], 0.0);
            }
        }
        // Input rows of the error states are identically zero.
        for j in 0..2 {
            assert_eq!(aug.b[(4, j)], 0.0);
            assert_eq!(aug.b[(5, j)], 0.0);
        }
    }

    #[test]
    fn augment_zero_model_keeps_only_output_coupling() {
        let model = LinearModel {
            a: nalgebra::Matrix4::zeros(),
            b: nalgebra::Matrix4x2::zeros(),
            c: nalgebra::Matrix2x4::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0),
            operating_point: OperatingPoint::table_values(),
            time_constants: [1.0; 4],
        };
        let aug = augment(&model);
        let nonzero: Vec<(usize, usize)> = (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .filter(|&(i, j)| aug.a[(i, j)] != 0.0)
            .collect();
        assert_eq!(nonzero, vec![(4, 0), (5, 1)]);
        assert!(aug.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn controllability_scalar() {
        let a = DMatrix::from_row_slice(1, 1, &[0.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert_eq!(controllability_rank(&a, &b), 1);
    }

    #[test]
    fn controllability_of_tank_models() {
        let model =
            linearize(&PlantParams::default(), &OperatingPoint::table_values()).unwrap();
        let a = DMatrix::from_fn(4, 4, |i, j| model.a[(i, j)]);
        let b = DMatrix::from_fn(4, 2, |i, j| model.b[(i, j)]);
        assert_eq!(controllability_rank(&a, &b), 4);
        let aug = nominal_augmented();
        assert_eq!(controllability_rank(&aug.a_dyn(), &aug.b_dyn()), 6);
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let eigs = eigenvalues(&m).unwrap();
        for (e, expected) in eigs.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(e.re, expected, epsilon = 1e-12);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let eigs = eigenvalues(&m).unwrap();
        let mut imags: Vec<f64> = eigs.iter().map(|e| e.im).collect();
        imags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(imags[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(imags[1], 1.0, epsilon = 1e-12);
        for e in &eigs {
            assert_abs_diff_eq!(e.re, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // Companion form of (λ+0.1)(λ+0.2)(λ+0.3) = λ³ + 0.6λ² + 0.11λ + 0.006.
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, -0.006, 1.0, 0.0, -0.11, 0.0, 1.0, -0.6],
        );
        let eigs = eigenvalues(&m).unwrap();
        for (e, expected) in eigs.iter().zip([-0.3, -0.2, -0.1]) {
            assert_abs_diff_eq!(e.re, expected, epsilon = 1e-10);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn scalar_assignment() {
        let a = DMatrix::from_row_slice(1, 1, &[0.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let poles = PoleSet::from_reals(&[-1.0]).unwrap();
        let k = assign_poles(&a, &b, &poles, ParameterPolicy::BasisCycle).unwrap();
        assert_abs_diff_eq!(k.matrix()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decoupled_assignment_recovers_diagonal_gain() {
        let diag = [-0.3, -0.9, -1.5, -2.0, -2.4, -3.3];
        let targets = [-1.0, -1.3, -1.7, -2.2, -2.9, -3.6];
        let a = DMatrix::from_fn(6, 6, |i, j| if i == j { diag[i] } else { 0.0 });
        let b = DMatrix::identity(6, 6);
        let poles = PoleSet::from_reals(&targets).unwrap();
        let k = assign_poles(&a, &b, &poles, ParameterPolicy::BasisCycle).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j { diag[i] - targets[i] } else { 0.0 };
                assert_abs_diff_eq!(k.matrix()[(i, j)], expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn nominal_tank_assignment_places_all_poles() {
        let aug = nominal_augmented();
        let poles = paper_pole_set();
        let k = assign_poles(&aug.a_dyn(), &aug.b_dyn(), &poles, ParameterPolicy::BasisCycle)
            .unwrap();
        let report = verify_closed_loop(&aug.a_dyn(), &aug.b_dyn(), &k, &poles).unwrap();
        assert!(
            report.max_abs_deviation < 1e-8,
            "deviation {}",
            report.max_abs_deviation
        );
    }

    #[test]
    fn eigenvector_residuals_are_small() {
        let aug = nominal_augmented();
        let poles = paper_pole_set();
        let (k, v) = assign_poles_with_eigenvectors(
            &aug.a_dyn(),
            &aug.b_dyn(),
            &poles,
            ParameterPolicy::BasisCycle,
        )
        .unwrap();
        let closed = to_complex(&(aug.a_dyn() - aug.b_dyn() * k.matrix()));
        for (i, pole) in poles.poles().iter().enumerate() {
            let vi = v.column(i).into_owned();
            let residual = &closed * &vi - vi.scale(1.0) * *pole;
            assert!(residual.norm() < 1e-8 * vi.norm());
        }
    }

    #[test]
    fn complex_pole_pairs_yield_real_gain() {
        let aug = nominal_augmented();
        let poles = PoleSet::new(vec![
            Complex::new(-0.2, 0.05),
            Complex::new(-0.2, -0.05),
            Complex::new(-0.05, 0.01),
            Complex::new(-0.05, -0.01),
            Complex::new(-0.1, 0.0),
            Complex::new(-0.15, 0.0),
        ])
        .unwrap();
        let k = assign_poles(&aug.a_dyn(), &aug.b_dyn(), &poles, ParameterPolicy::BasisCycle)
            .unwrap();
        let report = verify_closed_loop(&aug.a_dyn(), &aug.b_dyn(), &k, &poles).unwrap();
        assert!(report.max_abs_deviation < 1e-8, "deviation {}", report.max_abs_deviation);
    }

    #[test]
    fn uniform_fault_scaling_identity() {
        let aug = nominal_augmented();
        let poles = paper_pole_set();
        let k = assign_poles(&aug.a_dyn(), &aug.b_dyn(), &poles, ParameterPolicy::BasisCycle)
            .unwrap();
        for c in [0.4, 0.7, 1.0] {
            let b_f = aug.b_dyn() * c;
            let k_scaled = GainMatrix::new(k.matrix() / c).unwrap();
            let report = verify_closed_loop(&aug.a_dyn(), &b_f, &k_scaled, &poles).unwrap();
            assert!(report.max_abs_deviation < 1e-8);
            let k_f =
                assign_poles(&aug.a_dyn(), &b_f, &poles, ParameterPolicy::BasisCycle).unwrap();
            let report = verify_closed_loop(&aug.a_dyn(), &b_f, &k_f, &poles).unwrap();
            assert!(report.max_abs_deviation < 1e-8);
        }
    }

    #[test]
    fn uncontrollable_mode_is_reported() {
        // The second state is reachable from no input; requesting a pole
        // on top of its open-loop eigenvalue exposes the PBH deficiency.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let poles = PoleSet::from_reals(&[-2.0, -3.0]).unwrap();
        let err = assign_poles(&a, &b, &poles, ParameterPolicy::BasisCycle).unwrap_err();
        match err {
            SynthesisError::UncontrollableMode { pole } => {
                assert_abs_diff_eq!(pole.re, -2.0, epsilon = 1e-12)
            }
            other => panic!("expected uncontrollable mode, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_state_gives_singular_eigenvectors() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let poles = PoleSet::from_reals(&[-3.0, -4.0]).unwrap();
        let err = assign_poles(&a, &b, &poles, ParameterPolicy::BasisCycle).unwrap_err();
        assert!(matches!(err, SynthesisError::IllConditionedEigenvectors { .. }), "{err:?}");
    }

    #[test]
    fn excess_multiplicity_is_rejected() {
        let aug = nominal_augmented();
        let poles =
            PoleSet::from_reals(&[-0.1, -0.1, -0.1, -0.2, -0.3, -0.4]).unwrap();
        let err = assign_poles(&aug.a_dyn(), &aug.b_dyn(), &poles, ParameterPolicy::BasisCycle)
            .unwrap_err();
        assert!(matches!(err, SynthesisError::Multiplicity { multiplicity: 3, .. }), "{err:?}");
    }

    #[test]
    fn double_pole_within_input_capacity() {
        let aug = nominal_augmented();
        let poles = PoleSet::from_reals(&[-0.1, -0.1, -0.2, -0.25, -0.3, -0.35]).unwrap();
        let k = assign_poles(&aug.a_dyn(), &aug.b_dyn(), &poles, ParameterPolicy::BasisCycle)
            .unwrap();
        let report = verify_closed_loop(&aug.a_dyn(), &aug.b_dyn(), &k, &poles).unwrap();
        assert!(report.max_abs_deviation < 1e-8, "deviation {}", report.max_abs_deviation);
    }

    #[test]
    fn grid_search_does_not_worsen_conditioning() {
        let aug = nominal_augmented();
        let poles = paper_pole_set();
        let (_, v_cycle) = assign_poles_with_eigenvectors(
            &aug.a_dyn(),
            &aug.b_dyn(),
            &poles,
            ParameterPolicy::BasisCycle,
        )
        .unwrap();
        let (k, v_grid) = assign_poles_with_eigenvectors(
            &aug.a_dyn(),
            &aug.b_dyn(),
            &poles,
            ParameterPolicy::GridSearch,
        )
        .unwrap();
        assert!(condition_number(&v_grid) <= condition_number(&v_cycle) * (1.0 + 1e-12));
        let report = verify_closed_loop(&aug.a_dyn(), &aug.b_dyn(), &k, &poles).unwrap();
        assert!(report.max_abs_deviation < 1e-8);
    }

    #[test]
    fn verify_matches_open_loop_with_zero_gain() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let gain = GainMatrix::new(DMatrix::zeros(1, 2)).unwrap();
        let poles = PoleSet::from_reals(&[-1.0, -2.0]).unwrap();
        let report = verify_closed_loop(&a, &b, &gain, &poles).unwrap();
        assert!(report.max_abs_deviation < 1e-12);
    }

    #[test]
    fn verify_detects_perturbed_gain() {
        let aug = nominal_augmented();
        let poles = paper_pole_set();
        let k = assign_poles(&aug.a_dyn(), &aug.b_dyn(), &poles, ParameterPolicy::BasisCycle)
            .unwrap();
        let mut perturbed = k.matrix().clone();
        perturbed[(0, 0)] *= 1.1;
        let gain = GainMatrix::new(perturbed).unwrap();
        let report = verify_closed_loop(&aug.a_dyn(), &aug.b_dyn(), &gain, &poles).unwrap();
        assert!(report.max_abs_deviation > 1e-6);
    }
}
