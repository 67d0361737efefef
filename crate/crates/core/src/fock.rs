//! Truncated multimode Fock-space linear algebra.
//!
//! Basis states of an `m`-mode space with cutoff `N` are indexed row-major:
//! mode 0 is the slowest-varying digit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    cutoff: usize,
    modes: usize,
    dim: usize,
}

impl HilbertSpec {
    pub fn new(cutoff: usize, modes: usize) -> Result<Self> {
        if cutoff < 2 {
            return invalid(format!("cutoff must be at least 2, got {cutoff}"));
        }
        if modes < 1 {
            return invalid("a Hilbert space needs at least one mode");
        }
        let dim = u32::try_from(modes)
            .ok()
            .and_then(|m| cutoff.checked_pow(m))
            .ok_or_else(|| {
                Error::UnsupportedSize(format!("{cutoff}^{modes} overflows the index type"))
            })?;
        Ok(Self { cutoff, modes, dim })
    }

    pub fn single(cutoff: usize) -> Result<Self> {
        Self::new(cutoff, 1)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_modes(&self, modes: usize) -> Result<Self> {
        Self::new(self.cutoff, modes)
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.modes - 1 - mode) as u32)
    }

    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.modes {
            return invalid(format!("expected {} occupation numbers, got {}", self.modes, digits.len()));
        }
        let mut idx = 0;
        for &d in digits {
            if d >= self.cutoff {
                return Err(Error::OutOfRange(format!("occupation {d} >= cutoff {}", self.cutoff)));
            }
            idx = idx * self.cutoff + d;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.modes];
        for d in digits.iter_mut().rev() {
            *d = index % self.cutoff;
            index /= self.cutoff;
        }
        digits
    }

    fn check_same(&self, other: &HilbertSpec) -> Result<()> {
        if self != other {
            return invalid(format!(
                "Hilbert space mismatch: cutoff {} x {} modes vs cutoff {} x {} modes",
                self.cutoff, self.modes, other.cutoff, other.modes
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    spec: HilbertSpec,
    amps: CVector,
}

impl Ket {
    pub fn new(spec: HilbertSpec, amps: CVector) -> Result<Self> {
        if amps.len() != spec.dim() {
            return invalid(format!("ket has {} amplitudes, space dimension is {}", amps.len(), spec.dim()));
        }
        Ok(Self { spec, amps })
    }

    pub fn vacuum(spec: HilbertSpec) -> Self {
        let mut amps = CVector::zeros(spec.dim());
        amps[0] = ONE;
        Self { spec, amps }
    }

    pub fn basis(spec: HilbertSpec, digits: &[usize]) -> Result<Self> {
        let idx = spec.index_of(digits)?;
        let mut amps = CVector::zeros(spec.dim());
        amps[idx] = ONE;
        Ok(Self { spec, amps })
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateInput("cannot normalize a zero or non-finite ket".into()));
        }
        Ok(Self { spec: self.spec, amps: self.amps.unscale(n) })
    }

    /// Tensor product `self ⊗ other`; the modes of `self` come first.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        if self.spec.cutoff() != other.spec.cutoff() {
            return invalid("tensor product of kets with different cutoffs");
        }
        let spec = self.spec.with_modes(self.spec.modes() + other.spec.modes())?;
        let nb = other.amps.len();
        let amps = CVector::from_fn(spec.dim(), |i, _| self.amps[i / nb] * other.amps[i % nb]);
        Ok(Ket { spec, amps })
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Ket) -> Result<f64> {
        Ok(inner_product(self, other)?.norm_sqr())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    spec: HilbertSpec,
    mat: CMatrix,
}

impl Operator {
    pub fn new(spec: HilbertSpec, mat: CMatrix) -> Result<Self> {
        if mat.nrows() != spec.dim() || mat.ncols() != spec.dim() {
            return invalid(format!(
                "operator is {}x{}, space dimension is {}",
                mat.nrows(),
                mat.ncols(),
                spec.dim()
            ));
        }
        Ok(Self { spec, mat })
    }

    pub fn identity(spec: HilbertSpec) -> Self {
        Self { spec, mat: CMatrix::identity(spec.dim(), spec.dim()) }
    }

    pub fn from_diagonal(spec: HilbertSpec, diag: &[C64]) -> Result<Self> {
        if diag.len() != spec.dim() {
            return invalid(format!("diagonal has {} entries, space dimension is {}", diag.len(), spec.dim()));
        }
        Ok(Self { spec, mat: CMatrix::from_diagonal(&CVector::from_column_slice(diag)) })
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dagger(&self) -> Self {
        Self { spec: self.spec, mat: self.mat.adjoint() }
    }

    /// Entrywise complex conjugate in the Fock basis.
    pub fn conjugate(&self) -> Self {
        Self { spec: self.spec, mat: self.mat.conjugate() }
    }

    pub fn transpose(&self) -> Self {
        Self { spec: self.spec, mat: self.mat.transpose() }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { spec: self.spec, mat: self.mat.map(|x| x * c) }
    }

    /// Matrix product `self · other` (`other` acts first).
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        self.spec.check_same(&other.spec)?;
        Ok(Self { spec: self.spec, mat: &self.mat * &other.mat })
    }

    /// Kronecker product; the modes of `self` come first.
    pub fn kron(&self, other: &Operator) -> Result<Operator> {
        if self.spec.cutoff() != other.spec.cutoff() {
            return invalid("Kronecker product of operators with different cutoffs");
        }
        let spec = self.spec.with_modes(self.spec.modes() + other.spec.modes())?;
        Ok(Self { spec, mat: self.mat.kronecker(&other.mat) })
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        self.spec.check_same(&ket.spec)?;
        Ok(Ket { spec: self.spec, amps: &self.mat * &ket.amps })
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.mat.shape() != other.mat.shape() {
            return f64::INFINITY;
        }
        self.mat.iter().zip(other.mat.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.mat)
    }

    /// `max|U†U − I|` over the full truncated space.
    pub fn unitarity_error(&self) -> f64 {
        let g = self.mat.adjoint() * &self.mat;
        max_dev_from_identity(&g)
    }

    /// `max|P U†U P − P|` where `P` projects onto basis states with every
    /// occupation number below `levels`.
    pub fn isometry_error(&self, levels: usize) -> f64 {
        let cols: Vec<usize> = (0..self.spec.dim())
            .filter(|&i| self.spec.digits_of(i).iter().all(|&d| d < levels))
            .collect();
        let sub = self.mat.select_columns(cols.iter());
        let g = sub.adjoint() * sub;
        max_dev_from_identity(&g)
    }
}

fn max_dev_from_identity(g: &CMatrix) -> f64 {
    let mut err: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { ONE } else { ZERO };
            err = err.max((g[(i, j)] - target).norm());
        }
    }
    err
}

fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut err: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..=j {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    spec: HilbertSpec,
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e−12), unit trace (1e−10) and positivity (−1e−10).
    pub fn new(spec: HilbertSpec, mat: CMatrix) -> Result<Self> {
        if mat.nrows() != spec.dim() || mat.ncols() != spec.dim() {
            return invalid("density matrix shape does not match the space dimension");
        }
        let rho = Self { spec, mat };
        if rho.hermiticity_error() > 1e-12 {
            return invalid("density matrix is not Hermitian");
        }
        if (rho.trace() - 1.0).abs() > 1e-10 {
            return invalid(format!("density matrix trace is {}, expected 1", rho.trace()));
        }
        if rho.min_eigenvalue() < -1e-10 {
            return invalid("density matrix has a negative eigenvalue");
        }
        Ok(rho)
    }

    pub fn from_ket(ket: &Ket) -> Self {
        let a = &ket.amps;
        Self { spec: ket.spec, mat: a * a.adjoint() }
    }

    pub fn spec(&self) -> HilbertSpec {
        self.spec
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = hermitize(&self.mat);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Von Neumann entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.eigenvalues().iter().filter(|&&l| l > 1e-15).map(|&l| -l * l.log2()).sum()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation_pure(&self, ket: &Ket) -> Result<f64> {
        self.spec.check_same(&ket.spec)?;
        Ok(ket.amps.dotc(&(&self.mat * &ket.amps)).re)
    }
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

/// Annihilation operator with `⟨n−1|a|n⟩ = √n`.
pub fn ladder_operator(cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    let mut mat = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        mat[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(Operator { spec, mat })
}

pub fn number_operator(cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    let diag: Vec<C64> = (0..cutoff).map(|n| C64::new(n as f64, 0.0)).collect();
    Operator::from_diagonal(spec, &diag)
}

/// `e^{−iH}` for Hermitian `H` via eigendecomposition.
pub fn matrix_exponential_unitary(h: &Operator) -> Result<Operator> {
    let err = h.hermiticity_error();
    if err > 1e-10 {
        return invalid(format!("generator is not Hermitian (max |H - H†| = {err:.3e})"));
    }
    Ok(Operator { spec: h.spec, mat: expm_neg_i_hermitian(&h.mat) })
}

pub(crate) fn expm_neg_i_hermitian(h: &CMatrix) -> CMatrix {
    let eig = hermitize(h).symmetric_eigen();
    let q = eig.eigenvectors;
    let mut qd = q.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda);
        for x in qd.column_mut(j).iter_mut() {
            *x *= phase;
        }
    }
    qd * q.adjoint()
}

/// Offsets of a split of the modes into an ordered target list and the
/// remaining modes (ascending). Full index = `target[t] + rest[r]`.
struct ModeSplit {
    target: Vec<usize>,
    rest: Vec<usize>,
    rest_modes: Vec<usize>,
}

fn offsets(spec: &HilbertSpec, modes: &[usize]) -> Vec<usize> {
    let n = spec.cutoff();
    let mut out = vec![0usize];
    for &m in modes {
        let s = spec.stride(m);
        out = out.iter().flat_map(|&base| (0..n).map(move |d| base + d * s)).collect();
    }
    out
}

fn split_modes(spec: &HilbertSpec, targets: &[usize]) -> Result<ModeSplit> {
    let mut seen = vec![false; spec.modes()];
    for &t in targets {
        if t >= spec.modes() {
            return invalid(format!("mode index {t} out of range for {} modes", spec.modes()));
        }
        if seen[t] {
            return invalid(format!("mode index {t} repeated"));
        }
        seen[t] = true;
    }
    let rest_modes: Vec<usize> = (0..spec.modes()).filter(|&m| !seen[m]).collect();
    Ok(ModeSplit { target: offsets(spec, targets), rest: offsets(spec, &rest_modes), rest_modes })
}

fn gather(amps: &CVector, split: &ModeSplit) -> CMatrix {
    CMatrix::from_fn(split.target.len(), split.rest.len(), |t, r| amps[split.target[t] + split.rest[r]])
}

/// Applies `gate` to the listed modes (in the listed order) without forming
/// the dense embedding.
pub fn apply_to_modes(state: &Ket, gate: &Operator, targets: &[usize]) -> Result<Ket> {
    let spec = state.spec;
    if gate.spec.cutoff() != spec.cutoff() || gate.spec.modes() != targets.len() {
        return invalid(format!(
            "gate acts on {} modes at cutoff {}, but {} targets at cutoff {} were given",
            gate.spec.modes(),
            gate.spec.cutoff(),
            targets.len(),
            spec.cutoff()
        ));
    }
    let split = split_modes(&spec, targets)?;
    let y = &gate.mat * gather(&state.amps, &split);
    let mut out = CVector::zeros(spec.dim());
    for (r, &ro) in split.rest.iter().enumerate() {
        for (t, &to) in split.target.iter().enumerate() {
            out[to + ro] = y[(t, r)];
        }
    }
    Ok(Ket { spec, amps: out })
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &Ket, b: &Ket) -> Result<C64> {
    a.spec.check_same(&b.spec)?;
    Ok(a.amps.dotc(&b.amps))
}

/// `(⟨bra| ⊗ I)|state⟩` with `bra` living on `modes`; the result is indexed
/// by the remaining modes in ascending order (a single amplitude when no
/// modes remain).
pub fn contract_bra(state: &Ket, bra: &Ket, modes: &[usize]) -> Result<CVector> {
    if bra.spec.cutoff() != state.spec.cutoff() || bra.spec.modes() != modes.len() {
        return invalid("bra does not match the contracted modes");
    }
    let split = split_modes(&state.spec, modes)?;
    let x = gather(&state.amps, &split);
    Ok(x.ad_mul(&bra.amps).conjugate())
}

pub trait PartialTrace {
    /// Marginal on `keep`; the output basis follows the order of `keep`.
    fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix>;
}

impl PartialTrace for Ket {
    fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return invalid("partial trace needs at least one kept mode");
        }
        let split = split_modes(&self.spec, keep)?;
        let x = gather(&self.amps, &split);
        let spec = self.spec.with_modes(keep.len())?;
        Ok(DensityMatrix { spec, mat: &x * x.adjoint() })
    }
}

impl PartialTrace for DensityMatrix {
    fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return invalid("partial trace needs at least one kept mode");
        }
        let split = split_modes(&self.spec, keep)?;
        let spec = self.spec.with_modes(keep.len())?;
        let k = split.target.len();
        let mut mat = CMatrix::zeros(k, k);
        for &ro in &split.rest {
            for j in 0..k {
                for i in 0..k {
                    mat[(i, j)] += self.mat[(split.target[i] + ro, split.target[j] + ro)];
                }
            }
        }
        Ok(DensityMatrix { spec, mat })
    }
}

pub fn partial_trace<S: PartialTrace>(state: &S, keep: &[usize]) -> Result<DensityMatrix> {
    state.partial_trace(keep)
}

/// Modes left after removing `modes` (ascending), as used by [`contract_bra`].
pub fn remaining_modes(spec: &HilbertSpec, modes: &[usize]) -> Result<Vec<usize>> {
    Ok(split_modes(spec, modes)?.rest_modes)
}
