//! Truncated Fock-space states and operators.
//!
//! A multi-mode state is a flat row-major amplitude tensor indexed by the
//! mixed radix of its per-mode dimensions, mode 0 most significant.
//! Two-mode operators that conserve total photon number are stored and
//! applied as a list of photon-number blocks; a block of total `s` is at
//! most `s + 1` wide, so exponentiating and applying them costs
//! `O(sum_s (s+1)^3)` and `O(sum_s (s+1)^2)` per spectator index instead of
//! the dense `d^6` / `d^4`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{expm_anti_hermitian, CMatrix, HermitianEigen};
use crate::math::sqrt;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Leak tolerance used when deciding whether a dense matrix is block
/// diagonal in total photon number.
pub const NUMBER_CONSERVING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    /// Photon cutoff per mode; the mode dimension is `n_max + 1`.
    pub n_max: usize,
    pub tail_tolerance: f64,
}

impl TruncationConfig {
    pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

    pub fn new(n_max: usize) -> Result<Self> {
        Self::with_tail_tolerance(n_max, Self::DEFAULT_TAIL_TOLERANCE)
    }

    pub fn with_tail_tolerance(n_max: usize, tail_tolerance: f64) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        if !(tail_tolerance > 0.0) {
            return Err(Error::invalid("tail tolerance must be positive"));
        }
        Ok(Self { n_max, tail_tolerance })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

/// Row-major strides for a mixed-radix index.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn digits(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

/// Pure state on one or more truncated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    mode_dims: Vec<usize>,
    amplitudes: Vec<C64>,
    /// Probability weight of the branch this state stands for; 1 for a
    /// freshly prepared state, the heralding probability for a conditional
    /// one.
    pub norm_probability: f64,
}

impl PureState {
    pub fn from_amplitudes(mode_dims: Vec<usize>, amplitudes: Vec<C64>) -> Result<Self> {
        if mode_dims.is_empty() || mode_dims.contains(&0) {
            return Err(Error::invalid("mode dimensions must be non-empty and positive"));
        }
        let total: usize = mode_dims.iter().product();
        if total != amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: total, found: amplitudes.len() });
        }
        Ok(Self { mode_dims, amplitudes, norm_probability: 1.0 })
    }

    pub fn vacuum(mode_dims: &[usize]) -> Result<Self> {
        let total: usize = mode_dims.iter().product();
        let mut amps = vec![ZERO; total];
        if total > 0 {
            amps[0] = ONE;
        }
        Self::from_amplitudes(mode_dims.to_vec(), amps)
    }

    /// Single-mode Fock state `|n>` in dimension `dim`.
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::invalid("Fock index beyond truncation"));
        }
        let mut amps = vec![ZERO; dim];
        amps[n] = ONE;
        Self::from_amplitudes(vec![dim], amps)
    }

    /// Multi-mode Fock basis state `|n_0, n_1, ...>`.
    pub fn fock_product(mode_dims: &[usize], occupation: &[usize]) -> Result<Self> {
        if occupation.len() != mode_dims.len() {
            return Err(Error::DimensionMismatch { expected: mode_dims.len(), found: occupation.len() });
        }
        let st = strides(mode_dims);
        let mut flat = 0;
        for ((&n, &d), &s) in occupation.iter().zip(mode_dims).zip(&st) {
            if n >= d {
                return Err(Error::invalid("Fock index beyond truncation"));
            }
            flat += n * s;
        }
        let mut amps = vec![ZERO; mode_dims.iter().product()];
        amps[flat] = ONE;
        Self::from_amplitudes(mode_dims.to_vec(), amps)
    }

    /// Single-mode superposition from `(fock index, amplitude)` pairs,
    /// normalised.
    pub fn from_components(dim: usize, components: &[(usize, C64)]) -> Result<Self> {
        let mut amps = vec![ZERO; dim];
        for &(n, c) in components {
            if n >= dim {
                return Err(Error::invalid("Fock index beyond truncation"));
            }
            amps[n] += c;
        }
        let mut s = Self::from_amplitudes(vec![dim], amps)?;
        s.normalize()?;
        Ok(s)
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn num_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// Amplitude at a multi-index.
    pub fn amplitude(&self, occupation: &[usize]) -> C64 {
        let st = strides(&self.mode_dims);
        let flat: usize = occupation.iter().zip(&st).map(|(n, s)| n * s).sum();
        self.amplitudes[flat]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Rescale to unit norm; fails on the zero vector.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) {
            return Err(Error::ZeroProbability);
        }
        let inv = 1.0 / sqrt(n2);
        for c in &mut self.amplitudes {
            *c *= inv;
        }
        Ok(n2)
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.mode_dims != other.mode_dims {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Photon-number distribution of one mode.
    pub fn mode_populations(&self, mode: usize) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        let mut pops = vec![0.0; self.mode_dims[mode]];
        let mut idx = vec![0; self.mode_dims.len()];
        for (flat, c) in self.amplitudes.iter().enumerate() {
            digits(flat, &self.mode_dims, &mut idx);
            pops[idx[mode]] += c.norm_sqr();
        }
        Ok(pops)
    }

    /// Largest population, over all modes, sitting in the two highest Fock
    /// levels of that mode. States are trusted only while this stays below
    /// the truncation tail tolerance.
    pub fn truncation_health(&self) -> f64 {
        let mut worst = 0.0f64;
        for mode in 0..self.mode_dims.len() {
            let pops = self.mode_populations(mode).unwrap_or_default();
            let top = pops.len().saturating_sub(2);
            worst = worst.max(pops[top..].iter().sum());
        }
        worst
    }

    pub fn mean_photon(&self, mode: usize) -> Result<f64> {
        Ok(self.mode_populations(mode)?.iter().enumerate().map(|(n, p)| n as f64 * p).sum())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_dims.len() {
            return Err(Error::ModeOutOfRange { index: mode, modes: self.mode_dims.len() });
        }
        Ok(())
    }

    /// Kronecker product, `self` taking the leading modes.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.mode_dims.clone();
        dims.extend_from_slice(&other.mode_dims);
        let mut amps = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        Self { mode_dims: dims, amplitudes: amps, norm_probability: self.norm_probability * other.norm_probability }
    }

    /// Apply an operator to the listed modes (in the operator's mode order).
    /// Number-conserving two-mode operators take the block path.
    pub fn apply(&mut self, op: &ModeOperator, modes: &[usize]) -> Result<()> {
        for &m in modes {
            self.check_mode(m)?;
        }
        for (i, &m) in modes.iter().enumerate() {
            if modes[..i].contains(&m) {
                return Err(Error::invalid("repeated mode index"));
            }
        }
        if op.dims.len() != modes.len() {
            return Err(Error::DimensionMismatch { expected: op.dims.len(), found: modes.len() });
        }
        for (&d, &m) in op.dims.iter().zip(modes) {
            if d != self.mode_dims[m] {
                return Err(Error::DimensionMismatch { expected: d, found: self.mode_dims[m] });
            }
        }
        match &op.repr {
            Repr::Blocks(blocks) if modes.len() == 2 => {
                self.apply_blocks(blocks, modes[0], modes[1]);
            }
            Repr::Dense { matrix, number_conserving: true } if modes.len() == 2 => {
                let blocks = extract_blocks(matrix, op.dims[0], op.dims[1]);
                self.apply_blocks(&blocks, modes[0], modes[1]);
            }
            _ => {
                let matrix = op.matrix();
                self.apply_dense(&matrix, modes);
            }
        }
        Ok(())
    }

    fn apply_blocks(&mut self, blocks: &[PhotonBlock], mi: usize, mj: usize) {
        let st = strides(&self.mode_dims);
        let (si, sj) = (st[mi], st[mj]);
        let spectators = spectator_offsets(&self.mode_dims, &st, &[mi, mj]);
        let mut buf_in = Vec::new();
        let mut buf_out = Vec::new();
        for base in spectators {
            for block in blocks {
                let len = block.members.len();
                buf_in.clear();
                buf_in.extend(block.members.iter().map(|&(a, b)| self.amplitudes[base + a * si + b * sj]));
                if buf_in.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                    continue;
                }
                buf_out.clear();
                buf_out.resize(len, ZERO);
                let m = block.matrix.as_slice();
                for (r, out) in buf_out.iter_mut().enumerate() {
                    let row = &m[r * len..(r + 1) * len];
                    *out = row.iter().zip(&buf_in).map(|(u, x)| u * x).sum();
                }
                for (&(a, b), &v) in block.members.iter().zip(&buf_out) {
                    self.amplitudes[base + a * si + b * sj] = v;
                }
            }
        }
    }

    fn apply_dense(&mut self, matrix: &CMatrix, modes: &[usize]) {
        let st = strides(&self.mode_dims);
        let sub_dims: Vec<usize> = modes.iter().map(|&m| self.mode_dims[m]).collect();
        let sub_total: usize = sub_dims.iter().product();
        let mut sub_offsets = Vec::with_capacity(sub_total);
        let mut idx = vec![0; modes.len()];
        for flat in 0..sub_total {
            digits(flat, &sub_dims, &mut idx);
            sub_offsets.push(idx.iter().zip(modes).map(|(n, &m)| n * st[m]).sum::<usize>());
        }
        let mut buf = vec![ZERO; sub_total];
        for base in spectator_offsets(&self.mode_dims, &st, modes) {
            for (b, &off) in buf.iter_mut().zip(&sub_offsets) {
                *b = self.amplitudes[base + off];
            }
            let out = matrix.matvec(&buf);
            for (&v, &off) in out.iter().zip(&sub_offsets) {
                self.amplitudes[base + off] = v;
            }
        }
    }

    /// Rank-one density operator `|psi><psi|` over all modes.
    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            mode_dims: self.mode_dims.clone(),
            matrix: CMatrix::outer(&self.amplitudes, &self.amplitudes),
        }
    }
}

/// Flat offsets of every assignment of the modes not in `active`.
fn spectator_offsets(dims: &[usize], st: &[usize], active: &[usize]) -> Vec<usize> {
    let spect: Vec<usize> = (0..dims.len()).filter(|m| !active.contains(m)).collect();
    let sdims: Vec<usize> = spect.iter().map(|&m| dims[m]).collect();
    let total: usize = sdims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; spect.len()];
    for flat in 0..total {
        digits(flat, &sdims, &mut idx);
        out.push(idx.iter().zip(&spect).map(|(n, &m)| n * st[m]).sum());
    }
    out
}

/// Density operator over one or more truncated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    mode_dims: Vec<usize>,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Accepts any Hermitian (to 1e-10) matrix; positivity and trace are
    /// checked separately by [`DensityOperator::validate`].
    pub fn from_matrix(mode_dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let total: usize = mode_dims.iter().product();
        if total != matrix.dim() {
            return Err(Error::DimensionMismatch { expected: total, found: matrix.dim() });
        }
        let defect = matrix.hermiticity_defect();
        if defect > 1e-10 {
            return Err(Error::invalid("density operator is not Hermitian"));
        }
        Ok(Self { mode_dims, matrix })
    }

    pub fn single_mode(matrix: CMatrix) -> Result<Self> {
        Self::from_matrix(vec![matrix.dim()], matrix)
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.to_density()
    }

    /// Diagonal (Fock-mixture) single-mode state.
    pub fn from_populations(pops: &[f64]) -> Self {
        let diag: Vec<C64> = pops.iter().map(|&p| C64::new(p, 0.0)).collect();
        Self { mode_dims: vec![pops.len()], matrix: CMatrix::from_diagonal(&diag) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::ZeroProbability);
        }
        Ok(Self { mode_dims: self.mode_dims.clone(), matrix: self.matrix.scale(C64::new(1.0 / tr, 0.0)) })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mode_dims: self.mode_dims.clone(), matrix: self.matrix.scale(C64::new(s, 0.0)) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.mode_dims != other.mode_dims {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { mode_dims: self.mode_dims.clone(), matrix: self.matrix.add(&other.matrix) })
    }

    /// `Tr[op rho]` for an operator on the full space.
    pub fn expectation(&self, op: &ModeOperator) -> Result<C64> {
        if op.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.total_dim() });
        }
        Ok(op.matrix().matmul(&self.matrix).trace())
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// `Tr[n rho] / Tr[rho]` for a single-mode operator.
    pub fn mean_photon(&self) -> f64 {
        let pops = self.populations();
        let tr: f64 = pops.iter().sum();
        pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>() / tr
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        HermitianEigen::new(&self.matrix).min_value()
    }

    /// Checks Hermiticity (1e-10), positivity (-1e-9) and unit trace (1e-10).
    pub fn validate(&self) -> Result<()> {
        if self.matrix.hermiticity_defect() > 1e-10 {
            return Err(Error::invalid("density operator is not Hermitian"));
        }
        let min = self.min_eigenvalue();
        if min < -1e-9 {
            return Err(Error::NotPositive(min));
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("density operator trace differs from one"));
        }
        Ok(())
    }

    /// Same operator on a larger single-mode space (zero padded) or the
    /// leading block of a smaller one.
    pub fn resized(&self, dim: usize) -> Self {
        let m = if dim >= self.dim() { self.matrix.padded(dim) } else { self.matrix.leading(dim) };
        Self { mode_dims: vec![dim], matrix: m }
    }
}

/// Partial trace onto `keep` (sorted, deduplicated internally).
pub trait PartialTrace {
    fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator>;
}

fn keep_plan(dims: &[usize], keep: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if let Some(&bad) = k.iter().find(|&&m| m >= dims.len()) {
        return Err(Error::ModeOutOfRange { index: bad, modes: dims.len() });
    }
    let traced = (0..dims.len()).filter(|m| !k.contains(m)).collect();
    Ok((k, traced))
}

fn split_index(flat: usize, dims: &[usize], keep: &[usize], traced: &[usize], idx: &mut [usize]) -> (usize, usize) {
    digits(flat, dims, idx);
    let kf = keep.iter().fold(0, |acc, &m| acc * dims[m] + idx[m]);
    let tf = traced.iter().fold(0, |acc, &m| acc * dims[m] + idx[m]);
    (kf, tf)
}

impl PartialTrace for PureState {
    fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let dims = &self.mode_dims;
        let (keep, traced) = keep_plan(dims, keep)?;
        let kd: usize = keep.iter().map(|&m| dims[m]).product();
        let td: usize = traced.iter().map(|&m| dims[m]).product();
        // psi as a kd x td matrix, rho = M M^dagger
        let mut m = vec![ZERO; kd * td];
        let mut idx = vec![0; dims.len()];
        for (flat, &c) in self.amplitudes.iter().enumerate() {
            let (kf, tf) = split_index(flat, dims, &keep, &traced, &mut idx);
            m[kf * td + tf] = c;
        }
        let mut rho = CMatrix::zeros(kd);
        for i in 0..kd {
            let ri = &m[i * td..(i + 1) * td];
            for j in i..kd {
                let rj = &m[j * td..(j + 1) * td];
                let v: C64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
                rho[(i, j)] = v;
                rho[(j, i)] = v.conj();
            }
        }
        Ok(DensityOperator { mode_dims: keep.iter().map(|&k| dims[k]).collect(), matrix: rho })
    }
}

impl PartialTrace for DensityOperator {
    fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let dims = &self.mode_dims;
        let (keep, traced) = keep_plan(dims, keep)?;
        let kd: usize = keep.iter().map(|&m| dims[m]).product();
        let n = self.dim();
        let mut idx = vec![0; dims.len()];
        let split: Vec<(usize, usize)> = (0..n).map(|f| split_index(f, dims, &keep, &traced, &mut idx)).collect();
        let mut rho = CMatrix::zeros(kd);
        for i in 0..n {
            for j in 0..n {
                if split[i].1 == split[j].1 {
                    rho[(split[i].0, split[j].0)] += self.matrix[(i, j)];
                }
            }
        }
        Ok(DensityOperator { mode_dims: keep.iter().map(|&k| dims[k]).collect(), matrix: rho })
    }
}

/// One photon-number block of a two-mode number-conserving operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonBlock {
    pub total: usize,
    /// `(n_i, n_j)` pairs with `n_i + n_j == total`, `n_i` ascending.
    pub members: Vec<(usize, usize)>,
    pub matrix: CMatrix,
}

fn block_members(di: usize, dj: usize, total: usize) -> Vec<(usize, usize)> {
    (0..di).filter(|&a| a <= total && total - a < dj).map(|a| (a, total - a)).collect()
}

fn extract_blocks(matrix: &CMatrix, di: usize, dj: usize) -> Vec<PhotonBlock> {
    (0..di + dj - 1)
        .map(|s| {
            let members = block_members(di, dj, s);
            let len = members.len();
            let mut m = CMatrix::zeros(len);
            for (r, &(a, b)) in members.iter().enumerate() {
                for (c, &(x, y)) in members.iter().enumerate() {
                    m[(r, c)] = matrix[(a * dj + b, x * dj + y)];
                }
            }
            PhotonBlock { total: s, members, matrix: m }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Dense { matrix: CMatrix, number_conserving: bool },
    Blocks(Vec<PhotonBlock>),
}

/// Operator on one or more truncated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    dims: Vec<usize>,
    repr: Repr,
}

fn photon_counts(dims: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut idx = vec![0; dims.len()];
    (0..total)
        .map(|f| {
            digits(f, dims, &mut idx);
            idx.iter().sum()
        })
        .collect()
}

/// Largest matrix element connecting different total photon numbers.
fn number_leak(matrix: &CMatrix, dims: &[usize]) -> f64 {
    let counts = photon_counts(dims);
    let mut worst = 0.0f64;
    for (i, &ci) in counts.iter().enumerate() {
        for (j, &cj) in counts.iter().enumerate() {
            if ci != cj {
                worst = worst.max(matrix[(i, j)].norm());
            }
        }
    }
    worst
}

impl ModeOperator {
    /// Wrap a dense matrix; the number-conserving flag is detected.
    pub fn from_matrix(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != matrix.dim() {
            return Err(Error::DimensionMismatch { expected: total, found: matrix.dim() });
        }
        let number_conserving = number_leak(&matrix, &dims) <= NUMBER_CONSERVING_TOL;
        Ok(Self { dims, repr: Repr::Dense { matrix, number_conserving } })
    }

    /// Wrap a dense matrix that must be block diagonal in total photon number.
    pub fn number_conserving(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != matrix.dim() {
            return Err(Error::DimensionMismatch { expected: total, found: matrix.dim() });
        }
        let leak = number_leak(&matrix, &dims);
        if leak > NUMBER_CONSERVING_TOL {
            return Err(Error::NotNumberConserving { leak });
        }
        Ok(Self { dims, repr: Repr::Dense { matrix, number_conserving: true } })
    }

    /// Two-mode operator given directly by its photon-number blocks.
    pub fn from_blocks(di: usize, dj: usize, blocks: Vec<PhotonBlock>) -> Result<Self> {
        if blocks.len() != di + dj - 1 {
            return Err(Error::DimensionMismatch { expected: di + dj - 1, found: blocks.len() });
        }
        for (s, b) in blocks.iter().enumerate() {
            let members = block_members(di, dj, s);
            if b.total != s || b.members != members || b.matrix.dim() != members.len() {
                return Err(Error::invalid("photon block layout does not match dimensions"));
            }
        }
        Ok(Self { dims: vec![di, dj], repr: Repr::Blocks(blocks) })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let total = dims.iter().product();
        Self { dims: dims.to_vec(), repr: Repr::Dense { matrix: CMatrix::identity(total), number_conserving: true } }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_number_conserving(&self) -> bool {
        match &self.repr {
            Repr::Dense { number_conserving, .. } => *number_conserving,
            Repr::Blocks(_) => true,
        }
    }

    /// Photon-number blocks, for two-mode number-conserving operators.
    pub fn blocks(&self) -> Option<Vec<PhotonBlock>> {
        match &self.repr {
            Repr::Blocks(b) => Some(b.clone()),
            Repr::Dense { matrix, number_conserving: true } if self.dims.len() == 2 => {
                Some(extract_blocks(matrix, self.dims[0], self.dims[1]))
            }
            _ => None,
        }
    }

    /// Dense matrix (materialised for block operators).
    pub fn matrix(&self) -> CMatrix {
        match &self.repr {
            Repr::Dense { matrix, .. } => matrix.clone(),
            Repr::Blocks(blocks) => {
                let dj = self.dims[1];
                let mut m = CMatrix::zeros(self.total_dim());
                for b in blocks {
                    for (r, &(a1, b1)) in b.members.iter().enumerate() {
                        for (c, &(a2, b2)) in b.members.iter().enumerate() {
                            m[(a1 * dj + b1, a2 * dj + b2)] = b.matrix[(r, c)];
                        }
                    }
                }
                m
            }
        }
    }

    pub fn adjoint(&self) -> Self {
        let repr = match &self.repr {
            Repr::Dense { matrix, number_conserving } => {
                Repr::Dense { matrix: matrix.adjoint(), number_conserving: *number_conserving }
            }
            Repr::Blocks(blocks) => Repr::Blocks(
                blocks
                    .iter()
                    .map(|b| PhotonBlock { total: b.total, members: b.members.clone(), matrix: b.matrix.adjoint() })
                    .collect(),
            ),
        };
        Self { dims: self.dims.clone(), repr }
    }

    /// Operator product `self * rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.dims != rhs.dims {
            return Err(Error::DimensionMismatch { expected: self.total_dim(), found: rhs.total_dim() });
        }
        Self::from_matrix(self.dims.clone(), self.matrix().matmul(&rhs.matrix()))
    }

    /// Kronecker product, `self` on the leading modes.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let matrix = self.matrix().kron(&other.matrix());
        let number_conserving = self.is_number_conserving() && other.is_number_conserving();
        Self { dims, repr: Repr::Dense { matrix, number_conserving } }
    }

    /// `exp(self)` for an anti-Hermitian generator. Number-conserving
    /// two-mode generators are exponentiated block by block.
    pub fn exp_anti_hermitian(&self) -> Result<Self> {
        if let Some(blocks) = self.blocks() {
            let out = blocks
                .into_iter()
                .map(|b| {
                    let u = expm_anti_hermitian(&b.matrix);
                    PhotonBlock { total: b.total, members: b.members, matrix: u }
                })
                .collect();
            return Self::from_blocks(self.dims[0], self.dims[1], out);
        }
        let m = self.matrix();
        if m.add(&m.adjoint()).max_abs() > 1e-10 {
            return Err(Error::invalid("generator is not anti-Hermitian"));
        }
        Self::from_matrix(self.dims.clone(), expm_anti_hermitian(&m))
    }

    /// Largest entry of `U^dagger U - 1`, restricted to photon-number
    /// blocks whose total does not exceed `max_total` (blocks above it are
    /// clipped by the truncation). Dense operators are checked whole.
    pub fn unitarity_defect(&self, max_total: usize) -> f64 {
        match self.blocks() {
            Some(blocks) => blocks
                .iter()
                .filter(|b| b.total <= max_total)
                .map(|b| {
                    let n = b.matrix.dim();
                    b.matrix.adjoint().matmul(&b.matrix).max_abs_diff(&CMatrix::identity(n))
                })
                .fold(0.0, f64::max),
            None => {
                let m = self.matrix();
                m.adjoint().matmul(&m).max_abs_diff(&CMatrix::identity(m.dim()))
            }
        }
    }
}

/// Lowering operator `a`, `<n-1|a|n> = sqrt(n)`.
pub fn annihilator(cfg: &TruncationConfig) -> ModeOperator {
    annihilator_dim(cfg.dim())
}

pub fn annihilator_dim(dim: usize) -> ModeOperator {
    let mut m = CMatrix::zeros(dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new(sqrt(n as f64), 0.0);
    }
    ModeOperator { dims: vec![dim], repr: Repr::Dense { matrix: m, number_conserving: false } }
}

pub fn creator_dim(dim: usize) -> ModeOperator {
    annihilator_dim(dim).adjoint()
}

/// `n = a^dagger a`.
pub fn number_operator_dim(dim: usize) -> ModeOperator {
    let diag: Vec<C64> = (0..dim).map(|n| C64::new(n as f64, 0.0)).collect();
    ModeOperator {
        dims: vec![dim],
        repr: Repr::Dense { matrix: CMatrix::from_diagonal(&diag), number_conserving: true },
    }
}

/// Generator block `theta (a_i^dagger a_j - a_i a_j^dagger)` on a run of
/// consecutive members `(a, s - a)`, `a` ascending.
fn generator_block(members: &[(usize, usize)], theta: f64) -> CMatrix {
    let len = members.len();
    let mut g = CMatrix::zeros(len);
    for (c, &(a, b)) in members.iter().enumerate() {
        // a_i^dagger a_j |a, b> = sqrt((a+1) b) |a+1, b-1>
        if c + 1 < len && b > 0 {
            g[(c + 1, c)] += C64::new(theta * sqrt(((a + 1) * b) as f64), 0.0);
        }
        // -a_i a_j^dagger |a, b> = -sqrt(a (b+1)) |a-1, b+1>
        if c > 0 && a > 0 {
            g[(c - 1, c)] -= C64::new(theta * sqrt((a * (b + 1)) as f64), 0.0);
        }
    }
    g
}

/// Beamsplitter generator restricted to the truncated space. Blocks with
/// total above `min(di, dj) - 1` are clipped, so their exponential is not
/// the truncated beamsplitter; [`beamsplitter`] avoids this.
pub fn beamsplitter_generator(di: usize, dj: usize, theta: f64) -> ModeOperator {
    let blocks = (0..di + dj - 1)
        .map(|s| {
            let members = block_members(di, dj, s);
            let matrix = generator_block(&members, theta);
            PhotonBlock { total: s, members, matrix }
        })
        .collect();
    ModeOperator { dims: vec![di, dj], repr: Repr::Blocks(blocks) }
}

/// Beamsplitter `U(theta) = exp[theta (a_i^dagger a_j - a_i a_j^dagger)]`
/// on the ordered mode pair `(i, j)`. `theta = pi/4` is balanced; in the
/// Heisenberg picture `a_i^dagger -> cos(theta) a_i^dagger - sin(theta) a_j^dagger`
/// and `a_j^dagger -> cos(theta) a_j^dagger + sin(theta) a_i^dagger`.
///
/// Each photon-number block is built at full size `s + 1` and then
/// restricted to the members inside the truncation, so every retained
/// matrix element is exact; clipped blocks are contractions, unclipped ones
/// unitary.
///
/// On block `s` the generator is `theta J` with `J` real, antisymmetric and
/// tridiagonal. With `D = diag(i^c)`, `T = D^{-1} (-i J) D` is real
/// symmetric tridiagonal (off-diagonal `-sqrt((c+1)(s-c))`), so
/// `U = D V e^{i theta Lambda} V^T D^{-1}` from one real eigensolve.
pub fn beamsplitter(di: usize, dj: usize, theta: f64) -> ModeOperator {
    let blocks = (0..di + dj - 1)
        .map(|s| {
            let n = s + 1;
            let off: Vec<f64> = (0..s).map(|c| -sqrt(((c + 1) * (s - c)) as f64)).collect();
            let (vals, v) = crate::linalg::symmetric_tridiagonal_eigen(&vec![0.0; n], &off);
            let cs: Vec<f64> = vals.iter().map(|l| crate::math::cos(theta * l)).collect();
            let sn: Vec<f64> = vals.iter().map(|l| crate::math::sin(theta * l)).collect();
            let members = block_members(di, dj, s);
            let lo = members[0].0;
            let len = members.len();
            let mut m = CMatrix::zeros(len);
            for r in 0..len {
                let vr = &v[(lo + r) * n..(lo + r + 1) * n];
                for c in 0..len {
                    let vc = &v[(lo + c) * n..(lo + c + 1) * n];
                    // i^{r-c} (C + i S) is real: C, -S, -C, S by (r - c) mod 4
                    let phase = (4 + r % 4 - c % 4) % 4;
                    let x: f64 = match phase {
                        0 | 2 => vr.iter().zip(vc).zip(&cs).map(|((a, b), w)| a * b * w).sum(),
                        _ => vr.iter().zip(vc).zip(&sn).map(|((a, b), w)| a * b * w).sum(),
                    };
                    let val = match phase {
                        0 => x,
                        1 => -x,
                        2 => -x,
                        _ => x,
                    };
                    m[(r, c)] = C64::new(val, 0.0);
                }
            }
            PhotonBlock { total: s, members, matrix: m }
        })
        .collect();
    ModeOperator { dims: vec![di, dj], repr: Repr::Blocks(blocks) }
}

/// Either side of a tensor product.
#[derive(Debug, Clone, PartialEq)]
pub enum FockObject {
    State(PureState),
    Operator(ModeOperator),
}

/// Left-to-right Kronecker product of a homogeneous list.
pub fn tensor(items: &[FockObject]) -> Result<FockObject> {
    let (first, rest) = items.split_first().ok_or_else(|| Error::invalid("empty tensor product"))?;
    let mut acc = first.clone();
    for item in rest {
        acc = match (acc, item) {
            (FockObject::State(a), FockObject::State(b)) => FockObject::State(a.tensor(b)),
            (FockObject::Operator(a), FockObject::Operator(b)) => FockObject::Operator(a.tensor(b)),
            _ => return Err(Error::MixedKinds),
        };
    }
    Ok(acc)
}

/// Apply a two-mode unitary to `pair` and return the new state.
pub fn apply_two_mode_unitary(state: &PureState, u: &ModeOperator, pair: (usize, usize)) -> Result<PureState> {
    let mut out = state.clone();
    out.apply(u, &[pair.0, pair.1])?;
    Ok(out)
}
