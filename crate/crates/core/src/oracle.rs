//! Exact diagonalization of small models: ground truth for the typicality
//! estimators, the filters and the dynamics.
//!
//! Dense matrices are assembled from explicit spin-1/2 matrices acting on
//! pairs of sites, independently of the bitmask kernel in [`crate::model`].

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::engine::PureState;
use crate::error::{Error, Result};
use crate::estimator::EthReport;
use crate::funcfilter::EnergyWindow;
use crate::model::{BondGraph, BondTag, DisorderRealization};

/// Default largest number of spins accepted by [`exact_diagonalize`].
pub const DEFAULT_SIZE_CAP: usize = 14;

/// Eigenvalues closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Spin-1/2 matrices in the local basis (index 0 = down, 1 = up).
fn spin_matrices() -> [[[Complex64; 2]; 2]; 3] {
    let z = c(0.0, 0.0);
    let sx = [[z, c(0.5, 0.0)], [c(0.5, 0.0), z]];
    let sy = [[z, c(0.0, 0.5)], [c(0.0, -0.5), z]];
    let sz = [[c(-0.5, 0.0), z], [z, c(0.5, 0.0)]];
    [sx, sy, sz]
}

/// Adds `weight · A_a ⊗ B_b` (identity elsewhere) to `m`.
fn add_two_site(m: &mut CMat, a: usize, b: usize, op_a: &[[Complex64; 2]; 2], op_b: &[[Complex64; 2]; 2], weight: f64) {
    let dim = m.nrows();
    for j in 0..dim {
        let (ja, jb) = ((j >> a) & 1, (j >> b) & 1);
        for ia in 0..2 {
            for ib in 0..2 {
                let v = op_a[ia][ja] * op_b[ib][jb];
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let i = (j & !(1 << a) & !(1 << b)) | (ia << a) | (ib << b);
                m[(i, j)] += v * weight;
            }
        }
    }
}

fn add_one_site(m: &mut CMat, a: usize, op: &[[Complex64; 2]; 2], weight: f64) {
    let dim = m.nrows();
    for j in 0..dim {
        let ja = (j >> a) & 1;
        for ia in 0..2 {
            let v = op[ia][ja];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let i = (j & !(1 << a)) | (ia << a);
            m[(i, j)] += v * weight;
        }
    }
}

/// Dense matrices of every operator of a model.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub h_left: DMatrix<f64>,
    pub h_right: DMatrix<f64>,
    pub h_coupling: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

fn real_part(m: &CMat) -> DMatrix<f64> {
    let max_im = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    assert!(max_im < 1e-14, "XXZ Hamiltonian should be real in the z basis (|Im| = {max_im})");
    m.map(|z| z.re)
}

pub fn dense_model(graph: &BondGraph, fields: &DisorderRealization) -> DenseModel {
    let dim = 1usize << graph.n_sites;
    let [sx, sy, sz] = spin_matrices();
    let build = |tag: BondTag, with_fields: bool| {
        let mut m = CMat::zeros(dim, dim);
        for b in graph.bonds_tagged(tag) {
            add_two_site(&mut m, b.a, b.b, &sx, &sx, b.xy);
            add_two_site(&mut m, b.a, b.b, &sy, &sy, b.xy);
            add_two_site(&mut m, b.a, b.b, &sz, &sz, b.z);
        }
        if with_fields {
            for (s, &h) in fields.fields.iter().enumerate() {
                let left = graph.is_left(s);
                if (tag == BondTag::Left) == left {
                    add_one_site(&mut m, s, &sz, h);
                }
            }
        }
        real_part(&m)
    };
    let h_left = build(BondTag::Left, true);
    let h_right = build(BondTag::Right, true);
    let h_coupling = build(BondTag::Coupling, false);
    let h = &h_left + &h_right + &h_coupling;
    let d = &h_left - &h_right;
    DenseModel { h_left, h_right, h_coupling, h, d }
}

/// Dense matrix of any matrix-free operator, one basis column at a time.
pub fn densify<O: crate::model::Operator + ?Sized>(op: &O) -> DMatrix<Complex64> {
    let dim = op.dim();
    let mut m = CMat::zeros(dim, dim);
    let mut out = vec![c(0.0, 0.0); dim];
    for j in 0..dim {
        let e = PureState::basis(dim, j);
        op.apply_into(e.amplitudes(), &mut out);
        for i in 0..dim {
            m[(i, j)] = out[i];
        }
    }
    m
}

/// Full spectrum and eigenbasis of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `n` is `|n⟩`.
    pub vectors: DMatrix<f64>,
    /// Index ranges of eigenvalues equal within [`DEGENERACY_TOL`].
    pub groups: Vec<std::ops::Range<usize>>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `⟨m|A|n⟩` for all `m, n`.
    pub fn in_eigenbasis(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.transpose() * a * &self.vectors
    }

    /// Diagonal elements `A_nn`.
    pub fn diagonal_elements(&self, a: &DMatrix<f64>) -> Vec<f64> {
        (0..self.dim())
            .map(|n| {
                let v = self.vectors.column(n);
                v.dot(&(a * v))
            })
            .collect()
    }

    pub fn has_degeneracies(&self) -> bool {
        self.groups.iter().any(|g| g.len() > 1)
    }

    /// `V f(E) Vᵀ`.
    pub fn function_matrix<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (n, &e) in self.energies.iter().enumerate() {
            let fe = f(e);
            scaled.column_mut(n).scale_mut(fe);
        }
        scaled * self.vectors.transpose()
    }

    /// `e^{−iHt} ψ`.
    pub fn propagate(&self, psi: &PureState, t: f64) -> PureState {
        let coeffs = self.to_eigenbasis(psi);
        let phased: Vec<Complex64> = coeffs
            .iter()
            .zip(&self.energies)
            .map(|(a, &e)| a * Complex64::from_polar(1.0, -e * t))
            .collect();
        self.from_eigenbasis(&phased)
    }

    pub fn to_eigenbasis(&self, psi: &PureState) -> Vec<Complex64> {
        let (re, im) = split(psi);
        let vt = self.vectors.transpose();
        let a = &vt * re;
        let b = &vt * im;
        a.iter().zip(b.iter()).map(|(x, y)| c(*x, *y)).collect()
    }

    pub fn from_eigenbasis(&self, coeffs: &[Complex64]) -> PureState {
        let re = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|z| z.re));
        let im = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|z| z.im));
        let a = &self.vectors * re;
        let b = &self.vectors * im;
        PureState::from_amplitudes(a.iter().zip(b.iter()).map(|(x, y)| c(*x, *y)).collect())
    }
}

fn split(psi: &PureState) -> (DVector<f64>, DVector<f64>) {
    let a = psi.amplitudes();
    (
        DVector::from_iterator(a.len(), a.iter().map(|z| z.re)),
        DVector::from_iterator(a.len(), a.iter().map(|z| z.im)),
    )
}

/// Applies a real matrix to a complex state.
pub fn apply_dense(m: &DMatrix<f64>, psi: &PureState) -> PureState {
    let (re, im) = split(psi);
    let a = m * re;
    let b = m * im;
    PureState::from_amplitudes(a.iter().zip(b.iter()).map(|(x, y)| c(*x, *y)).collect())
}

pub fn exact_diagonalize(m: &DMatrix<f64>) -> Result<SpectralData> {
    exact_diagonalize_capped(m, DEFAULT_SIZE_CAP)
}

/// Refuses systems larger than `cap` spins before anything dense is built.
pub fn check_size_cap(spins: usize, cap: usize) -> Result<()> {
    if spins > cap {
        return Err(Error::SizeCapExceeded { cap, spins });
    }
    Ok(())
}

pub fn exact_diagonalize_capped(m: &DMatrix<f64>, cap_spins: usize) -> Result<SpectralData> {
    let dim = m.nrows();
    check_size_cap(dim.next_power_of_two().trailing_zeros() as usize, cap_spins)?;
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(dim, dim);
    for (n, &i) in order.iter().enumerate() {
        vectors.set_column(n, &eig.eigenvectors.column(i));
    }
    let mut groups = Vec::new();
    let mut start = 0;
    for n in 1..=dim {
        if n == dim || energies[n] - energies[n - 1] > DEGENERACY_TOL {
            groups.push(start..n);
            start = n;
        }
    }
    Ok(SpectralData { energies, vectors, groups })
}

/// Exact counterparts of the typicality estimates.
#[derive(Debug, Clone)]
pub struct ExactEth {
    /// Weighted moments with `Σ² = Σ p_n A_nn² − Ā²`; stderr fields are zero.
    pub report: EthReport,
    /// `Σ_B Σ_{m,n∈B} p_n |A_mn|² − Ā²` over degenerate blocks `B`; the
    /// infinite-time average converges to this value.
    pub sigma2_block: f64,
}

pub fn exact_eth_params(spec: &SpectralData, a: &DMatrix<f64>, window: EnergyWindow) -> ExactEth {
    let weights: Vec<f64> = spec.energies.iter().map(|&e| window.weight(e)).collect();
    let z: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let a_eig = spec.in_eigenbasis(a);
    let a_sq = &a_eig * &a_eig;
    let diag: Vec<f64> = (0..spec.dim()).map(|n| a_eig[(n, n)]).collect();

    let a_bar: f64 = p.iter().zip(&diag).map(|(p, a)| p * a).sum();
    let second: f64 = p.iter().zip(&diag).map(|(p, a)| p * a * a).sum();
    let sigma2 = second - a_bar * a_bar;
    let delta2 = p.iter().enumerate().map(|(n, p)| p * a_sq[(n, n)]).sum::<f64>() - a_bar * a_bar;
    let block_second: f64 = spec
        .groups
        .iter()
        .map(|g| {
            g.clone()
                .map(|n| p[n] * g.clone().map(|m| a_eig[(m, n)].powi(2)).sum::<f64>())
                .sum::<f64>()
        })
        .sum();
    let sigma2_block = block_second - a_bar * a_bar;

    // ∂Ā/∂Ē = Cov_p(E − Ē, A_nn) / σ²
    let s2 = window.sigma * window.sigma;
    let e_mean: f64 = p.iter().zip(&spec.energies).map(|(p, e)| p * e).sum();
    let cov: f64 = p
        .iter()
        .zip(&spec.energies)
        .zip(&diag)
        .map(|((p, e), a)| p * (e - e_mean) * (a - a_bar))
        .sum();
    let slope = cov / s2;

    let report = EthReport::from_exact(z, a_bar, sigma2, slope, delta2, window);
    ExactEth { report, sigma2_block }
}

/// Expected value of the finite-window `Σ²` estimator: the average over
/// `times` of `Σ_{m,n} p_m cos((E_m − E_n)t) |A_mn|²`, minus `Ā²`.
///
/// Differs from the block value by level pairs that have not dephased
/// within the window.
pub fn exact_windowed_sigma2(spec: &SpectralData, a: &DMatrix<f64>, window: EnergyWindow, times: &[f64]) -> f64 {
    let weights: Vec<f64> = spec.energies.iter().map(|&e| window.weight(e)).collect();
    let z: f64 = weights.iter().sum();
    let a_eig = spec.in_eigenbasis(a);
    let dim = spec.dim();
    let a_bar: f64 = (0..dim).map(|n| weights[n] * a_eig[(n, n)]).sum::<f64>() / z;
    let mut total = 0.0;
    for m in 0..dim {
        let mut row = 0.0;
        for n in 0..dim {
            let amn = a_eig[(m, n)] * a_eig[(m, n)];
            if amn == 0.0 {
                continue;
            }
            let omega = spec.energies[m] - spec.energies[n];
            let avg = times.iter().map(|t| (omega * t).cos()).sum::<f64>() / times.len() as f64;
            row += avg * amn;
        }
        total += weights[m] * row;
    }
    total / z - a_bar * a_bar
}

/// Initial state for [`exact_longtime_average`].
pub enum InitialState<'a> {
    /// Populations `ρ_nn` in the eigenbasis, assumed block-diagonal.
    EigenWeights(&'a [f64]),
    /// A density matrix in the spin-z basis.
    Density(&'a DMatrix<Complex64>),
    Pure(&'a PureState),
}

/// `Σ_B Tr{P_B ρ P_B A}`, which reduces to `Σ_n ρ_nn A_nn` without degeneracies.
pub fn exact_longtime_average(init: InitialState<'_>, spec: &SpectralData, a: &DMatrix<f64>) -> f64 {
    let a_eig = spec.in_eigenbasis(a);
    match init {
        InitialState::EigenWeights(w) => {
            if spec.has_degeneracies() {
                warn!("degenerate spectrum: eigenbasis populations ignore coherences inside blocks");
            }
            w.iter().enumerate().map(|(n, w)| w * a_eig[(n, n)]).sum()
        }
        InitialState::Density(rho) => {
            let v = spec.vectors.map(|x| c(x, 0.0));
            let rho_eig = v.transpose() * rho * &v;
            block_trace(spec, |m, n| rho_eig[(m, n)], &a_eig)
        }
        InitialState::Pure(psi) => {
            let coeffs = spec.to_eigenbasis(psi);
            block_trace(spec, |m, n| coeffs[m] * coeffs[n].conj(), &a_eig)
        }
    }
}

fn block_trace<F: Fn(usize, usize) -> Complex64>(spec: &SpectralData, rho: F, a_eig: &DMatrix<f64>) -> f64 {
    if spec.has_degeneracies() {
        warn!("degenerate spectrum: long-time average resolved block by block");
    }
    let mut s = c(0.0, 0.0);
    for g in &spec.groups {
        for m in g.clone() {
            for n in g.clone() {
                s += rho(m, n) * a_eig[(n, m)];
            }
        }
    }
    s.re
}

/// `Tr{ρ A(t)}` with `A(t) = e^{iHt} A e^{−iHt}`, for a density matrix given
/// in the eigenbasis of `H`.
pub fn mixed_expectation(spec: &SpectralData, rho_eig: &DMatrix<f64>, a_eig: &DMatrix<f64>, t: f64) -> f64 {
    let d = spec.dim();
    let mut s = 0.0;
    for m in 0..d {
        for n in 0..d {
            let r = rho_eig[(m, n)];
            if r == 0.0 {
                continue;
            }
            let phase = (spec.energies[n] - spec.energies[m]) * t;
            // ρ_mn A_nm e^{i(E_n − E_m)t}; the sum is real.
            s += r * a_eig[(n, m)] * phase.cos();
        }
    }
    s
}

/// Dense `exp(−K/4σ²)` with `K = (H − Ē)² + β²(D − d₀)²`, and the unit-trace
/// density matrix `ρ_MOD ∝ exp(−K/2σ²)`.
pub fn dense_mod_root(
    h: &DMatrix<f64>,
    d: &DMatrix<f64>,
    sigma: f64,
    beta: f64,
    d0: f64,
    e_center: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = h.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let hs = h - &id * e_center;
    let ds = d - &id * d0;
    let k = &hs * &hs + (&ds * &ds) * (beta * beta);
    let kspec = exact_diagonalize_capped(&k, usize::MAX).expect("uncapped");
    let s2 = sigma * sigma;
    // shift by the smallest eigenvalue to avoid underflow in the trace
    let k0 = kspec.energies[0];
    let root = kspec.function_matrix(|x| (-(x - k0) / (4.0 * s2)).exp());
    let rho_un = kspec.function_matrix(|x| (-(x - k0) / (2.0 * s2)).exp());
    let tr = rho_un.trace();
    let root = root * (-k0 / (4.0 * s2)).exp();
    (root, rho_un / tr)
}
