//! Matrix-free Hermitian operators on the spin-z product basis.
//!
//! Basis index bit `i` is site `i`; a set bit is spin up (+1/2). XXZ terms
//! split into a diagonal part, tabulated once per operator, and flip-flop
//! pairs that swap anti-aligned spins with amplitude `xy / 2`.

use num_complex::Complex64;

use super::geometry::{Bond, BondGraph, DisorderRealization};
use crate::exec;

/// A linear Hermitian operator applied without materializing a matrix.
pub trait Operator: Sync {
    fn dim(&self) -> usize;

    /// Writes `self · psi` into `out`. Both slices have length [`Operator::dim`].
    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]);

    /// Upper bound on the spectral norm.
    fn norm_bound(&self) -> f64;

    /// Whether every eigenvalue is known to be nonnegative.
    fn is_nonnegative(&self) -> bool {
        false
    }
}

impl<T: Operator + ?Sized> Operator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        (**self).apply_into(psi, out)
    }
    fn norm_bound(&self) -> f64 {
        (**self).norm_bound()
    }
    fn is_nonnegative(&self) -> bool {
        (**self).is_nonnegative()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Flip {
    a: u32,
    b: u32,
    amp: f64,
}

/// Sum of weighted XXZ bonds and z-fields.
#[derive(Debug, Clone)]
pub struct SpinOperator {
    n_sites: usize,
    diag: Vec<f64>,
    flips: Vec<Flip>,
    norm_bound: f64,
}

impl SpinOperator {
    /// Builds `Σ w_b · bond_b + Σ h_i Sᶻ_i` from `(bond, weight)` pairs and
    /// `(site, field)` pairs; zero weights and fields are dropped.
    pub fn from_terms<'a>(
        n_sites: usize,
        bonds: impl IntoIterator<Item = (&'a Bond, f64)>,
        fields: impl IntoIterator<Item = (usize, f64)>,
    ) -> Self {
        let mut zz: Vec<(usize, usize, f64)> = Vec::new();
        let mut flips = Vec::new();
        let mut norm_bound = 0.0;
        for (bond, w) in bonds {
            let (xy, z) = (w * bond.xy, w * bond.z);
            if z != 0.0 {
                zz.push((bond.a, bond.b, z));
            }
            if xy != 0.0 {
                flips.push(Flip { a: bond.a as u32, b: bond.b as u32, amp: 0.5 * xy });
            }
            norm_bound += 0.25 * z.abs() + 0.5 * xy.abs();
        }
        let fields: Vec<(usize, f64)> = fields.into_iter().filter(|&(_, h)| h != 0.0).collect();
        norm_bound += fields.iter().map(|&(_, h)| 0.5 * h.abs()).sum::<f64>();

        let dim = 1usize << n_sites;
        let mut diag = vec![0.0; dim];
        exec::for_each_chunk_mut(&mut diag, |c, chunk| {
            let base = c * exec::CHUNK;
            for (k, v) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let spin = |s: usize| if (i >> s) & 1 == 1 { 0.5 } else { -0.5 };
                let mut e = 0.0;
                for &(a, b, z) in &zz {
                    e += z * spin(a) * spin(b);
                }
                for &(s, h) in &fields {
                    e += h * spin(s);
                }
                *v = e;
            }
        });
        Self { n_sites, diag, flips, norm_bound }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Diagonal matrix elements in the product basis.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Iterates `(site_a, site_b, amplitude)` of the flip-flop pairs.
    pub fn flip_terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.flips.iter().map(|f| (f.a as usize, f.b as usize, f.amp))
    }
}

impl Operator for SpinOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim();
        assert_eq!(psi.len(), dim);
        assert_eq!(out.len(), dim);
        let chunk_bits = exec::CHUNK.min(dim).trailing_zeros();
        exec::for_each_chunk_mut(out, |c, chunk| {
            let base = c * exec::CHUNK;
            let len = chunk.len();
            let src = &psi[base..base + len];
            let diag = &self.diag[base..base + len];
            for ((o, p), d) in chunk.iter_mut().zip(src).zip(diag) {
                *o = p * d;
            }
            for f in &self.flips {
                let mask = (1usize << f.a) | (1usize << f.b);
                if f.a >= chunk_bits && f.b >= chunk_bits {
                    // Both bits are constant over the chunk.
                    if ((base >> f.a) ^ (base >> f.b)) & 1 == 1 {
                        let partner = base ^ mask;
                        for (o, p) in chunk.iter_mut().zip(&psi[partner..partner + len]) {
                            *o += p * f.amp;
                        }
                    }
                } else {
                    for (k, o) in chunk.iter_mut().enumerate() {
                        let i = base + k;
                        let active = (((i >> f.a) ^ (i >> f.b)) & 1) as f64;
                        *o += psi[i ^ mask] * (f.amp * active);
                    }
                }
            }
        });
    }

    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

/// The operator pieces of one model. `D = H_L − H_R` and
/// `H = H_L + H_R + H_C` are tabulated as operators of their own.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub h_left: SpinOperator,
    pub h_right: SpinOperator,
    pub h_coupling: SpinOperator,
    pub h: SpinOperator,
    pub d: SpinOperator,
}

impl ModelOperators {
    pub fn n_sites(&self) -> usize {
        self.h.n_sites()
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `D²`.
    pub fn d_squared(&self) -> Power<'_, SpinOperator> {
        Power::new(&self.d, 2)
    }

    /// `D⁴`.
    pub fn d_fourth(&self) -> Power<'_, SpinOperator> {
        Power::new(&self.d, 4)
    }
}

pub(crate) fn assemble(graph: &BondGraph, fields: &DisorderRealization) -> ModelOperators {
    use super::geometry::BondTag::*;
    let n = graph.n_sites;
    let left_fields = || {
        fields.fields.iter().copied().enumerate().filter(|&(s, _)| graph.is_left(s))
    };
    let right_fields = || {
        fields.fields.iter().copied().enumerate().filter(|&(s, _)| !graph.is_left(s))
    };
    let tagged = |t| graph.bonds_tagged(t).map(|b| (b, 1.0));

    let h_left = SpinOperator::from_terms(n, tagged(Left), left_fields());
    let h_right = SpinOperator::from_terms(n, tagged(Right), right_fields());
    let h_coupling = SpinOperator::from_terms(n, tagged(Coupling), std::iter::empty());
    let h = SpinOperator::from_terms(
        n,
        graph.bonds.iter().map(|b| (b, 1.0)),
        fields.fields.iter().copied().enumerate(),
    );
    let d = SpinOperator::from_terms(
        n,
        graph
            .bonds
            .iter()
            .filter(|b| b.tag != Coupling)
            .map(|b| (b, if b.tag == Left { 1.0 } else { -1.0 })),
        fields
            .fields
            .iter()
            .copied()
            .enumerate()
            .map(|(s, h)| (s, if graph.is_left(s) { h } else { -h })),
    );
    ModelOperators { h_left, h_right, h_coupling, h, d }
}

/// The identity on a space of dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl Operator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.copy_from_slice(psi);
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
    fn is_nonnegative(&self) -> bool {
        true
    }
}

/// The zero operator on a space of dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct Zero(pub usize);

impl Operator for Zero {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_into(&self, _psi: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
    }
    fn norm_bound(&self) -> f64 {
        0.0
    }
    fn is_nonnegative(&self) -> bool {
        true
    }
}

/// `scale · (op − shift)`.
#[derive(Debug, Clone, Copy)]
pub struct Affine<O> {
    pub op: O,
    pub shift: f64,
    pub scale: f64,
}

impl<O: Operator> Affine<O> {
    pub fn shifted(op: O, shift: f64) -> Self {
        Self { op, shift, scale: 1.0 }
    }
}

impl<O: Operator> Operator for Affine<O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        self.op.apply_into(psi, out);
        let (shift, scale) = (self.shift, self.scale);
        exec::for_each_chunk_mut(out, |c, chunk| {
            let src = &psi[c * exec::CHUNK..c * exec::CHUNK + chunk.len()];
            for (o, p) in chunk.iter_mut().zip(src) {
                *o = (*o - p * shift) * scale;
            }
        });
    }
    fn norm_bound(&self) -> f64 {
        self.scale.abs() * (self.op.norm_bound() + self.shift.abs())
    }
}

/// `op^k` for `k ≥ 1`.
#[derive(Debug, Clone, Copy)]
pub struct Power<'a, O> {
    op: &'a O,
    exponent: u32,
}

impl<'a, O: Operator> Power<'a, O> {
    pub fn new(op: &'a O, exponent: u32) -> Self {
        assert!(exponent >= 1);
        Self { op, exponent }
    }
}

impl<O: Operator> Operator for Power<'_, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        self.op.apply_into(psi, out);
        let mut tmp = vec![Complex64::new(0.0, 0.0); psi.len()];
        for _ in 1..self.exponent {
            tmp.copy_from_slice(out);
            self.op.apply_into(&tmp, out);
        }
    }
    fn norm_bound(&self) -> f64 {
        self.op.norm_bound().powi(self.exponent as i32)
    }
    fn is_nonnegative(&self) -> bool {
        self.exponent % 2 == 0
    }
}

/// `Σ_k w_k · A_k²` with nonnegative weights, e.g. `H² + β²(D − d₀)²`.
pub struct SumOfSquares<'a> {
    terms: Vec<(f64, &'a dyn Operator)>,
}

impl<'a> SumOfSquares<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn Operator)>) -> Self {
        assert!(!terms.is_empty());
        assert!(terms.iter().all(|(w, _)| *w >= 0.0));
        let d = terms[0].1.dim();
        assert!(terms.iter().all(|(_, op)| op.dim() == d));
        Self { terms }
    }
}

impl Operator for SumOfSquares<'_> {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        let mut a = vec![zero; psi.len()];
        let mut b = vec![zero; psi.len()];
        out.fill(zero);
        for &(w, op) in &self.terms {
            op.apply_into(psi, &mut a);
            op.apply_into(&a, &mut b);
            exec::for_each_chunk_mut(out, |c, chunk| {
                let src = &b[c * exec::CHUNK..c * exec::CHUNK + chunk.len()];
                for (o, v) in chunk.iter_mut().zip(src) {
                    *o += v * w;
                }
            });
        }
    }
    fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|(w, op)| w * op.norm_bound().powi(2)).sum()
    }
    fn is_nonnegative(&self) -> bool {
        true
    }
}
