use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::model::Operator;
use crate::rng::{Purpose, SeedStreams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Amplitudes over the `2^N` spin-z product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn zeros(dim: usize) -> Self {
        Self { amps: vec![ZERO; dim] }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amps[index] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        exec::norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩.
    pub fn dot(&self, other: &PureState) -> Complex64 {
        exec::dot(&self.amps, &other.amps)
    }

    pub fn scale(&mut self, factor: Complex64) {
        exec::for_each_chunk_mut(&mut self.amps, |_, chunk| {
            chunk.iter_mut().for_each(|a| *a *= factor);
        });
    }

    /// Rescales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
        n
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &PureState) {
        let src = &other.amps;
        exec::for_each_chunk_mut(&mut self.amps, |c, chunk| {
            let s = &src[c * exec::CHUNK..c * exec::CHUNK + chunk.len()];
            chunk.iter_mut().zip(s).for_each(|(a, b)| *a += alpha * b);
        });
    }
}

/// Normalized state with i.i.d. standard complex Gaussian amplitudes.
pub fn haar_from_rng<R: Rng>(dim: usize, rng: &mut R) -> PureState {
    let amps = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut s = PureState { amps };
    s.normalize();
    s
}

/// Haar-random state for a seed.
pub fn random_haar_state(dim: usize, seed: u64) -> PureState {
    haar_sample(dim, &SeedStreams::new(seed), 0)
}

/// The `index`-th Haar state of a master seed's state stream.
pub fn haar_sample(dim: usize, streams: &SeedStreams, index: u64) -> PureState {
    haar_from_rng(dim, &mut streams.stream(Purpose::HaarState, index))
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// ⟨ψ|op|ψ⟩, not divided by the norm.
pub fn expectation<O: Operator + ?Sized>(psi: &PureState, op: &O) -> Result<f64> {
    let z = cross_expectation(psi, op, psi)?;
    debug_assert!(
        z.im.abs() <= 1e-10 * z.re.abs().max(psi.norm_sqr()).max(1.0) * op.norm_bound().max(1.0),
        "expectation of a Hermitian operator has imaginary part {}",
        z.im
    );
    Ok(z.re)
}

/// ⟨φ|op|χ⟩.
pub fn cross_expectation<O: Operator + ?Sized>(
    phi: &PureState,
    op: &O,
    chi: &PureState,
) -> Result<Complex64> {
    check_dim(op.dim(), phi.dim())?;
    check_dim(op.dim(), chi.dim())?;
    let mut tmp = PureState::zeros(chi.dim());
    op.apply_into(chi.amplitudes(), tmp.amplitudes_mut());
    Ok(phi.dot(&tmp))
}
