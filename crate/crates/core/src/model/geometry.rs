use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams};

/// Arrangement of the two subsystems and their contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Two chains coupled rung by rung, `c_i = 1`.
    Ladder,
    /// Chains joined at their first sites, `c_i = δ(i,1)`; a single chain overall.
    SingleContact,
    /// Chains joined at both ends of the left chain, `c_i = δ(i,1) + δ(i,N_L)`.
    TwoContact,
    /// Two square lattices touching along an edge.
    Lattice2d,
}

impl Geometry {
    pub fn is_chain(self) -> bool {
        !matches!(self, Geometry::Lattice2d)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Ladder => "ladder",
            Geometry::SingleContact => "single_contact",
            Geometry::TwoContact => "two_contact",
            Geometry::Lattice2d => "lattice2d",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ladder" => Ok(Geometry::Ladder),
            "single_contact" => Ok(Geometry::SingleContact),
            "two_contact" => Ok(Geometry::TwoContact),
            "lattice2d" => Ok(Geometry::Lattice2d),
            other => Err(Error::InvalidModel(format!("unknown geometry `{other}`"))),
        }
    }
}

fn default_j() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.3
}
fn default_j_c() -> f64 {
    0.3
}

/// Parameters defining `H_L`, `H_R`, `H_C` and the disorder.
///
/// For chains `n_left`/`n_right` count spins; for [`Geometry::Lattice2d`]
/// they are lattice side lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub geometry: Geometry,
    pub n_left: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_right: Option<usize>,
    #[serde(rename = "J", default = "default_j")]
    pub j: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_j_c")]
    pub j_c: f64,
    #[serde(rename = "W", default)]
    pub w: f64,
    #[serde(default)]
    pub disorder_seed: u64,
}

impl ModelSpec {
    pub fn new(geometry: Geometry, n_left: usize) -> Self {
        Self {
            geometry,
            n_left,
            n_right: None,
            j: default_j(),
            delta: default_delta(),
            j_c: default_j_c(),
            w: 0.0,
            disorder_seed: 0,
        }
    }

    pub fn with_n_right(mut self, n_right: usize) -> Self {
        self.n_right = Some(n_right);
        self
    }

    pub fn with_couplings(mut self, delta: f64, j_c: f64) -> Self {
        self.delta = delta;
        self.j_c = j_c;
        self
    }

    pub fn with_disorder(mut self, w: f64, seed: u64) -> Self {
        self.w = w;
        self.disorder_seed = seed;
        self
    }

    /// Right-subsystem size: twice the left chain, or one more lattice side.
    pub fn resolved_n_right(&self) -> usize {
        self.n_right.unwrap_or(match self.geometry {
            Geometry::Lattice2d => self.n_left + 1,
            _ => 2 * self.n_left,
        })
    }

    pub fn left_sites(&self) -> usize {
        match self.geometry {
            Geometry::Lattice2d => self.n_left * self.n_left,
            _ => self.n_left,
        }
    }

    pub fn right_sites(&self) -> usize {
        let r = self.resolved_n_right();
        match self.geometry {
            Geometry::Lattice2d => r * r,
            _ => r,
        }
    }

    pub fn total_sites(&self) -> usize {
        self.left_sites() + self.right_sites()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_left < 1 {
            return Err(Error::InvalidModel("n_left must be at least 1".into()));
        }
        if self.geometry == Geometry::Lattice2d && self.n_left < 2 {
            return Err(Error::InvalidModel(
                "lattice2d needs a left lattice side of at least 2".into(),
            ));
        }
        if self.resolved_n_right() < 1 {
            return Err(Error::InvalidModel("n_right must be at least 1".into()));
        }
        if self.geometry == Geometry::Lattice2d && self.resolved_n_right() < 2 {
            return Err(Error::InvalidModel(
                "lattice2d needs a right lattice side of at least 2".into(),
            ));
        }
        for (name, v) in [("J", self.j), ("delta", self.delta), ("j_c", self.j_c), ("W", self.w)] {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("{name} must be finite")));
            }
        }
        if self.w < 0.0 {
            return Err(Error::InvalidModel("W must be nonnegative".into()));
        }
        if self.total_sites() > 62 {
            return Err(Error::InvalidModel("more than 62 sites cannot be indexed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondTag {
    Left,
    Right,
    Coupling,
}

/// XXZ bond `xy (SˣSˣ + SʸSʸ) + z SᶻSᶻ` between two sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub xy: f64,
    pub z: f64,
    pub tag: BondTag,
}

/// Sites, bonds and their subsystem labels for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct BondGraph {
    pub n_sites: usize,
    /// Sites `0..n_left_sites` form the left subsystem.
    pub n_left_sites: usize,
    pub bonds: Vec<Bond>,
}

impl BondGraph {
    pub fn count(&self, tag: BondTag) -> usize {
        self.bonds.iter().filter(|b| b.tag == tag).count()
    }

    pub fn bonds_tagged(&self, tag: BondTag) -> impl Iterator<Item = &Bond> {
        self.bonds.iter().filter(move |b| b.tag == tag)
    }

    pub fn is_left(&self, site: usize) -> bool {
        site < self.n_left_sites
    }
}

/// On-site fields `h_i`, one per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub fields: Vec<f64>,
}

impl DisorderRealization {
    pub fn clean(n_sites: usize) -> Self {
        Self { fields: vec![0.0; n_sites] }
    }
}

pub fn build_geometry(spec: &ModelSpec) -> Result<BondGraph> {
    spec.validate()?;
    let (j, jz) = (spec.j, spec.j * spec.delta);
    let (jc, jcz) = (spec.j_c, spec.j_c * spec.delta);
    let mut bonds = Vec::new();
    let n_l = spec.n_left;
    let n_r = spec.resolved_n_right();

    match spec.geometry {
        Geometry::Lattice2d => {
            let left0 = 0;
            let right0 = n_l * n_l;
            lattice_bonds(left0, n_l, j, jz, BondTag::Left, &mut bonds);
            lattice_bonds(right0, n_r, j, jz, BondTag::Right, &mut bonds);
            // Left lattice's right edge meets the right lattice's left edge,
            // row by row; extra rows of the larger lattice stay uncoupled.
            for k in 0..n_l.min(n_r) {
                bonds.push(Bond {
                    a: left0 + k * n_l + (n_l - 1),
                    b: right0 + k * n_r,
                    xy: jc,
                    z: jcz,
                    tag: BondTag::Coupling,
                });
            }
        }
        geom => {
            for i in 0..n_l.saturating_sub(1) {
                bonds.push(Bond { a: i, b: i + 1, xy: j, z: jz, tag: BondTag::Left });
            }
            for i in 0..n_r.saturating_sub(1) {
                bonds.push(Bond { a: n_l + i, b: n_l + i + 1, xy: j, z: jz, tag: BondTag::Right });
            }
            // c_i per contact pattern, indexed from 0 here.
            let mut c = vec![0.0; n_l];
            match geom {
                Geometry::Ladder => c.iter_mut().for_each(|v| *v = 1.0),
                Geometry::SingleContact => c[0] = 1.0,
                Geometry::TwoContact => {
                    c[0] += 1.0;
                    c[n_l - 1] += 1.0;
                }
                Geometry::Lattice2d => unreachable!(),
            }
            for (i, &ci) in c.iter().enumerate() {
                if ci != 0.0 && i < n_r {
                    bonds.push(Bond {
                        a: i,
                        b: n_l + i,
                        xy: ci * jc,
                        z: ci * jcz,
                        tag: BondTag::Coupling,
                    });
                }
            }
        }
    }

    Ok(BondGraph {
        n_sites: spec.total_sites(),
        n_left_sites: spec.left_sites(),
        bonds,
    })
}

fn lattice_bonds(offset: usize, side: usize, xy: f64, z: f64, tag: BondTag, out: &mut Vec<Bond>) {
    let site = |r: usize, c: usize| offset + r * side + c;
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                out.push(Bond { a: site(r, c), b: site(r, c + 1), xy, z, tag });
            }
            if r + 1 < side {
                out.push(Bond { a: site(r, c), b: site(r + 1, c), xy, z, tag });
            }
        }
    }
}

/// Draws i.i.d. fields uniform on `[-W/2, W/2]`, one per site.
pub fn sample_disorder(spec: &ModelSpec) -> DisorderRealization {
    let n = spec.total_sites();
    let mut rng = SeedStreams::new(spec.disorder_seed).stream(Purpose::Disorder, 0);
    let fields = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            u * spec.w - 0.5 * spec.w
        })
        .collect();
    DisorderRealization { fields }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_bond_counts() {
        let g = build_geometry(&ModelSpec::new(Geometry::Ladder, 8)).unwrap();
        assert_eq!(g.n_sites, 24);
        assert_eq!(g.count(BondTag::Left), 7);
        assert_eq!(g.count(BondTag::Right), 15);
        assert_eq!(g.count(BondTag::Coupling), 8);
    }

    #[test]
    fn smallest_single_contact() {
        let g = build_geometry(&ModelSpec::new(Geometry::SingleContact, 1)).unwrap();
        assert_eq!(g.n_sites, 3);
        assert_eq!(g.count(BondTag::Left), 0);
        assert_eq!(g.count(BondTag::Right), 1);
        assert_eq!(g.count(BondTag::Coupling), 1);
    }

    #[test]
    fn two_contact_couples_both_ends() {
        let g = build_geometry(&ModelSpec::new(Geometry::TwoContact, 4)).unwrap();
        let c: Vec<(usize, usize)> = g.bonds_tagged(BondTag::Coupling).map(|b| (b.a, b.b)).collect();
        assert_eq!(c, vec![(0, 4), (3, 7)]);
    }

    #[test]
    fn lattice_contact_pairs_edges() {
        let g = build_geometry(&ModelSpec::new(Geometry::Lattice2d, 2)).unwrap();
        assert_eq!(g.n_sites, 4 + 9);
        assert_eq!(g.count(BondTag::Left), 4);
        assert_eq!(g.count(BondTag::Right), 12);
        let c: Vec<(usize, usize)> = g.bonds_tagged(BondTag::Coupling).map(|b| (b.a, b.b)).collect();
        // left (0,1),(1,1) -> right (0,0),(1,0)
        assert_eq!(c, vec![(1, 4), (3, 7)]);
    }

    #[test]
    fn rejects_tiny_lattice_and_unknown_tags() {
        assert!(build_geometry(&ModelSpec::new(Geometry::Lattice2d, 1)).is_err());
        assert!("mobius".parse::<Geometry>().is_err());
        assert_eq!("two_contact".parse::<Geometry>().unwrap(), Geometry::TwoContact);
    }

    #[test]
    fn clean_disorder_is_zero() {
        let d = sample_disorder(&ModelSpec::new(Geometry::Ladder, 3));
        assert!(d.fields.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn disorder_stays_in_support_and_is_reproducible() {
        let spec = ModelSpec::new(Geometry::Ladder, 4).with_disorder(1.0, 99);
        let a = sample_disorder(&spec);
        assert!(a.fields.iter().all(|h| (-0.5..=0.5).contains(h)));
        assert_eq!(a, sample_disorder(&spec));
        let b = sample_disorder(&spec.clone().with_disorder(1.0, 100));
        assert_ne!(a, b);
    }

    #[test]
    fn disorder_mean_matches_uniform_moments() {
        // 10^4 samples across seeds; sd of the mean is W / sqrt(12 * 10^4).
        let mut all = Vec::new();
        for seed in 0..(10_000 / 24 + 1) {
            let spec = ModelSpec::new(Geometry::Ladder, 8).with_disorder(1.0, seed as u64);
            all.extend(sample_disorder(&spec).fields);
        }
        all.truncate(10_000);
        let m = crate::stats::mean(&all);
        assert!(m.abs() < 3.0 / (12.0f64 * 1e4).sqrt(), "mean {m}");
    }
}
