#![allow(dead_code)]

use ethdyn::engine::{random_haar_state, PureState};
use ethdyn::model::{build_geometry, build_model, sample_disorder, Geometry, ModelOperators, ModelSpec};
use ethdyn::oracle::{dense_model, DenseModel};

pub fn ladder6() -> ModelSpec {
    ModelSpec::new(Geometry::Ladder, 2).with_couplings(0.3, 0.3)
}

pub fn models(spec: &ModelSpec) -> (ModelOperators, DenseModel) {
    let (graph, fields, ops) = build_model(spec).unwrap();
    (ops, dense_model(&graph, &fields))
}

pub fn dense_only(spec: &ModelSpec) -> DenseModel {
    dense_model(&build_geometry(spec).unwrap(), &sample_disorder(spec))
}

pub fn max_diff(a: &PureState, b: &PureState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn haar(dim: usize, seed: u64) -> PureState {
    random_haar_state(dim, seed)
}
