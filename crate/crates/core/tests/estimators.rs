mod common;

use common::{ladder6, models};
use ethdyn::engine::{spectral_bounds, EngineConfig};
use ethdyn::estimator::{
    estimate_abar, estimate_deff, estimate_eth, estimate_sigma2, estimate_slope, EstimatorConfig,
    TypicalityContext,
};
use ethdyn::funcfilter::EnergyWindow;
use ethdyn::model::{Geometry, Identity, ModelSpec, Zero};
use ethdyn::moddyn::{epsilon_bound, relaxation_trace, ModPreparer, ModSpec};
use ethdyn::oracle::{apply_dense, dense_mod_root, exact_diagonalize, exact_eth_params, exact_windowed_sigma2};
use ethdyn::stats::Estimate;

fn within(est: Estimate, exact: f64, what: &str) {
    assert!(
        (est.value - exact).abs() <= 3.0 * est.stderr + 1e-12,
        "{what}: {} ± {} vs exact {exact}",
        est.value,
        est.stderr
    );
}

#[test]
fn full_report_matches_oracle_on_six_spins() {
    let spec = ladder6().with_disorder(0.6, 2);
    let (ops, dense) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ed = exact_diagonalize(&dense.h).unwrap();
    let window = EnergyWindow::new(0.0, 0.6);
    let exact = exact_eth_params(&ed, &dense.d, window);
    let cfg = EstimatorConfig { n_samples: 20, ..Default::default() };
    let r = estimate_eth(&ctx, window, &cfg).unwrap();
    within(r.d_eff, exact.report.d_eff.value, "d_eff");
    within(r.a_bar, exact.report.a_bar.value, "a_bar");
    within(r.delta2, exact.report.delta2.value, "delta2");
    within(r.sigma2, exact.sigma2_block, "sigma2");
    within(r.slope, exact.report.slope.value, "slope");
    assert_eq!(r.v.value, r.sigma_prime.value.powi(2) / r.delta2.value);
}

#[test]
fn short_windows_converge_to_the_windowed_oracle() {
    let spec = ladder6().with_disorder(0.6, 2);
    let (ops, dense) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ed = exact_diagonalize(&dense.h).unwrap();
    let window = EnergyWindow::new(0.0, 0.6);
    let cfg = EstimatorConfig { n_samples: 20, t_min: 1.0, t_max: 6.0, t_spacing: 0.5, ..Default::default() };
    let tw = cfg.time_window();
    let est = estimate_sigma2(&ctx, window, tw, 20).unwrap();
    let windowed = exact_windowed_sigma2(&ed, &dense.d, window, &tw.sample_times());
    let block = exact_eth_params(&ed, &dense.d, window).sigma2_block;
    within(est, windowed, "windowed sigma2");
    assert!((windowed - block).abs() > 5.0 * est.stderr, "window too long to tell the two apart");
}

#[test]
fn single_spin_effective_dimension() {
    // a lone spin in a field
    let graph = ethdyn::model::BondGraph { n_sites: 1, n_left_sites: 1, bonds: vec![] };
    let h = 0.9;
    let fields = ethdyn::model::DisorderRealization { fields: vec![h] };
    let ops = ethdyn::model::assemble_operators(&graph, &fields).unwrap();
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-12);
    let sigma: f64 = 0.6;
    let est = estimate_deff(&ctx, EnergyWindow::new(0.0, sigma), 400).unwrap();
    within(est, 2.0 * (-h * h / (8.0 * sigma * sigma)).exp(), "two-level d_eff");
}

#[test]
fn identity_observable_and_decoupled_model() {
    let (ops, _) = models(&ladder6());
    let engine = EngineConfig::default();
    let id = Identity(64);
    let ctx = TypicalityContext::new(&ops.h, &id, &engine, 1e-10);
    let tw = EstimatorConfig::default().time_window();
    let s2 = estimate_sigma2(&ctx, EnergyWindow::default(), tw, 4).unwrap();
    assert!(s2.value.abs() < 1e-9, "{s2:?}");

    // [H, D] = 0: the time average keeps the full variance
    let spec = ModelSpec::new(Geometry::Ladder, 2).with_couplings(0.3, 0.0).with_disorder(0.5, 1);
    let (ops, _) = models(&spec);
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let cfg = EstimatorConfig { n_samples: 5, t_min: 5.0, t_max: 20.0, ..Default::default() };
    let r = estimate_eth(&ctx, EnergyWindow::default(), &cfg).unwrap();
    assert!((r.sigma2.value - r.delta2.value).abs() < 1e-9 * r.delta2.value.max(1.0));
}

#[test]
fn separate_estimators_agree_with_oracle() {
    let spec = ModelSpec::new(Geometry::TwoContact, 2).with_couplings(0.3, 0.3).with_disorder(0.4, 6);
    let (ops, dense) = models(&spec);
    let engine = EngineConfig { master_seed: 77, ..Default::default() };
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ed = exact_diagonalize(&dense.h).unwrap();
    let w = EnergyWindow::new(-0.5, 0.6);
    let exact = exact_eth_params(&ed, &dense.d, w);
    within(estimate_deff(&ctx, w, 30).unwrap(), exact.report.d_eff.value, "d_eff");
    within(estimate_abar(&ctx, w, 30).unwrap(), exact.report.a_bar.value, "a_bar");
    within(estimate_slope(&ctx, w, 0.3, 30).unwrap(), exact.report.slope.value, "slope");
}

#[test]
fn window_below_the_ground_state_picks_the_ground_state() {
    let spec = ladder6().with_disorder(0.6, 2);
    let (ops, dense) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ed = exact_diagonalize(&dense.h).unwrap();
    let gs_d = ed.diagonal_elements(&dense.d)[0];
    let w = EnergyWindow::new(ed.energies[0] - 0.5, 0.1);
    let a = estimate_abar(&ctx, w, 4).unwrap();
    assert!((a.value - gs_d).abs() < 1e-3, "{} vs {gs_d}", a.value);
}

#[test]
fn mirror_model_has_vanishing_mean_and_slope() {
    let spec = ModelSpec::new(Geometry::Ladder, 3).with_n_right(3).with_couplings(0.3, 0.3);
    let (ops, _) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let w = EnergyWindow::new(0.0, 0.6);
    let a = estimate_abar(&ctx, w, 20).unwrap();
    let s = estimate_slope(&ctx, w, 0.3, 20).unwrap();
    assert!(a.value.abs() <= 3.0 * a.stderr);
    assert!(s.value.abs() <= 3.0 * s.stderr);
}

#[test]
fn reports_are_reproducible() {
    let (ops, _) = models(&ladder6());
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let cfg = EstimatorConfig { n_samples: 3, t_min: 1.0, t_max: 10.0, ..Default::default() };
    let a = estimate_eth(&ctx, EnergyWindow::default(), &cfg).unwrap();
    let b = estimate_eth(&ctx, EnergyWindow::default(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mod_state_matches_dense_root() {
    let spec = ModelSpec::new(Geometry::SingleContact, 2).with_couplings(0.6, 1.0);
    let (ops, dense) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ms = ModSpec { sigma: 0.6, beta: 0.5, d0: 2.0, e_center: 0.0 };
    let prep = ModPreparer::new(ctx, spectral_bounds(&ops.d), ms).unwrap();
    let state = prep.prepare(3).unwrap();
    let (root, _) = dense_mod_root(&dense.h, &dense.d, 0.6, 0.5, 2.0, 0.0);
    let mut expected = apply_dense(&root, &ethdyn::engine::haar_sample(64, &ethdyn::rng::SeedStreams::new(engine.master_seed), 3));
    expected.normalize();
    assert!(common::max_diff(&state.state, &expected) < 1e-8);

    // without displacement weight the state sits at the equilibrium value
    let ms0 = ModSpec { beta: 0.0, ..ms };
    let prep0 = ModPreparer::new(ctx, spectral_bounds(&ops.d), ms0).unwrap();
    let s0 = prep0.prepare(3).unwrap();
    let phi = ethdyn::funcfilter::ShellFilter::new(ctx.h_bounds, EnergyWindow::default(), 1e-10)
        .unwrap()
        .apply(&ops.h, &ethdyn::engine::haar_sample(64, &ethdyn::rng::SeedStreams::new(engine.master_seed), 3))
        .unwrap();
    let a = ethdyn::engine::expectation(&phi, &ops.d).unwrap() / phi.norm_sqr();
    assert!((s0.d0_measured - a).abs() < 1e-9);
}

#[test]
fn epsilon_bound_matches_dense_evaluation() {
    let spec = ModelSpec::new(Geometry::SingleContact, 2).with_couplings(0.6, 1.0);
    let (ops, dense) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ms = ModSpec { sigma: 0.6, beta: 0.5, d0: 2.0, e_center: 0.0 };
    let prep = ModPreparer::new(ctx, spectral_bounds(&ops.d), ms).unwrap();
    let est = epsilon_bound(&prep, 40).unwrap();
    let (_, rho) = dense_mod_root(&dense.h, &dense.d, 0.6, 0.5, 2.0, 0.0);
    let d2 = &dense.d * &dense.d;
    let ed = exact_diagonalize(&dense.h).unwrap();
    let d_eff: f64 = ed.energies.iter().map(|e| (-e * e / 0.72).exp()).sum();
    let exact = ((rho * &d2 * &d2).trace() / d_eff).sqrt();
    within(est, exact, "epsilon");

    let zero = Zero(64);
    let ctx0 = TypicalityContext::new(&ops.h, &zero, &engine, 1e-10);
    let prep0 = ModPreparer::new(ctx0, spectral_bounds(&ops.d), ms).unwrap();
    assert_eq!(epsilon_bound(&prep0, 3).unwrap().value, 0.0);
}

#[test]
fn decoupled_relaxation_trace_is_flat() {
    let spec = ModelSpec::new(Geometry::Ladder, 2).with_couplings(0.3, 0.0);
    let (ops, _) = models(&spec);
    let engine = EngineConfig::default();
    let ctx = TypicalityContext::new(&ops.h, &ops.d, &engine, 1e-10);
    let ms = ModSpec { sigma: 0.6, beta: 0.5, d0: 2.0, e_center: 0.0 };
    let prep = ModPreparer::new(ctx, spectral_bounds(&ops.d), ms).unwrap();
    let st = prep.prepare(0).unwrap();
    let tr = relaxation_trace(&prep, &st, &ethdyn::engine::uniform_grid(20.0, 21), 0.25).unwrap();
    assert_eq!(tr.r_t[0], 1.0);
    assert!(tr.r_t.iter().all(|r| (r - 1.0).abs() < 1e-10));
    assert_eq!(tr.tail_window, [15.0, 20.0]);
}
