use proptest::prelude::*;
use semiclassical::alsed::{evolve_leading, propagator_matrix, GreensKernel};
use semiclassical::atom_laser::{build_model, AtomLaserParams, Panel};
use semiclassical::direct_solver::{split_step_evolve, SplitStepConfig};
use semiclassical::grid_analysis::{initial_moments, Grid, WaveField};
use semiclassical::hesd::{integrate_hesd, HesdOptions};

fn kernel(p: &AtomLaserParams, phi: &WaveField, t: f64) -> GreensKernel {
    let model = build_model(p).unwrap();
    let init = initial_moments(phi).unwrap();
    let traj = integrate_hesd(
        &model,
        &init,
        t,
        &HesdOptions::new(p.lambda, p.kappa),
        1e-11,
    )
    .unwrap();
    let prop = propagator_matrix(&traj, 1e-11).unwrap();
    GreensKernel::new(traj, prop, p.hbar).unwrap()
}

#[test]
fn gaussian_and_quadrature_paths_agree() {
    let p = AtomLaserParams {
        x0: 0.5,
        ..AtomLaserParams::fig1(Panel::A).with_momentum(0.4)
    };
    let grid = Grid::centered(16.0, 1024).unwrap();
    let phi = WaveField::from_gaussian(grid, p.hbar, p.initial_tag());
    let k = kernel(&p, &phi, 1.0);
    let mut untagged = phi.clone();
    untagged.clear_gaussian();
    for t in [0.8, 1.0] {
        let exact = evolve_leading(&k, &phi, t).unwrap();
        let quad = evolve_leading(&k, &untagged, t).unwrap();
        assert!(quad.relative_l2_distance(&exact).unwrap() < 1e-8, "t = {t}");
    }
}

#[test]
fn leading_order_tracks_the_direct_solution() {
    let p = AtomLaserParams::fig1(Panel::A).with_hbar(0.05);
    let grid = Grid::centered(32.0, 2048).unwrap();
    let phi = WaveField::from_gaussian(grid, p.hbar, p.initial_tag());
    let leading = evolve_leading(&kernel(&p, &phi, 1.0), &phi, 1.0).unwrap();
    let cfg = SplitStepConfig::new(p, grid, 1e-3)
        .unwrap()
        .with_stride(usize::MAX);
    let direct = split_step_evolve(&cfg, &phi, 1.0).unwrap();
    let err = leading.relative_l2_distance(&direct.last().field).unwrap();
    assert!(err < 0.2, "{err}");
    assert!((leading.norm_sq() / direct.last().field.norm_sq() - 1.0).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_follows_the_logistic_law(
        lambda in 0.0f64..3.0,
        kappa in 0.0f64..0.5,
        eps in 0.1f64..1.0,
        n in 0.1f64..2.0,
    ) {
        let p = AtomLaserParams { lambda, kappa, eps, n_atoms: n, ..AtomLaserParams::fig1(Panel::A) };
        let grid = Grid::centered(32.0, 512).unwrap();
        let phi = WaveField::from_gaussian(grid, p.hbar, p.initial_tag());
        let model = build_model(&p).unwrap();
        let init = initial_moments(&phi).unwrap();
        let traj = integrate_hesd(&model, &init, 1.0, &HesdOptions::new(lambda, kappa), 1e-11).unwrap();
        let g = (2.0 * lambda * eps).exp();
        let expect = n * eps * g / (eps + n * kappa * (g - 1.0));
        let got = traj.state_at(1.0).unwrap().base.sigma;
        prop_assert!((got / expect - 1.0).abs() < 1e-8, "{got} vs {expect}");
    }
}
