use approx::relative_eq;
use proptest::prelude::*;

use collapse_core::catdemo::{com_expectation, measure_branch};
use collapse_core::gridio::{read_grid, write_grid, UnitTag};
use collapse_core::rates::{com_rate_small_displacement, equilibrium_width, spreading_rate};
use collapse_core::{
    catness_csl, catness_g, coarse_grain, interaction_energy, CSLParams, CatState, Grid,
    MassDensity, PhysicalConstants, RateConvention, Resolution, Vec3,
};

fn c() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

/// Balls and blobs with unit-scale parameters.
fn density() -> impl Strategy<Value = MassDensity> {
    prop_oneof![
        (0.1..5.0f64, 0.1..2.0f64, vec3())
            .prop_map(|(m, r, p)| MassDensity::uniform_ball(m, r, p).unwrap()),
        (0.1..5.0f64, 0.05..2.0f64, vec3())
            .prop_map(|(m, w, p)| MassDensity::gaussian_blob(m, w, p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_symmetric_and_negative(f in density(), g in density()) {
        let a = interaction_energy(&f, &g, &c()).unwrap();
        let b = interaction_energy(&g, &f, &c()).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert!(a.value < 0.0);
    }

    #[test]
    fn catness_is_a_nonnegative_symmetric_distance(f in density(), d in vec3(), sigma in 0.05..1.0f64) {
        let res = Resolution::gaussian(sigma).unwrap();
        let g = f.translated(d);
        let fg = catness_g(&f, &g, &res, &c()).unwrap().value;
        let gf = catness_g(&g, &f, &res, &c()).unwrap().value;
        prop_assert!(fg >= 0.0);
        prop_assert!(relative_eq!(fg, gf, max_relative = 1e-9, epsilon = 1e-30));
        prop_assert_eq!(catness_g(&f, &f, &res, &c()).unwrap().value, 0.0);
    }

    #[test]
    fn catness_is_translation_invariant(f in density(), d in vec3(), t in vec3()) {
        let res = Resolution::gaussian(0.2).unwrap();
        let a = catness_g(&f, &f.translated(d), &res, &c()).unwrap().value;
        let b = catness_g(&f.translated(t), &f.translated(d + t), &res, &c()).unwrap().value;
        prop_assert!(relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-25));
    }

    #[test]
    fn catness_scales_with_mass_squared(f in density(), d in vec3(), k in 0.1..10.0f64) {
        let res = Resolution::gaussian(0.3).unwrap();
        let a = catness_g(&f, &f.translated(d), &res, &c()).unwrap().value;
        let b = catness_g(&f.mass_scaled(k), &f.mass_scaled(k).translated(d), &res, &c()).unwrap().value;
        prop_assert!(relative_eq!(b, k * k * a, max_relative = 1e-9, epsilon = 1e-25));
        let p = CSLParams { sigma: 0.3, ..CSLParams::default() };
        let x = catness_csl(&f, &f.translated(d), &p, &c()).unwrap().value;
        let y = catness_csl(&f.mass_scaled(k), &f.mass_scaled(k).translated(d), &p, &c()).unwrap().value;
        prop_assert!(relative_eq!(y, k * k * x, max_relative = 1e-9, epsilon = 1e-60));
    }

    #[test]
    fn gaussian_coarse_graining_keeps_mass_and_adds_variances(m in 0.1..5.0f64, w in 0.0..2.0f64, s in 0.01..2.0f64) {
        let f = MassDensity::gaussian_blob(m, w, Vec3::ZERO).unwrap();
        let g = coarse_grain(&f, &Resolution::gaussian(s).unwrap()).unwrap();
        match g {
            MassDensity::GaussianBlob { mass, width, .. } => {
                prop_assert_eq!(mass, m);
                prop_assert!(relative_eq!(width * width, w * w + s * s, max_relative = 1e-14));
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn small_displacement_rate_is_quadratic(m in 1e-6..10.0f64, w in 1e-5..1e3f64, dx in 1e-18..1e-12f64) {
        let r1 = com_rate_small_displacement(m, w, dx, RateConvention::ONE, &c()).unwrap().rate;
        let r2 = com_rate_small_displacement(m, w, 2.0 * dx, RateConvention::ONE, &c()).unwrap().rate;
        prop_assert!(relative_eq!(r2, 4.0 * r1, max_relative = 1e-14));
        let h = com_rate_small_displacement(m, w, dx, RateConvention::HALF, &c()).unwrap().rate;
        prop_assert!(relative_eq!(h, 0.5 * r1, max_relative = 1e-15));
    }

    #[test]
    fn equilibrium_balances_spreading_and_collapse(m in 1e-9..1e3f64, w in 1e-6..1e4f64) {
        let x = equilibrium_width(m, w, &c()).unwrap().value;
        let collapse = com_rate_small_displacement(m, w, x, RateConvention::ONE, &c()).unwrap().rate;
        prop_assert!(relative_eq!(collapse, w, max_relative = 1e-12));
        prop_assert!(relative_eq!(spreading_rate(m, x, &c()), w, max_relative = 1e-12));
    }

    #[test]
    fn measurement_keeps_normalization(ws in prop::collection::vec(0.01..1.0f64, 2..6), seed in any::<u64>()) {
        let pos: Vec<Vec3> = (0..ws.len()).map(|i| Vec3::x(i as f64)).collect();
        let s = CatState::from_weights(&ws, &pos, 1.0).unwrap();
        let total: f64 = s.weights().iter().sum();
        prop_assert!(relative_eq!(total, 1.0, max_relative = 1e-14));
        let m = measure_branch(&s, seed).unwrap();
        prop_assert!(relative_eq!(m.state.weights()[0], 1.0, max_relative = 1e-15));
        let back = com_expectation(&s) + m.com_shift;
        prop_assert!((back - pos[m.branch]).norm() < 1e-12);
    }

    #[test]
    fn grid_files_roundtrip(dims in (1usize..5, 1usize..5, 1usize..5), edge in 1e-6..1.0f64, seed in any::<u32>()) {
        let n = dims.0 * dims.1 * dims.2;
        let values: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed as u64) % 1000) as f64).collect();
        let g = Grid::new(Vec3::new(-0.5, 0.25, 1.0), edge, [dims.0, dims.1, dims.2], values).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, UnitTag::SI, &mut buf).unwrap();
        prop_assert_eq!(read_grid(buf.as_slice()).unwrap(), g);
    }
}
