use kirchhoff_core::field::{dirichlet_form, energy, gn_ratio, l2_gradient, normalize};
use kirchhoff_core::io::fmt_f64;
use kirchhoff_core::limit_oracle::{e_bar_closed, h_quadratic, r_b};
use kirchhoff_core::minimizer::minimize;
use kirchhoff_core::potential::{analyze_wells, h_function};
use kirchhoff_core::{
    Field2D, GridSpec, GroundState, Init, LocalModel, MinimizeConfig, PotentialSpec, Problem,
    Stencil, WellSpec,
};
use proptest::prelude::*;

type Bump = ([f64; 2], f64, f64);

fn bumps() -> impl Strategy<Value = Vec<Bump>> {
    prop::collection::vec(
        ((-2.0..2.0f64, -2.0..2.0f64), 0.3..1.5f64, 0.1..1.0f64)
            .prop_map(|((x, y), s, w)| ([x, y], s, w)),
        1..5,
    )
}

fn smooth_field(grid: &GridSpec, bumps: &[Bump]) -> Field2D {
    let raw = Field2D::from_fn(grid.clone(), |x, y| {
        bumps
            .iter()
            .map(|(c, s, w)| w * (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    });
    normalize(&raw).unwrap()
}

fn grid() -> GridSpec {
    GridSpec::new(7.0, 72).unwrap()
}

fn sampled(spec: &PotentialSpec, g: &GridSpec) -> kirchhoff_core::SampledPotential {
    spec.sample(g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gn_bound_on_random_fields(bs in bumps(), five in any::<bool>()) {
        let g = if five { grid().with_stencil(Stencil::FivePoint) } else { grid() };
        let u = smooth_field(&g, &bs);
        prop_assert!(gn_ratio(&u, GroundState::reference().a_star()).unwrap() <= 1.005);
    }

    #[test]
    fn formatted_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn integration_by_parts(bs in bumps(), five in any::<bool>()) {
        let g = if five { grid().with_stencil(Stencil::FivePoint) } else { grid() };
        let u = smooth_field(&g, &bs);
        let mut lap = vec![0.0; g.len()];
        kirchhoff_core::field::apply_neg_laplacian(&g, u.values(), &mut lap);
        let h2 = g.spacing() * g.spacing();
        let pairing: f64 = u.values().iter().zip(&lap).map(|(a, b)| a * b).sum::<f64>() * h2;
        let theta = dirichlet_form(&g, u.values());
        prop_assert!(((pairing - theta) / theta).abs() <= 1e-10);
    }

    #[test]
    fn gradient_matches_directional_derivative(
        bs in bumps(),
        vs in bumps(),
        a in 1.0..20.0f64,
        b in prop_oneof![Just(0.0), 1e-3..1.0f64],
        with_v in any::<bool>(),
    ) {
        let g = grid();
        let u = smooth_field(&g, &bs);
        let v = smooth_field(&g, &vs);
        let pot = with_v.then(|| sampled(&PotentialSpec::harmonic(), &g));
        let grad = l2_gradient(&u, a, b, pot.as_ref());
        let e = |t: f64| {
            let w = Field2D::from_values(g.clone(), u.values().iter().zip(v.values()).map(|(x, y)| x + t * y).collect()).unwrap();
            energy(&w, a, b, pot.as_ref()).total
        };
        let t = 1e-4;
        let fd = (-e(2.0 * t) + 8.0 * e(t) - 8.0 * e(-t) + e(-2.0 * t)) / (12.0 * t);
        let exact = grad.dot(&v);
        prop_assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1e-8), "fd {fd}, exact {exact}");
    }

    #[test]
    fn small_gradient_step_descends(bs in bumps(), a in 1.0..20.0f64, b in 0.0..1.0f64) {
        let g = grid();
        let u = smooth_field(&g, &bs);
        let pot = sampled(&PotentialSpec::harmonic(), &g);
        let grad = l2_gradient(&u, a, b, Some(&pot));
        let gn = grad.norm();
        prop_assume!(gn > 1e-8);
        let tau = 1e-4 / gn.max(1.0);
        let stepped = Field2D::from_values(g.clone(), u.values().iter().zip(grad.values()).map(|(x, d)| x - tau * d).collect()).unwrap();
        prop_assert!(energy(&stepped, a, b, Some(&pot)).total < energy(&u, a, b, Some(&pot)).total);
    }

    #[test]
    fn local_models_are_homogeneous(
        t in 0.05..20.0f64,
        x in -3.0..3.0f64,
        y in -3.0..3.0f64,
        p in 0.5..6.0f64,
        c1 in 0.2..5.0f64,
        c2 in 0.2..5.0f64,
        kappa in 0.0..0.9f64,
        k in 1u32..6,
    ) {
        let models = [
            (LocalModel::Isotropic { c: c1 }, p),
            (LocalModel::Anisotropic { c1, c2 }, 2.0),
            (LocalModel::Dihedral { c: c1, kappa, k }, p),
        ];
        for (m, p) in models {
            let lhs = m.eval(p, [t * x, t * y]);
            let rhs = t.powf(p) * m.eval(p, [x, y]);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }
    }

    #[test]
    fn quadratic_reduction_is_minimal_at_r_b(a_mult in 1.01..4.0f64, b in 1e-3..1.0f64) {
        let a_star = GroundState::reference().a_star();
        let a = a_mult * a_star;
        let rb = r_b(a, b, a_star).unwrap();
        let best = h_quadratic(rb, a, b, a_star);
        prop_assert!((best - e_bar_closed(a, b, a_star).unwrap()).abs() <= 1e-12 * best.abs());
        prop_assert!(h_quadratic(0.5 * rb, a, b, a_star) > best);
        prop_assert!(h_quadratic(2.0 * rb, a, b, a_star) > best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn h_is_coercive(c1 in 0.5..3.0f64, c2 in 0.5..3.0f64, dir in 0.0..std::f64::consts::TAU) {
        let profile = &GroundState::reference().profile;
        let well = WellSpec::new([0.0, 0.0], 2.0, LocalModel::Anisotropic { c1, c2 });
        let e = [dir.cos(), dir.sin()];
        let h0 = h_function(&well, profile, [0.0, 0.0]).unwrap();
        let h10 = h_function(&well, profile, [10.0 * e[0], 10.0 * e[1]]).unwrap();
        let h100 = h_function(&well, profile, [100.0 * e[0], 100.0 * e[1]]).unwrap();
        prop_assert!(h0 < h10 && h10 < h100);
    }

    #[test]
    fn scaling_one_well_keeps_its_minimizer(c in 0.2..5.0f64, c2 in 1.5..4.0f64) {
        let profile = &GroundState::reference().profile;
        let wells = |scale: f64| {
            PotentialSpec::product(vec![
                WellSpec::new([-1.5, 0.0], 2.0, LocalModel::Anisotropic { c1: scale, c2: scale * c2 }),
                WellSpec::isotropic([1.5, 0.0], 2.0),
            ])
        };
        let base = analyze_wells(&wells(1.0), profile).unwrap();
        let scaled = analyze_wells(&wells(c), profile).unwrap();
        let (w0, w1) = (&base.wells[0], &scaled.wells[0]);
        prop_assert!((w1.lambda / w0.lambda - c).abs() <= 1e-6 * c);
        prop_assert!((w1.y_star[0] - w0.y_star[0]).hypot(w1.y_star[1] - w0.y_star[1]) <= 1e-5);
        prop_assert_eq!(&base.z_bar, &scaled.z_bar);
    }

    #[test]
    fn flow_runs_conserve_mass_descend_and_stay_nonnegative(seed in any::<u64>(), b in 0.05..1.0f64, a_mult in 0.5..2.0f64) {
        let gs = GroundState::reference();
        let mut config = MinimizeConfig::new(GridSpec::new(5.0, 64).unwrap());
        config.init = Init::Random { seed };
        config.max_iter = 400;
        let problem = Problem::new(a_mult * gs.a_star(), b, Some(PotentialSpec::harmonic()));
        let r = minimize(&problem, &config).unwrap();
        prop_assert!((r.field.mass() - 1.0).abs() <= 1e-10);
        prop_assert!(r.min_value >= -1e-12);
        prop_assert!(r.log.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-14 * w[0].energy.abs()));
    }
}
