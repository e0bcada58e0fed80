use std::f64::consts::PI;

use proptest::prelude::*;

use ringvortex::bodies::{Body, BodyConfiguration};
use ringvortex::coefficients::{assemble, AssemblyOptions};
use ringvortex::config::RunConfig;
use ringvortex::dynamics::{integrate_pv, IntegratorControls, Trajectory};
use ringvortex::kernels::{
    laplace_ring_kernel, laplace_ring_kernel_grad_y, stream_kernel, stream_kernel_grad_y, HalfPlanePoint,
};
use ringvortex::pointvortex::{pv_invariants, PvSystem};
use ringvortex::regime::{RegimeKind, RegimeSpec};
use ringvortex::special::{elliptic_e, elliptic_k};
use ringvortex::Error;

fn pt(r: f64, z: f64) -> HalfPlanePoint {
    HalfPlanePoint { r, z }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn two_rings(rho: f64, dr: f64, dz: f64, g2: f64) -> BodyConfiguration {
    let v = |r: f64| PI * r * rho * rho;
    BodyConfiguration::new(vec![Body::new(v(1.0), 1.0, 1.0, 0.0), Body::new(v(1.0 + dr), g2, 1.0 + dr, dz)]).unwrap()
}

fn opts() -> AssemblyOptions {
    AssemblyOptions { derivatives: false, ..Default::default() }
}

fn system() -> impl Strategy<Value = PvSystem> {
    prop_oneof![Just(PvSystem::J1), Just(PvSystem::J2)]
}

/// Well-separated point-vortex pair with same-sign circulations.
fn pv_pair() -> impl Strategy<Value = ([f64; 2], [f64; 4])> {
    (0.5..2.0f64, 0.5..2.0f64, 0.2..0.6f64, 0.0..(2.0 * PI)).prop_map(|(g1, g2, d, a)| {
        let (s, c) = a.sin_cos();
        ([g1, g2], [0.5 * d * c, 0.5 * d * s, -0.5 * d * c, -0.5 * d * s])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elliptic_monotone(a in 0.0..0.999f64, b in 0.0..0.999f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(elliptic_k(lo).unwrap() < elliptic_k(hi).unwrap());
        prop_assert!(elliptic_e(lo).unwrap() > elliptic_e(hi).unwrap());
    }

    #[test]
    fn stream_kernel_symmetric(r1 in 0.1..3.0f64, z1 in -2.0..2.0f64, r2 in 0.1..3.0f64, z2 in -2.0..2.0f64) {
        prop_assume!((r1 - r2).hypot(z1 - z2) > 1e-6);
        prop_assert_eq!(stream_kernel(pt(r1, z1), pt(r2, z2)).unwrap(), stream_kernel(pt(r2, z2), pt(r1, z1)).unwrap());
    }

    #[test]
    fn kernels_z_translation(r1 in 0.1..3.0f64, z1 in -2.0..2.0f64, r2 in 0.1..3.0f64, dz in 0.01..2.0f64, c in -5.0..5.0f64) {
        let (x, y) = (pt(r1, z1), pt(r2, z1 + dz));
        let (xs, ys) = (pt(r1, z1 + c), pt(r2, z1 + dz + c));
        prop_assert!(rel(stream_kernel(xs, ys).unwrap(), stream_kernel(x, y).unwrap()) < 1e-12);
        prop_assert!(rel(laplace_ring_kernel(xs, ys).unwrap(), laplace_ring_kernel(x, y).unwrap()) < 1e-12);
    }

    #[test]
    fn gradients_match_differences(r1 in 0.3..2.0f64, r2 in 0.3..2.0f64, dz in 0.3..1.5f64) {
        let (x, y) = (pt(r1, 0.0), pt(r2, dz));
        let h = 1e-5;
        type Kernel = fn(HalfPlanePoint, HalfPlanePoint) -> ringvortex::Result<f64>;
        type Grad = fn(HalfPlanePoint, HalfPlanePoint) -> ringvortex::Result<[f64; 2]>;
        let pairs: [(Kernel, Grad); 2] = [
            (stream_kernel, stream_kernel_grad_y),
            (laplace_ring_kernel, laplace_ring_kernel_grad_y),
        ];
        for (k, g) in pairs {
            let fd = [
                (k(x, pt(r2 + h, dz)).unwrap() - k(x, pt(r2 - h, dz)).unwrap()) / (2.0 * h),
                (k(x, pt(r2, dz + h)).unwrap() - k(x, pt(r2, dz - h)).unwrap()) / (2.0 * h),
            ];
            let an = g(x, y).unwrap();
            let scale = an[0].hypot(an[1]);
            prop_assert!((an[0] - fd[0]).hypot(an[1] - fd[1]) <= 1e-6 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coefficient_structure(rho in 0.005..0.03f64, dr in -0.2..0.2f64, dz in 0.15..0.6f64, g2 in prop_oneof![-2.0..-0.3f64, 0.3..2.0f64]) {
        let c = assemble(&two_rings(rho, dr, dz, g2), opts()).unwrap();
        let a = &c.a;
        prop_assert!((a + a.transpose()).norm() <= 1e-8 * a.norm());
        prop_assert!((&c.c - c.c.transpose()).norm() <= 1e-8 * c.c.norm());
        prop_assert!((&c.m - c.m.transpose()).norm() <= 1e-12 * c.m.norm());
        let (lo, _) = c.inertia_spectrum();
        prop_assert!(lo > 0.0);
    }

    #[test]
    fn force_quadratic_in_gamma(rho in 0.005..0.03f64, dz in 0.15..0.6f64, g2 in 0.3..2.0f64) {
        let cfg = two_rings(rho, 0.05, dz, g2);
        let mut doubled = cfg.clone();
        for b in &mut doubled.bodies {
            b.gamma *= 2.0;
        }
        let (g1, g4) = (assemble(&cfg, opts()).unwrap().g, assemble(&doubled, opts()).unwrap().g);
        prop_assert!((g4 - 4.0 * &g1).norm() <= 1e-10 * g1.norm());
    }

    #[test]
    fn coefficients_z_invariant(rho in 0.005..0.03f64, dz in 0.15..0.6f64, shift in -3.0..3.0f64) {
        let cfg = two_rings(rho, 0.1, dz, -0.7);
        let (a, b) = (assemble(&cfg, opts()).unwrap(), assemble(&cfg.translated_z(shift), opts()).unwrap());
        prop_assert!((&a.m - &b.m).norm() <= 1e-10 * a.m.norm());
        prop_assert!((&a.a - &b.a).norm() <= 1e-10 * a.a.norm());
        prop_assert!((&a.g - &b.g).norm() <= 1e-10 * a.g.norm());
        prop_assert!((&a.c - &b.c).norm() <= 1e-10 * a.c.norm());
    }

    #[test]
    fn pv_invariants_conserved(sys in system(), (gamma, q0) in pv_pair()) {
        let t = integrate_pv(sys, &gamma, &q0, 1.0, 2.0, &IntegratorControls::point_vortex()).unwrap();
        prop_assert!(t.termination.completed());
        let (h0, p0) = pv_invariants(sys, &gamma, &q0, 1.0).unwrap();
        for q in &t.q {
            let (h, p) = pv_invariants(sys, &gamma, q, 1.0).unwrap();
            prop_assert!((h - h0).abs() <= 1e-8);
            prop_assert!((p - p0).abs() <= 1e-10);
        }
    }

    #[test]
    fn pv_time_reversal(sys in system(), (gamma, q0) in pv_pair()) {
        let c = IntegratorControls::point_vortex();
        let fwd = integrate_pv(sys, &gamma, &q0, 1.0, 1.0, &c).unwrap();
        let back_gamma = [-gamma[0], -gamma[1]];
        let back = integrate_pv(sys, &back_gamma, fwd.q.last().unwrap(), 1.0, 1.0, &c).unwrap();
        let end = back.q.last().unwrap();
        let err = end.iter().zip(&q0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "return error {err:e}");
    }

    #[test]
    fn pv_deterministic(sys in system(), (gamma, q0) in pv_pair()) {
        let c = IntegratorControls { outputs: 20, ..IntegratorControls::point_vortex() };
        prop_assert_eq!(
            integrate_pv(sys, &gamma, &q0, 1.0, 0.5, &c).unwrap(),
            integrate_pv(sys, &gamma, &q0, 1.0, 0.5, &c).unwrap()
        );
    }

    #[test]
    fn trajectory_csv_round_trip(sys in system(), (gamma, q0) in pv_pair()) {
        let c = IntegratorControls { outputs: 10, ..IntegratorControls::point_vortex() };
        let t = integrate_pv(sys, &gamma, &q0, 1.0, 0.3, &c).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.times, &t.times);
        prop_assert_eq!(&back.q, &t.q);
        prop_assert_eq!(&back.energy, &t.energy);
    }

    #[test]
    fn lift_project_round_trip(
        kind in prop_oneof![Just(RegimeKind::Log), Just(RegimeKind::SqrtLog)],
        eps in 1e-4..1e-2f64,
        q in proptest::array::uniform4(-0.5..0.5f64),
        v in proptest::array::uniform4(-1.0..1.0f64),
    ) {
        prop_assume!((q[0] - q[2]).hypot(q[1] - q[3]) > 0.1);
        let spec = RegimeSpec::new(kind, eps, 1.0, 0.0).unwrap();
        let (cfg, qd) = spec.lift(&[PI, PI], &[1.0, 1.0], &q, &v).unwrap();
        let (q2, v2) = spec.project(&cfg, &qd);
        for a in 0..4 {
            prop_assert!((q2[a] - q[a]).abs() <= 1e-12);
            prop_assert!((v2[a] - v[a]).abs() <= 1e-12 * v[a].abs().max(1.0));
        }
    }

    #[test]
    fn schema_rejects_condition_violations(which in 0usize..3, g in 0.1..3.0f64) {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::leapfrog().to_json()).unwrap();
        let expect = match which {
            0 => {
                v["bodies"][1]["gamma"] = 0.0.into();
                "bodies[1].gamma"
            }
            1 => {
                v["bodies"][1]["qtilde0"] = v["bodies"][0]["qtilde0"].clone();
                "bodies[1].qtilde0"
            }
            _ => {
                v["regime"] = "regime_sqrtlog".into();
                v["bodies"][0]["gamma"] = (1.0 + g).into();
                "bodies[0].gamma"
            }
        };
        match RunConfig::from_json(&v.to_string()) {
            Err(Error::Schema { path, .. }) => prop_assert_eq!(path, expect),
            other => prop_assert!(false, "expected schema error, got {other:?}"),
        }
    }
}
