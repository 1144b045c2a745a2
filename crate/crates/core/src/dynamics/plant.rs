use nalgebra::{Matrix2, Matrix4, Matrix4x2, Matrix6, Matrix6x3, Vector2};

use super::orbit::{mean_motion, ChaserConfig, OrbitConfig};
use crate::scalar::{lit, Real};

/// Full-state indices of the in-plane states `[x, y, vx, vy]`.
pub const IN_PLANE_INDICES: [usize; 4] = [0, 1, 3, 4];
/// Full-state indices of the out-of-plane states `[z, vz]`.
pub const OUT_OF_PLANE_INDICES: [usize; 2] = [2, 5];

/// Linearized relative-motion plant `ẋ = (A + ΔA(M)) x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel<T: Real> {
    pub n: T,
    pub e: T,
    pub m: T,
    pub a: Matrix6<T>,
    pub b: Matrix6x3<T>,
}

impl<T: Real> PlantModel<T> {
    /// Non-circularity matrix at mean anomaly `m`.
    pub fn delta_a(&self, mean_anomaly: T) -> Matrix6<T> {
        let (n, e) = (self.n, self.e);
        let (s, c) = mean_anomaly.sin_cos();
        let en2 = e * n * n;
        let en = e * n;
        let mut d = Matrix6::zeros();
        d[(3, 0)] = lit::<T>(10.0) * en2 * c;
        d[(3, 1)] = -lit::<T>(2.0) * en2 * s;
        d[(3, 4)] = lit::<T>(4.0) * en * c;
        d[(4, 0)] = lit::<T>(2.0) * en2 * s;
        d[(4, 1)] = en2 * c;
        d[(4, 3)] = -lit::<T>(4.0) * en * c;
        d[(5, 2)] = -lit::<T>(3.0) * en2 * c;
        d
    }

    pub fn system_matrix(&self, mean_anomaly: T) -> Matrix6<T> {
        self.a + self.delta_a(mean_anomaly)
    }

    /// Left factor of the 6-state factorization `ΔA = E1 Λ(M) E2`, with the
    /// in-plane factor occupying columns 0..4 and the out-of-plane factor 4..6.
    pub fn e1(&self) -> Matrix6<T> {
        let p = in_plane_e1(self.e);
        let q = out_of_plane_e1(self.e);
        let mut out = Matrix6::zeros();
        for (i, &ri) in IN_PLANE_INDICES.iter().enumerate() {
            for j in 0..4 {
                out[(ri, j)] = p[(i, j)];
            }
        }
        for (i, &ri) in OUT_OF_PLANE_INDICES.iter().enumerate() {
            for j in 0..2 {
                out[(ri, 4 + j)] = q[(i, j)];
            }
        }
        out
    }

    /// Right factor of the 6-state factorization.
    pub fn e2(&self) -> Matrix6<T> {
        let p = in_plane_e2(self.n);
        let q = out_of_plane_e2(self.n);
        let mut out = Matrix6::zeros();
        for i in 0..4 {
            for (j, &cj) in IN_PLANE_INDICES.iter().enumerate() {
                out[(i, cj)] = p[(i, j)];
            }
        }
        for i in 0..2 {
            for (j, &cj) in OUT_OF_PLANE_INDICES.iter().enumerate() {
                out[(4 + i, cj)] = q[(i, j)];
            }
        }
        out
    }

    /// Block-diagonal contraction `diag(Λ_p(M), Λ_q(M))`.
    pub fn lambda(&self, mean_anomaly: T) -> Matrix6<T> {
        let p = in_plane_lambda(mean_anomaly);
        let q = out_of_plane_lambda(mean_anomaly);
        let mut out = Matrix6::zeros();
        out.fixed_view_mut::<4, 4>(0, 0).copy_from(&p);
        out.fixed_view_mut::<2, 2>(4, 4).copy_from(&q);
        out
    }
}

/// In-plane subsystem over `p = [x, y, vx, vy]`, `u_p = [fx, fy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InPlaneModel<T: Real> {
    pub n: T,
    pub e: T,
    pub a_p: Matrix4<T>,
    pub b_p: Matrix4x2<T>,
    pub e_p1: Matrix4<T>,
    pub e_p2: Matrix4<T>,
}

impl<T: Real> InPlaneModel<T> {
    pub fn delta_a_p(&self, mean_anomaly: T) -> Matrix4<T> {
        let (s, c) = mean_anomaly.sin_cos();
        let (n, e) = (self.n, self.e);
        let en2 = e * n * n;
        let en = e * n;
        let mut d = Matrix4::zeros();
        d[(2, 0)] = lit::<T>(10.0) * en2 * c;
        d[(2, 1)] = -lit::<T>(2.0) * en2 * s;
        d[(2, 3)] = lit::<T>(4.0) * en * c;
        d[(3, 0)] = lit::<T>(2.0) * en2 * s;
        d[(3, 1)] = en2 * c;
        d[(3, 2)] = -lit::<T>(4.0) * en * c;
        d
    }

    pub fn lambda_p(&self, mean_anomaly: T) -> Matrix4<T> {
        in_plane_lambda(mean_anomaly)
    }
}

/// Out-of-plane subsystem over `q = [z, vz]`, `u_q = fz`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfPlaneModel<T: Real> {
    pub n: T,
    pub e: T,
    pub a_q: Matrix2<T>,
    pub b_q: Vector2<T>,
    pub e_q1: Matrix2<T>,
    pub e_q2: Matrix2<T>,
}

impl<T: Real> OutOfPlaneModel<T> {
    pub fn delta_a_q(&self, mean_anomaly: T) -> Matrix2<T> {
        let mut d = Matrix2::zeros();
        d[(1, 0)] = -lit::<T>(3.0) * self.e * self.n * self.n * mean_anomaly.cos();
        d
    }

    pub fn lambda_q(&self, mean_anomaly: T) -> Matrix2<T> {
        out_of_plane_lambda(mean_anomaly)
    }
}

fn in_plane_e1<T: Real>(e: T) -> Matrix4<T> {
    let z = T::zero();
    let (e2, e4) = (lit::<T>(2.0) * e, lit::<T>(4.0) * e);
    Matrix4::new(
        z, z, z, z, //
        z, z, z, z, //
        z, e2, e4, z, //
        e2, z, z, e4,
    )
}

fn in_plane_e2<T: Real>(n: T) -> Matrix4<T> {
    let z = T::zero();
    let n2 = n * n;
    Matrix4::new(
        n2, z, z, z, //
        z, n2, z, z, //
        lit::<T>(2.5) * n2, z, z, n, //
        z, lit::<T>(0.25) * n2, -n, z,
    )
}

fn in_plane_lambda<T: Real>(mean_anomaly: T) -> Matrix4<T> {
    let (s, c) = mean_anomaly.sin_cos();
    Matrix4::from_diagonal(&nalgebra::Vector4::new(s, -s, c, c))
}

fn out_of_plane_e1<T: Real>(e: T) -> Matrix2<T> {
    Matrix2::new(T::zero(), T::zero(), lit::<T>(6.0) * e, T::zero())
}

fn out_of_plane_e2<T: Real>(n: T) -> Matrix2<T> {
    Matrix2::new(n * n, T::zero(), T::zero(), T::zero())
}

fn out_of_plane_lambda<T: Real>(mean_anomaly: T) -> Matrix2<T> {
    Matrix2::new(-lit::<T>(0.5) * mean_anomaly.cos(), T::zero(), T::zero(), T::zero())
}

pub fn build_plant<T: Real>(cfg: &OrbitConfig<T>, chaser: &ChaserConfig<T>) -> PlantModel<T> {
    let n = mean_motion(cfg);
    let two = lit::<T>(2.0);
    let mut a = Matrix6::zeros();
    a[(0, 3)] = T::one();
    a[(1, 4)] = T::one();
    a[(2, 5)] = T::one();
    a[(3, 0)] = lit::<T>(3.0) * n * n;
    a[(3, 4)] = two * n;
    a[(4, 3)] = -two * n;
    a[(5, 2)] = -n * n;
    let inv_m = T::one() / chaser.m;
    let mut b = Matrix6x3::zeros();
    b[(3, 0)] = inv_m;
    b[(4, 1)] = inv_m;
    b[(5, 2)] = inv_m;
    PlantModel { n, e: cfg.e, m: chaser.m, a, b }
}

pub fn split_in_plane<T: Real>(plant: &PlantModel<T>) -> InPlaneModel<T> {
    let mut a_p = Matrix4::zeros();
    let mut b_p = Matrix4x2::zeros();
    for (i, &ri) in IN_PLANE_INDICES.iter().enumerate() {
        for (j, &cj) in IN_PLANE_INDICES.iter().enumerate() {
            a_p[(i, j)] = plant.a[(ri, cj)];
        }
        for j in 0..2 {
            b_p[(i, j)] = plant.b[(ri, j)];
        }
    }
    InPlaneModel {
        n: plant.n,
        e: plant.e,
        a_p,
        b_p,
        e_p1: in_plane_e1(plant.e),
        e_p2: in_plane_e2(plant.n),
    }
}

pub fn split_out_of_plane<T: Real>(plant: &PlantModel<T>) -> OutOfPlaneModel<T> {
    let mut a_q = Matrix2::zeros();
    let mut b_q = Vector2::zeros();
    for (i, &ri) in OUT_OF_PLANE_INDICES.iter().enumerate() {
        for (j, &cj) in OUT_OF_PLANE_INDICES.iter().enumerate() {
            a_q[(i, j)] = plant.a[(ri, cj)];
        }
        b_q[i] = plant.b[(ri, 2)];
    }
    OutOfPlaneModel {
        n: plant.n,
        e: plant.e,
        a_q,
        b_q,
        e_q1: out_of_plane_e1(plant.e),
        e_q2: out_of_plane_e2(plant.n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{nonlinear_system_matrix, truncated_orbital_terms};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn reference_case() -> (OrbitConfig<f64>, ChaserConfig<f64>) {
        (
            OrbitConfig::earth(7082.253e3, 0.05).unwrap(),
            ChaserConfig::new(500.0, 15.0, 15.0, 5.0).unwrap(),
        )
    }

    fn plant() -> PlantModel<f64> {
        let (o, c) = reference_case();
        build_plant(&o, &c)
    }

    #[test]
    fn closed_form_entries() {
        let p = plant();
        let n = p.n;
        assert!((p.a[(3, 0)] - 3.0 * n * n).abs() < 1e-20);
        assert!((p.a[(3, 0)] - 3.366e-6).abs() < 1e-9);
        assert_eq!(p.b[(3, 0)], 0.002);
        let d = p.delta_a(FRAC_PI_2);
        assert!(d[(3, 0)].abs() < 1e-20);
        assert!((d[(3, 1)] + 2.0 * 0.05 * n * n).abs() < 1e-22);
    }

    #[test]
    fn delta_rows_and_bound() {
        let p = plant();
        for i in 0..360 {
            let d = p.delta_a(i as f64 * TAU / 360.0);
            for r in 0..3 {
                assert!(d.row(r).iter().all(|&v| v == 0.0));
            }
            // velocity-coupling entries carry e·n, the rest e·n²
            for ((r, c), v) in d.iter().enumerate().map(|(k, v)| ((k % 6, k / 6), *v)) {
                let bound = if c >= 3 { 4.0 * p.e * p.n } else { 10.0 * p.e * p.n * p.n };
                assert!(v.abs() <= bound * (1.0 + 1e-12), "({r},{c}) = {v}");
            }
        }
    }

    #[test]
    fn truncated_matrix_matches_nominal_plus_delta() {
        let (o, _) = reference_case();
        let p = plant();
        for i in 0..100 {
            let m = i as f64 * 0.0731;
            let full = nonlinear_system_matrix(&truncated_orbital_terms(&o, m));
            let diff = (full - p.system_matrix(m)).abs().max();
            assert!(diff < 1e-18, "M={m}: {diff}");
        }
    }

    #[test]
    fn circular_limit_is_nominal() {
        let (mut o, c) = reference_case();
        o.e = 0.0;
        let p = build_plant(&o, &c);
        let an = nonlinear_system_matrix(&truncated_orbital_terms(&o, 0.3));
        assert!((an - p.a).abs().max() < 1e-20);
        assert_eq!(p.delta_a(1.1), Matrix6::zeros());
    }

    #[test]
    fn in_plane_split() {
        let p = plant();
        let ip = split_in_plane(&p);
        assert!((ip.a_p[(2, 3)] - 2.0 * p.n).abs() < 1e-18);
        assert_eq!(ip.e_p1.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.1, 0.2, 0.0]);
        assert_eq!(ip.e_p1.row(3).iter().copied().collect::<Vec<_>>(), vec![0.1, 0.0, 0.0, 0.2]);
    }

    #[test]
    fn in_plane_product_at_0_7() {
        // expanded by hand: row 3 = [10en²c, -2en²s, 0, 4enc], row 4 = [2en²s, en²c, -4enc, 0]
        let ip = split_in_plane(&plant());
        let (n, e) = (ip.n, ip.e);
        let (s, c) = 0.7f64.sin_cos();
        let mut oracle = Matrix4::zeros();
        oracle[(2, 0)] = 10.0 * e * n * n * c;
        oracle[(2, 1)] = -2.0 * e * n * n * s;
        oracle[(2, 3)] = 4.0 * e * n * c;
        oracle[(3, 0)] = 2.0 * e * n * n * s;
        oracle[(3, 1)] = e * n * n * c;
        oracle[(3, 2)] = -4.0 * e * n * c;
        let prod = ip.e_p1 * ip.lambda_p(0.7) * ip.e_p2;
        for (a, b) in prod.iter().zip(oracle.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(f64::MIN_POSITIVE), "{a} vs {b}");
        }
        assert_eq!(ip.delta_a_p(0.7), oracle);
    }

    #[test]
    fn out_of_plane_split() {
        let p = plant();
        let q = split_out_of_plane(&p);
        assert_eq!(q.a_q, Matrix2::new(0.0, 1.0, -p.n * p.n, 0.0));
        assert_eq!(q.b_q, Vector2::new(0.0, 0.002));
        let m = 0.4;
        let prod = q.e_q1 * q.lambda_q(m) * q.e_q2;
        assert!((prod[(1, 0)] + 3.0 * q.e * q.n * q.n * m.cos()).abs() < 1e-22);
        let l = q.lambda_q(0.0);
        assert!(((l.transpose() * l).symmetric_eigenvalues().max() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn split_matches_full_delta() {
        let p = plant();
        let ip = split_in_plane(&p);
        let q = split_out_of_plane(&p);
        let m = 2.3;
        let d = p.delta_a(m);
        for (i, &ri) in IN_PLANE_INDICES.iter().enumerate() {
            for (j, &cj) in IN_PLANE_INDICES.iter().enumerate() {
                assert_eq!(ip.delta_a_p(m)[(i, j)], d[(ri, cj)]);
            }
        }
        for (i, &ri) in OUT_OF_PLANE_INDICES.iter().enumerate() {
            for (j, &cj) in OUT_OF_PLANE_INDICES.iter().enumerate() {
                assert_eq!(q.delta_a_q(m)[(i, j)], d[(ri, cj)]);
            }
        }
    }

    #[test]
    fn f32_plant_builds() {
        let o = OrbitConfig::<f32>::earth(7082.253e3, 0.05).unwrap();
        let c = ChaserConfig::<f32>::new(500.0, 15.0, 15.0, 5.0).unwrap();
        let p = build_plant(&o, &c);
        let ip = split_in_plane(&p);
        let diff = (ip.e_p1 * ip.lambda_p(1.0) * ip.e_p2 - ip.delta_a_p(1.0)).abs().max();
        assert!(diff < 1e-12);
    }

    fn rel_fro<const R: usize>(a: nalgebra::SMatrix<f64, R, R>, b: nalgebra::SMatrix<f64, R, R>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn factorizations_hold(m in 0.0..TAU, e in 0.0..0.1f64) {
            let (mut o, c) = reference_case();
            o.e = e;
            let p = build_plant(&o, &c);
            let ip = split_in_plane(&p);
            let q = split_out_of_plane(&p);
            let dp = ip.delta_a_p(m);
            let dq = q.delta_a_q(m);
            if dp.norm() > 0.0 {
                prop_assert!(rel_fro(ip.e_p1 * ip.lambda_p(m) * ip.e_p2, dp) <= 1e-12);
            }
            if dq.norm() > 0.0 {
                prop_assert!(rel_fro(q.e_q1 * q.lambda_q(m) * q.e_q2, dq) <= 1e-12);
            }
            let d = p.delta_a(m);
            if d.norm() > 0.0 {
                prop_assert!(rel_fro(p.e1() * p.lambda(m) * p.e2(), d) <= 1e-12);
            }
        }

        #[test]
        fn lambdas_are_contractions(m in 0.0..TAU) {
            let lp = in_plane_lambda(m);
            let lq = out_of_plane_lambda(m);
            let l6 = plant().lambda(m);
            prop_assert!((lp.transpose() * lp).symmetric_eigenvalues().max() <= 1.0 + 1e-15);
            prop_assert!((lq.transpose() * lq).symmetric_eigenvalues().max() <= 1.0 + 1e-15);
            prop_assert!((l6.transpose() * l6).symmetric_eigenvalues().max() <= 1.0 + 1e-15);
        }

        #[test]
        fn kepler_residual(m in -10.0..10.0f64, e in 0.0..0.1f64) {
            let ea = crate::dynamics::solve_kepler(m, e).unwrap();
            prop_assert!((ea - e * ea.sin() - m).abs() < 1e-13);
        }
    }
}
