use hetnet_secrecy::channel::{derive_seed, sample_rayleigh_channels, ChannelSet, NetworkConfig};
use hetnet_secrecy::conic::{embed_hermitian, embed_vector, unembed_hermitian, unembed_vector};
use hetnet_secrecy::harness::{read_csv_from, write_csv_to, ResultRow, ResultTable, Sweep};
use hetnet_secrecy::linalg::{complex_gaussian, hermitian_part, null_space_basis, CMatrix, CVector, C64};
use hetnet_secrecy::metrics::{self, BeamformingSolution};
use hetnet_secrecy::stb_om::{quad_over_lin, solve_stb_om, taylor_q, StbOmOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_solution(ch: &ChannelSet, rng: &mut ChaCha8Rng) -> BeamformingSolution {
    let n_f = ch.n_f();
    BeamformingSolution {
        w_mu: (0..ch.m_users()).map(|_| complex_gaussian(rng, ch.n_m())).collect(),
        w_fu: (0..ch.n_coop()).map(|_| (0..ch.k_users()).map(|_| complex_gaussian(rng, n_f)).collect()).collect(),
        an: Some(complex_gaussian(rng, ch.n_m())),
        ..Default::default()
    }
}

fn all_sinrs(ch: &ChannelSet, sol: &BeamformingSolution, sigma2: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..ch.m_users()).map(|m| metrics::sinr_mu_with_noise(ch, sol, m, sigma2).unwrap()).collect();
    v.push(metrics::sinr_eve_with_noise(ch, sol, sigma2).unwrap());
    for n in 0..ch.n_coop() {
        for k in 0..ch.k_users() {
            v.push(metrics::sinr_fu_with_noise(ch, sol, n, k, sigma2).unwrap());
        }
    }
    v
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    let g = complex_gaussian(rng, d * d);
    hermitian_part(&CMatrix::from_fn(d, d, |i, j| g[i * d + j]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn common_phase_leaves_sinrs_unchanged(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU) {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let sol = random_solution(&ch, &mut rng);
        let rot = C64::from_polar(1.0, theta);
        let mut turned = sol.clone();
        turned.w_mu.iter_mut().for_each(|w| *w *= rot);
        turned.w_fu.iter_mut().flatten().for_each(|w| *w *= rot);
        if let Some(z) = turned.an.as_mut() { *z *= rot; }
        for (a, b) in all_sinrs(&ch, &sol, 1.0).into_iter().zip(all_sinrs(&ch, &turned, 1.0)) {
            prop_assert!(close(a, b, 1e-10), "{a} vs {b}");
        }
    }

    #[test]
    fn joint_power_and_noise_scaling_leaves_sinrs_unchanged(seed in any::<u64>(), log_c in -3.0f64..3.0) {
        let cfg = NetworkConfig::simulation_defaults();
        let ch = sample_rayleigh_channels(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let sol = random_solution(&ch, &mut rng);
        let c = 10f64.powf(log_c);
        let s = C64::new(c.sqrt(), 0.0);
        let mut scaled = sol.clone();
        scaled.w_mu.iter_mut().for_each(|w| *w *= s);
        scaled.w_fu.iter_mut().flatten().for_each(|w| *w *= s);
        if let Some(z) = scaled.an.as_mut() { *z *= s; }
        for (a, b) in all_sinrs(&ch, &sol, 1.0).into_iter().zip(all_sinrs(&ch, &scaled, c)) {
            prop_assert!(close(a, b, 1e-10), "{a} vs {b}");
        }
    }

    #[test]
    fn quad_over_lin_is_jointly_convex(seed in any::<u64>(), lam in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = complex_gaussian(&mut rng, 4);
        let a_mat = h.conjugate() * h.transpose();
        let a = rng.gen_range(-2.0..2.0);
        let (w1, w2) = (complex_gaussian(&mut rng, 4), complex_gaussian(&mut rng, 4));
        let (x1, x2) = (a + rng.gen_range(0.01..5.0), a + rng.gen_range(0.01..5.0));
        let f = |w: &CVector, x: f64| quad_over_lin(&a_mat, a, w, x).unwrap();
        let wm = &w1 * C64::new(lam, 0.0) + &w2 * C64::new(1.0 - lam, 0.0);
        let mid = f(&wm, lam * x1 + (1.0 - lam) * x2);
        let chord = lam * f(&w1, x1) + (1.0 - lam) * f(&w2, x2);
        prop_assert!(mid <= chord + 1e-12 * chord.max(1.0));
    }

    #[test]
    fn vector_embedding_round_trips(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = complex_gaussian(&mut rng, n);
        let x = embed_vector(&v);
        prop_assert_eq!(x.len(), 2 * n);
        prop_assert_eq!(unembed_vector(&x), v);
    }

    #[test]
    fn hermitian_embedding_round_trips(seed in any::<u64>(), d in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(&mut rng, d);
        let x = embed_hermitian(&a);
        prop_assert_eq!(x.len(), d * d);
        prop_assert!((unembed_hermitian(&x, d) - &a).norm() <= 1e-14 * a.norm().max(1.0));
    }

    #[test]
    fn null_space_basis_is_orthonormal_and_annihilating(seed in any::<u64>(), m in 1usize..4, extra in 1usize..4) {
        let n = m + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = complex_gaussian(&mut rng, m * n);
        let g = CMatrix::from_fn(m, n, |i, j| g[i * n + j]);
        let v = null_space_basis(&g).unwrap();
        prop_assert_eq!(v.shape(), (n, extra));
        prop_assert!((&g * &v).norm() <= 1e-12 * g.norm());
        prop_assert!((v.adjoint() * &v - CMatrix::identity(extra, extra)).norm() <= 1e-12);
    }

    #[test]
    fn csv_round_trips(
        rows in prop::collection::vec(
            (0usize..4, -50.0f64..50.0, any::<u32>(), prop::option::of(-1e6f64..1e6), 0u64..40, any::<bool>()),
            0..20,
        )
    ) {
        let names = ["stb_om", "stb_smf", "stb_jmf", "benchmark"];
        let table = ResultTable {
            rows: rows
                .into_iter()
                .map(|(s, v, t, x, it, ok)| ResultRow {
                    scheme: names[s].into(),
                    sweep_param: "p_m_db@p_f_db=25".into(),
                    sweep_value_db: v,
                    trial: t as u64,
                    secrecy_rate_bits: x.unwrap_or(f64::NAN),
                    sinr_mu1: v.exp(),
                    sinr_mu2: 1.0 / 3.0,
                    sinr_eve: 1e-300,
                    sinr_fu_mean: f64::NAN,
                    iterations: it,
                    solve_ms: 0.0,
                    status: if ok { "ok".into() } else { "qos_infeasible".into() },
                })
                .collect(),
        };
        let mut buf = Vec::new();
        write_csv_to(&table, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.rows.len(), table.rows.len());
        let bits = |r: &ResultRow| {
            [r.sweep_value_db, r.secrecy_rate_bits, r.sinr_mu1, r.sinr_mu2, r.sinr_eve, r.sinr_fu_mean, r.solve_ms]
                .map(f64::to_bits)
        };
        for (a, b) in table.rows.iter().zip(&back.rows) {
            prop_assert_eq!((&a.scheme, &a.sweep_param, a.trial, a.iterations, &a.status),
                            (&b.scheme, &b.sweep_param, b.trial, b.iterations, &b.status));
            prop_assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn sweep_ranges_hit_both_ends(start in -20i32..40, steps in 0usize..12, step in 1u32..6) {
        let stop = start as f64 + (steps as u32 * step) as f64;
        let s: Sweep = format!("p_m_db={start}:{stop}:{step}").parse().unwrap();
        prop_assert_eq!(s.values.len(), steps + 1);
        prop_assert_eq!(s.values[0], start as f64);
        prop_assert!((s.values[steps] - stop).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stb_om_respects_power_and_qos(seed in any::<u64>(), p_db in 20.0f64..45.0) {
        let cfg = NetworkConfig::macro_only(6, 3, 10f64.powf(p_db / 10.0), 1.0);
        let ch = sample_rayleigh_channels(&cfg, seed);
        let sol = solve_stb_om(&ch, &cfg, &StbOmOptions::default()).unwrap();
        prop_assert!(sol.mbs_power() <= cfg.p_m * (1.0 + 1e-6));
        for m in 1..3 {
            prop_assert!(metrics::sinr_mu(&ch, &sol, m).unwrap() >= 1.0 - 1e-6);
        }
        let t = &sol.diagnostics.objective_trace;
        prop_assert!(t.windows(2).all(|p| p[1] >= p[0] - 1e-6));
    }
}

#[test]
fn taylor_expansion_is_a_global_minorant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let h = complex_gaussian(&mut rng, 3);
        let a_mat = h.conjugate() * h.transpose();
        let a = rng.gen_range(0.0..3.0);
        let w_t = complex_gaussian(&mut rng, 3) * C64::new(rng.gen_range(0.1..10.0), 0.0);
        let x_t = a + rng.gen_range(0.01..10.0);
        let q = taylor_q(&a_mat, a, &w_t, x_t).unwrap();
        let w = complex_gaussian(&mut rng, 3) * C64::new(rng.gen_range(0.1..10.0), 0.0);
        let x = a + rng.gen_range(1e-3..10.0);
        let f = quad_over_lin(&a_mat, a, &w, x).unwrap();
        let lower = q.eval(&w, x);
        worst = worst.max((lower - f) / f.abs().max(1.0));
        assert!((q.eval(&w_t, x_t) - quad_over_lin(&a_mat, a, &w_t, x_t).unwrap()).abs()
            <= 1e-12 * q.eval(&w_t, x_t).abs().max(1.0));
    }
    assert!(worst <= 1e-12, "minorant violated by {worst:e}");
}

#[test]
fn channel_draws_are_reproducible_and_distinct() {
    let cfg = NetworkConfig::simulation_defaults();
    let a = sample_rayleigh_channels(&cfg, derive_seed(5, 3));
    let b = sample_rayleigh_channels(&cfg, derive_seed(5, 3));
    let c = sample_rayleigh_channels(&cfg, derive_seed(5, 4));
    assert_eq!(a.h_e, b.h_e);
    assert_ne!(a.h_e, c.h_e);
    assert!(a.check(&cfg).is_ok());
}
