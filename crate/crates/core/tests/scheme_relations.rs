use hetnet_secrecy::benchmark::solve_benchmark;
use hetnet_secrecy::channel::{derive_seed, sample_rayleigh_channels, NetworkConfig};
use hetnet_secrecy::harness::{run_experiment, write_csv_to, ExperimentSpec, Scheme, Sweep, SweepParam};
use hetnet_secrecy::linalg::row_dot;
use hetnet_secrecy::metrics::{secrecy_rate, sinr_mu};
use hetnet_secrecy::stb_jmf::{solve_stb_jmf, JmfOptions};
use hetnet_secrecy::stb_om::{solve_random_an, solve_stb_om, solve_stb_om_with_an, StbOmOptions};
use hetnet_secrecy::stb_smf::solve_stb_smf;
use rayon::prelude::*;

const BASE: u64 = 77;

#[test]
fn femtocell_jamming_never_hurts_secrecy() {
    let cfg = NetworkConfig::simulation_defaults();
    let gaps: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let ch = sample_rayleigh_channels(&cfg, derive_seed(BASE, s));
            let om = solve_stb_om(&ch, &cfg, &StbOmOptions::default()).unwrap();
            let smf = solve_stb_smf(&ch, &cfg, &StbOmOptions::default()).unwrap();
            secrecy_rate(&ch, &smf).unwrap() - secrecy_rate(&ch, &om).unwrap()
        })
        .collect();
    let worst = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(worst >= -1e-6, "STB-SMF below STB-OM by {worst:e} bits");
}

#[test]
fn joint_an_dominates_random_an_and_no_an() {
    let cfg = NetworkConfig::macro_only(10, 2, 1e4, 1.0);
    for s in 0..100u64 {
        let ch = sample_rayleigh_channels(&cfg, derive_seed(BASE ^ 1, s));
        let opts = StbOmOptions { an_seed: s, ..Default::default() };
        let none = secrecy_rate(&ch, &solve_stb_om(&ch, &cfg, &opts).unwrap()).unwrap();
        let random = secrecy_rate(&ch, &solve_random_an(&ch, &cfg, &opts).unwrap()).unwrap();
        let joint_sol = solve_stb_om_with_an(&ch, &cfg, &opts).unwrap();
        let joint = secrecy_rate(&ch, &joint_sol).unwrap();
        assert!(joint >= random - 1e-6 && joint >= none - 1e-6, "seed {s}: {none} {random} {joint}");
        let z = joint_sol.an.as_ref().map_or(0.0, |z| z.norm_squared());
        assert!(joint_sol.mbs_power() + z <= cfg.p_m * (1.0 + 1e-6));
    }
}

#[test]
fn qos_streams_are_phase_aligned() {
    let cfg = NetworkConfig::macro_only(8, 3, 1e3, 1.0);
    for s in 0..20u64 {
        let ch = sample_rayleigh_channels(&cfg, derive_seed(BASE ^ 2, s));
        let sol = solve_stb_om(&ch, &cfg, &StbOmOptions::default()).unwrap();
        for m in 1..3 {
            let a = row_dot(&ch.h_mu[m], &sol.w_mu[m]);
            assert!(a.im.abs() <= 1e-8 * a.norm().max(1.0), "seed {s}, MU {m}: {a}");
        }
    }
}

#[test]
fn rate_baseline_wins_on_rate_and_loses_on_secrecy() {
    let cfg = NetworkConfig::simulation_defaults();
    let rows: Vec<(f64, f64, f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(BASE ^ 3, s);
            let ch = sample_rayleigh_channels(&cfg, seed);
            let b = solve_benchmark(&ch, &cfg).unwrap();
            let j = solve_stb_jmf(&ch, &cfg, &JmfOptions { seed, ..Default::default() }).unwrap();
            (
                sinr_mu(&ch, &b, 0).unwrap(),
                sinr_mu(&ch, &j, 0).unwrap(),
                secrecy_rate(&ch, &b).unwrap(),
                secrecy_rate(&ch, &j).unwrap(),
            )
        })
        .collect();
    for (s, r) in rows.iter().enumerate() {
        assert!(r.0 >= r.1 * (1.0 - 1e-6), "seed {s}: benchmark SINR1 {} below STB-JMF {}", r.0, r.1);
    }
    let wins = rows.iter().filter(|r| r.3 >= r.2).count();
    assert!(wins >= 95, "STB-JMF beats the benchmark on {wins}/100 draws");
}

#[test]
fn one_trial_one_scheme_one_value_is_one_row() {
    let spec = ExperimentSpec {
        base: NetworkConfig::simulation_defaults(),
        sweep: Sweep::new(SweepParam::PmDb, vec![40.0]),
        schemes: vec![Scheme::StbOm],
        trials: 1,
        seed: 3,
        record_timing: false,
        label: None,
    };
    let t = run_experiment(&spec).unwrap();
    assert_eq!(t.rows.len(), 1);

    let three = hetnet_secrecy::harness::ResultTable { rows: vec![t.rows[0].clone(); 3] };
    let mut buf = Vec::new();
    write_csv_to(&three, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
}

#[test]
fn reruns_are_identical() {
    let spec = ExperimentSpec {
        base: NetworkConfig::simulation_defaults(),
        sweep: Sweep::new(SweepParam::PfDb, vec![25.0, 35.0]),
        schemes: vec![Scheme::StbSmf, Scheme::Benchmark, Scheme::RandomAn],
        trials: 3,
        seed: 11,
        record_timing: false,
        label: None,
    };
    let csv = |spec: &ExperimentSpec| {
        let mut buf = Vec::new();
        write_csv_to(&run_experiment(spec).unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(&spec), csv(&spec));
}
