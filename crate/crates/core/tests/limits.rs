use orlicz_regen::bounds::ChainLaws;
use orlicz_regen::limits::{
    berry_esseen_experiment, block_variance, clt_experiment, lil_statistic, linear_grid,
    tail_bound_experiment, CltParams, Start, TailParams,
};
use orlicz_regen::split_chain::FiniteChain;
use orlicz_regen::tower::{build, geometric_tower};

fn finite_chain() -> FiniteChain {
    let p = vec![
        vec![0.5, 0.3, 0.2],
        vec![0.4, 0.4, 0.2],
        vec![0.1, 0.3, 0.6],
    ];
    FiniteChain::with_maximal_minorization(p, vec![true, false, false]).unwrap()
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let k = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= k * a[c][j];
            }
            b[r] -= k * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|j| a[r][j] * x[j]).sum::<f64>()) / a[r][r];
    }
    x
}

/// Asymptotic variance `π(f (2g - f))` with `g` solving the Poisson
/// equation `(I - P + 1π) g = f`.
fn asymptotic_variance(p: &[Vec<f64>], pi: &[f64], f: &[f64]) -> f64 {
    let n = f.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (i == j) as u8 as f64 - p[i][j] + pi[j])
                .collect()
        })
        .collect();
    let g = solve(a, f.to_vec());
    (0..n).map(|i| pi[i] * f[i] * (2.0 * g[i] - f[i])).sum()
}

fn centered(chain: &FiniteChain, raw: [f64; 3]) -> [f64; 3] {
    let mean: f64 = chain.pi().iter().zip(raw).map(|(p, v)| p * v).sum();
    raw.map(|v| v - mean)
}

#[test]
fn block_variance_matches_poisson_equation() {
    let chain = finite_chain();
    for (i, raw) in [[1.0, -2.0, 0.5], [0.0, 0.0, 3.0], [2.0, 1.0, 0.0]]
        .into_iter()
        .enumerate()
    {
        let f = centered(&chain, raw);
        let exact = asymptotic_variance(chain.transition(), chain.pi(), &f);
        let b = block_variance(&chain, |&x| f[x], 200_000, i as u64).unwrap();
        assert!(
            (b.sigma_f_sq - exact).abs() <= 4.0 * b.sigma_f_sq_stderr,
            "{raw:?}: {} ± {} vs {exact}",
            b.sigma_f_sq,
            b.sigma_f_sq_stderr
        );
    }
}

#[test]
fn clt_sample_variance_approaches_sigma_squared() {
    let chain = finite_chain();
    let f = centered(&chain, [1.0, -2.0, 0.5]);
    let exact = asymptotic_variance(chain.transition(), chain.pi(), &f);
    let params = CltParams {
        replicas: 2_000,
        block_pairs: 20_000,
        start: Start::Pi,
        seed: 4,
    };
    let r = clt_experiment(&chain, |&x| f[x], &[5_000], &params).unwrap();
    // relative stderr of a sample variance is about sqrt(2 / replicas)
    assert!(
        (r.sample_variance[0] / exact - 1.0).abs() <= 4.0 * (2.0f64 / 2_000.0).sqrt(),
        "{} vs {exact}",
        r.sample_variance[0]
    );
    assert!(r.ks_distance[0] < 0.05, "{:?}", r.ks_distance);
}

#[test]
fn lil_statistic_is_of_order_sigma() {
    let (chain, _) = build(&geometric_tower(20).centered()).unwrap();
    let params = CltParams {
        replicas: 200,
        block_pairs: 20_000,
        start: Start::Pi,
        seed: 6,
    };
    let r = lil_statistic(&chain, |x| chain.f(x), 100_000, &params).unwrap();
    assert!(!r.suspicious, "p95 {} sigma {}", r.p95, r.sigma_f);
    assert!(r.median <= r.p95);
}

#[test]
fn zero_function_is_degenerate_for_the_rate() {
    let (chain, _) = build(&geometric_tower(8).centered()).unwrap();
    let params = CltParams {
        replicas: 50,
        block_pairs: 1_000,
        start: Start::Nu,
        seed: 1,
    };
    let r = berry_esseen_experiment(&chain, |_| 0.0, &[100, 400], &params).unwrap();
    assert!(r.degenerate);
    assert!(r.delta_n.is_empty());
}

#[test]
fn tail_curves_are_monotone_and_start_at_one() {
    let (chain, exact) = build(&geometric_tower(20).centered()).unwrap();
    let laws = ChainLaws::tower(&chain, &exact).unwrap();
    let params = TailParams {
        alpha: 1.0,
        beta: 1.0,
        n: 500,
        t_grid: linear_grid(200.0, 20),
        replicas: 5_000,
        seed: 7,
        k: None,
    };
    let r = tail_bound_experiment(&chain, |x| chain.f(x), &laws, &params).unwrap();
    for side in [&r.nu, &r.pi] {
        assert_eq!(side.empirical_tail[0], 1.0);
        assert_eq!(side.bound[0].total, 1.0);
        assert!(side.empirical_tail.windows(2).all(|w| w[1] <= w[0]));
        assert!(side
            .bound
            .windows(2)
            .all(|w| w[1].total <= w[0].total + 1e-15));
        assert!(side.decomposition.inequality_holds);
        assert!(side.decomposition.max_reconstruction_error <= 1e-9);
    }
    assert!(r.k_fitted && r.k <= 1.0 + 1e-6);
}
