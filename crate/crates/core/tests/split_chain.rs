use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use orlicz_regen::split_chain::{
    block_mean_check, pitman_check, simulate, FiniteChain, Init, MinorizedChain,
};
use orlicz_regen::stats::{correlation, ks_critical_1pct, ks_two_sample};
use orlicz_regen::tower::{build, geometric_tower, random_spec};

/// Three states, small set `{0}` with a non-trivial residual kernel.
fn finite_chain() -> FiniteChain {
    let p = vec![
        vec![0.5, 0.3, 0.2],
        vec![0.4, 0.4, 0.2],
        vec![0.1, 0.3, 0.6],
    ];
    FiniteChain::with_maximal_minorization(p, vec![true, false, false]).unwrap()
}

fn block_sums_of<C: MinorizedChain>(
    chain: &C,
    f: impl Fn(&C::State) -> f64,
    steps: usize,
    seed: u64,
) -> Vec<f64> {
    let trace = simulate(chain, &Init::Nu, steps, seed).unwrap();
    // drop the initial segment; the rest are complete blocks
    trace.block_sums(f)[1..].to_vec()
}

fn assert_iid(sums: &[f64]) {
    let n = sums.len();
    assert!(n > 1000, "{n} blocks");
    let r = correlation(&sums[..n - 1], &sums[1..]);
    assert!(
        r.abs() <= 3.0 / (n as f64).sqrt(),
        "lag-one correlation {r} over {n} blocks"
    );
    let (a, b) = sums.split_at(n / 2);
    let d = ks_two_sample(a, b);
    assert!(d < ks_critical_1pct(a.len(), b.len()), "KS {d}");
}

#[test]
fn tower_blocks_are_independent_and_identically_distributed() {
    let (chain, _) = build(&geometric_tower(12).centered()).unwrap();
    assert_iid(&block_sums_of(&chain, |x| chain.f(x), 200_000, 4));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (chain, _) = build(&random_spec(&mut rng, 5, 15, 2.0)).unwrap();
    assert_iid(&block_sums_of(&chain, |x| chain.f(x), 200_000, 5));
}

#[test]
fn finite_chain_blocks_are_independent_and_identically_distributed() {
    let chain = finite_chain();
    assert_iid(&block_sums_of(&chain, |&x| [1.0, -2.0, 0.5][x], 100_000, 6));
}

#[test]
fn occupation_checks_pass_for_each_functional() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (chain, _) = build(&random_spec(&mut rng, 4, 10, 2.0)).unwrap();
    let mut within = [0usize; 3];
    for seed in 0..100 {
        let one = pitman_check(&chain, |_, _| 1.0, 2_000, seed).unwrap();
        let small = pitman_check(
            &chain,
            |x, _| chain.in_small_set(x) as u8 as f64,
            2_000,
            seed,
        )
        .unwrap();
        let f = pitman_check(&chain, |x, _| chain.f(x), 2_000, seed).unwrap();
        for (k, r) in [one, small, f].iter().enumerate() {
            within[k] += (r.z.abs() <= 4.0) as usize;
        }
    }
    assert!(within.iter().all(|&w| w >= 99), "{within:?}");

    // with one block per visit the indicator of C sums to exactly 1
    let small = pitman_check(&chain, |x, _| chain.in_small_set(x) as u8 as f64, 500, 0).unwrap();
    assert_eq!(small.estimate, 1.0);
    assert!((small.exact - 1.0).abs() < 1e-12);
}

#[test]
fn finite_chain_identities() {
    let chain = finite_chain();
    let g = [1.0, -2.0, 0.5];
    let p = pitman_check(&chain, |&x, _| g[x], 20_000, 9).unwrap();
    assert!(p.z.abs() <= 4.0, "{p:?}");
    let b = block_mean_check(&chain, |&x| g[x], 20_000, 9).unwrap();
    assert!(b.z.abs() <= 4.0, "{b:?}");
}

#[test]
fn traces_depend_only_on_the_seed() {
    let chain = finite_chain();
    let a = simulate(&chain, &Init::Pi, 5_000, 77).unwrap();
    let b = simulate(&chain, &Init::Pi, 5_000, 77).unwrap();
    assert_eq!(a, b);
    let c = simulate(&chain, &Init::Pi, 5_000, 78).unwrap();
    assert_ne!(a.states, c.states);
}
