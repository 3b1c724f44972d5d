use labelaudit::harness::sbm::{gen_sbm, SbmConfig};

/// Intra- and inter-class edge counts are binomial around their expectation;
/// the density ratio is p_in / p_out = 10.
#[test]
fn edge_counts_follow_block_densities() {
    let (n, c, p_in, p_out) = (1000usize, 5usize, 0.02, 0.002);
    let block = n / c;
    let intra_pairs = (c * block * (block - 1) / 2) as f64;
    let inter_pairs = (n * (n - 1) / 2) as f64 - intra_pairs;
    for seed in 0..5 {
        let g = gen_sbm(&SbmConfig {
            n,
            c,
            p_in,
            p_out,
            seed,
            ..SbmConfig::default()
        })
        .unwrap();
        let intra = g.edges().iter().filter(|&&(u, v)| g.label(u) == g.label(v)).count() as f64;
        let inter = g.num_edges() as f64 - intra;
        let sd_in = (intra_pairs * p_in * (1.0 - p_in)).sqrt();
        let sd_out = (inter_pairs * p_out * (1.0 - p_out)).sqrt();
        assert!((intra - intra_pairs * p_in).abs() <= 3.0 * sd_in, "seed {seed}: {intra} intra edges");
        assert!((inter - inter_pairs * p_out).abs() <= 3.0 * sd_out, "seed {seed}: {inter} inter edges");
        let ratio = (intra / intra_pairs) / (inter / inter_pairs);
        assert!((7.5..13.5).contains(&ratio), "seed {seed}: density ratio {ratio}");
    }
}

#[test]
fn class_means_are_separated_by_signal() {
    let cfg = SbmConfig {
        n: 2000,
        c: 4,
        d: 8,
        signal: 2.0,
        ..SbmConfig::default()
    };
    let g = gen_sbm(&cfg).unwrap();
    let x = g.features().unwrap();
    for class in 0..4 {
        let members: Vec<usize> = (0..cfg.n).filter(|&v| g.label(v) == Some(class)).collect();
        let mean: Vec<f64> = (0..cfg.d)
            .map(|j| members.iter().map(|&v| x.get(v, j)).sum::<f64>() / members.len() as f64)
            .collect();
        let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
        // sample mean of 500 unit-variance rows: per-coordinate sd ≈ 0.045
        assert!((norm - cfg.signal).abs() < 0.3, "class {class}: mean norm {norm}");
    }
}
