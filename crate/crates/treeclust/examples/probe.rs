use treeclust::pipeline::{load_and_normalize, prepare_candidates};
use treeclust::discretize::Strategy;

fn main() {
    let input = std::env::args().nth(1).unwrap();
    let label = std::env::args().nth(2);
    let (_, ds, _) = load_and_normalize(std::path::Path::new(&input), label.as_deref()).unwrap();
    let t = std::time::Instant::now();
    let cands = prepare_candidates(&ds, Strategy::KMeans, 2..=6, 3, 5_000_000).unwrap();
    println!("prepare: {:?}", t.elapsed());
    println!("n_points={} n_features={}", ds.n_points(), ds.n_features());
    for bs in &cands.binsets {
        println!("feature {}: k={:?} base={} merged={}", bs.feature_index, bs.k_selected, bs.base.len(), bs.merged.len());
    }
    println!("paths after prune: {}", cands.paths.len());
    let zero_cost = cands.paths.iter().filter(|p| p.cost == 0.0).count();
    let singleton = cands.paths.iter().filter(|p| p.n_covered == 1).count();
    let max_size = cands.paths.iter().map(|p| p.n_covered).max().unwrap_or(0);
    println!("zero-cost={} singleton={} max_size={}", zero_cost, singleton, max_size);
    let mut sizes: Vec<usize> = cands.paths.iter().map(|p| p.n_covered).collect();
    sizes.sort_unstable();
    println!("size deciles: {:?}", (0..=10).map(|d| sizes[(d * (sizes.len()-1)) / 10]).collect::<Vec<_>>());
}
