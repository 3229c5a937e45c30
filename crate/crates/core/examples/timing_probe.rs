// Scratch probe (not part of the deliverable test surface).
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sandpile_core::graph::*;
use sandpile_core::tree::solve_tree_profiled;

fn main() {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0xacce_0008);
    for &n in &[100_000usize, 1_000_000] {
        let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v) + 1, v + 1)).collect();
        let g = Graph::build(n, &edges).unwrap();
        let mut chips = vec![0u64; n];
        for _ in 0..n as u64 / 2 {
            chips[rng.gen_range(0..n)] += 1;
        }
        let sigma = Configuration::new(chips);
        for _ in 0..3 {
            solve_tree_profiled(&g, &sigma);
        }
    }
}
