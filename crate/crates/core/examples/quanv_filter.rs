//! Runs a 4x4 quantum filter over a synthetic 14x14 image.

use quanv::datasets::synth_dataset;
use quanv::quanv::QuantumFilter;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> quanv::Result<()> {
    let data = synth_dataset(3, 3, 1);
    let filter = QuantumFilter::random(4, 4, 3, true, &mut ChaCha8Rng::seed_from_u64(7))?;
    let image = data.image(0);

    let map = filter.quanv_forward(&image)?;
    println!("{}x{}x{} feature map", map.height, map.width, map.channels);
    for c in 0..map.channels {
        println!("channel {c}:");
        for i in 0..map.height {
            let row: Vec<String> = (0..map.width).map(|j| format!("{:+.3}", map.get(i, j, c))).collect();
            println!("  {}", row.join(" "));
        }
    }

    // Gradient of the sum of all outputs with respect to the 24 filter parameters.
    let grad = filter.quanv_backward(&image, &vec![1.0; map.len()])?;
    println!("d(sum)/dθ[0..4] = {:?}", &grad[..4]);
    Ok(())
}
