//! Circuit-execution budget of a quanvolution pass.

use quanv::quanv::{CircuitBudget, ShiftAccounting};

fn main() -> quanv::Result<()> {
    let mut b = CircuitBudget {
        height: 28,
        width: 28,
        kernel: 4,
        stride: 4,
        params_single: 10,
        params_crz: 0,
        trainable: false,
        batch: 1,
        accounting: ShiftAccounting::Exact,
    };
    println!("forward only, one image:     {}", b.total()?);
    b.trainable = true;
    println!("with gradients, one image:   {}", b.total()?);
    b.batch = 50;
    println!("with gradients, batch of 50: {}", b.total()?);

    // The 14x14 filter used for training: 12 RY and 12 CRZ parameters.
    let f = CircuitBudget {
        height: 14,
        width: 14,
        params_single: 12,
        params_crz: 12,
        batch: 600,
        ..b
    };
    println!("one epoch of 600 images at 14x14: {}", f.total()?);
    Ok(())
}
