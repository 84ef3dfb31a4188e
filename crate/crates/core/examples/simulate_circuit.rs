//! Builds a small circuit by hand and prints the statevector and Z readouts.

use quanv::qsim::{Angle, CircuitSpec, Instruction};
use std::f64::consts::FRAC_PI_2;

fn main() -> quanv::Result<()> {
    // Bell pair on qubits 0 and 1, then a data-driven rotation on qubit 2.
    let mut c = CircuitSpec::new(3)?;
    c.extend([
        Instruction::h(0),
        Instruction::cnot(0, 1),
        Instruction::ry(2, Angle::Data(0)),
        Instruction::crz(1, 2, Angle::Theta(0)),
    ])?;

    let state = c.run(&[FRAC_PI_2], &[0.3])?;
    for (i, a) in state.amplitudes().iter().enumerate() {
        if a.norm_sqr() > 1e-12 {
            println!("|{i:03b}>  {:+.4} {:+.4}i", a.re, a.im);
        }
    }
    println!("<Z> per qubit: {:?}", state.all_z_expectations());
    Ok(())
}
