//! Dense statevector simulation.
//!
//! Gates update amplitudes in place by visiting the pairs of basis indices
//! that differ in the target bit, so a single-qubit gate costs `O(2^n)` and no
//! full unitary is ever materialised.

mod circuit;
mod gate;
mod state;

pub use circuit::{run_circuit, Angle, CircuitSpec, Instruction};
pub use gate::{Gate, GateKind};
pub use state::{init_zero_state, StateVector, MAX_QUBITS};
