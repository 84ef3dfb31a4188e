mod common;

use common::{gate_matrix, oracle_state, oracle_z, random_gate};
use num_complex::Complex64;
use proptest::prelude::*;
use quanv::qsim::{Gate, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simulate(n: usize, gates: &[Gate]) -> StateVector {
    let mut s = StateVector::zero(n).unwrap();
    for g in gates {
        s.apply(g).unwrap();
    }
    s
}

fn gates_for(seed: u64, n: usize, len: usize) -> Vec<Gate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| random_gate(&mut rng, n)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_dense_oracle(seed in any::<u64>(), n in 1usize..=5, len in 0usize..40) {
        let gates = gates_for(seed, n, len);
        let sim = simulate(n, &gates);
        let reference = oracle_state(n, &gates);
        for (a, b) in sim.amplitudes().iter().zip(reference.iter()) {
            prop_assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
        for q in 0..n {
            let z = sim.z_expectation(q).unwrap();
            prop_assert!((z - oracle_z(n, &reference, q)).abs() < 1e-10);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
        }
    }

    #[test]
    fn norm_is_preserved(seed in any::<u64>(), n in 1usize..=6, len in 0usize..200) {
        let s = simulate(n, &gates_for(seed, n, len));
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_sequence_restores_state(seed in any::<u64>(), n in 1usize..=5, len in 1usize..60) {
        let gates = gates_for(seed, n, len);
        let mut s = simulate(n, &gates);
        for g in gates.iter().rev() {
            s.apply(&g.inverse()).unwrap();
        }
        let zero = StateVector::zero(n).unwrap();
        for (a, b) in s.amplitudes().iter().zip(zero.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn oracle_gates_are_unitary(seed in any::<u64>(), n in 1usize..=4) {
        let g = gates_for(seed, n, 1).remove(0);
        let m = gate_matrix(n, &g);
        let prod = m.adjoint() * &m;
        let dim = 1 << n;
        for i in 0..dim {
            for j in 0..dim {
                let want = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                prop_assert!((prod[(i, j)] - want).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn qubit_zero_is_most_significant() {
    let s = simulate(3, &[Gate::X(0)]);
    assert!((s.amplitudes()[0b100].re - 1.0).abs() < 1e-15);
    assert_eq!(s.all_z_expectations(), vec![-1.0, 1.0, 1.0]);
}

#[test]
fn out_of_range_wire_is_rejected() {
    let mut s = StateVector::zero(2).unwrap();
    assert!(s.apply(&Gate::H(2)).is_err());
    assert!(s.apply(&Gate::Cnot { control: 1, target: 1 }).is_err());
}
