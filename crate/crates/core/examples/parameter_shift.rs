//! Exact circuit gradients with the shift rules, checked against finite differences.

use quanv::circuits::{EncoderKind, QnnSpec};
use quanv::qgrad::{finite_diff_grad, shift_rule_grad, shift_eval_count, ExpectationFn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> quanv::Result<()> {
    let qnn = QnnSpec::new(4, EncoderKind::AngleOneToOne, 2)?;
    let circuit = qnn.build()?;
    let theta = qnn.init_params(&mut ChaCha8Rng::seed_from_u64(0));
    let data = [0.4, 1.9, 3.1, 5.0];

    let f = ExpectationFn::new(&circuit, &data);
    let exact = shift_rule_grad(&f, &theta)?;
    let fd = finite_diff_grad(&f, &theta, 1e-5)?;

    let (single, crz) = qnn.param_kinds();
    println!("{} parameters ({single} RY, {crz} CRZ)", qnn.num_params());
    println!("extra circuit runs per gradient: {}", shift_eval_count(single, crz));
    println!("d<Z_0>/dθ: {:?}", exact.row(0));
    println!("max |shift - fd| = {:.2e}", exact.max_abs_diff(&fd));
    Ok(())
}
