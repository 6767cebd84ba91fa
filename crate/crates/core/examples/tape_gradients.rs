//! Reverse-mode gradients on the tape: a two-layer tanh network's squared
//! error, checked against central finite differences.
//!
//! ```text
//! cargo run --example tape_gradients
//! ```

use sfopt::gradtape::{Tape, Tensor};

fn loss(w1: &[f64], w2: &[f64], x: &[f64], y: f64, tape: &mut Tape) -> sfopt::Result<(f64, Vec<f64>, Vec<f64>)> {
    let w1v = tape.leaf(Tensor::matrix(3, 2, w1.to_vec())?);
    let w2v = tape.leaf(Tensor::matrix(1, 3, w2.to_vec())?);
    let xv = tape.constant(Tensor::vector(x.to_vec()));
    let h = tape.matmul(w1v, xv)?;
    let h = tape.tanh(h);
    let out = tape.matmul(w2v, h)?;
    let err = tape.add_const(out, -y);
    let sq = tape.squared_norm(err);
    let grads = tape.backward(sq)?;
    Ok((
        tape.value(sq).item().expect("scalar loss"),
        grads.wrt(w1v).into_data(),
        grads.wrt(w2v).into_data(),
    ))
}

fn main() -> sfopt::Result<()> {
    let w1 = vec![0.3, -0.2, 0.8, 0.1, -0.5, 0.4];
    let w2 = vec![0.7, -1.1, 0.2];
    let (x, y) = ([0.6, -1.4], 0.25);
    let mut tape = Tape::new();
    let (value, g1, g2) = loss(&w1, &w2, &x, y, &mut tape)?;
    println!("loss {value:.6}, tape has {} nodes", tape.len());

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..w1.len() {
        let (mut up, mut down) = (w1.clone(), w1.clone());
        up[k] += h;
        down[k] -= h;
        let fd = (loss(&up, &w2, &x, y, &mut Tape::new())?.0 - loss(&down, &w2, &x, y, &mut Tape::new())?.0) / (2.0 * h);
        worst = worst.max((fd - g1[k]).abs());
    }
    println!("dL/dW1 {g1:.5?}");
    println!("dL/dW2 {g2:.5?}");
    println!("largest finite-difference disagreement on W1: {worst:.2e}");
    Ok(())
}
