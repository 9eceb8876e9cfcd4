//! A small dense reverse-mode differentiation engine.
//!
//! Values live on a [`Tape`]; every primitive appends a node and the backward
//! pass walks the tape once in reverse. Shapes are explicit: apart from
//! [`Tape::add_row`] (bias broadcast) there is no broadcasting.

mod check;
mod checkpoint;
mod optim;
mod tape;
mod tensor;

pub use check::{finite_diff_check, FD_SCALE_FLOOR, FD_STEP};
pub use checkpoint::Checkpoint;
pub use optim::{clip_grad_norm, Adam};
pub use tape::{Axis, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Result;
    use crate::rng::stream;
    use rand::Rng;

    fn rand_tensor<R: Rng>(rng: &mut R, r: usize, c: usize) -> Tensor {
        let data = (0..r * c).map(|_| rng.random_range(-1.5..1.5)).collect();
        Tensor::new(vec![r, c], data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut rng = stream(1, &[]);
        let x = rand_tensor(&mut rng, 3, 4);
        let mut t = Tape::new();
        let a = t.constant(x.clone());
        let i = t.constant(Tensor::identity(4));
        let y = t.matmul(a, i).unwrap();
        assert_eq!(t.value(y), &x);
    }

    #[test]
    fn softmax_of_constant_is_uniform() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::full(&[2, 5], 3.7));
        let s = t.softmax(x, Axis::Cols).unwrap();
        assert!(t.value(s).data().iter().all(|v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn square_derivative() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap().item(), 6.0);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        let err = t.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("matmul"), "{err}");
        let c = t.constant(Tensor::zeros(&[3, 2]));
        assert!(t.add(a, c).is_err());
        let row = t.constant(Tensor::zeros(&[1, 2]));
        assert!(t.add_row(a, row).is_err());
    }

    #[test]
    fn backward_edge_cases() {
        let mut t = Tape::new();
        let w = t.constant(Tensor::row(&[0.5, -2.0, 3.0]));
        let x = t.param(Tensor::row(&[1.0, 1.0, 1.0]));
        let unused = t.param(Tensor::row(&[7.0]));
        let wx = t.mul(w, x).unwrap();
        let loss = t.sum(wx);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[0.5, -2.0, 3.0]);
        assert_eq!(t.grad(unused).unwrap().data(), &[0.0]);
        assert!(t.grad(w).is_none());
        assert!(t.backward(wx).is_err());
    }

    fn attention_oracle(q: &Tensor, k: &Tensor, v: &Tensor) -> Vec<Vec<f64>> {
        let (n, d) = q.dims2().unwrap();
        let (m, dv) = v.dims2().unwrap();
        let mut out = vec![vec![0.0; dv]; n];
        for i in 0..n {
            let mut s: Vec<f64> = (0..m)
                .map(|j| (0..d).map(|c| q.at(i, c) * k.at(j, c)).sum::<f64>() / (d as f64).sqrt())
                .collect();
            let mx = s.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = s.iter().map(|x| (x - mx).exp()).sum();
            for x in s.iter_mut() {
                *x = (*x - mx).exp() / z;
            }
            for c in 0..dv {
                out[i][c] = (0..m).map(|j| s[j] * v.at(j, c)).sum();
            }
        }
        out
    }

    #[test]
    fn attention_cases() {
        let mut rng = stream(2, &[]);
        // Identical keys: uniform weights, each output row is the mean of V.
        let q = rand_tensor(&mut rng, 3, 4);
        let krow = rand_tensor(&mut rng, 1, 4);
        let k = Tensor::from_rows(&vec![krow.data().to_vec(); 3]).unwrap();
        let v = rand_tensor(&mut rng, 3, 2);
        let mut t = Tape::new();
        let (qv, kv, vv) = (t.constant(q), t.constant(k), t.constant(v.clone()));
        let o = t.scaled_dot_attention(qv, kv, vv, 4).unwrap();
        for i in 0..3 {
            for c in 0..2 {
                let mean = (v.at(0, c) + v.at(1, c) + v.at(2, c)) / 3.0;
                assert!((t.value(o).at(i, c) - mean).abs() < 1e-12);
            }
        }

        // Single token: output is V.
        let mut t = Tape::new();
        let q = t.constant(rand_tensor(&mut rng, 1, 4));
        let k = t.constant(rand_tensor(&mut rng, 1, 4));
        let vt = rand_tensor(&mut rng, 1, 3);
        let v = t.constant(vt.clone());
        let o = t.scaled_dot_attention(q, k, v, 4).unwrap();
        for (a, b) in t.value(o).data().iter().zip(vt.data()) {
            assert!((a - b).abs() < 1e-15);
        }

        // Random 3x4 case against the brute-force loop.
        for _ in 0..20 {
            let (q, k, v) = (rand_tensor(&mut rng, 3, 4), rand_tensor(&mut rng, 3, 4), rand_tensor(&mut rng, 3, 4));
            let expected = attention_oracle(&q, &k, &v);
            let mut t = Tape::new();
            let (qv, kv, vv) = (t.constant(q), t.constant(k), t.constant(v));
            let o = t.scaled_dot_attention(qv, kv, vv, 4).unwrap();
            for i in 0..3 {
                for c in 0..4 {
                    assert!((t.value(o).at(i, c) - expected[i][c]).abs() < 1e-10);
                }
            }
        }

        let mut t = Tape::new();
        let q = t.constant(Tensor::zeros(&[2, 3]));
        let k = t.constant(Tensor::zeros(&[2, 4]));
        let v = t.constant(Tensor::zeros(&[2, 4]));
        assert!(t.scaled_dot_attention(q, k, v, 3).is_err());
    }

    #[test]
    fn finite_diff_simple_cases() {
        let mut rng = stream(3, &[]);
        let a = rand_tensor(&mut rng, 4, 4);
        let quad = |t: &mut Tape, x: Var| -> Result<Var> {
            let a = t.constant(a.clone());
            let xt = t.transpose(x)?;
            let ax = t.matmul(a, x)?;
            let q = t.matmul(xt, ax)?;
            Ok(t.sum(q))
        };
        let x = rand_tensor(&mut rng, 4, 1);
        assert!(finite_diff_check(quad, &x).unwrap() < 1e-6);

        let constant = |t: &mut Tape, _x: Var| -> Result<Var> { Ok(t.scalar(4.0)) };
        assert_eq!(finite_diff_check(constant, &x).unwrap(), 0.0);
    }

    #[test]
    fn linearity_and_determinism() {
        let mut rng = stream(4, &[]);
        for _ in 0..10 {
            let x0 = rand_tensor(&mut rng, 3, 3);
            let w = rand_tensor(&mut rng, 3, 3);
            let build = |t: &mut Tape, which: u8| -> (Var, Var) {
                let x = t.param(x0.clone());
                let wv = t.constant(w.clone());
                let h = t.matmul(x, wv).unwrap();
                let h = t.tanh(h);
                let l1 = t.mean(h);
                let s = t.softmax(x, Axis::Cols).unwrap();
                let ws = t.mul(s, wv).unwrap();
                let l2 = t.sum(ws);
                let loss = match which {
                    0 => l1,
                    1 => l2,
                    _ => t.add(l1, l2).unwrap(),
                };
                (x, loss)
            };
            let grad_of = |which: u8| {
                let mut t = Tape::new();
                let (x, loss) = build(&mut t, which);
                t.backward(loss).unwrap();
                let first = t.grad(x).unwrap().clone();
                t.backward(loss).unwrap();
                assert_eq!(&first, t.grad(x).unwrap());
                first
            };
            let (g1, g2, g12) = (grad_of(0), grad_of(1), grad_of(2));
            for i in 0..9 {
                assert!((g1.data()[i] + g2.data()[i] - g12.data()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = stream(5, &[]);
        for _ in 0..50 {
            let mut x = rand_tensor(&mut rng, 4, 6);
            for v in x.data_mut() {
                *v *= 20.0;
            }
            let mut t = Tape::new();
            let xv = t.constant(x);
            let s = t.softmax(xv, Axis::Cols).unwrap();
            let st = t.value(s);
            for r in 0..4 {
                let row: f64 = (0..6).map(|c| st.at(r, c)).sum();
                assert!((row - 1.0).abs() < 1e-9);
            }
            assert!(st.data().iter().all(|v| *v >= 0.0 && *v <= 1.0));
            let cs = t.softmax(xv, Axis::Rows).unwrap();
            for c in 0..6 {
                let col: f64 = (0..4).map(|r| t.value(cs).at(r, c)).sum();
                assert!((col - 1.0).abs() < 1e-9);
            }
        }
    }
}
