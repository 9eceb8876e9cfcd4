use super::params::{Linear, ParamSet, TanhMlp};
use super::NetConfig;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::rng::{stream, tags};

/// Probabilities are clamped into `[P_FLOOR, 1 - P_FLOOR]` before any log.
pub const P_FLOOR: f64 = 1e-7;

/// State-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    params: ParamSet,
    body: TanhMlp,
    out: Linear,
    state_len: usize,
}

impl GeneratorNet {
    pub fn new(state_len: usize, cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(seed, &[tags::GENERATOR_INIT]);
        let mut params = ParamSet::new();
        let body = TanhMlp::new(&mut params, "g", &[state_len, cfg.hidden, cfg.hidden], &mut rng);
        let out = Linear::new(&mut params, "g.out", cfg.hidden, 1, 1.0, &mut rng);
        Ok(Self { params, body, out, state_len })
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// `states` is `n × state_len`; returns `n × 1`.
    pub fn forward(&self, tape: &mut Tape, bound: &[Var], states: Var) -> Result<Var> {
        let h = self.body.forward(tape, bound, states)?;
        self.out.forward(tape, bound, h)
    }

    pub fn values(&self, states: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let s = tape.constant(Tensor::from_rows(states)?);
        let v = self.forward(&mut tape, &bound, s)?;
        Ok(tape.value(v).data().to_vec())
    }
}

/// Scores `(state, value)` pairs: near 1 for empirical returns, near 0 for
/// generated values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    params: ParamSet,
    body: TanhMlp,
    out: Linear,
}

impl DiscriminatorNet {
    pub fn new(state_len: usize, cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(seed, &[tags::DISCRIMINATOR_INIT]);
        let mut params = ParamSet::new();
        let body = TanhMlp::new(&mut params, "d", &[state_len + 1, cfg.hidden, cfg.hidden], &mut rng);
        let out = Linear::new(&mut params, "d.out", cfg.hidden, 1, 1.0, &mut rng);
        Ok(Self { params, body, out })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// `states` is `n × S`, `values` is `n × 1`; returns probabilities `n × 1`.
    pub fn forward(&self, tape: &mut Tape, bound: &[Var], states: Var, values: Var) -> Result<Var> {
        let x = tape.concat_cols(states, values)?;
        let h = self.body.forward(tape, bound, x)?;
        let logit = self.out.forward(tape, bound, h)?;
        Ok(tape.sigmoid(logit))
    }

    pub fn probabilities(&self, states: &[Vec<f64>], values: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let s = tape.constant(Tensor::from_rows(states)?);
        let v = tape.constant(Tensor::new(vec![values.len(), 1], values.to_vec())?);
        let p = self.forward(&mut tape, &bound, s, v)?;
        Ok(tape.value(p).data().to_vec())
    }
}

fn clamped_log(tape: &mut Tape, p: Var, complement: bool) -> Var {
    let p = tape.clamp(p, P_FLOOR, 1.0 - P_FLOOR);
    let p = if complement {
        let neg = tape.neg(p);
        tape.add_scalar(neg, 1.0)
    } else {
        p
    };
    tape.log(p)
}

/// `-(mean log D(real) + mean log(1 - D(fake)))`.
pub fn d_loss(tape: &mut Tape, p_real: Var, p_fake: Var) -> Result<Var> {
    let lr = clamped_log(tape, p_real, false);
    let lf = clamped_log(tape, p_fake, true);
    let a = tape.mean(lr);
    let b = tape.mean(lf);
    let s = tape.add(a, b)?;
    Ok(tape.neg(s))
}

/// `mean log(1 - D(fake))`; the generator descends it.
pub fn g_adv_loss(tape: &mut Tape, p_fake: Var) -> Var {
    let lf = clamped_log(tape, p_fake, true);
    tape.mean(lf)
}

/// Mean squared error between predicted values and return targets.
pub fn g_value_loss(tape: &mut Tape, values: Var, returns: Var) -> Result<Var> {
    tape.mse(values, returns)
}

fn clampp(p: f64) -> f64 {
    p.clamp(P_FLOOR, 1.0 - P_FLOOR)
}

/// Plain-number form of [`d_loss`].
pub fn d_loss_value(p_real: &[f64], p_fake: &[f64]) -> f64 {
    let a = p_real.iter().map(|p| clampp(*p).ln()).sum::<f64>() / p_real.len() as f64;
    let b = p_fake.iter().map(|p| (1.0 - clampp(*p)).ln()).sum::<f64>() / p_fake.len() as f64;
    -(a + b)
}

/// Plain-number form of [`g_adv_loss`].
pub fn g_adv_loss_value(p_fake: &[f64]) -> f64 {
    p_fake.iter().map(|p| (1.0 - clampp(*p)).ln()).sum::<f64>() / p_fake.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_diff_check;
    use crate::rng::stream;
    use rand::Rng;
    use std::f64::consts::LN_2;

    fn col(tape: &mut Tape, v: &[f64]) -> Var {
        tape.constant(Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap())
    }

    #[test]
    fn loss_unit_values() {
        let mut t = Tape::new();
        let half = col(&mut t, &[0.5; 4]);
        let d = d_loss(&mut t, half, half).unwrap();
        assert!((t.item(d) - 2.0 * LN_2).abs() < 1e-12);
        let g = g_adv_loss(&mut t, half);
        assert!((t.item(g) - 0.5f64.ln()).abs() < 1e-12);

        let real = col(&mut t, &[1.0]);
        let fake = col(&mut t, &[0.0]);
        let d = d_loss(&mut t, real, fake).unwrap();
        assert!(t.item(d) < 1e-6);
        let g = g_adv_loss(&mut t, real);
        assert!((t.item(g) - P_FLOOR.ln()).abs() < 1e-6);

        let v = col(&mut t, &[1.0]);
        let r = col(&mut t, &[3.0]);
        let l = g_value_loss(&mut t, v, r).unwrap();
        assert_eq!(t.item(l), 4.0);
        let l = g_value_loss(&mut t, r, r).unwrap();
        assert_eq!(t.item(l), 0.0);
    }

    #[test]
    fn batch_losses_match_scalar_oracles() {
        let mut rng = stream(20, &[]);
        for _ in 0..20 {
            let pr: Vec<f64> = (0..6).map(|_| rng.random_range(0.01..0.99)).collect();
            let pf: Vec<f64> = (0..6).map(|_| rng.random_range(0.01..0.99)).collect();
            let mut t = Tape::new();
            let (a, b) = (col(&mut t, &pr), col(&mut t, &pf));
            let d = d_loss(&mut t, a, b).unwrap();
            let by_hand: f64 = -(pr.iter().map(|p| p.ln()).sum::<f64>()
                + pf.iter().map(|p| (1.0 - p).ln()).sum::<f64>())
                / 6.0;
            assert!((t.item(d) - by_hand).abs() < 1e-12);
            assert!((d_loss_value(&pr, &pf) - by_hand).abs() < 1e-12);
            let g = g_adv_loss(&mut t, b);
            assert!((t.item(g) - g_adv_loss_value(&pf)).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_gradients_pass_finite_differences() {
        let mut rng = stream(21, &[]);
        let p: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..0.95)).collect();
        let q: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..0.95)).collect();
        let x = Tensor::new(vec![5, 1], p.clone()).unwrap();
        let qq = q.clone();
        let err = finite_diff_check(
            |t, x| {
                let f = col(t, &qq);
                d_loss(t, x, f)
            },
            &x,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
        let err = finite_diff_check(|t, x| Ok(g_adv_loss(t, x)), &x).unwrap();
        assert!(err < 1e-4, "{err}");
        let err = finite_diff_check(
            |t, x| {
                let r = col(t, &q);
                g_value_loss(t, x, r)
            },
            &x,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn critic_outputs_in_range() {
        let cfg = NetConfig::default();
        let g = GeneratorNet::new(10, &cfg, 3).unwrap();
        let d = DiscriminatorNet::new(10, &cfg, 3).unwrap();
        let s = vec![vec![0.3; 10], vec![-1.0; 10]];
        let v = g.values(&s).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        let p = d.probabilities(&s, &[100.0, -100.0]).unwrap();
        assert!(p.iter().all(|x| *x > 0.0 && *x < 1.0));
    }
}
