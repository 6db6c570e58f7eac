use crate::{NnError, Param, Result, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub lr0: f64,
    /// Per-update inverse-time decay: `lr_t = lr0 / (1 + decay·t)`.
    pub decay: f64,
    pub momentum: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(NnError::Config(format!("learning rate must be positive, got {}", self.lr0)));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(NnError::Config(format!("decay must be non-negative, got {}", self.decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Momentum SGD: `v ← μ·v − lr_t·g; p ← p + v`.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub config: SgdConfig,
    step_count: u64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Sgd {
            config,
            step_count: 0,
            velocity: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Learning rate applied by the next step.
    pub fn current_lr(&self) -> f64 {
        self.config.lr0 / (1.0 + self.config.decay * self.step_count as f64)
    }

    pub fn set_lr0(&mut self, lr0: f64) {
        self.config.lr0 = lr0;
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// Applies one update to every non-frozen parameter. The parameter list
    /// must be presented in the same order on every call.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(NnError::Config(format!(
                "optimizer tracks {} parameters, step received {}",
                self.velocity.len(),
                params.len()
            )));
        }
        for (p, v) in params.iter().zip(&self.velocity) {
            if p.value.shape() != v.shape() {
                return Err(NnError::shape(format!("sgd velocity for {}", p.name), v.shape(), p.value.shape()));
            }
            if !p.frozen && !p.grad.is_finite() {
                return Err(NnError::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        let lr = self.current_lr() as Scalar;
        let mu = self.config.momentum as Scalar;
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            if p.frozen {
                continue;
            }
            let Param { value, grad, .. } = &mut **p;
            for ((w, vel), &g) in value.data_mut().iter_mut().zip(v.data_mut()).zip(grad.data()) {
                *vel = mu * *vel - lr * g;
                *w += *vel;
            }
        }
        self.step_count += 1;
        Ok(())
    }
}

/// Reduce-on-plateau rule: when the best epoch loss has not improved for
/// `patience` consecutive epochs, multiply the learning rate by `factor`
/// (never going below `min_lr`) and restart the wait.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    best: Option<f64>,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(patience: usize, factor: f64, min_lr: f64) -> Result<Self> {
        if patience == 0 {
            return Err(NnError::Config("plateau patience must be >= 1".into()));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(NnError::Config(format!("plateau factor must lie in (0, 1), got {factor}")));
        }
        if !(min_lr >= 0.0) {
            return Err(NnError::Config(format!("min_lr must be non-negative, got {min_lr}")));
        }
        Ok(PlateauScheduler {
            patience,
            factor,
            min_lr,
            best: None,
            wait: 0,
        })
    }

    /// Records one epoch loss and returns the learning rate to use next.
    pub fn observe(&mut self, loss: f64, lr: f64) -> f64 {
        match self.best {
            Some(best) if loss >= best => self.wait += 1,
            _ => {
                self.best = Some(loss);
                self.wait = 0;
            }
        }
        if self.wait >= self.patience {
            self.wait = 0;
            if lr > self.min_lr {
                return (lr * self.factor).max(self.min_lr);
            }
        }
        lr
    }
}

/// Replays [`PlateauScheduler`] over a full loss history.
pub fn plateau_schedule(history: &[f64], lr0: f64, patience: usize, factor: f64, min_lr: f64) -> Result<f64> {
    let mut sched = PlateauScheduler::new(patience, factor, min_lr)?;
    Ok(history.iter().fold(lr0, |lr, &loss| sched.observe(loss, lr)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: Scalar, g: Scalar) -> Param {
        let mut p = Param::new("p", Tensor::full(&[1], v));
        p.grad = Tensor::full(&[1], g);
        p
    }

    #[test]
    fn plain_step() {
        let mut p = scalar_param(0.0, 1.0);
        let mut sgd = Sgd::new(SgdConfig { lr0: 0.1, decay: 0.0, momentum: 0.0 }).unwrap();
        sgd.step(&mut [&mut p]).unwrap();
        assert!((p.value.data()[0] + 0.1).abs() < 1e-15);
        assert_eq!(sgd.step_count(), 1);
    }

    #[test]
    fn two_momentum_steps() {
        let mut p = scalar_param(0.0, 1.0);
        let mut sgd = Sgd::new(SgdConfig { lr0: 0.1, decay: 0.0, momentum: 0.9 }).unwrap();
        sgd.step(&mut [&mut p]).unwrap();
        sgd.step(&mut [&mut p]).unwrap();
        assert!((p.value.data()[0] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn frozen_parameter_keeps_bits() {
        let mut p = scalar_param(0.123, 1.0);
        p.frozen = true;
        let before = p.value.data()[0].to_bits();
        let mut sgd = Sgd::new(SgdConfig { lr0: 0.1, decay: 1e-6, momentum: 0.9 }).unwrap();
        for _ in 0..5 {
            sgd.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.value.data()[0].to_bits(), before);
    }

    #[test]
    fn inverse_time_decay() {
        let mut p = scalar_param(0.0, 0.0);
        let mut sgd = Sgd::new(SgdConfig { lr0: 0.001, decay: 1e-6, momentum: 0.9 }).unwrap();
        for _ in 0..1000 {
            sgd.step(&mut [&mut p]).unwrap();
        }
        assert!((sgd.current_lr() - 0.001 / (1.0 + 1e-6 * 1000.0)).abs() < 1e-18);
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut p = scalar_param(0.0, Scalar::NAN);
        let mut sgd = Sgd::new(SgdConfig { lr0: 0.1, decay: 0.0, momentum: 0.0 }).unwrap();
        let err = sgd.step(&mut [&mut p]).unwrap_err();
        assert!(matches!(err, NnError::NonFinite(ref m) if m.contains('p')));
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(Sgd::new(SgdConfig { lr0: 0.0, decay: 0.0, momentum: 0.0 }).is_err());
        assert!(Sgd::new(SgdConfig { lr0: 0.1, decay: 0.0, momentum: 1.0 }).is_err());
        assert!(PlateauScheduler::new(0, 0.1, 0.0).is_err());
        assert!(PlateauScheduler::new(2, 1.5, 0.0).is_err());
    }

    #[test]
    fn plateau_rules() {
        // strictly decreasing: untouched
        assert_eq!(plateau_schedule(&[5.0, 4.0, 3.0, 2.0], 0.1, 2, 0.1, 0.0).unwrap(), 0.1);
        // flat, patience 2: epoch 1 sets best, epochs 2 and 3 wait, cut after epoch 3
        let mut s = PlateauScheduler::new(2, 0.1, 0.0).unwrap();
        let lrs: Vec<f64> = [1.0, 1.0, 1.0].iter().scan(0.1, |lr, &l| {
            *lr = s.observe(l, *lr);
            Some(*lr)
        }).collect();
        assert_eq!(lrs[..2], [0.1, 0.1]);
        assert!((lrs[2] - 0.01).abs() < 1e-15);
        // already at the floor
        assert_eq!(plateau_schedule(&[1.0; 10], 1e-4, 2, 0.1, 1e-4).unwrap(), 1e-4);
    }
}
