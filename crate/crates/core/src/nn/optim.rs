//! First-order optimizers. Every `step` takes an ascent direction: the
//! parameters move along `+direction`.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn build(self, dim: usize, momentum: f64) -> Optimizer {
        match self {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(dim)),
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(dim, momentum)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], direction: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), direction.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(direction)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p += lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Plain SGD with heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(dim: usize, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, params: &mut [f64], direction: &[f64], lr: f64) {
        for ((p, &g), u) in params.iter_mut().zip(direction).zip(self.velocity.iter_mut()) {
            *u = self.momentum * *u + g;
            *p += lr * *u;
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

impl Optimizer {
    pub fn step(&mut self, params: &mut [f64], direction: &[f64], lr: f64) {
        match self {
            Optimizer::Adam(a) => a.step(params, direction, lr),
            Optimizer::Sgd(s) => s.step(params, direction, lr),
        }
    }
}
