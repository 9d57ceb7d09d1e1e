use std::rc::Rc;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

/// Index of a parameter in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable matrices.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Real> {
    names: Vec<String>,
    values: Vec<Rc<Array2<T>>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.names.push(name.into());
        self.values.push(Rc::new(value));
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub(crate) fn shared(&self, id: ParamId) -> Rc<Array2<T>> {
        Rc::clone(&self.values[id.0])
    }

    /// Mutable access; copies the matrix if a tape still holds it.
    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        Rc::make_mut(&mut self.values[id.0])
    }

    /// Replaces a value, keeping its shape.
    pub fn set(&mut self, id: ParamId, value: Array2<T>) -> Result<()> {
        if value.dim() != self.values[id.0].dim() {
            return Err(Error::shape(
                "param_set",
                format!("{} expects {:?}, got {:?}", self.names[id.0], self.values[id.0].dim(), value.dim()),
            ));
        }
        self.values[id.0] = Rc::new(value);
        Ok(())
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias correction. Each parameter keeps its own step count so a
/// parameter updated only in some phases is corrected for its own history.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    pub config: AdamConfig,
    m: Vec<Option<Array2<T>>>,
    v: Vec<Option<Array2<T>>>,
    steps: Vec<u64>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            m: Vec::new(),
            v: Vec::new(),
            steps: Vec::new(),
        }
    }

    fn ensure(&mut self, n: usize) {
        if self.m.len() < n {
            self.m.resize(n, None);
            self.v.resize(n, None);
            self.steps.resize(n, 0);
        }
    }

    /// Applies one update per distinct parameter; repeated ids are summed first.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[(ParamId, Array2<T>)]) -> Result<()> {
        self.ensure(store.len());
        let mut merged: Vec<Option<Array2<T>>> = vec![None; store.len()];
        for (id, g) in grads {
            if g.dim() != store.get(*id).dim() {
                return Err(Error::shape(
                    "adam_step",
                    format!("{}: grad {:?} vs param {:?}", store.name(*id), g.dim(), store.get(*id).dim()),
                ));
            }
            match &mut merged[id.0] {
                Some(acc) => *acc += g,
                slot => *slot = Some(g.clone()),
            }
        }
        let c = self.config;
        let (b1, b2, eps, lr, wd) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps), c.lr, T::of(c.weight_decay));
        for (i, g) in merged.into_iter().enumerate() {
            let Some(mut g) = g else { continue };
            let id = ParamId(i);
            if c.weight_decay != 0.0 {
                g.scaled_add(wd, store.get(id));
            }
            let m = self.m[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            let step = T::of(lr / (1.0 - c.beta1.powi(t)));
            let vc = T::of(1.0 / (1.0 - c.beta2.powi(t)));
            let p = store.get_mut(id);
            Zip::from(p).and(&mut *m).and(&mut *v).and(&g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= step * *m / ((*v * vc).sqrt() + eps);
            });
            if p_non_finite(store.get(id)) {
                return Err(Error::NonFinite { op: "adam_step" });
            }
        }
        Ok(())
    }

    /// First moments, second moments and step counts, for checkpointing.
    #[allow(clippy::type_complexity)]
    pub fn state(&self) -> (&[Option<Array2<T>>], &[Option<Array2<T>>], &[u64]) {
        (&self.m, &self.v, &self.steps)
    }

    pub fn from_state(
        config: AdamConfig,
        m: Vec<Option<Array2<T>>>,
        v: Vec<Option<Array2<T>>>,
        steps: Vec<u64>,
    ) -> Result<Self> {
        if m.len() != v.len() || m.len() != steps.len() {
            return Err(Error::Checkpoint("optimizer state lengths differ".into()));
        }
        Ok(Adam { config, m, v, steps })
    }
}

fn p_non_finite<T: Real>(p: &Array2<T>) -> bool {
    p.iter().any(|x| !x.is_finite())
}
