use indexmap::IndexMap;
use nic_autodiff::{
    BatchNormConfig, DropoutGranularity, Mode, ParamStore, RunningStats, Tape, Tensor, Var,
};

use crate::error::{Error, Result};
use crate::rng::Prng;

/// One forward pass: a tape plus the parameters bound onto it.
///
/// Parameters are looked up by name and recorded as tape leaves on first use,
/// so only the parameters a network actually touches receive gradients.
/// Batch-norm running statistics updated in training mode are collected and
/// written back with [`Graph::commit_stats`].
pub struct Graph<'a> {
    pub tape: Tape,
    params: &'a ParamStore,
    bound: IndexMap<String, Var>,
    stats: IndexMap<String, RunningStats>,
    pub mode: Mode,
    rng: Option<&'a mut Prng>,
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a ParamStore, mode: Mode) -> Self {
        Self {
            tape: Tape::new(),
            params,
            bound: IndexMap::new(),
            stats: IndexMap::new(),
            mode,
            rng: None,
        }
    }

    /// Supplies the random stream used by dropout in training mode.
    pub fn with_rng(mut self, rng: &'a mut Prng) -> Self {
        self.rng = Some(rng);
        self
    }

    pub fn params(&self) -> &ParamStore {
        self.params
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let value = self
            .params
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("missing parameter {name}")))?
            .clone();
        let v = self.tape.leaf(value);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.tape.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.tape.value(v)
    }

    /// Names and vars of every parameter bound so far.
    pub fn bound(&self) -> impl Iterator<Item = (&str, Var)> {
        self.bound.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn batch_norm(&mut self, x: Var, prefix: &str, config: BatchNormConfig) -> Result<Var> {
        let gamma = self.param(&format!("{prefix}.gamma"))?;
        let beta = self.param(&format!("{prefix}.beta"))?;
        let mut stats = match self.stats.swap_remove(prefix) {
            Some(s) => s,
            None => {
                let get = |s: &str| -> Result<Vec<f64>> {
                    Ok(self.params.require(&format!("{prefix}.{s}"))?.data().to_vec())
                };
                RunningStats {
                    mean: get("running_mean")?,
                    var: get("running_var")?,
                }
            }
        };
        let y = self
            .tape
            .batch_norm(x, gamma, beta, &mut stats, config, self.mode)?;
        if self.mode == Mode::Train {
            self.stats.insert(prefix.to_string(), stats);
        }
        Ok(y)
    }

    pub fn dropout(&mut self, x: Var, rate: f64, granularity: DropoutGranularity) -> Result<Var> {
        if self.mode == Mode::Infer || rate == 0.0 {
            return Ok(x);
        }
        let rng = self
            .rng
            .as_deref_mut()
            .ok_or_else(|| Error::Invalid("training-mode dropout needs a random stream".into()))?;
        Ok(self.tape.dropout(x, rate, self.mode, granularity, rng)?)
    }

    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let l = self.tape.value(loss);
        if !l.is_finite() {
            return Err(Error::Numeric(format!("loss is not finite: {:?}", l.data())));
        }
        Ok(self.tape.backward(loss)?)
    }

    /// Gradients of every bound parameter, after [`Graph::backward`].
    pub fn grads(&self) -> IndexMap<String, Tensor> {
        self.bound
            .iter()
            .filter_map(|(name, &v)| self.tape.grad(v).map(|g| (name.clone(), g)))
            .collect()
    }

    /// Running statistics collected so far, by batch-norm prefix.
    pub fn take_stats(&mut self) -> IndexMap<String, RunningStats> {
        std::mem::take(&mut self.stats)
    }
}

/// Writes running statistics collected by a training-mode [`Graph`] back
/// into `params`.
pub fn apply_stats(params: &mut ParamStore, stats: &IndexMap<String, RunningStats>) -> Result<()> {
    for (prefix, s) in stats {
        let c = s.mean.len();
        params.insert(format!("{prefix}.running_mean"), Tensor::new(vec![c], s.mean.clone())?);
        params.insert(format!("{prefix}.running_var"), Tensor::new(vec![c], s.var.clone())?);
    }
    Ok(())
}
