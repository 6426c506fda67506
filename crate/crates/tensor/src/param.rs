use crate::{Real, Tensor};

/// Trainable tensor together with its gradient buffer and Adam moments.
#[derive(Debug, Clone)]
pub struct Parameter<F = f32> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
    pub adam_m: Tensor<F>,
    pub adam_v: Tensor<F>,
    pub step_count: u64,
    pub frozen: bool,
    /// When set, only rows marked here since the last `zero_grad` carry
    /// gradient and only those rows are touched by the optimizer.
    touched_rows: Option<Vec<bool>>,
}

impl<F: Real> Parameter<F> {
    pub fn new(name: impl Into<String>, value: Tensor<F>) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            grad: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            value,
            step_count: 0,
            frozen: false,
            touched_rows: None,
        }
    }

    /// Row-sparse parameter (embedding tables): gradients and optimizer
    /// updates only visit rows that were actually looked up.
    pub fn new_row_sparse(name: impl Into<String>, value: Tensor<F>) -> Self {
        let rows = value.rows();
        let mut p = Self::new(name, value);
        p.touched_rows = Some(vec![false; rows]);
        p
    }

    pub fn is_row_sparse(&self) -> bool {
        self.touched_rows.is_some()
    }

    pub fn touched_rows(&self) -> Option<&[bool]> {
        self.touched_rows.as_deref()
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn accumulate(&mut self, grad: &[F]) {
        debug_assert_eq!(grad.len(), self.grad.len());
        for (g, &d) in self.grad.data_mut().iter_mut().zip(grad) {
            *g += d;
        }
        if let Some(rows) = self.touched_rows.as_mut() {
            rows.iter_mut().for_each(|r| *r = true);
        }
    }

    pub fn accumulate_row(&mut self, row: usize, grad: &[F]) {
        for (g, &d) in self.grad.row_mut(row).iter_mut().zip(grad) {
            *g += d;
        }
        if let Some(rows) = self.touched_rows.as_mut() {
            rows[row] = true;
        }
    }

    pub fn zero_grad(&mut self) {
        match self.touched_rows.as_mut() {
            Some(rows) => {
                let cols = self.grad.cols();
                let data = self.grad.data_mut();
                for (r, t) in rows.iter_mut().enumerate() {
                    if *t {
                        data[r * cols..(r + 1) * cols].fill(F::zero());
                        *t = false;
                    }
                }
            }
            None => self.grad.data_mut().fill(F::zero()),
        }
    }

    /// Replaces the value and resets gradient, moments and step count.
    pub fn reset_with(&mut self, value: Tensor<F>) {
        let sparse = self.is_row_sparse();
        let frozen = self.frozen;
        *self = if sparse {
            Parameter::new_row_sparse(std::mem::take(&mut self.name), value)
        } else {
            Parameter::new(std::mem::take(&mut self.name), value)
        };
        self.frozen = frozen;
    }

    /// Clears Adam state, keeping the value.
    pub fn reset_optimizer_state(&mut self) {
        self.adam_m.data_mut().fill(F::zero());
        self.adam_v.data_mut().fill(F::zero());
        self.step_count = 0;
    }

    pub fn cast<G: Real>(&self) -> Parameter<G> {
        Parameter {
            name: self.name.clone(),
            value: self.value.cast(),
            grad: self.grad.cast(),
            adam_m: self.adam_m.cast(),
            adam_v: self.adam_v.cast(),
            step_count: self.step_count,
            frozen: self.frozen,
            touched_rows: self.touched_rows.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Owning collection of parameters, addressed by [`ParamId`].
#[derive(Debug, Clone, Default)]
pub struct ParamStore<F = f32> {
    params: Vec<Parameter<F>>,
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn push(&mut self, p: Parameter<F>) -> ParamId {
        self.params.push(p);
        ParamId(self.params.len() - 1)
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        self.push(Parameter::new(name, value))
    }

    pub fn get(&self, id: ParamId) -> &Parameter<F> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<F> {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<F>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<F>> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            params: self.params.iter().map(Parameter::cast).collect(),
        }
    }
}
