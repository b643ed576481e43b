//! Named learnable parameters with gradient buffers.

use std::collections::HashMap;

use super::tensor::Tensor;
use super::NumericsError;

/// Handle into a [`ParamSet`]. Stable for the lifetime of the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// A learnable tensor plus its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Ordered collection of parameters. Order is creation order and is the
/// canonical order for optimizer updates, gradient export and checkpoints.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let grad = Tensor::zeros(value.shape());
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id.0);
        self.params.push(Parameter { name, value, grad });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id_by_name(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Total number of scalar values across all parameters.
    pub fn value_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Replaces a parameter value, keeping the shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<(), NumericsError> {
        let p = &mut self.params[id.0];
        if value.shape() != p.value.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "set_value",
                detail: format!(
                    "parameter {} has shape {:?}, got {:?}",
                    p.name,
                    p.value.shape(),
                    value.shape()
                ),
            });
        }
        p.value = value;
        Ok(())
    }

    /// Name of the first parameter whose gradient contains a non-finite value.
    pub fn first_non_finite_grad(&self) -> Option<&str> {
        self.params
            .iter()
            .find(|p| !p.grad.all_finite())
            .map(|p| p.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_names_are_stable() {
        let mut set = ParamSet::new();
        let a = set.add("a", Tensor::zeros(&[2]));
        let b = set.add("b", Tensor::zeros(&[3]));
        assert_eq!(set.get(a).name, "a");
        assert_eq!(set.get(b).value.len(), 3);
        assert_eq!(set.id_by_name("b"), Some(b));
        assert_eq!(set.value_count(), 5);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicate_names_panic() {
        let mut set = ParamSet::new();
        set.add("w", Tensor::zeros(&[1]));
        set.add("w", Tensor::zeros(&[1]));
    }
}
