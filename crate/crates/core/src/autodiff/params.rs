use std::sync::Arc;

use rand::Rng;

use super::{Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameter tensors in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor>>,
}

/// Graph handles for every parameter of a store, indexed by [`ParamId`].
pub struct Bound(Vec<Var>);

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(Arc::new(value));
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform init in `[-bound, bound]`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut R,
    ) -> ParamId {
        let data = (0..rows * cols)
            .map(|_| if bound > 0.0 { rng.gen_range(-bound..=bound) } else { 0.0 })
            .collect();
        self.add(name, Tensor::from_vec(rows, cols, data).expect("shape"))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn by_index(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut Tensor {
        Arc::make_mut(&mut self.tensors[i])
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter().map(|t| t.as_ref()))
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Bind as differentiable leaves.
    pub fn bind(&self, graph: &mut Graph) -> Bound {
        Bound(self.tensors.iter().map(|t| graph.param(t)).collect())
    }

    /// Bind as constants for inference.
    pub fn bind_frozen(&self, graph: &mut Graph) -> Bound {
        Bound(self.tensors.iter().map(|t| graph.frozen(t)).collect())
    }

    /// Gradients for every parameter after `graph.backward`, zeros where a
    /// parameter did not take part in the loss.
    pub fn collect_grads(&self, graph: &mut Graph, bound: &Bound) -> Vec<Tensor> {
        self.tensors
            .iter()
            .zip(bound.vars())
            .map(|(t, &v)| {
                graph
                    .take_grad(v)
                    .unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()))
            })
            .collect()
    }

    /// Replace every tensor, keeping names. Shapes must match.
    pub fn replace_values(&mut self, values: Vec<Tensor>) {
        assert_eq!(values.len(), self.tensors.len());
        for (slot, v) in self.tensors.iter_mut().zip(values) {
            assert_eq!(slot.shape(), v.shape());
            *slot = Arc::new(v);
        }
    }
}
