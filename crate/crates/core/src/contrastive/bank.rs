use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Detached per-view copies of the latest normalized node embeddings,
/// used as NCE negatives. Replaced wholesale after every optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBank {
    view1: Matrix<f32>,
    view2: Matrix<f32>,
    initialized: bool,
}

impl EmbeddingBank {
    pub fn new(num_nodes: usize, dim: usize) -> Self {
        Self {
            view1: Matrix::zeros(num_nodes, dim),
            view2: Matrix::zeros(num_nodes, dim),
            initialized: false,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn view1(&self) -> &Matrix<f32> {
        &self.view1
    }

    pub fn view2(&self) -> &Matrix<f32> {
        &self.view2
    }

    pub fn update(&mut self, z1: &Matrix<f32>, z2: &Matrix<f32>) -> Result<()> {
        let want = self.view1.shape();
        if z1.shape() != want || z2.shape() != want {
            return Err(Error::shape(
                "bank_update",
                format!("bank {want:?}, got {:?} and {:?}", z1.shape(), z2.shape()),
            ));
        }
        self.view1.as_mut_slice().copy_from_slice(z1.as_slice());
        self.view2.as_mut_slice().copy_from_slice(z2.as_slice());
        self.initialized = true;
        Ok(())
    }
}
