//! Uniform view over every stored tensor of a model component.
//!
//! One traversal serves three consumers: the optimizer (trainable slots),
//! the checkpoint writer (all slots, including batch-norm running
//! statistics), and the finite-difference harness (which needs to know
//! which entries are pinned and excluded from gradients).

/// Mutable view of one named tensor. Scalars are exposed as 1x1.
pub struct SlotMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: &'a mut [f64],
    /// Updated by the optimizer. Running statistics are not.
    pub trainable: bool,
    /// Subject to weight decay / max-norm row rescaling.
    pub weight_matrix: bool,
    /// Diagonal entries are held fixed; their gradient is discarded.
    pub pinned_diag: bool,
}

/// Read-only counterpart of [`SlotMut`].
pub struct Slot<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: &'a [f64],
    pub trainable: bool,
    pub weight_matrix: bool,
    pub pinned_diag: bool,
}

impl<'a> SlotMut<'a> {
    pub fn matrix(name: impl Into<String>, m: &'a mut crate::matrix::Matrix) -> Self {
        let (rows, cols) = m.shape();
        SlotMut {
            name: name.into(),
            rows,
            cols,
            values: m.data_mut(),
            trainable: true,
            weight_matrix: false,
            pinned_diag: false,
        }
    }

    pub fn vector(name: impl Into<String>, v: &'a mut [f64]) -> Self {
        SlotMut {
            name: name.into(),
            rows: v.len(),
            cols: 1,
            values: v,
            trainable: true,
            weight_matrix: false,
            pinned_diag: false,
        }
    }

    pub fn scalar(name: impl Into<String>, v: &'a mut f64) -> Self {
        SlotMut {
            name: name.into(),
            rows: 1,
            cols: 1,
            values: std::slice::from_mut(v),
            trainable: true,
            weight_matrix: false,
            pinned_diag: false,
        }
    }

    pub fn weight(mut self) -> Self {
        self.weight_matrix = true;
        self
    }

    pub fn pinned_diag(mut self) -> Self {
        self.pinned_diag = true;
        self
    }

    pub fn buffer(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

impl<'a> Slot<'a> {
    pub fn matrix(name: impl Into<String>, m: &'a crate::matrix::Matrix) -> Self {
        let (rows, cols) = m.shape();
        Slot {
            name: name.into(),
            rows,
            cols,
            values: m.data(),
            trainable: true,
            weight_matrix: false,
            pinned_diag: false,
        }
    }

    pub fn vector(name: impl Into<String>, v: &'a [f64]) -> Self {
        Slot {
            name: name.into(),
            rows: v.len(),
            cols: 1,
            values: v,
            trainable: true,
            weight_matrix: false,
            pinned_diag: false,
        }
    }

    pub fn scalar(name: impl Into<String>, v: &'a f64) -> Self {
        Slot {
            name: name.into(),
            rows: 1,
            cols: 1,
            values: std::slice::from_ref(v),
            trainable: true,
            weight_matrix: false,
            pinned_diag: false,
        }
    }

    pub fn weight(mut self) -> Self {
        self.weight_matrix = true;
        self
    }

    pub fn pinned_diag(mut self) -> Self {
        self.pinned_diag = true;
        self
    }

    pub fn buffer(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

/// Named gradient tensor, aligned by position with the trainable slots of
/// the component that produced it.
pub struct GradSlot<'a> {
    pub name: String,
    pub values: &'a [f64],
}

impl<'a> GradSlot<'a> {
    pub fn matrix(name: impl Into<String>, m: &'a crate::matrix::Matrix) -> Self {
        GradSlot {
            name: name.into(),
            values: m.data(),
        }
    }

    pub fn vector(name: impl Into<String>, v: &'a [f64]) -> Self {
        GradSlot {
            name: name.into(),
            values: v,
        }
    }

    pub fn scalar(name: impl Into<String>, v: &'a f64) -> Self {
        GradSlot {
            name: name.into(),
            values: std::slice::from_ref(v),
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}
