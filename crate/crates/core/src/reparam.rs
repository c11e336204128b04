//! Deep diagonal linear reparameterization `x = w_1 ⊙ w_2 ⊙ ... ⊙ w_L`:
//! storage, products, per-layer gradients and saddle-set diagnostics.

use crate::error::{Error, Result};

/// The `L` per-layer weight vectors realizing `x = Π w_i` coordinatewise.
/// Depth and width are fixed at construction; steppers produce new stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Vec<f64>>,
}

impl LayerStack {
    pub fn new(layers: Vec<Vec<f64>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter(
                "layer stack needs depth >= 1".to_string(),
            ));
        }
        let width = layers[0].len();
        if width == 0 {
            return Err(Error::InvalidParameter(
                "layer stack needs width >= 1".to_string(),
            ));
        }
        if layers.iter().any(|l| l.len() != width) {
            return Err(Error::ShapeMismatch(
                "all layers must share the same width".to_string(),
            ));
        }
        Ok(Self { layers })
    }

    /// All-zero stack; the only sensible start for depth 1 where the
    /// near-saddle scheme below does not apply.
    pub fn zeros(width: usize, depth: usize) -> Result<Self> {
        Self::new(vec![vec![0.0; width]; depth])
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.layers[0].len()
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &[f64] {
        &self.layers[i]
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.layers
    }
}

/// Coordinatewise product over the layers.
pub fn product(stack: &LayerStack) -> Vec<f64> {
    let mut x = stack.layer(0).to_vec();
    for layer in &stack.layers()[1..] {
        for (xi, wi) in x.iter_mut().zip(layer) {
            *xi *= wi;
        }
    }
    x
}

/// Per-layer gradients of `f(product(stack))` given the outer gradient `gx`:
/// the i-th entry is `(Π_{j≠i} w_j) ⊙ gx`.
///
/// The leave-one-out products come from prefix/suffix sweeps, never from
/// dividing the full product by a layer entry; the flows operate right where
/// such a division would be 0/0.
pub fn layer_gradients(stack: &LayerStack, gx: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = stack.width();
    if gx.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "gradient width {} != stack width {n}",
            gx.len()
        )));
    }
    let depth = stack.depth();
    let mut grads = vec![vec![0.0; n]; depth];

    // prefix pass: grads[i] holds w_0 ⊙ ... ⊙ w_{i-1}
    let mut prefix = vec![1.0; n];
    for (grad, layer) in grads.iter_mut().zip(stack.layers()) {
        grad.copy_from_slice(&prefix);
        for (p, w) in prefix.iter_mut().zip(layer) {
            *p *= w;
        }
    }
    // suffix pass folds in w_{i+1} ⊙ ... ⊙ w_{L-1} and the outer gradient
    let mut suffix = vec![1.0; n];
    for i in (0..depth).rev() {
        for j in 0..n {
            grads[i][j] *= suffix[j] * gx[j];
        }
        for (s, w) in suffix.iter_mut().zip(stack.layer(i)) {
            *s *= w;
        }
    }
    Ok(grads)
}

/// Near-saddle initialization: layer 1 is zero, layers 2..L sit at
/// `lambda * 1`. The stack is then `lambda^q`-balanced for every exponent q.
pub fn init_near_saddle(n: usize, depth: usize, lambda: f64) -> Result<LayerStack> {
    if depth < 2 {
        return Err(Error::InvalidParameter(
            "near-saddle init needs depth >= 2".to_string(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "near-saddle init needs lambda > 0, got {lambda}"
        )));
    }
    let mut layers = vec![vec![lambda; n]; depth];
    layers[0] = vec![0.0; n];
    LayerStack::new(layers)
}

/// Local curvature diagnostic at a saddle coordinate where exactly two
/// layers vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport {
    pub coordinate_index: usize,
    pub zero_layer_indices: (usize, usize),
    /// `±sqrt(Π_{l∉pair} w_l) * |g|`; meaningful only when `complex_pair` is
    /// false.
    pub block_eigenvalues: (f64, f64),
    pub gradient_component: f64,
    /// Set when the leave-two-out product is negative, so the `±sqrt` pair
    /// would be imaginary.
    pub complex_pair: bool,
}

/// Eigenvalue pair of the saddle Hessian block at `coordinate`, for the two
/// zeroed layers in `zero_pair`. Requires exactly those two layers to vanish
/// there and every other layer to be nonzero.
pub fn saddle_block_eigs(
    stack: &LayerStack,
    gx: &[f64],
    coordinate: usize,
    zero_pair: (usize, usize),
) -> Result<SaddleReport> {
    let n = stack.width();
    let depth = stack.depth();
    if gx.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "gradient width {} != stack width {n}",
            gx.len()
        )));
    }
    if coordinate >= n {
        return Err(Error::InvalidParameter(format!(
            "coordinate {coordinate} out of range for width {n}"
        )));
    }
    let (i, j) = zero_pair;
    if i == j || i >= depth || j >= depth {
        return Err(Error::InvalidParameter(format!(
            "zero pair ({i}, {j}) invalid for depth {depth}"
        )));
    }
    for (l, layer) in stack.layers().iter().enumerate() {
        let v = layer[coordinate];
        let should_be_zero = l == i || l == j;
        if should_be_zero && v != 0.0 {
            return Err(Error::PreconditionViolation(format!(
                "layer {l} must vanish at coordinate {coordinate}, found {v}"
            )));
        }
        if !should_be_zero && v == 0.0 {
            return Err(Error::PreconditionViolation(format!(
                "layer {l} must be nonzero at coordinate {coordinate}"
            )));
        }
    }

    let leave_two_out: f64 = stack
        .layers()
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != i && *l != j)
        .map(|(_, layer)| layer[coordinate])
        .product();
    let g = gx[coordinate];
    let (eigs, complex_pair) = if leave_two_out >= 0.0 {
        let e = leave_two_out.sqrt() * g.abs();
        ((e, -e), false)
    } else {
        ((0.0, 0.0), true)
    };
    Ok(SaddleReport {
        coordinate_index: coordinate,
        zero_layer_indices: zero_pair,
        block_eigenvalues: eigs,
        gradient_component: g,
        complex_pair,
    })
}
