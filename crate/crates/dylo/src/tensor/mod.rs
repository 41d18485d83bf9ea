//! Tensors and reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheaply clonable handle to a flat row-major buffer plus
//! shape (layout is NCHW for 4-D data). Differentiable operations live on
//! [`Tape`]: each call computes the forward result and, when any operand has
//! gradients enabled, records a node holding the operand handles and the
//! backward rule. [`Tape::backward`] walks the node list once in reverse and
//! accumulates gradients into every tensor on the path, leaves included.
//!
//! Numeric work is generic over [`Scalar`]; training runs in `f32`, while
//! gradient verification instantiates the same code with `f64` so that
//! central finite differences resolve at tolerance 1e-4.
//!
//! Handles are reference-counted for single-threaded use; a tensor that has
//! been detached from any live tape can be deep-copied and moved across
//! threads as plain data.

mod kernels;
mod tape;

pub use tape::{ElemKind, Tape};

use crate::error::{Error, Result};
use std::cell::{Ref, RefCell, RefMut};
use std::fmt;
use std::rc::Rc;

/// Floating-point element type for tensors: `f32` for training and
/// inference, `f64` for finite-difference gradient verification.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssignOps
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

pub(crate) struct Inner<T: Scalar> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub grad_enabled: bool,
    pub grad: Option<Vec<T>>,
    /// Unique id of the tape that produced this tensor, `None` for leaves.
    pub produced_by: Option<u64>,
}

/// Shared handle to an n-dimensional array of scalars.
pub struct Tensor<T: Scalar> {
    pub(crate) inner: Rc<RefCell<Inner<T>>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Tensor<T> {
    /// Leaf tensor with gradients disabled.
    pub fn new(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} (numel {})",
                data.len(),
                shape,
                numel
            )));
        }
        Ok(Self::from_parts(data, shape.to_vec(), false))
    }

    /// Leaf tensor with gradients enabled (a trainable parameter).
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let t = Self::new(data, shape)?;
        t.set_grad_enabled(true);
        Ok(t)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self::from_parts(vec![T::zero(); numel], shape.to_vec(), false)
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let numel = shape.iter().product();
        Self::from_parts(vec![value; numel], shape.to_vec(), false)
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(vec![value], vec![1], false)
    }

    pub(crate) fn from_parts(data: Vec<T>, shape: Vec<usize>, grad_enabled: bool) -> Self {
        Tensor {
            inner: Rc::new(RefCell::new(Inner {
                shape,
                data,
                grad_enabled,
                grad: None,
                produced_by: None,
            })),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    pub fn grad_enabled(&self) -> bool {
        self.inner.borrow().grad_enabled
    }

    pub fn set_grad_enabled(&self, enabled: bool) {
        self.inner.borrow_mut().grad_enabled = enabled;
    }

    /// Copy of the underlying buffer.
    pub fn to_vec(&self) -> Vec<T> {
        self.inner.borrow().data.clone()
    }

    /// Copy of the gradient buffer, if backward has populated one.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        let b = self.inner.borrow();
        assert_eq!(b.data.len(), 1, "item() on tensor of shape {:?}", b.shape);
        b.data[0]
    }

    /// Element at a multi-dimensional index (row-major).
    pub fn at(&self, index: &[usize]) -> T {
        let b = self.inner.borrow();
        assert_eq!(index.len(), b.shape.len(), "index rank mismatch");
        let mut flat = 0usize;
        for (i, (&ix, &dim)) in index.iter().zip(b.shape.iter()).enumerate() {
            assert!(ix < dim, "index {ix} out of bounds for axis {i} (dim {dim})");
            flat = flat * dim + ix;
        }
        b.data[flat]
    }

    /// Overwrite the buffer in place (same length required).
    pub fn set_data(&self, data: &[T]) {
        let mut b = self.inner.borrow_mut();
        assert_eq!(b.data.len(), data.len(), "set_data length mismatch");
        b.data.copy_from_slice(data);
    }

    /// Add `delta` to one element (used by finite-difference probes).
    pub fn nudge(&self, flat_index: usize, delta: T) {
        let mut b = self.inner.borrow_mut();
        b.data[flat_index] += delta;
    }

    /// Detached deep copy: fresh buffer, no gradient, no tape link.
    pub fn deep_clone(&self) -> Self {
        let b = self.inner.borrow();
        Self::from_parts(b.data.clone(), b.shape.clone(), false)
    }

    /// Convert elementwise to another scalar type (detached copy).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        let b = self.inner.borrow();
        let data = b.data.iter().map(|&v| U::from_f64(v.to_f64())).collect();
        Tensor::from_parts(data, b.shape.clone(), false)
    }

    pub(crate) fn borrow(&self) -> Ref<'_, Inner<T>> {
        self.inner.borrow()
    }

    pub(crate) fn borrow_mut(&self) -> RefMut<'_, Inner<T>> {
        self.inner.borrow_mut()
    }

    /// Accumulate into the gradient buffer, allocating zeros on first touch.
    pub(crate) fn accumulate_grad(&self, delta: &[T]) {
        let mut b = self.inner.borrow_mut();
        let n = b.data.len();
        let g = b.grad.get_or_insert_with(|| vec![T::zero(); n]);
        debug_assert_eq!(g.len(), delta.len());
        for (gi, &di) in g.iter_mut().zip(delta.iter()) {
            *gi += di;
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.inner.borrow();
        write!(
            f,
            "Tensor{{shape: {:?}, grad_enabled: {}, data: ",
            b.shape, b.grad_enabled
        )?;
        if b.data.len() <= 8 {
            write!(f, "{:?}", b.data)?;
        } else {
            write!(f, "[{} elements]", b.data.len())?;
        }
        write!(f, "}}")
    }
}
