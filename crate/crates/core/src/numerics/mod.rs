//! Dense linear algebra, small MLPs with exact gradients, losses, the Adam
//! optimizer, seeded random streams and a finite-difference gradient checker.
//!
//! Everything runs in `f64`.

mod gradcheck;
mod loss;
mod mlp;
mod optim;
pub mod rng;

pub use gradcheck::{grad_check, GradCheck};
pub use loss::{log_sum_exp, loss_ce, loss_mse, softmax};
pub use mlp::{Activation, Dense, Mlp, Tape};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use rng::{stream, Purpose, Rng};

/// Read/write access to a model's trainable parameters as a sequence of
/// contiguous slices. The visiting order defines the flat layout.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }
}

impl Parameters for Vec<f64> {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self)
    }
}

impl<P: Parameters> Parameters for [P] {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for p in self {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for p in self {
            p.visit_mut(f);
        }
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.as_slice().visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.as_mut_slice().visit_mut(f)
    }
}

pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.num_params());
    p.visit(&mut |s| out.extend_from_slice(s));
    out
}

/// Overwrites `p` from a flat slice laid out as [`flatten`] produces it.
///
/// Panics if `src` is shorter than the parameter count.
pub fn assign<P: Parameters + ?Sized>(p: &mut P, src: &[f64]) {
    let mut offset = 0;
    p.visit_mut(&mut |s| {
        s.copy_from_slice(&src[offset..offset + s.len()]);
        offset += s.len();
    });
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index of the largest entry; first one wins on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
