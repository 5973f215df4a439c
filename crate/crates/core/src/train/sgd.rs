//! Stochastic gradient descent with optional heavy-ball momentum.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{ParamKind, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// `v <- mu * v + g; p <- p - lr * v`, or `p <- p - lr * g` without momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd<T: Scalar> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::param("lr", format!("{lr} is not a non-negative number")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::param("momentum", format!("{momentum} is outside [0, 1)")));
        }
        Ok(Sgd { lr, momentum, velocity: Vec::new() })
    }

    /// Momentum buffers in parameter order; empty until the first step.
    pub fn velocity(&self) -> &[(String, Tensor<T>)] {
        &self.velocity
    }

    pub fn set_velocity(&mut self, velocity: Vec<(String, Tensor<T>)>) {
        self.velocity = velocity;
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &BTreeMap<String, Tensor<T>>) -> Result<()> {
        let names = params.trainable_names();
        for name in &names {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::Contract(format!("no gradient for trainable `{name}`")))?;
            let p = params.get(name).map(|p| p.shape());
            if p != Some(g.shape()) {
                return Err(Error::Contract(format!("gradient for `{name}` has shape {:?}", g.shape())));
            }
        }
        if self.momentum > 0.0 && self.velocity.is_empty() {
            self.velocity = names
                .iter()
                .map(|n| (n.clone(), Tensor::zeros(params.get(n).map(|p| p.shape().to_vec()).unwrap_or_default())))
                .collect();
        }
        let lr = T::of(self.lr);
        let mu = T::of(self.momentum);
        for (i, name) in names.iter().enumerate() {
            let g = &grads[name];
            let p = params.get_mut(name).ok_or_else(|| Error::Contract(format!("`{name}` vanished")))?;
            if self.momentum > 0.0 {
                let (vname, v) = &mut self.velocity[i];
                if vname != name || v.shape() != g.shape() {
                    return Err(Error::Contract(format!("momentum buffer `{vname}` does not match `{name}`")));
                }
                for ((pv, vv), &gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                    *vv = mu * *vv + gv;
                    *pv = *pv - lr * *vv;
                }
            } else {
                for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                    *pv = *pv - lr * gv;
                }
            }
        }
        debug_assert!(names.iter().all(|n| params.kind(n) == Some(ParamKind::Trainable)));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Tensor<f64> {
        Tensor::from_f64([1], &[v]).unwrap()
    }

    fn store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("p", ParamKind::Trainable, one(1.0)).unwrap();
        s.insert("b", ParamKind::Buffer, one(5.0)).unwrap();
        s
    }

    fn grads() -> BTreeMap<String, Tensor<f64>> {
        BTreeMap::from([(String::from("p"), one(1.0))])
    }

    #[test]
    fn plain_step() {
        let mut s = store();
        Sgd::new(0.1, 0.0).unwrap().step(&mut s, &grads()).unwrap();
        assert!((s.get("p").unwrap().data()[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.get("b").unwrap().data()[0], 5.0);
    }

    #[test]
    fn zero_lr_is_noop() {
        let mut s = store();
        Sgd::new(0.0, 0.9).unwrap().step(&mut s, &grads()).unwrap();
        assert_eq!(s.get("p").unwrap().data()[0], 1.0);
    }

    #[test]
    fn momentum_recursion() {
        let mut s = store();
        let mut opt = Sgd::new(0.1, 0.9).unwrap();
        opt.step(&mut s, &grads()).unwrap();
        assert!((s.get("p").unwrap().data()[0] - 0.9).abs() < 1e-12);
        opt.step(&mut s, &grads()).unwrap();
        assert!((s.get("p").unwrap().data()[0] - 0.71).abs() < 1e-12);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let mut s = store();
        let err = Sgd::new(0.1, 0.0).unwrap().step(&mut s, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
