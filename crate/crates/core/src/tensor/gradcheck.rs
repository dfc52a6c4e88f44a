//! Central finite-difference verification of tape gradients.

use crate::error::Result;
use crate::tensor::{Matrix, ParamSet, Tape, Var};

#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub name: String,
    /// `‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, 1e-8)`.
    pub relative_error: f64,
    pub max_abs_error: f64,
    pub analytic_norm: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.groups.iter().map(|g| g.relative_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.groups.iter().all(|g| g.relative_error < tol)
    }
}

/// Compares the tape gradient of `loss_fn` with central differences of step
/// `h` for every trainable tensor in `params`. `loss_fn` must be
/// deterministic (evaluate with dropout off).
pub fn check_gradients<F>(params: &ParamSet, h: f64, loss_fn: F) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &ParamSet) -> Result<Var<'t>>,
{
    let mut analytic = params.clone();
    analytic.zero_grads();
    {
        let tape = Tape::new();
        let loss = loss_fn(&tape, &analytic)?;
        tape.backward_into(loss, &mut analytic)?;
    }
    let eval = |ps: &ParamSet| -> Result<f64> {
        let tape = Tape::new();
        Ok(loss_fn(&tape, ps)?.item())
    };

    let mut probe = params.clone();
    let mut groups = Vec::new();
    for id in params.ids() {
        let t = params.get(id);
        if !t.requires_grad {
            continue;
        }
        let (r, c) = t.value.shape();
        let a = analytic
            .get(id)
            .grad
            .clone()
            .unwrap_or_else(|| Matrix::zeros(r, c));
        let mut numeric = Matrix::zeros(r, c);
        for k in 0..r * c {
            let orig = t.value.data()[k];
            probe.get_mut(id).value.data_mut()[k] = orig + h;
            let plus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[k] = orig - h;
            let minus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[k] = orig;
            numeric.data_mut()[k] = (plus - minus) / (2.0 * h);
        }
        let diff = a.sub(&numeric)?;
        let an = a.sum_squares().sqrt();
        let nn = numeric.sum_squares().sqrt();
        groups.push(GroupCheck {
            name: params.name(id).to_string(),
            relative_error: diff.sum_squares().sqrt() / (an + nn).max(1e-8),
            max_abs_error: diff.data().iter().fold(0.0, |m, v| m.max(v.abs())),
            analytic_norm: an,
        });
    }
    Ok(GradCheckReport { groups })
}

#[cfg(test)]
mod tests {
    use std::rc::Rc;

    use super::*;
    use crate::rng::{seeded, uniform, Stream};

    #[test]
    fn every_op_passes_finite_differences() {
        let mut rng = seeded(21, Stream::Custom(3));
        let mut ps = ParamSet::new();
        let a = ps.add("a", uniform(4, 3, -1.0, 1.0, &mut rng));
        let b = ps.add("b", uniform(3, 3, -1.0, 1.0, &mut rng));
        let row = ps.add("row", uniform(1, 3, -1.0, 1.0, &mut rng));
        let pos = ps.add("pos", uniform(4, 3, 0.5, 2.0, &mut rng));
        let x = uniform(4, 4, -1.0, 1.0, &mut rng);
        let labels = Rc::new(vec![0usize, 2, 1, 2]);
        let report = check_gradients(&ps, 1e-5, |tape, ps| {
            let a = tape.param(ps, a);
            let b = tape.param(ps, b);
            let row = tape.param(ps, row);
            let pos = tape.param(ps, pos);
            let x = tape.constant(x.clone());
            let h = x.matmul(&a)?.matmul(&b)?.add_row(&row)?;
            let h = h.tanh().mul_row(&row)?.add(&h.relu())?;
            let h = h.sub(&pos.log()?)?.mul(&pos.exp().scale(0.1))?;
            let h = h.scale_rows(Rc::new(vec![1.0, 0.5, 0.0, 2.0]))?;
            let ce = h.softmax_cross_entropy(labels.clone(), Rc::new(vec![0, 1, 3]))?;
            let pairs = h.gather_rows(Rc::new(vec![0, 3, 1]))?;
            let other = h.gather_rows(Rc::new(vec![1, 1, 2]))?;
            let bce = pairs
                .row_dot(&other)?
                .bce_with_logits(Rc::new(vec![1.0, 0.0, 1.0]))?;
            ce.add(&bce)?.add(&h.sum_squares().scale(0.01))?.add(&h.sum().neg())
        })
        .unwrap();
        for g in &report.groups {
            assert!(g.relative_error < 1e-4, "{g:?}");
            assert!(g.analytic_norm > 0.0, "{g:?}");
        }
    }

    #[test]
    fn two_layer_network_gradients() {
        let mut rng = seeded(4, Stream::Custom(4));
        let mut ps = ParamSet::new();
        let w1 = ps.add("w1", uniform(5, 4, -1.0, 1.0, &mut rng));
        let b1 = ps.add("b1", uniform(1, 4, -0.1, 0.1, &mut rng));
        let w2 = ps.add("w2", uniform(4, 3, -1.0, 1.0, &mut rng));
        let x = uniform(6, 5, -1.0, 1.0, &mut rng);
        let labels = Rc::new(vec![0, 1, 2, 0, 1, 2]);
        let rows = Rc::new((0..6).collect::<Vec<_>>());
        let report = check_gradients(&ps, 1e-5, |tape, ps| {
            let h = tape
                .constant(x.clone())
                .matmul(&tape.param(ps, w1))?
                .add_row(&tape.param(ps, b1))?
                .relu();
            h.matmul(&tape.param(ps, w2))?
                .softmax_cross_entropy(labels.clone(), rows.clone())
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
    }
}
