//! Central finite-difference gradient verification.

use crate::{ParamStore, Real, Tape, Tensor, Var};

/// `|a - n| / max(|a|, |n|, 1e-8)`, maximised over elements.
pub fn max_relative_error<F: Real>(analytic: &[F], numeric: &[F]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let (a, n) = (a.as_f64(), n.as_f64());
            (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
        })
        .fold(0.0, f64::max)
}

/// Central differences of a scalar function of several tensors, one
/// gradient per input.
pub fn numeric_gradient<F: Real>(
    f: impl Fn(&[Tensor<F>]) -> F,
    inputs: &[Tensor<F>],
    eps: F,
) -> Vec<Vec<F>> {
    let mut work = inputs.to_vec();
    let two_eps = eps + eps;
    (0..inputs.len())
        .map(|k| {
            (0..inputs[k].len())
                .map(|i| {
                    let orig = work[k].data()[i];
                    work[k].data_mut()[i] = orig + eps;
                    let up = f(&work);
                    work[k].data_mut()[i] = orig - eps;
                    let down = f(&work);
                    work[k].data_mut()[i] = orig;
                    (up - down) / two_eps
                })
                .collect()
        })
        .collect()
}

/// Builds `f` on a fresh tape with every input as a leaf, backpropagates,
/// and compares against central differences. Returns the maximum relative
/// error over all input elements.
pub fn grad_check<F: Real>(
    f: impl Fn(&mut Tape<F>, &[Var]) -> Var,
    inputs: &[Tensor<F>],
    eps: F,
) -> f64 {
    let eval = |xs: &[Tensor<F>]| -> (Tape<F>, Vec<Var>, Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&mut tape, &vars);
        (tape, vars, out)
    };
    let (mut tape, vars, out) = eval(inputs);
    tape.backward(out, &mut ParamStore::new());
    let analytic: Vec<Vec<F>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| {
            tape.grad(v)
                .map(<[F]>::to_vec)
                .unwrap_or_else(|| vec![F::zero(); x.len()])
        })
        .collect();
    let numeric = numeric_gradient(
        |xs| {
            let (tape, _, out) = eval(xs);
            tape.scalar(out)
        },
        inputs,
        eps,
    );
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| max_relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Like [`grad_check`] but over every element of every parameter in a
/// store. `f` must build the scalar loss from the store's current values.
pub fn grad_check_params<F: Real>(
    store: &ParamStore<F>,
    f: impl Fn(&mut Tape<F>, &ParamStore<F>) -> Var,
    eps: F,
) -> f64 {
    let mut analytic_store = store.clone();
    analytic_store.zero_grad();
    let mut tape = Tape::new();
    let out = f(&mut tape, &analytic_store);
    tape.backward(out, &mut analytic_store);

    let mut work = store.clone();
    let mut worst = 0.0f64;
    let two_eps = eps + eps;
    for (pi, p) in analytic_store.iter().enumerate() {
        let id = crate::ParamId(pi);
        let mut numeric = Vec::with_capacity(p.value.len());
        for i in 0..p.value.len() {
            let orig = work.get(id).value.data()[i];
            work.get_mut(id).value.data_mut()[i] = orig + eps;
            let mut t = Tape::new();
            let o = f(&mut t, &work);
            let up = t.scalar(o);
            work.get_mut(id).value.data_mut()[i] = orig - eps;
            let mut t = Tape::new();
            let o = f(&mut t, &work);
            let down = t.scalar(o);
            work.get_mut(id).value.data_mut()[i] = orig;
            numeric.push((up - down) / two_eps);
        }
        worst = worst.max(max_relative_error(p.grad.data(), &numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let a = Tensor::from_vec(&[1, 3], vec![0.3f64, -1.2, 2.0]).unwrap();
        let w = Tensor::from_vec(&[3, 1], vec![1.5f64, 0.25, -4.0]).unwrap();
        let err = grad_check(
            |t, v| {
                let y = t.matmul(v[0], v[1]).unwrap();
                t.sum(y)
            },
            &[a, w],
            1e-4,
        );
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        // d/dx sum(x^2) = 2x; hand the harness x instead.
        let x = [0.5f64, -1.0, 2.0];
        let t = Tensor::from_vec(&[3], x.to_vec()).unwrap();
        let numeric = numeric_gradient(|xs| xs[0].data().iter().map(|v| v * v).sum(), &[t], 1e-4);
        assert!(max_relative_error(&x, &numeric[0]) > 0.4);
        let right: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!(max_relative_error(&right, &numeric[0]) < 1e-8);
    }
}
