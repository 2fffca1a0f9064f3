use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Bound, Graph, ParamStore, Tensor, Var};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates to probe; every coordinate when the model is smaller.
    pub samples: usize,
    /// Magnitude below which errors are measured in absolute terms.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-6,
            samples: 200,
            floor: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

/// Compare reverse-mode gradients of `loss` against central differences.
pub fn gradient_check<F>(params: &ParamStore, loss: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &Bound) -> Result<Var>,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let out = loss(&mut g, &bound)?;
    g.backward(out)?;
    let analytic = params.collect_grads(&mut g, &bound);
    compare_with_differences(params, &loss, &analytic, opts)
}

/// Finite-difference comparison against externally supplied gradients.
pub fn compare_with_differences<F>(
    params: &ParamStore,
    loss: &F,
    analytic: &[Tensor],
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &Bound) -> Result<Var>,
{
    let eval = |p: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let b = p.bind_frozen(&mut g);
        let v = loss(&mut g, &b)?;
        Ok(g.value(v).data()[0])
    };

    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(pi, (_, t))| (0..t.len()).map(move |j| (pi, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let picked: Vec<usize> = if coords.len() <= opts.samples {
        (0..coords.len()).collect()
    } else {
        let mut s = sample(&mut rng, coords.len(), opts.samples).into_vec();
        s.sort_unstable();
        s
    };

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: picked.len(),
    };
    for &c in &picked {
        let (pi, j) = coords[c];
        let orig = work.by_index(pi).data()[j];
        work.by_index_mut(pi).data_mut()[j] = orig + opts.eps;
        let plus = eval(&work)?;
        work.by_index_mut(pi).data_mut()[j] = orig - opts.eps;
        let minus = eval(&work)?;
        work.by_index_mut(pi).data_mut()[j] = orig;

        let numeric = (plus - minus) / (2.0 * opts.eps);
        let a = analytic[pi].data()[j];
        let denom = a.abs().max(numeric.abs()).max(opts.floor);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_rel_error || rel.is_nan() {
            report.max_rel_error = rel;
            report.worst_param = params.names()[pi].clone();
            report.worst_index = j;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}
