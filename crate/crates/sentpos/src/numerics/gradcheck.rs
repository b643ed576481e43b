//! Central finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::param::{ParamId, ParamSet};
use super::tensor::Tensor;
use super::NumericsError;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step `h`.
    pub step: f64,
    /// Coordinates sampled per parameter tensor (all coordinates when the
    /// tensor is smaller).
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_coords_per_tensor: 64,
            seed: 0,
        }
    }
}

/// Worst relative error observed for one parameter tensor.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub per_tensor: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_tensor
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Compares analytic gradients of a scalar loss against central finite
/// differences, sampling coordinates per tensor.
///
/// `build_loss` must construct the same loss for the same parameter values;
/// it is invoked once for the analytic pass and twice per sampled coordinate.
pub fn grad_check<F, E>(
    params: &mut ParamSet,
    build_loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph, &ParamSet) -> Result<NodeId, E>,
    E: From<NumericsError>,
{
    // Analytic gradients at the base point.
    let mut graph = Graph::new();
    let loss = build_loss(&mut graph, params)?;
    let grads = graph.backward(loss).map_err(E::from)?;
    params.zero_grads();
    graph.export_grads(&grads, params);
    let analytic: Vec<Tensor> = params.iter().map(|(_, p)| p.grad.clone()).collect();
    drop(graph);

    let eval = |params: &ParamSet| -> Result<f64, E> {
        let mut g = Graph::new();
        let loss = build_loss(&mut g, params)?;
        Ok(g.value(loss).item())
    };

    let mut report = GradCheckReport::default();
    for i in 0..params.len() {
        let id = ParamId(i);
        let len = params.get(id).value.len();
        let coords: Vec<usize> = if len <= opts.max_coords_per_tensor {
            (0..len).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let mut picked =
                rand::seq::index::sample(&mut rng, len, opts.max_coords_per_tensor).into_vec();
            picked.sort_unstable();
            picked
        };
        let mut max_rel = 0.0_f64;
        for &c in &coords {
            let original = params.get(id).value.data()[c];
            params.get_mut(id).value.data_mut()[c] = original + opts.step;
            let plus = eval(params)?;
            params.get_mut(id).value.data_mut()[c] = original - opts.step;
            let minus = eval(params)?;
            params.get_mut(id).value.data_mut()[c] = original;
            let numeric = (plus - minus) / (2.0 * opts.step);
            max_rel = max_rel.max(relative_error(analytic[i].data()[c], numeric));
        }
        report.per_tensor.push(TensorCheck {
            name: params.get(id).name.clone(),
            coords_checked: coords.len(),
            max_rel_error: max_rel,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_matches_to_machine_precision() {
        let mut set = ParamSet::new();
        let id = set.add("theta", Tensor::from_vec(&[3], vec![0.7, -1.2, 2.5]).unwrap());
        let report = grad_check(
            &mut set,
            |g, set| {
                let t = g.param(set, id);
                let m = g.reshape(t, &[1, 3])?;
                g.matmul_nt(m, m)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error() < 1e-9, "{:?}", report);
        assert_eq!(report.per_tensor[0].coords_checked, 3);
    }

    #[test]
    fn sampling_caps_coordinate_count() {
        let mut set = ParamSet::new();
        let id = set.add("big", Tensor::filled(&[10, 20], 0.5));
        let opts = GradCheckOptions {
            max_coords_per_tensor: 16,
            ..GradCheckOptions::default()
        };
        let report = grad_check(
            &mut set,
            |g, set| {
                let t = g.param(set, id);
                Ok::<_, NumericsError>(g.sum_all(t))
            },
            &opts,
        )
        .unwrap();
        assert_eq!(report.per_tensor[0].coords_checked, 16);
        assert!(report.max_rel_error() < 1e-9);
    }
}
