use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GradError, Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tol: f64,
    /// Lower bound of the relative-error denominator, so coordinates whose
    /// true gradient is ~0 are judged on absolute error.
    pub floor: f64,
    /// Checks at most this many coordinates per input (chosen with `seed`).
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tol: 1e-4,
            floor: 1e-6,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoordCheck {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradReport {
    pub coords: Vec<CoordCheck>,
    pub max_rel_error: f64,
    pub tol: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }

    pub fn worst(&self) -> Option<&CoordCheck> {
        self.coords
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

fn eval_scalar<F, E>(f: &F, inputs: &[Tensor]) -> Result<f64, E>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, E>,
    E: From<GradError>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
    let out = f(&tape, &vars)?;
    let v = out.value();
    if v.numel() != 1 {
        return Err(GradError::NonScalarOutput(v.shape().to_vec()).into());
    }
    Ok(v.data()[0])
}

/// Compares reverse-mode gradients of a scalar function of several inputs
/// against central finite differences.
pub fn grad_check_many<F, E>(f: F, inputs: &[Tensor], opts: &CheckOptions) -> Result<GradReport, E>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, E>,
    E: From<GradError>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&tape, &vars)?;
        let shape = out.shape();
        if shape.iter().product::<usize>() != 1 {
            return Err(GradError::NonScalarOutput(shape).into());
        }
        let grads = tape.backward(out)?;
        vars.iter().map(|v| grads.wrt(*v)).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut coords = Vec::new();
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, x) in inputs.iter().enumerate() {
        let n = x.numel();
        let picks: Vec<usize> = match opts.max_coords {
            Some(k) if k < n => {
                let mut v = sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for j in picks {
            let orig = x.data()[j];
            work[i].data_mut()[j] = orig + opts.step;
            let fp = eval_scalar(&f, &work)?;
            work[i].data_mut()[j] = orig - opts.step;
            let fm = eval_scalar(&f, &work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * opts.step);
            let a = analytic[i].data()[j];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            let rel_error = (a - numeric).abs() / denom;
            coords.push(CoordCheck {
                input: i,
                index: j,
                analytic: a,
                numeric,
                rel_error,
            });
        }
    }
    let max_rel_error = coords.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(GradReport {
        coords,
        max_rel_error,
        tol: opts.tol,
    })
}

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F, E>(f: F, x: &Tensor, opts: &CheckOptions) -> Result<GradReport, E>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>, E>,
    E: From<GradError>,
{
    grad_check_many(move |tape, v| f(tape, v[0]), std::slice::from_ref(x), opts)
}
