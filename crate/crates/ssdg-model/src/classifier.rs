use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ModelError;

/// Per-class prototype Gaussians: means `mu`, pre-softplus deviations
/// `sigma_raw` (both C x D) and the fixed softmax temperature.
#[derive(Debug, Clone)]
pub struct StochasticClassifierParams {
    pub mu: Array2<f32>,
    pub sigma_raw: Array2<f32>,
    pub temperature: f32,
}

impl StochasticClassifierParams {
    pub fn num_classes(&self) -> usize {
        self.mu.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.mu.ncols()
    }

    /// Mean effective deviation softplus(sigma_raw), a training diagnostic.
    pub fn mean_effective_sigma(&self) -> f32 {
        self.sigma_raw.iter().map(|&v| softplus(v)).sum::<f32>() / self.sigma_raw.len() as f32
    }
}

/// Numerically stable ln(1 + e^x).
pub fn softplus(x: f32) -> f32 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// d/dx softplus(x) = sigmoid(x).
pub fn softplus_derivative(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Initializes the classifier: mu ~ N(0, 1/sqrt(D)), sigma_raw = -4 so the
/// effective deviation starts near-deterministic (softplus(-4) ~ 0.018).
pub fn init_classifier(
    num_classes: usize,
    feature_dim: usize,
    seed: u64,
) -> StochasticClassifierParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, 1.0 / (feature_dim as f32).sqrt()).unwrap();
    let mu = Array2::from_shape_fn((num_classes, feature_dim), |_| normal.sample(&mut rng));
    let sigma_raw = Array2::from_elem((num_classes, feature_dim), -4.0);
    StochasticClassifierParams {
        mu,
        sigma_raw,
        temperature: 0.05,
    }
}

/// One reparameterized draw of the prototype matrix:
/// w = mu + softplus(sigma_raw) * noise, elementwise.
pub fn sample_prototypes(
    params: &StochasticClassifierParams,
    noise: &Array2<f32>,
) -> Result<Array2<f32>, ModelError> {
    if noise.dim() != params.mu.dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "noise {:?} vs mu {:?}",
            noise.dim(),
            params.mu.dim()
        )));
    }
    let mut w = params.mu.clone();
    ndarray::Zip::from(&mut w)
        .and(&params.sigma_raw)
        .and(noise)
        .for_each(|w, &s, &e| *w += softplus(s) * e);
    Ok(w)
}

/// Test-time prototypes: the mean parameters.
pub fn mean_prototypes(params: &StochasticClassifierParams) -> Array2<f32> {
    params.mu.clone()
}

/// Routes a prototype-matrix gradient back to (mu, sigma_raw) through the
/// reparameterization: dmu = dw, dsigma_raw = dw * noise * sigmoid(sigma_raw).
pub fn prototype_backward(
    params: &StochasticClassifierParams,
    noise: &Array2<f32>,
    dw: &Array2<f32>,
) -> (Array2<f32>, Array2<f32>) {
    let dmu = dw.clone();
    let mut dsigma = dw.clone();
    ndarray::Zip::from(&mut dsigma)
        .and(&params.sigma_raw)
        .and(noise)
        .for_each(|g, &s, &e| *g *= e * softplus_derivative(s));
    (dmu, dsigma)
}

/// Classifies one feature vector against a prototype matrix:
/// p_c = softmax_c(cos(z, w_c) / temperature).
pub fn classify(
    z: &Array1<f32>,
    w: &Array2<f32>,
    temperature: f32,
) -> Result<Array1<f32>, ModelError> {
    if z.len() != w.ncols() {
        return Err(ModelError::ShapeMismatch(format!(
            "feature dim {} vs prototype dim {}",
            z.len(),
            w.ncols()
        )));
    }
    let scores = cosine_scores(&z.clone().insert_axis(Axis(0)), w, temperature)?;
    Ok(scores.probs.row(0).to_owned())
}

/// Batched cosine-softmax forward pass with the intermediates needed for
/// backward.
#[derive(Debug, Clone)]
pub struct CosineScores {
    /// (N, C), rows sum to 1
    pub probs: Array2<f32>,
    /// cos(z_n, w_c), in [-1, 1]
    pub cos: Array2<f32>,
    pub z_unit: Array2<f32>,
    pub w_unit: Array2<f32>,
    pub z_norm: Array1<f32>,
    pub w_norm: Array1<f32>,
    pub temperature: f32,
}

const MIN_NORM: f64 = 1e-12;

/// Computes cosine similarities of every feature row against every
/// prototype row and the temperature softmax over classes, with
/// max-subtraction for overflow safety. Norms, dot products and the
/// softmax accumulate in f64 so the f32 outputs are correctly rounded;
/// at tau = 0.05 the softmax amplifies similarity error twentyfold, and
/// pure f32 accumulation costs several digits there.
pub fn cosine_scores(
    z: &Array2<f32>,
    w: &Array2<f32>,
    temperature: f32,
) -> Result<CosineScores, ModelError> {
    if z.ncols() != w.ncols() {
        return Err(ModelError::ShapeMismatch(format!(
            "feature dim {} vs prototype dim {}",
            z.ncols(),
            w.ncols()
        )));
    }
    if temperature <= 0.0 {
        return Err(ModelError::InvalidParameter("temperature must be > 0".into()));
    }
    let normalize = |m: &Array2<f32>,
                     what: &str|
     -> Result<(Array2<f64>, Array2<f32>, Array1<f32>), ModelError> {
        let unit64 = Array2::from_shape_fn(m.dim(), |(i, j)| m[[i, j]] as f64);
        let norms = unit64.map_axis(Axis(1), |row| row.dot(&row).sqrt());
        if norms.iter().any(|&n| n < MIN_NORM) {
            return Err(ModelError::ZeroNorm(what.into()));
        }
        let mut unit64 = unit64;
        for (mut row, &n) in unit64.axis_iter_mut(Axis(0)).zip(norms.iter()) {
            row.mapv_inplace(|v| v / n);
        }
        let unit = unit64.mapv(|v| v as f32);
        Ok((unit64, unit, norms.mapv(|v| v as f32)))
    };
    let (z_unit64, z_unit, z_norm) = normalize(z, "feature vector")?;
    let (w_unit64, w_unit, w_norm) = normalize(w, "prototype")?;
    let cos64 = z_unit64.dot(&w_unit64.t());

    let mut probs = Array2::<f32>::zeros(cos64.dim());
    for (mut p_row, c_row) in probs.axis_iter_mut(Axis(0)).zip(cos64.axis_iter(Axis(0))) {
        let max = c_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut exps = vec![0.0f64; c_row.len()];
        let mut sum = 0.0f64;
        for (e, &c) in exps.iter_mut().zip(c_row.iter()) {
            *e = ((c - max) / temperature as f64).exp();
            sum += *e;
        }
        for (p, e) in p_row.iter_mut().zip(exps) {
            *p = (e / sum) as f32;
        }
    }
    Ok(CosineScores {
        probs,
        cos: cos64.mapv(|v| v as f32),
        z_unit,
        w_unit,
        z_norm,
        w_norm,
        temperature,
    })
}

/// Backward through the cosine similarities: given dL/dlogits (logits =
/// cos / temperature), returns (dL/dz, dL/dw).
pub fn cosine_scores_backward(
    scores: &CosineScores,
    dlogits: &Array2<f32>,
) -> (Array2<f32>, Array2<f32>) {
    let dcos = dlogits / scores.temperature;
    // through the unit vectors
    let dz_unit = dcos.dot(&scores.w_unit); // (N, D)
    let dw_unit = dcos.t().dot(&scores.z_unit); // (C, D)
    let project = |dunit: &Array2<f32>, unit: &Array2<f32>, norm: &Array1<f32>| {
        let mut out = dunit.clone();
        for ((mut row, u), &n) in out
            .axis_iter_mut(Axis(0))
            .zip(unit.axis_iter(Axis(0)))
            .zip(norm.iter())
        {
            let dot: f32 = row.dot(&u);
            for (r, &uv) in row.iter_mut().zip(u.iter()) {
                *r = (*r - dot * uv) / n;
            }
        }
        out
    };
    let dz = project(&dz_unit, &scores.z_unit, &scores.z_norm);
    let dw = project(&dw_unit, &scores.w_unit, &scores.w_norm);
    (dz, dw)
}
