//! Exact multitask GP: joint kernel, marginal likelihood with analytic
//! gradients, Adam training and posterior prediction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{input_kernel_matrix, train_kernel_with_grads, KernelKind, KernelSpec};
use super::tasks::TaskCovariance;
use crate::error::{Error, Result};
use crate::num::{median, Scalar};
use crate::preprocess::{Standardizer, StdMode};

/// First jitter added to the kernel diagonal.
pub const JITTER_START: f64 = 1e-8;
/// Largest jitter tried before declaring the factorisation failed.
pub const JITTER_MAX: f64 = 1e-4;
/// Posterior variances more negative than this signal numerical breakdown.
pub const VARIANCE_TOLERANCE: f64 = 1e-8;

/// Joint covariance k([x,i],[x',j]) = k_in(x,x')·K_tasks[i,j], ordered
/// point-major: row `p·T + i` holds point `p`, task `i`.
pub fn build_joint_kernel<T: Scalar>(
    spec: &KernelSpec<T>,
    tasks: &TaskCovariance<T>,
    x: &DMatrix<T>,
    x2: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    Ok(input_kernel_matrix(spec, x, x2)?.kronecker(&tasks.matrix()))
}

/// Cholesky of `k + noise·I`, escalating jitter ×10 from 1e-8 to 1e-4.
pub fn cholesky_with_jitter<T: Scalar>(k: &DMatrix<T>, noise: T) -> Result<(Cholesky<T, Dyn>, T)> {
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut ky = k.clone();
        let add = noise + T::lit(jitter);
        for i in 0..ky.nrows() {
            ky[(i, i)] += add;
        }
        if let Some(ch) = ky.cholesky() {
            if ch
                .l_dirty()
                .diagonal()
                .iter()
                .all(|d| *d > T::zero() && d.is_finite())
            {
                return Ok((ch, T::lit(jitter)));
            }
        }
        jitter *= 10.0;
    }
    Err(Error::Cholesky {
        max_jitter: JITTER_MAX,
    })
}

/// Gradient of the log marginal likelihood, laid out like the hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LmlGradient<T: Scalar> {
    pub log_lengthscale_rbf: T,
    pub log_scale_cos: T,
    pub log_noise_variance: T,
    pub factor: DMatrix<T>,
    pub log_diag: Vec<T>,
}

struct Posterior<T: Scalar> {
    chol: Cholesky<T, Dyn>,
    alpha: DVector<T>,
    jitter: T,
    lml: T,
}

fn flatten_outputs<T: Scalar>(y: &DMatrix<T>) -> DVector<T> {
    let t = y.ncols();
    DVector::from_fn(y.nrows() * t, |k, _| y[(k / t, k % t)])
}

fn posterior<T: Scalar>(k_joint: &DMatrix<T>, noise: T, y: &DVector<T>) -> Result<Posterior<T>> {
    let (chol, jitter) = cholesky_with_jitter(k_joint, noise)?;
    let alpha = chol.solve(y);
    let n = T::lit(y.len() as f64);
    let log_det_half = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(T::zero(), |a, d| a + d.ln());
    let lml = -T::lit(0.5) * y.dot(&alpha) - log_det_half - n * T::lit(0.5) * T::two_pi().ln();
    Ok(Posterior {
        chol,
        alpha,
        jitter,
        lml,
    })
}

/// log p(Y | X) = −½ yᵀK_y⁻¹y − ½ log|K_y| − (nT/2) log 2π for standardised data.
pub fn log_marginal_likelihood<T: Scalar>(
    spec: &KernelSpec<T>,
    tasks: &TaskCovariance<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> Result<T> {
    check_shapes(tasks, x, y)?;
    let k = build_joint_kernel(spec, tasks, x, x)?;
    Ok(posterior(&k, spec.noise_variance(), &flatten_outputs(y))?.lml)
}

fn check_shapes<T: Scalar>(
    tasks: &TaskCovariance<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.nrows(),
        });
    }
    if y.ncols() != tasks.n_tasks() {
        return Err(Error::Dimension {
            expected: tasks.n_tasks(),
            got: y.ncols(),
        });
    }
    Ok(())
}

/// Log marginal likelihood and its exact gradient.
///
/// With W = ααᵀ − K_y⁻¹ the gradient is ½·tr(W·∂K_y/∂θ); the Kronecker
/// structure reduces it to contractions with an n×n and a T×T matrix.
pub fn lml_with_gradient<T: Scalar>(
    spec: &KernelSpec<T>,
    tasks: &TaskCovariance<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> Result<(T, LmlGradient<T>)> {
    check_shapes(tasks, x, y)?;
    let (g, post) = gradient_inner(spec, tasks, x, &flatten_outputs(y))?;
    Ok((post.lml, g))
}

fn gradient_inner<T: Scalar>(
    spec: &KernelSpec<T>,
    tasks: &TaskCovariance<T>,
    x: &DMatrix<T>,
    yflat: &DVector<T>,
) -> Result<(LmlGradient<T>, Posterior<T>)> {
    let n = x.nrows();
    let nt = tasks.n_tasks();
    let (k_in, dk_l, dk_c) = train_kernel_with_grads(spec, x);
    let k_t = tasks.matrix();
    let k_joint = k_in.kronecker(&k_t);
    let noise = spec.noise_variance();
    let post = posterior(&k_joint, noise, yflat)?;

    let kinv = post.chol.inverse();
    let w = &post.alpha * post.alpha.transpose() - kinv;

    let mut p = DMatrix::<T>::zeros(n, n);
    let mut m = DMatrix::<T>::zeros(nt, nt);
    for i in 0..n {
        for j in 0..n {
            let mut acc = T::zero();
            for c in 0..nt {
                for d in 0..nt {
                    let wv = w[(i * nt + c, j * nt + d)];
                    acc += wv * k_t[(c, d)];
                    m[(c, d)] += wv * k_in[(i, j)];
                }
            }
            p[(i, j)] = acc;
        }
    }
    let half = T::lit(0.5);
    let g_l = if spec.kind.uses_rbf() {
        half * dk_l.dot(&p)
    } else {
        T::zero()
    };
    let g_c = if spec.kind.uses_cos() {
        half * dk_c.dot(&p)
    } else {
        T::zero()
    };
    let g_noise = half * noise * w.trace();
    let b = tasks.factor_matrix();
    let g_factor = &m * &b;
    let v = tasks.diag();
    let g_diag = (0..nt).map(|a| half * m[(a, a)] * v[a]).collect();
    Ok((
        LmlGradient {
            log_lengthscale_rbf: g_l,
            log_scale_cos: g_c,
            log_noise_variance: g_noise,
            factor: g_factor,
            log_diag: g_diag,
        },
        post,
    ))
}

/// Training settings. Defaults: Adam with learning rate 0.1 for 5000
/// iterations, β1 = 0.9, β2 = 0.999, ε = 1e-8, full-rank task covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// rank r of the task factor B (T×r); `None` means r = T
    pub task_rank: Option<usize>,
    pub train_noise: bool,
    /// false pins l_cos = 1
    pub train_cos_scale: bool,
    /// overrides the initial σ_n² (standardised units)
    pub initial_noise_variance: Option<f64>,
    pub input_std: StdMode,
    pub output_std: StdMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 5000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            task_rank: None,
            train_noise: true,
            train_cos_scale: true,
            initial_noise_variance: None,
            input_std: StdMode::Ss,
            output_std: StdMode::Fs,
        }
    }
}

/// Summary of an optimisation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub initial_lml: f64,
    pub final_lml: f64,
    pub iterations: usize,
    pub best_iteration: usize,
}

/// Per-task posterior mean (output units) and variance (squared output units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T: Scalar> {
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

/// A fitted multitask GP with its cached factorisation.
#[derive(Debug, Clone)]
pub struct GprModel<T: Scalar> {
    kernel: KernelSpec<T>,
    tasks: TaskCovariance<T>,
    raw_x: DMatrix<T>,
    raw_y: DMatrix<T>,
    x_train: DMatrix<T>,
    y_train: DMatrix<T>,
    chol: Cholesky<T, Dyn>,
    alpha: DVector<T>,
    jitter: T,
    log_marginal_likelihood: T,
    input_std: Standardizer<T>,
    output_std: Standardizer<T>,
    trace: Option<TrainingTrace>,
}

fn median_pairwise_distance<T: Scalar>(x: &DMatrix<T>) -> T {
    let n = x.nrows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            d.push((x.row(i) - x.row(j)).norm());
        }
    }
    match median(&mut d) {
        Some(m) if m > T::zero() => m,
        _ => T::one(),
    }
}

fn mask_for(kind: KernelKind, opts: &FitOptions, n_task_params: usize) -> Vec<bool> {
    let mut mask = vec![
        kind.uses_rbf(),
        kind.uses_cos() && opts.train_cos_scale,
        opts.train_noise,
    ];
    mask.extend(std::iter::repeat_n(true, n_task_params));
    mask
}

fn pack<T: Scalar>(spec: &KernelSpec<T>, tasks: &TaskCovariance<T>) -> Vec<T> {
    let mut p = vec![
        spec.log_lengthscale_rbf,
        spec.log_scale_cos,
        spec.log_noise_variance,
    ];
    p.extend(tasks.params());
    p
}

fn unpack<T: Scalar>(p: &[T], spec: &mut KernelSpec<T>, tasks: &mut TaskCovariance<T>) {
    spec.log_lengthscale_rbf = p[0];
    spec.log_scale_cos = p[1];
    spec.log_noise_variance = p[2];
    tasks.set_params(&p[3..]);
}

fn pack_gradient<T: Scalar>(g: &LmlGradient<T>) -> Vec<T> {
    let mut out = vec![g.log_lengthscale_rbf, g.log_scale_cos, g.log_noise_variance];
    for i in 0..g.factor.nrows() {
        for j in 0..g.factor.ncols() {
            out.push(g.factor[(i, j)]);
        }
    }
    out.extend(g.log_diag.iter().copied());
    out
}

impl<T: Scalar> GprModel<T> {
    /// Trains one multitask GP on raw inputs (N×M TDOAs) and outputs (N×T).
    pub fn fit(
        raw_x: &DMatrix<T>,
        raw_y: &DMatrix<T>,
        kind: KernelKind,
        opts: &FitOptions,
    ) -> Result<Self> {
        if raw_x.nrows() < 2 {
            return Err(Error::invalid(
                "training data",
                format!("need at least 2 points, got {}", raw_x.nrows()),
            ));
        }
        if raw_x.nrows() != raw_y.nrows() {
            return Err(Error::Dimension {
                expected: raw_x.nrows(),
                got: raw_y.nrows(),
            });
        }
        let input_std = Standardizer::new(opts.input_std).fit(raw_x)?;
        let output_std = Standardizer::new(opts.output_std).fit(raw_y)?;
        let x = input_std.transform(raw_x)?;
        let y = output_std.transform(raw_y)?;
        let n_tasks = y.ncols();

        let out_var = y
            .column_iter()
            .map(|c| c.variance())
            .fold(T::zero(), |a, v| a + v)
            / T::lit(n_tasks as f64);
        let init_noise = match opts.initial_noise_variance {
            Some(v) => T::lit(v),
            None => out_var * T::lit(1e-2),
        };
        let mut spec = KernelSpec {
            kind,
            log_lengthscale_rbf: median_pairwise_distance(&x).ln(),
            log_scale_cos: T::zero(),
            log_noise_variance: init_noise.max(T::lit(1e-12)).ln(),
        };
        let mut tasks =
            TaskCovariance::identity(n_tasks, opts.task_rank.unwrap_or(n_tasks), T::lit(1e-2))?;
        let yflat = flatten_outputs(&y);

        let mask = mask_for(kind, opts, tasks.n_params());
        let mut params = pack(&spec, &tasks);
        let mut m1 = vec![0.0f64; params.len()];
        let mut m2 = vec![0.0f64; params.len()];
        let mut best = (f64::NEG_INFINITY, params.clone(), 0usize);
        let mut initial = f64::NAN;

        for iter in 0..=opts.max_iters {
            unpack(&params, &mut spec, &mut tasks);
            let (grad, post) = gradient_inner(&spec, &tasks, &x, &yflat).map_err(|e| match e {
                Error::Cholesky { .. } => Error::Numerical(format!("iteration {iter}: {e}")),
                other => other,
            })?;
            let lml = post.lml.to_f64();
            if !lml.is_finite() {
                return Err(Error::NonFinite { iteration: iter });
            }
            if iter == 0 {
                initial = lml;
            }
            if lml > best.0 {
                best = (lml, params.clone(), iter);
            }
            if iter == opts.max_iters {
                break;
            }
            let g = pack_gradient(&grad);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { iteration: iter });
            }
            let t = (iter + 1) as i32;
            let bc1 = 1.0 - opts.beta1.powi(t);
            let bc2 = 1.0 - opts.beta2.powi(t);
            for k in 0..params.len() {
                if !mask[k] {
                    continue;
                }
                let gk = g[k].to_f64();
                m1[k] = opts.beta1 * m1[k] + (1.0 - opts.beta1) * gk;
                m2[k] = opts.beta2 * m2[k] + (1.0 - opts.beta2) * gk * gk;
                let step =
                    opts.learning_rate * (m1[k] / bc1) / ((m2[k] / bc2).sqrt() + opts.epsilon);
                // ascent on the log marginal likelihood
                params[k] += T::lit(step);
            }
        }

        unpack(&best.1, &mut spec, &mut tasks);
        let mut model = Self::condition(raw_x, raw_y, spec, tasks, input_std, output_std)?;
        model.trace = Some(TrainingTrace {
            initial_lml: initial,
            final_lml: model.log_marginal_likelihood.to_f64(),
            iterations: opts.max_iters,
            best_iteration: best.2,
        });
        Ok(model)
    }

    /// Builds the posterior for fixed hyperparameters and fitted standardisers.
    pub fn condition(
        raw_x: &DMatrix<T>,
        raw_y: &DMatrix<T>,
        kernel: KernelSpec<T>,
        tasks: TaskCovariance<T>,
        input_std: Standardizer<T>,
        output_std: Standardizer<T>,
    ) -> Result<Self> {
        if !input_std.is_fitted() || !output_std.is_fitted() {
            return Err(Error::NotFitted);
        }
        let x = input_std.transform(raw_x)?;
        let y = output_std.transform(raw_y)?;
        check_shapes(&tasks, &x, &y)?;
        let k = build_joint_kernel(&kernel, &tasks, &x, &x)?;
        let post = posterior(&k, kernel.noise_variance(), &flatten_outputs(&y))?;
        Ok(Self {
            kernel,
            tasks,
            raw_x: raw_x.clone(),
            raw_y: raw_y.clone(),
            x_train: x,
            y_train: y,
            chol: post.chol,
            alpha: post.alpha,
            jitter: post.jitter,
            log_marginal_likelihood: post.lml,
            input_std,
            output_std,
            trace: None,
        })
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn kind(&self) -> KernelKind {
        self.kernel.kind
    }

    pub fn tasks(&self) -> &TaskCovariance<T> {
        &self.tasks
    }

    pub fn log_marginal_likelihood(&self) -> T {
        self.log_marginal_likelihood
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn trace(&self) -> Option<&TrainingTrace> {
        self.trace.as_ref()
    }

    pub(crate) fn set_trace(&mut self, trace: Option<TrainingTrace>) {
        self.trace = trace;
    }

    pub fn input_standardizer(&self) -> &Standardizer<T> {
        &self.input_std
    }

    pub fn output_standardizer(&self) -> &Standardizer<T> {
        &self.output_std
    }

    pub fn raw_inputs(&self) -> &DMatrix<T> {
        &self.raw_x
    }

    pub fn raw_outputs(&self) -> &DMatrix<T> {
        &self.raw_y
    }

    pub fn train_inputs(&self) -> &DMatrix<T> {
        &self.x_train
    }

    pub fn train_outputs(&self) -> &DMatrix<T> {
        &self.y_train
    }

    pub fn cholesky_factor(&self) -> DMatrix<T> {
        self.chol.l()
    }

    pub fn alpha(&self) -> &DVector<T> {
        &self.alpha
    }

    pub fn n_features(&self) -> usize {
        self.raw_x.ncols()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.n_tasks()
    }

    /// Posterior at a raw input, returned in output units.
    pub fn predict(&self, x_star: &[T]) -> Result<Prediction<T>> {
        if x_star.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: x_star.len(),
            });
        }
        let xs =
            DMatrix::from_row_slice(1, x_star.len(), &self.input_std.transform_vector(x_star)?);
        let nt = self.n_tasks();
        let k_t = self.tasks.matrix();
        let k_star_in = input_kernel_matrix(&self.kernel, &self.x_train, &xs)?;
        let k_self = input_kernel_matrix(&self.kernel, &xs, &xs)?[(0, 0)];
        // joint cross-covariance, (nT)×T
        let k_star = k_star_in.kronecker(&k_t);
        let mean_std = k_star.transpose() * &self.alpha;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let cov = k_t * k_self - v.transpose() * v;
        let mut var_std = DMatrix::zeros(1, nt);
        for a in 0..nt {
            let va = cov[(a, a)];
            if va < -T::lit(VARIANCE_TOLERANCE) {
                return Err(Error::Numerical(format!(
                    "negative posterior variance {va} for task {a}"
                )));
            }
            var_std[(0, a)] = va.max(T::zero());
        }
        let mean_row = DMatrix::from_fn(1, nt, |_, a| mean_std[a]);
        let (mean, var) = self
            .output_std
            .inverse_transform_outputs(&mean_row, &var_std)?;
        Ok(Prediction {
            mean: mean.iter().copied().collect(),
            variance: var.iter().copied().collect(),
        })
    }

    /// Prior variance per task at a raw input, in output units.
    pub fn prior_variance(&self, x_star: &[T]) -> Result<Vec<T>> {
        let xs =
            DMatrix::from_row_slice(1, x_star.len(), &self.input_std.transform_vector(x_star)?);
        let k_self = input_kernel_matrix(&self.kernel, &xs, &xs)?[(0, 0)];
        let k_t = self.tasks.matrix();
        let var = DMatrix::from_fn(1, self.n_tasks(), |_, a| k_t[(a, a)] * k_self);
        let (_, v) = self
            .output_std
            .inverse_transform_outputs(&DMatrix::zeros(1, self.n_tasks()), &var)?;
        Ok(v.iter().copied().collect())
    }
}
