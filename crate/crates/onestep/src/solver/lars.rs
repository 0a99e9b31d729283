//! Piecewise-linear solution paths for the weighted lasso, computed by a
//! LARS-type homotopy with the lasso modification (active variables leave the
//! set when their coefficient crosses zero).
//!
//! Weights reduce to the unweighted path by column rescaling
//! `x_j -> x_j / w_j`, `b_j -> w_j b_j`. Unpenalized columns (`w_j = 0`) are
//! profiled out by projection and refit at every breakpoint; infinite weights
//! exclude their column entirely.

use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::data::{Dataset, Family};
use crate::format::format_sig;

/// What happened at a path breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEventKind {
    /// Variable entered the active set.
    Join,
    /// Variable left the active set (coefficient crossed zero).
    Drop,
    /// Variable would have entered but makes the active Gram singular; it is
    /// permanently excluded (deterministic tie-break toward lower indices).
    Exclude,
}

#[derive(Debug, Clone)]
pub struct PathEvent {
    pub lambda: f64,
    pub kind: PathEventKind,
    /// Original column index.
    pub index: usize,
    /// Other columns whose event was simultaneous within the tie tolerance.
    pub tied_with: Vec<usize>,
}

/// A weighted-lasso solution path: coefficients at strictly decreasing
/// breakpoints, affine in lambda between them.
///
/// `active_sets[k]` is the active set on the segment that starts at
/// `breakpoints[k]` going down: it contains a variable from the breakpoint at
/// which it enters (where its coefficient is still exactly zero).
#[derive(Debug, Clone)]
pub struct SolutionPath {
    breakpoints: Vec<f64>,
    coefficients: Vec<DVector<f64>>,
    active_sets: Vec<Vec<usize>>,
    events: Vec<PathEvent>,
}

impl SolutionPath {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn coefficients(&self) -> &[DVector<f64>] {
        &self.coefficients
    }

    pub fn active_sets(&self) -> &[Vec<usize>] {
        &self.active_sets
    }

    pub fn events(&self) -> &[PathEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Coefficients at an arbitrary `lambda`, by exact linear interpolation on
    /// the containing segment (clamped to the path's range).
    pub fn coefficients_at(&self, lambda: f64) -> DVector<f64> {
        let k = self.breakpoints.len();
        if k == 0 {
            return DVector::zeros(0);
        }
        if lambda >= self.breakpoints[0] {
            return self.coefficients[0].clone();
        }
        for i in 0..k - 1 {
            let (hi, lo) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if lambda <= hi && lambda >= lo {
                let t = if hi > lo { (hi - lambda) / (hi - lo) } else { 0.0 };
                return &self.coefficients[i] * (1.0 - t) + &self.coefficients[i + 1] * t;
            }
        }
        self.coefficients[k - 1].clone()
    }

    /// Active set of the segment containing `lambda` (for `lambda` above the
    /// first breakpoint: the first segment's set minus not-yet-entered
    /// variables, i.e. the empty penalized set).
    pub fn active_at(&self, lambda: f64) -> &[usize] {
        let k = self.breakpoints.len();
        for i in (0..k).rev() {
            if lambda <= self.breakpoints[i] {
                return &self.active_sets[i];
            }
        }
        &self.active_sets[0]
    }

    /// Smallest breakpoint strictly above `floor`, if any.
    pub fn smallest_breakpoint_above(&self, floor: f64) -> Option<f64> {
        self.breakpoints.iter().copied().filter(|&l| l > floor).fold(
            None,
            |acc: Option<f64>, l| Some(match acc {
                None => l,
                Some(a) => a.min(l),
            }),
        )
    }

    /// CSV rendering: `lambda,active_size,beta_1,...,beta_p`, one row per
    /// breakpoint in path order, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let p = self.coefficients.first().map_or(0, |c| c.len());
        let mut out = String::from("lambda,active_size");
        for j in 1..=p {
            out.push_str(&format!(",beta_{j}"));
        }
        out.push('\n');
        for (i, lambda) in self.breakpoints.iter().enumerate() {
            out.push_str(&format_sig(*lambda, 12));
            out.push_str(&format!(",{}", self.active_sets[i].len()));
            for j in 0..p {
                out.push(',');
                out.push_str(&format_sig(self.coefficients[i][j], 12));
            }
            out.push('\n');
        }
        out
    }
}

const MAX_EVENT_FACTOR: usize = 40;

/// Computes the full weighted-lasso path for a Gaussian problem.
///
/// At every breakpoint the coefficients solve the weighted problem at that
/// lambda; the first breakpoint is `lambda_max` (all penalized coefficients
/// zero) and the last is 0 when the active Gram stays nonsingular.
pub fn lars_path(data: &Dataset, weights: &DVector<f64>) -> Result<SolutionPath, SolverError> {
    if data.family() != Family::Gaussian {
        return Err(SolverError::Invalid(
            "solution paths are defined for the Gaussian family".into(),
        ));
    }
    let p = data.p();
    if weights.len() != p {
        return Err(SolverError::Invalid(format!(
            "weights length {} does not match p = {}",
            weights.len(),
            p
        )));
    }
    for (j, &w) in weights.iter().enumerate() {
        if w.is_nan() || w < 0.0 {
            return Err(SolverError::Invalid(format!(
                "weight {j} must be >= 0 (or +inf), got {w}"
            )));
        }
    }
    let free: Vec<usize> = (0..p).filter(|&j| weights[j] == 0.0).collect();
    let penalized: Vec<usize> = (0..p)
        .filter(|&j| weights[j] > 0.0 && weights[j].is_finite())
        .collect();

    let n = data.n();
    let x = data.x();
    let y = data.y();

    // Profile out unpenalized columns by orthogonal projection.
    let free_qr = if free.is_empty() {
        None
    } else {
        let xf = DMatrix::from_fn(n, free.len(), |i, c| x[(i, free[c])]);
        let qr = xf.qr();
        let r = qr.r();
        let min_diag = (0..free.len())
            .map(|i| r[(i, i)].abs())
            .fold(f64::INFINITY, f64::min);
        if min_diag < 1e-10 {
            return Err(SolverError::Singular {
                null_dim: (0..free.len()).filter(|&i| r[(i, i)].abs() < 1e-10).count(),
            });
        }
        Some(qr)
    };
    let project = |v: &DVector<f64>| -> DVector<f64> {
        match &free_qr {
            None => v.clone(),
            Some(qr) => {
                let q = qr.q();
                v - &q * (q.transpose() * v)
            }
        }
    };

    let y_res = project(y);
    let mut u = DMatrix::zeros(n, penalized.len());
    for (c, &j) in penalized.iter().enumerate() {
        let col = project(&x.column(j).into_owned()) / weights[j];
        u.set_column(c, &col);
    }

    let core = lars_core(&u, &y_res)?;

    // Back-transform to the original coordinates and refit free columns.
    let mut breakpoints = Vec::with_capacity(core.breakpoints.len());
    let mut coefficients = Vec::with_capacity(core.breakpoints.len());
    let mut active_sets = Vec::with_capacity(core.breakpoints.len());
    for (i, &lambda) in core.breakpoints.iter().enumerate() {
        let mut beta = DVector::zeros(p);
        for (c, &j) in penalized.iter().enumerate() {
            beta[j] = core.coefficients[i][c] / weights[j];
        }
        if let Some(qr) = &free_qr {
            let fitted = x * &beta;
            let rhs = y - fitted;
            let z = qr.q().transpose() * rhs;
            let bf = qr
                .r()
                .solve_upper_triangular(&z)
                .ok_or(SolverError::Singular { null_dim: 1 })?;
            for (c, &j) in free.iter().enumerate() {
                beta[j] = bf[c];
            }
        }
        let mut act: Vec<usize> = core.active_sets[i]
            .iter()
            .map(|&c| penalized[c])
            .chain(free.iter().copied())
            .collect();
        act.sort_unstable();
        breakpoints.push(lambda);
        coefficients.push(beta);
        active_sets.push(act);
    }
    let events = core
        .events
        .into_iter()
        .map(|e| PathEvent {
            index: penalized[e.index],
            tied_with: e.tied_with.iter().map(|&c| penalized[c]).collect(),
            ..e
        })
        .collect();
    Ok(SolutionPath {
        breakpoints,
        coefficients,
        active_sets,
        events,
    })
}

struct CorePath {
    breakpoints: Vec<f64>,
    coefficients: Vec<DVector<f64>>,
    active_sets: Vec<Vec<usize>>,
    events: Vec<PathEvent>,
}

/// Unweighted lasso homotopy on the prepared column matrix.
fn lars_core(u: &DMatrix<f64>, y: &DVector<f64>) -> Result<CorePath, SolverError> {
    let m = u.ncols();
    let mut path = CorePath {
        breakpoints: Vec::new(),
        coefficients: Vec::new(),
        active_sets: Vec::new(),
        events: Vec::new(),
    };
    let mut beta = DVector::zeros(m);
    if m == 0 {
        path.breakpoints.push(0.0);
        path.coefficients.push(beta);
        path.active_sets.push(Vec::new());
        return Ok(path);
    }

    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut excluded = vec![false; m];
    let mut residual = y.clone();

    let c0 = u.transpose() * &residual;
    let lambda_max = c0.iter().fold(0.0_f64, |a, &c| a.max(c.abs()));
    let scale = lambda_max.max(1.0);
    let tie_eps = 1e-11 * scale;
    let d_eps = 1e-13 * scale;

    let mut lambda = lambda_max;
    if lambda_max <= 0.0 {
        path.breakpoints.push(0.0);
        path.coefficients.push(beta);
        path.active_sets.push(Vec::new());
        return Ok(path);
    }

    // Entry events at lambda_max (simultaneous ties all join).
    let entrants: Vec<usize> = (0..m)
        .filter(|&j| c0[j].abs() >= lambda_max - tie_eps)
        .collect();
    join_all(
        &entrants,
        lambda,
        u,
        &c0,
        &mut active,
        &mut signs,
        &mut excluded,
        &mut path.events,
    );
    path.breakpoints.push(lambda);
    path.coefficients.push(beta.clone());
    path.active_sets.push(active.clone());

    let max_events = MAX_EVENT_FACTOR * m + 50;
    let mut events_seen = 0usize;
    while lambda > 0.0 {
        events_seen += 1;
        if events_seen > max_events {
            return Err(SolverError::PathDegenerate(format!(
                "more than {max_events} events"
            )));
        }
        // Segment direction: d beta_A / d (down-step) = G^-1 s.
        let k = active.len();
        let dir = if k > 0 {
            let g = gram(u, &active);
            let s = DVector::from_vec(signs.clone());
            match g.cholesky() {
                Some(ch) => ch.solve(&s),
                None => {
                    return Err(SolverError::PathDegenerate(
                        "active Gram became singular".into(),
                    ))
                }
            }
        } else {
            DVector::zeros(0)
        };
        // v = U_A * dir, the fitted-change direction.
        let mut v = DVector::zeros(u.nrows());
        for (i, &j) in active.iter().enumerate() {
            v.axpy(dir[i], &u.column(j).into_owned(), 1.0);
        }

        // Candidate events, as down-steps d from the current lambda.
        #[derive(Clone, Copy)]
        struct Cand {
            d: f64,
            join: bool,
            index: usize,
            sign: f64,
        }
        let mut cands: Vec<Cand> = Vec::new();
        for j in 0..m {
            if excluded[j] || active.contains(&j) {
                continue;
            }
            let c_j = u.column(j).dot(&residual);
            let a_j = u.column(j).dot(&v);
            for (num, den, sgn) in [
                (lambda - c_j, 1.0 - a_j, 1.0),
                (lambda + c_j, 1.0 + a_j, -1.0),
            ] {
                let d = num / den;
                if d.is_finite() && d > d_eps {
                    cands.push(Cand {
                        d,
                        join: true,
                        index: j,
                        sign: sgn,
                    });
                }
            }
        }
        for (i, &j) in active.iter().enumerate() {
            if dir[i] != 0.0 {
                let d = -beta[j] / dir[i];
                if d.is_finite() && d > d_eps {
                    cands.push(Cand {
                        d,
                        join: false,
                        index: j,
                        sign: 0.0,
                    });
                }
            }
        }

        let d_min = cands
            .iter()
            .map(|c| c.d)
            .fold(f64::INFINITY, f64::min);

        if d_min >= lambda - d_eps {
            // No event before lambda = 0: extend the segment to the end.
            for (i, &j) in active.iter().enumerate() {
                beta[j] += lambda * dir[i];
            }
            path.breakpoints.push(0.0);
            path.coefficients.push(beta.clone());
            path.active_sets.push(active.clone());
            return Ok(path);
        }

        let lambda_new = lambda - d_min;
        for (i, &j) in active.iter().enumerate() {
            beta[j] += d_min * dir[i];
        }

        // Simultaneous events within the tie tolerance: drops first, then joins.
        let tied: Vec<Cand> = cands
            .iter()
            .copied()
            .filter(|c| c.d - d_min <= tie_eps)
            .collect();
        let mut drops: Vec<usize> = tied.iter().filter(|c| !c.join).map(|c| c.index).collect();
        drops.sort_unstable();
        drops.dedup();
        let mut joins: Vec<(usize, f64)> = tied
            .iter()
            .filter(|c| c.join)
            .map(|c| (c.index, c.sign))
            .collect();
        joins.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        joins.dedup_by_key(|c| c.0);

        for &j in &drops {
            let pos = active.iter().position(|&a| a == j).unwrap();
            active.remove(pos);
            signs.remove(pos);
            beta[j] = 0.0;
            path.events.push(PathEvent {
                lambda: lambda_new,
                kind: PathEventKind::Drop,
                index: j,
                tied_with: drops.iter().copied().filter(|&o| o != j).collect(),
            });
        }
        let join_indices: Vec<usize> = joins.iter().map(|c| c.0).collect();
        for &(j, sgn) in &joins {
            try_join(
                j,
                sgn,
                lambda_new,
                u,
                &mut active,
                &mut signs,
                &mut excluded,
                &mut path.events,
                &join_indices,
            );
        }

        residual = y - u * &beta;
        lambda = lambda_new;
        path.breakpoints.push(lambda);
        path.coefficients.push(beta.clone());
        path.active_sets.push(active.clone());
    }
    Ok(path)
}

fn gram(u: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    let k = active.len();
    DMatrix::from_fn(k, k, |a, b| u.column(active[a]).dot(&u.column(active[b])))
}

#[allow(clippy::too_many_arguments)]
fn join_all(
    entrants: &[usize],
    lambda: f64,
    u: &DMatrix<f64>,
    c: &DVector<f64>,
    active: &mut Vec<usize>,
    signs: &mut Vec<f64>,
    excluded: &mut [bool],
    events: &mut Vec<PathEvent>,
) {
    for &j in entrants {
        let sgn = if c[j] >= 0.0 { 1.0 } else { -1.0 };
        try_join(j, sgn, lambda, u, active, signs, excluded, events, entrants);
    }
}

/// Adds `j` to the active set if the resulting Gram stays positive definite;
/// otherwise records a permanent exclusion.
#[allow(clippy::too_many_arguments)]
fn try_join(
    j: usize,
    sign: f64,
    lambda: f64,
    u: &DMatrix<f64>,
    active: &mut Vec<usize>,
    signs: &mut Vec<f64>,
    excluded: &mut [bool],
    events: &mut Vec<PathEvent>,
    tied: &[usize],
) {
    let mut trial = active.clone();
    trial.push(j);
    let ok = gram(u, &trial).cholesky().is_some();
    let tied_with: Vec<usize> = tied.iter().copied().filter(|&o| o != j).collect();
    if ok {
        let pos = active.partition_point(|&a| a < j);
        active.insert(pos, j);
        signs.insert(pos, sign);
        events.push(PathEvent {
            lambda,
            kind: PathEventKind::Join,
            index: j,
            tied_with,
        });
    } else {
        excluded[j] = true;
        events.push(PathEvent {
            lambda,
            kind: PathEventKind::Exclude,
            index: j,
            tied_with,
        });
    }
}
