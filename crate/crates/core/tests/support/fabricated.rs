//! A hand-built three-sample pass plus plain-loop sums of every noise
//! statistic over it. The pass is not a real filter output; the estimators
//! are just formulas over its fields, so any numbers do.

#![allow(dead_code)]

use kftune_core::filter::{FilterPass, FilterStep, GaussianBelief, Linearization, SmootherPass};
use kftune_core::tuning::{QMethod, RMethod};
use kftune_core::{Mat, Vector};

pub const NA: usize = 3;
pub const M: usize = 2;
pub const N: usize = 3;

pub type Grid = Vec<Vec<f64>>;

/// Deterministic filler values in roughly [-1, 1].
pub struct Filler(u64);

impl Filler {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
    pub fn grid(&mut self, r: usize, c: usize) -> Grid {
        (0..r)
            .map(|_| (0..c).map(|_| self.next()).collect())
            .collect()
    }
    pub fn col(&mut self, r: usize) -> Vec<f64> {
        (0..r).map(|_| self.next()).collect()
    }
}

pub fn mat(g: &Grid) -> Mat {
    Mat::from_fn(g.len(), g[0].len(), |i, j| g[i][j])
}

pub fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

pub fn mul(a: &Grid, b: &Grid) -> Grid {
    let (r, inner, c) = (a.len(), b.len(), b[0].len());
    (0..r)
        .map(|i| {
            (0..c)
                .map(|j| (0..inner).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn tr(a: &Grid) -> Grid {
    (0..a[0].len())
        .map(|j| (0..a.len()).map(|i| a[i][j]).collect())
        .collect()
}

pub fn outer(a: &[f64]) -> Grid {
    a.iter()
        .map(|x| a.iter().map(|y| x * y).collect())
        .collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn mat_vec(a: &Grid, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn lin_comb(terms: &[(f64, &Grid)]) -> Grid {
    let (r, c) = (terms[0].1.len(), terms[0].1[0].len());
    (0..r)
        .map(|i| {
            (0..c)
                .map(|j| terms.iter().map(|(s, g)| s * g[i][j]).sum())
                .collect()
        })
        .collect()
}

pub fn sandwich(h: &Grid, p: &Grid) -> Grid {
    mul(&mul(h, p), &tr(h))
}

pub struct Fabricated {
    pub prior_mean: Vec<Vec<f64>>,
    pub prior_cov: Vec<Grid>,
    pub post_mean: Vec<Vec<f64>>,
    pub post_cov: Vec<Grid>,
    pub gain: Vec<Grid>,
    pub innovation: Vec<Vec<f64>>,
    pub filtered_residue: Vec<Vec<f64>>,
    pub f: Vec<Grid>,
    pub h: Vec<Grid>,
    pub sm_mean: Vec<Vec<f64>>,
    pub sm_cov: Vec<Grid>,
    pub lag: Vec<Grid>,
    pub sm_residue: Vec<Vec<f64>>,
    pub f_smoothed: Vec<Vec<f64>>,
    pub f_jac_smoothed: Vec<Grid>,
    pub xd: Vec<Vec<f64>>,
    pub f_jac_dyn: Vec<Grid>,
    pub h_smoothed: Vec<Grid>,
    pub h_filtered: Vec<Grid>,
    pub dyn_residue: Vec<Vec<f64>>,
}

impl Fabricated {
    pub fn new(seed: u64) -> Self {
        let mut g = Filler(seed);
        let per_step =
            |g: &mut Filler, r: usize, c: usize| (0..N).map(|_| g.grid(r, c)).collect::<Vec<_>>();
        let per_step_col = |g: &mut Filler, r: usize, count: usize| {
            (0..count).map(|_| g.col(r)).collect::<Vec<_>>()
        };
        Self {
            prior_mean: per_step_col(&mut g, NA, N),
            prior_cov: per_step(&mut g, NA, NA),
            post_mean: per_step_col(&mut g, NA, N + 1),
            post_cov: (0..=N).map(|_| g.grid(NA, NA)).collect(),
            gain: per_step(&mut g, NA, M),
            innovation: per_step_col(&mut g, M, N),
            filtered_residue: per_step_col(&mut g, M, N),
            f: per_step(&mut g, NA, NA),
            h: per_step(&mut g, M, NA),
            sm_mean: per_step_col(&mut g, NA, N + 1),
            sm_cov: (0..=N).map(|_| g.grid(NA, NA)).collect(),
            lag: per_step(&mut g, NA, NA),
            sm_residue: per_step_col(&mut g, M, N),
            f_smoothed: per_step_col(&mut g, NA, N),
            f_jac_smoothed: per_step(&mut g, NA, NA),
            xd: per_step_col(&mut g, NA, N + 1),
            f_jac_dyn: per_step(&mut g, NA, NA),
            h_smoothed: per_step(&mut g, M, NA),
            h_filtered: per_step(&mut g, M, NA),
            dyn_residue: per_step_col(&mut g, M, N),
        }
    }

    pub fn pass(&self) -> FilterPass {
        let steps = (0..N)
            .map(|i| FilterStep {
                prior: GaussianBelief::new(vector(&self.prior_mean[i]), mat(&self.prior_cov[i])),
                posterior: GaussianBelief::new(
                    vector(&self.post_mean[i + 1]),
                    mat(&self.post_cov[i + 1]),
                ),
                gain: mat(&self.gain[i]),
                innovation: vector(&self.innovation[i]),
                filtered_residue: vector(&self.filtered_residue[i]),
                s1: Mat::identity(M, M),
                f: mat(&self.f[i]),
                h: mat(&self.h[i]),
            })
            .collect();
        FilterPass {
            init: GaussianBelief::new(vector(&self.post_mean[0]), mat(&self.post_cov[0])),
            q: Mat::identity(NA, NA),
            r: Mat::identity(M, M),
            steps,
        }
    }

    pub fn smoother(&self) -> SmootherPass {
        SmootherPass {
            smoothed: (0..=N)
                .map(|k| GaussianBelief::new(vector(&self.sm_mean[k]), mat(&self.sm_cov[k])))
                .collect(),
            gains: (0..N).map(|_| Mat::zeros(NA, NA)).collect(),
            lag_one: self.lag.iter().map(mat).collect(),
            smoothed_residue: self.sm_residue.iter().map(|v| vector(v)).collect(),
        }
    }

    pub fn linearization(&self) -> Linearization {
        Linearization {
            f_smoothed: self.f_smoothed.iter().map(|v| vector(v)).collect(),
            f_jac_smoothed: self.f_jac_smoothed.iter().map(mat).collect(),
            xd: self.xd.iter().map(|v| vector(v)).collect(),
            f_jac_dyn: self.f_jac_dyn.iter().map(mat).collect(),
            h_smoothed: self.h_smoothed.iter().map(mat).collect(),
            h_filtered: self.h_filtered.iter().map(mat).collect(),
            dyn_residue: self.dyn_residue.iter().map(|v| vector(v)).collect(),
        }
    }

    pub fn average(terms: Vec<Grid>) -> Grid {
        let refs: Vec<(f64, &Grid)> = terms
            .iter()
            .map(|t| (1.0 / terms.len() as f64, t))
            .collect();
        lin_comb(&refs)
    }

    pub fn r_direct(&self, method: RMethod) -> Grid {
        Self::average(
            (1..=N)
                .map(|k| {
                    let i = k - 1;
                    match method {
                        RMethod::Em => lin_comb(&[
                            (1.0, &outer(&self.sm_residue[i])),
                            (1.0, &sandwich(&self.h_smoothed[i], &self.sm_cov[k])),
                        ]),
                        RMethod::Ms => lin_comb(&[
                            (1.0, &outer(&self.filtered_residue[i])),
                            (1.0, &sandwich(&self.h_filtered[i], &self.post_cov[k])),
                        ]),
                        RMethod::Mt => lin_comb(&[
                            (1.0, &outer(&self.innovation[i])),
                            (-1.0, &sandwich(&self.h[i], &self.prior_cov[i])),
                        ]),
                        RMethod::DynResidue => outer(&self.dyn_residue[i]),
                        RMethod::Known => unreachable!(),
                    }
                })
                .collect(),
        )
    }

    pub fn second_order(&self, k: usize, f: &Grid) -> Grid {
        let lf = mul(&self.lag[k - 1], &tr(f));
        lin_comb(&[
            (1.0, &self.sm_cov[k]),
            (1.0, &sandwich(f, &self.sm_cov[k - 1])),
            (-1.0, &lf),
            (-1.0, &tr(&lf)),
        ])
    }

    pub fn q_direct(&self, method: QMethod) -> Grid {
        if method == QMethod::Ms {
            let cov = Self::average(self.innovation.iter().map(|v| outer(v)).collect());
            return sandwich(&self.gain[N - 1], &cov);
        }
        Self::average(
            (1..=N)
                .map(|k| {
                    let i = k - 1;
                    match method {
                        QMethod::Em => {
                            let w = sub(&self.sm_mean[k], &self.f_smoothed[i]);
                            lin_comb(&[
                                (1.0, &outer(&w)),
                                (1.0, &self.second_order(k, &self.f_jac_smoothed[i])),
                            ])
                        }
                        QMethod::Dsdt => {
                            let fd = &self.f_jac_dyn[i];
                            let prev = mat_vec(fd, &sub(&self.sm_mean[k - 1], &self.xd[k - 1]));
                            let w = sub(&sub(&self.sm_mean[k], &self.xd[k]), &prev);
                            lin_comb(&[(1.0, &outer(&w)), (1.0, &self.second_order(k, fd))])
                        }
                        QMethod::Mt => {
                            let w = sub(&self.post_mean[k], &self.prior_mean[i]);
                            lin_comb(&[
                                (1.0, &outer(&w)),
                                (-1.0, &sandwich(&self.f[i], &self.prior_cov[i])),
                                (1.0, &self.post_cov[k]),
                            ])
                        }
                        _ => unreachable!(),
                    }
                })
                .collect(),
        )
    }
}

/// Largest entry of `got` minus the symmetric part of `want`.
pub fn deviation(got: &Mat, want: &Grid) -> f64 {
    let sym = lin_comb(&[(0.5, want), (0.5, &tr(want))]);
    let mut worst = 0.0f64;
    for i in 0..sym.len() {
        for j in 0..sym.len() {
            worst = worst.max((got[(i, j)] - sym[i][j]).abs());
        }
    }
    worst
}

/// Estimates are symmetrised; the direct sums of non-symmetric fabricated
/// covariances are compared through their symmetric part.
pub fn assert_matches(got: &Mat, want: &Grid, label: &str) {
    let sym = lin_comb(&[(0.5, want), (0.5, &tr(want))]);
    for i in 0..sym.len() {
        for j in 0..sym.len() {
            let diff = (got[(i, j)] - sym[i][j]).abs();
            assert!(
                diff <= 1e-12,
                "{label} ({i},{j}): {} vs {}",
                got[(i, j)],
                sym[i][j]
            );
        }
    }
}
