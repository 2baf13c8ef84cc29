//! Dirichlet eigenbases of -Laplace on the interval (0, pi) and the square
//! (0, pi)^2, with analysis/synthesis transforms on a uniform sine-quadrature
//! grid.
//!
//! Interval modes are sqrt(2/pi) * sin(k x) with eigenvalue k^2; square modes
//! are tensor products with eigenvalue k1^2 + k2^2. The uniform interior grid
//! of P points per dimension integrates products of retained modes exactly as
//! long as P >= 2 * (max mode index), which is enforced as the dealiasing
//! floor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub quadrature_points_per_dim: usize,
}

/// A single basis mode: 1D index k, or a 2D pair (k1, k2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    One(usize),
    Two(usize, usize),
}

impl Mode {
    pub fn max_index(&self) -> usize {
        match *self {
            Mode::One(k) => k,
            Mode::Two(k1, k2) => k1.max(k2),
        }
    }

    fn eigenvalue_int(&self) -> u64 {
        match *self {
            Mode::One(k) => (k * k) as u64,
            Mode::Two(k1, k2) => (k1 * k1 + k2 * k2) as u64,
        }
    }
}

/// Positions of modes sharing one eigenvalue, in basis order.
#[derive(Clone, Debug)]
pub struct MultiplicityGroup {
    pub eigenvalue: f64,
    pub positions: Vec<usize>,
}

/// Eigenpairs of -Laplace plus quadrature and transform machinery.
///
/// Immutable after construction; transforms are pure, so a basis can be
/// shared freely across threads.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub domain: DomainSpec,
    pub modes: Vec<Mode>,
    /// Eigenvalues of -Laplace, nondecreasing.
    pub eigenvalues: Vec<f64>,
    pub groups: Vec<MultiplicityGroup>,
    /// phi_k evaluated on the quadrature grid; n_points x n_modes.
    synth: DMatrix<f64>,
    /// Uniform quadrature weight (per grid point).
    weight: f64,
}

/// Coefficients over an eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub coeffs: DVector<f64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: DVector::zeros(n),
        }
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self {
            coeffs: DVector::from_vec(v),
        }
    }

    /// Field of length `n` with `value` at each listed basis position.
    pub fn from_pairs(n: usize, pairs: &[(usize, f64)]) -> Result<Self> {
        let mut coeffs = DVector::zeros(n);
        for &(pos, value) in pairs {
            if pos >= n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    got: pos + 1,
                });
            }
            coeffs[pos] = value;
        }
        Ok(Self { coeffs })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }

    /// L^2 scalar product; equal to sum a_k b_k for an orthonormal basis.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.coeffs.dot(&other.coeffs))
    }
}

/// Smallest admissible quadrature resolution for `n_modes` on `kind`.
pub fn min_quadrature_points(kind: DomainKind, n_modes: usize) -> usize {
    2 * max_mode_index(kind, n_modes)
}

fn max_mode_index(kind: DomainKind, n_modes: usize) -> usize {
    enumerate_modes(kind, n_modes)
        .iter()
        .map(Mode::max_index)
        .max()
        .unwrap_or(1)
}

fn enumerate_modes(kind: DomainKind, n_modes: usize) -> Vec<Mode> {
    match kind {
        DomainKind::Interval => (1..=n_modes).map(Mode::One).collect(),
        DomainKind::Square => {
            // k bound: mode (1, n) already has eigenvalue 1 + n^2, far beyond
            // the n-th smallest, so n is a safe enumeration cap.
            let cap = n_modes.max(2);
            let mut all: Vec<Mode> = Vec::with_capacity(cap * cap);
            for k1 in 1..=cap {
                for k2 in 1..=cap {
                    all.push(Mode::Two(k1, k2));
                }
            }
            all.sort_by_key(|m| match *m {
                Mode::Two(k1, k2) => (m.eigenvalue_int(), k1 as u64, k2 as u64),
                Mode::One(_) => unreachable!(),
            });
            all.truncate(n_modes);
            all
        }
    }
}

/// Build the eigenbasis with the `n_modes` smallest eigenvalues.
///
/// Square-domain ties are ordered lexicographically by (k1, k2).
pub fn build_basis(domain: &DomainSpec, n_modes: usize) -> Result<EigenBasis> {
    assert!(n_modes >= 1, "n_modes must be positive");
    let modes = enumerate_modes(domain.kind, n_modes);
    let k_max = modes.iter().map(Mode::max_index).max().unwrap();
    let p = domain.quadrature_points_per_dim;
    if p < 2 * k_max {
        return Err(Error::ResolutionTooLow {
            points: p,
            floor: 2 * k_max,
        });
    }

    let eigenvalues: Vec<f64> = modes.iter().map(|m| m.eigenvalue_int() as f64).collect();

    let mut groups: Vec<MultiplicityGroup> = Vec::new();
    for (pos, m) in modes.iter().enumerate() {
        let lam = m.eigenvalue_int() as f64;
        match groups.last_mut() {
            Some(g) if g.eigenvalue == lam => g.positions.push(pos),
            _ => groups.push(MultiplicityGroup {
                eigenvalue: lam,
                positions: vec![pos],
            }),
        }
    }

    // Interior grid x_j = pi j / (P + 1); the discrete sine orthogonality
    // sum_j sin(k x_j) sin(k' x_j) = (P+1)/2 delta_{kk'} holds for k, k' <= P.
    let h = PI / (p as f64 + 1.0);
    let grid_1d: Vec<f64> = (1..=p).map(|j| h * j as f64).collect();

    let (n_points, weight, synth) = match domain.kind {
        DomainKind::Interval => {
            let scale = (2.0 / PI).sqrt();
            let mut synth = DMatrix::zeros(p, n_modes);
            for (col, m) in modes.iter().enumerate() {
                let k = match *m {
                    Mode::One(k) => k as f64,
                    Mode::Two(..) => unreachable!(),
                };
                for (row, &x) in grid_1d.iter().enumerate() {
                    synth[(row, col)] = scale * (k * x).sin();
                }
            }
            (p, h, synth)
        }
        DomainKind::Square => {
            let scale = 2.0 / PI;
            let n_points = p * p;
            let mut synth = DMatrix::zeros(n_points, n_modes);
            for (col, m) in modes.iter().enumerate() {
                let (k1, k2) = match *m {
                    Mode::Two(k1, k2) => (k1 as f64, k2 as f64),
                    Mode::One(_) => unreachable!(),
                };
                for (i, &x) in grid_1d.iter().enumerate() {
                    let sx = (k1 * x).sin();
                    for (j, &y) in grid_1d.iter().enumerate() {
                        synth[(i * p + j, col)] = scale * sx * (k2 * y).sin();
                    }
                }
            }
            (n_points, h * h, synth)
        }
    };
    debug_assert_eq!(synth.nrows(), n_points);

    Ok(EigenBasis {
        domain: *domain,
        modes,
        eigenvalues,
        groups,
        synth,
        weight,
    })
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.synth.nrows()
    }

    pub fn quadrature_weight(&self) -> f64 {
        self.weight
    }

    /// Grid values of the field u = sum a_k phi_k.
    pub fn synthesize(&self, field: &SpectralField) -> Result<DVector<f64>> {
        if field.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: field.len(),
            });
        }
        Ok(&self.synth * &field.coeffs)
    }

    /// Coefficients of grid values: a_k = sum_j w phi_k(x_j) u(x_j).
    pub fn analyze(&self, values: &DVector<f64>) -> Result<SpectralField> {
        if values.len() != self.n_points() {
            return Err(Error::SizeMismatch {
                expected: self.n_points(),
                got: values.len(),
            });
        }
        Ok(SpectralField {
            coeffs: self.weight * (self.synth.tr_mul(values)),
        })
    }

    /// Quadrature of a scalar function of the grid values of `field`.
    pub fn quadrature_of(&self, field: &SpectralField, f: impl Fn(f64) -> f64) -> Result<f64> {
        let values = self.synthesize(field)?;
        Ok(self.weight * values.iter().map(|&u| f(u)).sum::<f64>())
    }

    /// Index into `groups` of the group containing basis position `pos`.
    pub fn group_of_position(&self, pos: usize) -> usize {
        self.groups
            .iter()
            .position(|g| g.positions.contains(&pos))
            .expect("position within basis")
    }

    /// Group whose eigenvalue matches `lambda` exactly (integer eigenvalues).
    pub fn group_by_eigenvalue(&self, lambda: f64) -> Result<usize> {
        self.groups
            .iter()
            .position(|g| (g.eigenvalue - lambda).abs() < 1e-9)
            .ok_or(Error::UnknownGroup(lambda))
    }

    /// lambda_k^m for every basis position.
    pub fn powered_eigenvalues(&self, m: u32) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.eigenvalues.iter().map(|&l| l.powi(m as i32)))
    }

    /// Gram matrix of the basis functions under the quadrature product.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        self.weight * self.synth.tr_mul(&self.synth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval(n: usize) -> EigenBasis {
        let domain = DomainSpec {
            kind: DomainKind::Interval,
            quadrature_points_per_dim: min_quadrature_points(DomainKind::Interval, n),
        };
        build_basis(&domain, n).unwrap()
    }

    fn square(n: usize) -> EigenBasis {
        let domain = DomainSpec {
            kind: DomainKind::Square,
            quadrature_points_per_dim: min_quadrature_points(DomainKind::Square, n),
        };
        build_basis(&domain, n).unwrap()
    }

    #[test]
    fn interval_eigenvalues_are_squares() {
        let b = interval(3);
        assert_eq!(b.eigenvalues, vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn square_first_eigenvalue_is_two() {
        let b = square(1);
        assert_eq!(b.eigenvalues, vec![2.0]);
        assert_eq!(b.modes, vec![Mode::Two(1, 1)]);
    }

    #[test]
    fn square_lambda_five_has_multiplicity_two() {
        let b = square(6);
        let g = &b.groups[b.group_by_eigenvalue(5.0).unwrap()];
        assert_eq!(g.positions.len(), 2);
        assert_eq!(b.modes[g.positions[0]], Mode::Two(1, 2));
        assert_eq!(b.modes[g.positions[1]], Mode::Two(2, 1));
    }

    #[test]
    fn square_lambda_fifty_has_multiplicity_three() {
        let b = square(40);
        let g = &b.groups[b.group_by_eigenvalue(50.0).unwrap()];
        let modes: Vec<Mode> = g.positions.iter().map(|&p| b.modes[p]).collect();
        assert_eq!(modes, vec![Mode::Two(1, 7), Mode::Two(5, 5), Mode::Two(7, 1)]);
    }

    #[test]
    fn eigenvalues_nondecreasing() {
        for b in [interval(12), square(30)] {
            for w in b.eigenvalues.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for b in [interval(16), square(20)] {
            let gram = b.gram_matrix();
            for i in 0..b.len() {
                for j in 0..b.len() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[(i, j)], expect, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn resolution_too_low_is_rejected() {
        let domain = DomainSpec {
            kind: DomainKind::Interval,
            quadrature_points_per_dim: 7,
        };
        match build_basis(&domain, 4) {
            Err(Error::ResolutionTooLow { points: 7, floor: 8 }) => {}
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn analyze_of_first_mode_is_e1() {
        let b = interval(8);
        let e1 = SpectralField::from_pairs(8, &[(0, 1.0)]).unwrap();
        let grid = b.synthesize(&e1).unwrap();
        let back = b.analyze(&grid).unwrap();
        for k in 0..8 {
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(back.coeffs[k], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity_for_random_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = interval(16);
        let a = SpectralField::from_vec((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let back = b.analyze(&b.synthesize(&a).unwrap()).unwrap();
        assert!((back.coeffs - a.coeffs).norm() < 1e-12);
    }

    #[test]
    fn inner_product_of_unit_vectors() {
        let e1 = SpectralField::from_pairs(4, &[(0, 1.0)]).unwrap();
        let e2 = SpectralField::from_pairs(4, &[(1, 1.0)]).unwrap();
        assert_eq!(e1.inner_product(&e1).unwrap(), 1.0);
        assert_eq!(e1.inner_product(&e2).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_size_mismatch() {
        let a = SpectralField::zeros(3);
        let b = SpectralField::zeros(4);
        assert!(matches!(
            a.inner_product(&b),
            Err(Error::SizeMismatch { .. })
        ));
    }

    proptest! {
        // Parseval: coefficient norm equals the quadrature L^2 norm.
        #[test]
        fn parseval_via_quadrature(seed in 0u64..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = interval(16);
            let a = SpectralField::from_vec((0..16).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let grid = b.synthesize(&a).unwrap();
            let quad_norm_sq = b.quadrature_weight() * grid.iter().map(|&u| u * u).sum::<f64>();
            let coeff_norm_sq = a.coeffs.norm_squared();
            prop_assert!((quad_norm_sq - coeff_norm_sq).abs() <= 1e-10 * (1.0 + coeff_norm_sq));
        }

        // Quadrature inner product of synthesized fields equals sum a_k b_k.
        #[test]
        fn inner_product_matches_quadrature(seed in 0u64..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let b = square(12);
            let a = SpectralField::from_vec((0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let c = SpectralField::from_vec((0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let ga = b.synthesize(&a).unwrap();
            let gc = b.synthesize(&c).unwrap();
            let quad = b.quadrature_weight() * ga.dot(&gc);
            prop_assert!((quad - a.inner_product(&c).unwrap()).abs() <= 1e-10);
        }
    }
}
