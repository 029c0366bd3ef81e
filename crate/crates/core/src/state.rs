//! Kets and density matrices, plus the invariant checks (trace, Hermiticity,
//! positivity) that every stored output point must satisfy.

use num_complex::Complex64;

use crate::error::CoreError;
use crate::operator::{Operator, MAX_DIM};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerances for density-matrix invariants at output points. Positivity is
/// the loosest: the splitting integrator is CP by construction, so only
/// rounding-level negativity can occur, but RK4 (the cross-check path) is
/// allowed small transients.
pub const TRACE_TOL: f64 = 1e-9;
pub const HERM_TOL: f64 = 1e-10;
pub const EIG_TOL: f64 = -1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket {
    dim: usize,
    v: [Complex64; MAX_DIM],
}

impl Ket {
    pub fn from_components(components: &[Complex64]) -> Self {
        assert!(components.len() == 2 || components.len() == 4);
        let mut v = [C0; MAX_DIM];
        v[..components.len()].copy_from_slice(components);
        Ket {
            dim: components.len(),
            v,
        }
    }

    /// |up> = the m_s = -1 sublevel, basis index 0.
    pub fn up() -> Self {
        Self::from_components(&[Complex64::new(1.0, 0.0), C0])
    }

    /// |down> = the m_s = 0 sublevel, basis index 1. Default initial state.
    pub fn down() -> Self {
        Self::from_components(&[C0, Complex64::new(1.0, 0.0)])
    }

    /// -1 eigenstate of sigma_x: (|up> - |down>)/sqrt(2).
    pub fn minus_x() -> Self {
        let r = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_components(&[r, -r])
    }

    /// -1 eigenstate of sigma_y: (|up> - i |down>)/sqrt(2).
    pub fn minus_y() -> Self {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        Self::from_components(&[Complex64::new(r, 0.0), Complex64::new(0.0, -r)])
    }

    /// +1 eigenstate of sigma_y: (|up> + i |down>)/sqrt(2).
    pub fn plus_y() -> Self {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        Self::from_components(&[Complex64::new(r, 0.0), Complex64::new(0.0, r)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> Complex64 {
        debug_assert!(i < self.dim);
        self.v[i]
    }

    pub fn inner(&self, other: &Ket) -> Complex64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = C0;
        for i in 0..self.dim {
            acc += self.v[i].conj() * other.v[i];
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.inner(self).re)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero ket");
        let mut out = *self;
        for i in 0..self.dim {
            out.v[i] /= n;
        }
        out
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        assert_eq!(self.dim * other.dim, 4);
        let mut v = [C0; MAX_DIM];
        for i in 0..self.dim {
            for j in 0..other.dim {
                v[i * other.dim + j] = self.v[i] * other.v[j];
            }
        }
        Ket { dim: 4, v }
    }

    /// U |psi>.
    pub fn apply(&self, u: &Operator) -> Ket {
        assert_eq!(self.dim, u.dim());
        Ket {
            dim: self.dim,
            v: u.mul_ket(&self.v),
        }
    }

    /// |psi><psi| as an operator.
    pub fn projector(&self) -> Operator {
        Operator::from_fn(self.dim, |i, j| self.v[i] * self.v[j].conj())
    }
}

/// Density matrix. Trace-one positive Hermitian for physical states; the
/// process-tomography path also pushes traceless Pauli operators through the
/// same container, so invariants are only *checked*, never assumed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumState {
    rho: Operator,
}

impl QuantumState {
    pub fn from_ket(ket: &Ket) -> Self {
        QuantumState {
            rho: ket.projector(),
        }
    }

    pub fn from_operator(rho: Operator) -> Self {
        QuantumState { rho }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        QuantumState {
            rho: Operator::identity(dim) * (1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn rho_mut(&mut self) -> &mut Operator {
        &mut self.rho
    }

    /// Population of basis state `i`.
    pub fn basis_population(&self, i: usize) -> f64 {
        self.rho.get(i, i).re
    }

    /// <ket| rho |ket>.
    pub fn overlap(&self, ket: &Ket) -> f64 {
        assert_eq!(self.dim(), ket.dim());
        let mut acc = C0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += ket.get(i).conj() * self.rho.get(i, j) * ket.get(j);
            }
        }
        acc.re
    }

    /// tr(rho A).re -- the expectation value for Hermitian A.
    pub fn expect(&self, op: &Operator) -> f64 {
        assert_eq!(self.dim(), op.dim());
        let mut acc = C0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.rho.get(i, j) * op.get(j, i);
            }
        }
        acc.re
    }

    /// (x, y, z) with x = tr(rho sigma_x) etc. Single qubit only.
    pub fn bloch_vector(&self) -> (f64, f64, f64) {
        assert_eq!(self.dim(), 2);
        let r01 = self.rho.get(0, 1);
        let x = 2.0 * r01.re;
        let y = -2.0 * r01.im;
        let z = self.rho.get(0, 0).re - self.rho.get(1, 1).re;
        (x, y, z)
    }

    pub fn purity(&self) -> f64 {
        self.expect(&self.rho)
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// rho -> U rho U^dag.
    pub fn evolve_unitary(&mut self, u: &Operator) {
        self.rho = *u * self.rho * u.adjoint();
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 2 {
            // closed form: tr/2 - sqrt((dz/2)^2 + |r01|^2)
            let half_tr = 0.5 * (self.rho.get(0, 0).re + self.rho.get(1, 1).re);
            let dz = 0.5 * (self.rho.get(0, 0).re - self.rho.get(1, 1).re);
            let off = self.rho.get(0, 1).norm();
            half_tr - libm::sqrt(dz * dz + off * off)
        } else {
            self.rho.eigvalsh()[0]
        }
    }

    /// Uhlmann fidelity between two single-qubit states, via the 2x2 closed
    /// form F = tr(r1 r2) + 2 sqrt(det r1 det r2). Determinants of physical
    /// states are >= 0; rounding can push them epsilon-negative, so clamp.
    pub fn fidelity_with(&self, other: &QuantumState) -> f64 {
        assert_eq!(self.dim(), 2, "closed-form fidelity is single-qubit only");
        assert_eq!(other.dim(), 2);
        let overlap = {
            let mut acc = C0;
            for i in 0..2 {
                for j in 0..2 {
                    acc += self.rho.get(i, j) * other.rho.get(j, i);
                }
            }
            acc.re
        };
        let det = |s: &QuantumState| -> f64 {
            (s.rho.get(0, 0) * s.rho.get(1, 1) - s.rho.get(0, 1) * s.rho.get(1, 0)).re
        };
        let d = det(self).max(0.0) * det(other).max(0.0);
        (overlap + 2.0 * libm::sqrt(d)).min(1.0)
    }

    /// Enforce the physical-state invariants at an output point.
    pub fn validate(&self, t_us: f64) -> Result<(), CoreError> {
        let trace_dev = (self.trace() - Complex64::new(1.0, 0.0)).norm();
        if trace_dev > TRACE_TOL {
            return Err(CoreError::StateInvariant {
                which: "trace",
                value: trace_dev,
                t_us,
            });
        }
        let herm = self.rho.hermiticity_dev();
        if herm > HERM_TOL {
            return Err(CoreError::StateInvariant {
                which: "hermiticity",
                value: herm,
                t_us,
            });
        }
        let eig = self.min_eigenvalue();
        if eig < EIG_TOL {
            return Err(CoreError::StateInvariant {
                which: "positivity",
                value: eig,
                t_us,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli, propagator, PauliAxis};
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_and_bloch_conventions() {
        let down = QuantumState::from_ket(&Ket::down());
        assert_eq!(down.basis_population(1), 1.0);
        let (x, y, z) = down.bloch_vector();
        assert_eq!((x, y), (0.0, 0.0));
        assert_eq!(z, -1.0);

        let up = QuantumState::from_ket(&Ket::up());
        assert_eq!(up.bloch_vector().2, 1.0);

        let my = QuantumState::from_ket(&Ket::minus_y());
        let (x, y, z) = my.bloch_vector();
        assert_abs_diff_eq!(y, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(my.expect(&pauli(PauliAxis::Y)), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn minus_y_is_sigma_y_eigenstate() {
        let ket = Ket::minus_y();
        let mapped = ket.apply(&pauli(PauliAxis::Y));
        for i in 0..2 {
            let d = mapped.get(i) + ket.get(i);
            assert!(d.norm() < 1e-15);
        }
    }

    #[test]
    fn purity_and_mixedness() {
        assert_abs_diff_eq!(
            QuantumState::from_ket(&Ket::minus_x()).purity(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(QuantumState::maximally_mixed(2).purity(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(QuantumState::maximally_mixed(4).purity(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn unitary_evolution_preserves_invariants() {
        let h = Operator::from_pauli_coefficients(0.3, 1.7, -0.4, 0.9);
        let u = propagator(&h, 0.21).unwrap();
        let mut s = QuantumState::from_ket(&Ket::down());
        for step in 0..50 {
            s.evolve_unitary(&u);
            s.validate(step as f64 * 0.21).unwrap();
        }
        assert_abs_diff_eq!(s.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_closed_form() {
        let a = QuantumState::from_ket(&Ket::down());
        let b = QuantumState::from_ket(&Ket::minus_x());
        // pure states: F = |<a|b>|^2 = 1/2
        assert_abs_diff_eq!(a.fidelity_with(&b), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.fidelity_with(&a), 1.0, epsilon = 1e-12);
        // pure vs maximally mixed
        let m = QuantumState::maximally_mixed(2);
        assert_abs_diff_eq!(a.fidelity_with(&m), 0.5 + 0.0, epsilon = 1e-12);
        // mixed-mixed symmetric
        assert_abs_diff_eq!(m.fidelity_with(&m), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            a.fidelity_with(&b),
            b.fidelity_with(&a),
            epsilon = 1e-15
        );
    }

    #[test]
    fn validate_flags_violations() {
        let mut bad = QuantumState::maximally_mixed(2);
        *bad.rho_mut() = *bad.rho() * 1.5;
        assert!(matches!(
            bad.validate(0.0),
            Err(CoreError::StateInvariant { which: "trace", .. })
        ));

        // trace-one Hermitian but indefinite matrix
        let indefinite = Operator::from_pauli_coefficients(0.5, 0.8, 0.0, 0.0);
        let s = QuantumState::from_operator(indefinite);
        assert!(matches!(
            s.validate(1.0),
            Err(CoreError::StateInvariant {
                which: "positivity",
                ..
            })
        ));
    }

    #[test]
    fn two_qubit_overlap_and_tensor() {
        let dd = Ket::down().tensor(&Ket::down());
        let s = QuantumState::from_ket(&dd);
        assert_eq!(s.dim(), 4);
        assert_abs_diff_eq!(s.overlap(&dd), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.basis_population(0b11), 1.0, epsilon = 1e-15);
        let ud = Ket::up().tensor(&Ket::down());
        assert_abs_diff_eq!(s.overlap(&ud), 0.0, epsilon = 1e-15);
        s.validate(0.0).unwrap();
    }
}
