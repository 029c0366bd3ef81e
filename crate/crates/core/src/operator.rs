//! Small dense complex matrices (2x2 single qubit, 4x4 qubit pair) and the
//! spin operator zoo the rest of the crate is built from.
//!
//! All Hamiltonians handled here are Hermitian with coefficients in angular
//! frequency units (rad/us); propagators are unitary. Matrices are stored in
//! a fixed 4x4 backing array with an explicit active dimension, so they are
//! plain `Copy` values that can be shared freely across threads.

use core::ops::{Add, Index, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::CoreError;

pub const MAX_DIM: usize = 4;

/// Hamiltonian builders produce exactly Hermitian matrices (the entries are
/// conjugate pairs of the same float values), so any deviation at this scale
/// means a caller handed something that is not a Hamiltonian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Propagators come out of closed forms / eigendecompositions and must be
/// unitary to well below this bound.
pub const UNITARITY_TOL: f64 = 1e-10;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Basis convention everywhere: index 0 = |up> (the m_s = -1 sublevel),
/// index 1 = |down> (the m_s = 0 sublevel). Two-qubit indices are
/// (a<<1)|b with qubit `a` the left tensor factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    m: [[Complex64; MAX_DIM]; MAX_DIM],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// The 2x2 Pauli / ladder matrices in the {|up>, |down>} basis.
///
/// sigma_plus = |up><down| raises |down> to |up>.
pub fn pauli(axis: PauliAxis) -> Operator {
    let i = Complex64::new(0.0, 1.0);
    match axis {
        PauliAxis::X => Operator::from_rows_2([[C0, C1], [C1, C0]]),
        PauliAxis::Y => Operator::from_rows_2([[C0, -i], [i, C0]]),
        PauliAxis::Z => Operator::from_rows_2([[C1, C0], [C0, -C1]]),
        PauliAxis::Plus => Operator::from_rows_2([[C0, C1], [C0, C0]]),
        PauliAxis::Minus => Operator::from_rows_2([[C0, C0], [C1, C0]]),
    }
}

/// Kronecker product; `a` is the left (high-bit) factor.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let dim = a.dim * b.dim;
    assert!(dim <= MAX_DIM, "tensor product dimension {dim} exceeds {MAX_DIM}");
    let mut out = Operator::zeros(dim);
    for i1 in 0..a.dim {
        for j1 in 0..a.dim {
            for i2 in 0..b.dim {
                for j2 in 0..b.dim {
                    out.m[i1 * b.dim + i2][j1 * b.dim + j2] = a.m[i1][j1] * b.m[i2][j2];
                }
            }
        }
    }
    out
}

/// Dipole-dipole coupling of two spin-1 centers restricted to the qubit
/// subspace spanned by {m_s = -1, m_s = 0} on each spin:
/// (J/2)(sigma_z sigma_z + sigma_z x I + I x sigma_z), J in MHz (cyclic),
/// returned in angular units. Equals the spin-1 construction 2J Sz Sz
/// restricted to the subspace, up to an additive (J/2) multiple of identity.
pub fn project_dipolar_to_qubit(j_mhz: f64) -> Operator {
    let j_ang = crate::ang(j_mhz);
    let sz = pauli(PauliAxis::Z);
    let id = Operator::identity(2);
    (tensor(&sz, &sz) + tensor(&sz, &id) + tensor(&id, &sz)) * (0.5 * j_ang)
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "only dims 2 and 4 are supported");
        Operator {
            dim,
            m: [[C0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = C1;
        }
        out
    }

    pub fn from_rows_2(rows: [[Complex64; 2]; 2]) -> Self {
        let mut out = Self::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = rows[i][j];
            }
        }
        out
    }

    pub fn from_rows_4(rows: [[Complex64; 4]; 4]) -> Self {
        Operator { dim: 4, m: rows }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out.m[i][j] = f(i, j);
            }
        }
        out
    }

    /// a0*I + ax*sigma_x + ay*sigma_y + az*sigma_z with real coefficients:
    /// exactly Hermitian by construction.
    pub fn from_pauli_coefficients(a0: f64, ax: f64, ay: f64, az: f64) -> Self {
        Self::from_rows_2([
            [
                Complex64::new(a0 + az, 0.0),
                Complex64::new(ax, -ay),
            ],
            [
                Complex64::new(ax, ay),
                Complex64::new(a0 - az, 0.0),
            ],
        ])
    }

    /// Inverse of `from_pauli_coefficients` for Hermitian 2x2 input:
    /// returns (a0, ax, ay, az).
    pub fn pauli_coefficients(&self) -> (f64, f64, f64, f64) {
        debug_assert_eq!(self.dim, 2);
        let a0 = 0.5 * (self.m[0][0].re + self.m[1][1].re);
        let az = 0.5 * (self.m[0][0].re - self.m[1][1].re);
        let ax = 0.5 * (self.m[0][1].re + self.m[1][0].re);
        let ay = 0.5 * (self.m[1][0].im - self.m[0][1].im);
        (a0, ax, ay, az)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.m[j][i].conj())
    }

    pub fn trace(&self) -> Complex64 {
        let mut t = C0;
        for i in 0..self.dim {
            t += self.m[i][i];
        }
        t
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::from_fn(self.dim, |i, j| self.m[i][j] * c)
    }

    /// A * v for a ket stored in the first `dim` slots.
    pub fn mul_ket(&self, v: &[Complex64; MAX_DIM]) -> [Complex64; MAX_DIM] {
        let mut out = [C0; MAX_DIM];
        for i in 0..self.dim {
            let mut acc = C0;
            for j in 0..self.dim {
                acc += self.m[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut w: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                w = w.max(self.m[i][j].norm());
            }
        }
        w
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut w: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                w = w.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        w
    }

    /// max elementwise |A - A^dag|.
    pub fn hermiticity_dev(&self) -> f64 {
        let mut w: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                w = w.max((self.m[i][j] - self.m[j][i].conj()).norm());
            }
        }
        w
    }

    /// max elementwise |U^dag U - I|.
    pub fn unitarity_dev(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_dev() < tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Cyclic-Jacobi on the
    /// 4x4 case, closed form on 2x2.
    pub fn eigvalsh(&self) -> alloc::vec::Vec<f64> {
        let (mut vals, _) = self.eigh();
        vals.truncate(self.dim);
        vals.sort_unstable_by(f64::total_cmp);
        vals
    }

    /// Hermitian eigendecomposition: returns (eigenvalues, eigenvector
    /// columns) with A = V diag(w) V^dag. Unsorted.
    pub fn eigh(&self) -> (alloc::vec::Vec<f64>, Operator) {
        let n = self.dim;
        if n == 2 {
            return self.eigh2();
        }
        let mut a = *self;
        let mut v = Operator::identity(n);
        let scale = self.max_abs().max(1e-300);
        // Classical Jacobi: annihilate the largest off-diagonal element until
        // everything off-diagonal is at rounding level. 4x4 Hermitian
        // converges in a handful of sweeps.
        for _ in 0..200 {
            let (mut p, mut q, mut off) = (0, 1, 0.0f64);
            for i in 0..n {
                for j in (i + 1)..n {
                    let w = a.m[i][j].norm();
                    if w > off {
                        off = w;
                        p = i;
                        q = j;
                    }
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            let alpha = a.m[p][p].re;
            let gamma = a.m[q][q].re;
            let beta = a.m[p][q];
            let b = beta.norm();
            // Phase factor that makes the pivot real, then a real rotation.
            let phase = beta / Complex64::new(b, 0.0);
            let half = Complex64::new(libm::cos(0.5 * phase.arg()), libm::sin(0.5 * phase.arg()));
            let theta = 0.5 * libm::atan2(2.0 * b, alpha - gamma);
            let (c, s) = (libm::cos(theta), libm::sin(theta));
            let gpp = half * c;
            let gpq = half * (-s);
            let gqp = half.conj() * s;
            let gqq = half.conj() * c;
            // A <- A G (columns p, q)
            for k in 0..n {
                let akp = a.m[k][p];
                let akq = a.m[k][q];
                a.m[k][p] = akp * gpp + akq * gqp;
                a.m[k][q] = akp * gpq + akq * gqq;
            }
            // A <- G^dag A (rows p, q)
            for k in 0..n {
                let apk = a.m[p][k];
                let aqk = a.m[q][k];
                a.m[p][k] = gpp.conj() * apk + gqp.conj() * aqk;
                a.m[q][k] = gpq.conj() * apk + gqq.conj() * aqk;
            }
            // V <- V G
            for k in 0..n {
                let vkp = v.m[k][p];
                let vkq = v.m[k][q];
                v.m[k][p] = vkp * gpp + vkq * gqp;
                v.m[k][q] = vkp * gpq + vkq * gqq;
            }
        }
        let mut vals = alloc::vec::Vec::with_capacity(n);
        for i in 0..n {
            vals.push(a.m[i][i].re);
        }
        (vals, v)
    }

    fn eigh2(&self) -> (alloc::vec::Vec<f64>, Operator) {
        let (a0, ax, ay, az) = self.pauli_coefficients();
        let r = libm::sqrt(ax * ax + ay * ay + az * az);
        let vals = alloc::vec![a0 + r, a0 - r];
        if r < 1e-300 {
            return (vals, Operator::identity(2));
        }
        // Eigenvectors of n.sigma with n = (ax,ay,az)/r.
        let (nx, ny, nz) = (ax / r, ay / r, az / r);
        let ct = nz; // cos(theta)
        let st = libm::sqrt((1.0 - ct * ct).max(0.0));
        let phi = libm::atan2(ny, nx);
        let eip = Complex64::new(libm::cos(phi), libm::sin(phi));
        let ch = libm::sqrt(0.5 * (1.0 + ct));
        let sh = libm::sqrt(0.5 * (1.0 - ct));
        let _ = st;
        // +r eigenvector (cos(t/2), e^{i phi} sin(t/2)); -r eigenvector
        // (-sin(t/2), e^{i phi} cos(t/2)).
        let v = Operator::from_rows_2([
            [Complex64::new(ch, 0.0), Complex64::new(-sh, 0.0)],
            [eip * sh, eip * ch],
        ]);
        (vals, v)
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.dim && j < self.dim);
        &self.m[i][j]
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator::from_fn(self.dim, |i, j| self.m[i][j] + rhs.m[i][j])
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator::from_fn(self.dim, |i, j| self.m[i][j] - rhs.m[i][j])
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::from_fn(self.dim, |i, j| -self.m[i][j])
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        let mut out = Operator::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let aik = self.m[i][k];
                if aik == C0 {
                    continue;
                }
                for j in 0..self.dim {
                    out.m[i][j] += aik * rhs.m[k][j];
                }
            }
        }
        out
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scaled(Complex64::new(rhs, 0.0))
    }
}

impl Mul<Complex64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: Complex64) -> Operator {
        self.scaled(rhs)
    }
}

/// exp(-i H dt) for a Hermitian H (angular units, dt in us).
///
/// 2x2 uses the closed Pauli form; 4x4 goes through the Jacobi
/// eigendecomposition, which is exact for Hermitian input. Non-Hermitian
/// input is rejected.
pub fn propagator(h: &Operator, dt: f64) -> Result<Operator, CoreError> {
    let dev = h.hermiticity_dev();
    if dev >= HERMITICITY_TOL {
        return Err(CoreError::NotHermitian { dev });
    }
    Ok(propagator_unchecked(h, dt))
}

/// Same as `propagator` without the Hermiticity gate; for hot loops where
/// the Hamiltonian comes from our own (exactly Hermitian) builders.
pub fn propagator_unchecked(h: &Operator, dt: f64) -> Operator {
    if h.dim == 2 {
        let (a0, ax, ay, az) = h.pauli_coefficients();
        let r = libm::sqrt(ax * ax + ay * ay + az * az);
        let phase = Complex64::new(libm::cos(-a0 * dt), libm::sin(-a0 * dt));
        let c = libm::cos(r * dt);
        // sin(r dt)/r with a series fallback so r -> 0 stays exact.
        let sinc_dt = if r * libm::fabs(dt) < 1e-6 {
            let x = r * dt;
            dt * (1.0 - x * x / 6.0)
        } else {
            libm::sin(r * dt) / r
        };
        let mi = Complex64::new(0.0, -1.0);
        let u = Operator::from_rows_2([
            [
                Complex64::new(c, 0.0) + mi * Complex64::new(az * sinc_dt, 0.0),
                mi * Complex64::new(ax * sinc_dt, -ay * sinc_dt),
            ],
            [
                mi * Complex64::new(ax * sinc_dt, ay * sinc_dt),
                Complex64::new(c, 0.0) - mi * Complex64::new(az * sinc_dt, 0.0),
            ],
        ]);
        return u.scaled(phase);
    }
    let (vals, v) = h.eigh();
    let mut u = Operator::zeros(h.dim);
    // U = V e^{-i w dt} V^dag
    for i in 0..h.dim {
        for j in 0..h.dim {
            let mut acc = C0;
            for k in 0..h.dim {
                let e = Complex64::new(libm::cos(-vals[k] * dt), libm::sin(-vals[k] * dt));
                acc += v.m[i][k] * e * v.m[j][k].conj();
            }
            u.m[i][j] = acc;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_definitions() {
        let sx = pauli(PauliAxis::X);
        assert_eq!(sx.get(0, 1), c(1.0, 0.0));
        assert_eq!(sx.get(1, 0), c(1.0, 0.0));
        assert_eq!(sx.get(0, 0), c(0.0, 0.0));
        let sy = pauli(PauliAxis::Y);
        assert_eq!(sy.get(0, 1), c(0.0, -1.0));
        assert_eq!(sy.get(1, 0), c(0.0, 1.0));
        // sigma_plus raises |down> (index 1) into |up> (index 0)
        let sp = pauli(PauliAxis::Plus);
        let down = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let up = sp.mul_ket(&down);
        assert_eq!(up[0], c(1.0, 0.0));
        assert_eq!(up[1], c(0.0, 0.0));
    }

    #[test]
    fn pauli_involution_and_commutator() {
        for ax in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            let s = pauli(ax);
            assert!((s * s).max_abs_diff(&Operator::identity(2)) < 1e-15);
        }
        let (sx, sy, sz) = (pauli(PauliAxis::X), pauli(PauliAxis::Y), pauli(PauliAxis::Z));
        let comm = sx * sy - sy * sx;
        let expected = sz.scaled(c(0.0, 2.0));
        assert!(comm.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn tensor_identity_and_trace() {
        let i2 = Operator::identity(2);
        assert!(tensor(&i2, &i2).max_abs_diff(&Operator::identity(4)) < 1e-15);

        // tensor(sigma_z, I) has |up,down> (index 0b01) as a +1 eigenvector
        let zt = tensor(&pauli(PauliAxis::Z), &i2);
        let mut ket = [c(0.0, 0.0); 4];
        ket[0b01] = c(1.0, 0.0);
        let out = zt.mul_ket(&ket);
        assert_eq!(out[0b01], c(1.0, 0.0));

        // trace multiplicativity on arbitrary matrices
        let a = Operator::from_rows_2([[c(1.0, 2.0), c(0.5, 0.0)], [c(0.0, -1.0), c(3.0, 0.0)]]);
        let b = Operator::from_rows_2([[c(-1.0, 0.5), c(0.25, 1.0)], [c(2.0, 0.0), c(0.0, 4.0)]]);
        let t = tensor(&a, &b).trace();
        let t2 = a.trace() * b.trace();
        assert_abs_diff_eq!(t.re, t2.re, epsilon = 1e-12);
        assert_abs_diff_eq!(t.im, t2.im, epsilon = 1e-12);
    }

    #[test]
    fn propagator_identity_and_pi_pulse() {
        let h0 = Operator::zeros(2);
        let u = propagator(&h0, 0.37).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(2)) < 1e-15);

        // exp(-i (W/2) sx * pi/W) = -i sx: flips populations
        let w = 7.0;
        let h = Operator::from_pauli_coefficients(0.0, 0.5 * w, 0.0, 0.0);
        let u = propagator(&h, core::f64::consts::PI / w).unwrap();
        let expected = pauli(PauliAxis::X).scaled(c(0.0, -1.0));
        assert!(u.max_abs_diff(&expected) < 1e-12);
        assert!(u.unitarity_dev() < UNITARITY_TOL);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let bad = Operator::from_rows_2([[c(0.0, 0.0), c(1.0, 0.0)], [c(0.5, 0.0), c(0.0, 0.0)]]);
        assert!(matches!(
            propagator(&bad, 0.1),
            Err(CoreError::NotHermitian { .. })
        ));
    }

    fn random_hermitian(dim: usize, rng: &mut impl rand::Rng) -> Operator {
        let mut h = Operator::zeros(dim);
        for i in 0..dim {
            h.set(i, i, c(rng.random_range(-3.0..3.0), 0.0));
            for j in (i + 1)..dim {
                let v = c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                h.set(i, j, v);
                h.set(j, i, v.conj());
            }
        }
        h
    }

    /// Scaling-and-squaring oracle: Taylor series of exp(-i H dt / 2^k)
    /// summed to machine precision, then squared k times.
    fn expm_oracle(h: &Operator, dt: f64) -> Operator {
        let norm = h.max_abs() * dt.abs() * h.dim() as f64;
        let k = if norm > 0.5 {
            (libm::log2(norm / 0.5).ceil() as u32).min(40)
        } else {
            0
        };
        let scale = libm::pow(2.0, -(k as f64));
        let a = h.scaled(c(0.0, -dt * scale));
        let mut term = Operator::identity(h.dim());
        let mut sum = term;
        for n in 1..60 {
            term = term * a;
            term = term.scaled(c(1.0 / n as f64, 0.0));
            sum = sum + term;
            if term.max_abs() < 1e-20 {
                break;
            }
        }
        let mut u = sum;
        for _ in 0..k {
            u = u * u;
        }
        u
    }

    #[test]
    fn propagator_matches_scaling_and_squaring_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for dim in [2usize, 4] {
            for _ in 0..25 {
                let h = random_hermitian(dim, &mut rng);
                let dt = rng.random_range(0.01..0.8);
                let u = propagator(&h, dt).unwrap();
                let u_ref = expm_oracle(&h, dt);
                assert!(
                    u.max_abs_diff(&u_ref) < 1e-10,
                    "dim {dim}: max diff {}",
                    u.max_abs_diff(&u_ref)
                );
                assert!(u.unitarity_dev() < UNITARITY_TOL);
            }
        }
    }

    #[test]
    fn propagator_semigroup_property() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for dim in [2usize, 4] {
            for _ in 0..20 {
                let h = random_hermitian(dim, &mut rng);
                let (dt1, dt2) = (rng.random_range(0.01..0.4), rng.random_range(0.01..0.4));
                let u12 = propagator(&h, dt1).unwrap() * propagator(&h, dt2).unwrap();
                let u = propagator(&h, dt1 + dt2).unwrap();
                assert!(u12.max_abs_diff(&u) < 1e-9);
            }
        }
    }

    #[test]
    fn eigh_reconstructs_and_sorts() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..30 {
            let h = random_hermitian(4, &mut rng);
            let (vals, v) = h.eigh();
            assert!(v.unitarity_dev() < 1e-12);
            let mut rec = Operator::zeros(4);
            for i in 0..4 {
                for j in 0..4 {
                    let mut acc = c(0.0, 0.0);
                    for k in 0..4 {
                        acc += v.get(i, k) * c(vals[k], 0.0) * v.get(j, k).conj();
                    }
                    rec.set(i, j, acc);
                }
            }
            assert!(rec.max_abs_diff(&h) < 1e-12);
        }
    }

    #[test]
    fn dipolar_projection_matches_spin1_restriction() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let j_mhz = rng.random_range(0.001..2.0);
            let j_ang = crate::ang(j_mhz);
            let h = project_dipolar_to_qubit(j_mhz);
            assert!(h.hermiticity_dev() < 1e-15);

            // Spin-1 Sz = diag(+1, 0, -1) over m = +1, 0, -1; the qubit keeps
            // {m_s = -1 -> |up>, m_s = 0 -> |down>}, i.e. Sz restricted is
            // diag(-1, 0).
            let szq = Operator::from_rows_2([[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
            let spin1 = tensor(&szq, &szq) * (2.0 * j_ang);
            let diff = h - spin1;
            // must be a multiple of identity
            let lambda = diff.get(0, 0);
            let id_part = Operator::identity(4).scaled(lambda);
            assert!(
                diff.max_abs_diff(&id_part) < 1e-12,
                "not an identity multiple"
            );
            // and that multiple is exactly -J/2 relative to the spin-1 form
            assert_abs_diff_eq!(lambda.re, -0.5 * j_ang, epsilon = 1e-12);

            // diagonal element <up,up| H |up,up> = 3J/2
            assert_abs_diff_eq!(h.get(0, 0).re, 1.5 * j_ang, epsilon = 1e-12);
            // commutes with sigma_z sigma_z
            let zz = tensor(&pauli(PauliAxis::Z), &pauli(PauliAxis::Z));
            assert!((h * zz - zz * h).max_abs() < 1e-12);
        }
        assert_eq!(project_dipolar_to_qubit(0.0).max_abs(), 0.0);
    }
}
