//! Fourier pseudospectral reference solver.
//!
//! Periodic problems on `[x_lo, x_hi)` are advanced with ETDRK4: the stiff
//! linear part is integrated exactly through its exponential, the nonlinear
//! part is evaluated pseudospectrally with 2/3-rule dealiasing. The
//! phi-function coefficients come from a contour-integral average, which
//! stays accurate where `h L` is close to zero.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::math;
use crate::pde::{PdeKind, PdeProblem};
use crate::{Error, Result};

/// Magnitude at which a solution is declared to have blown up.
pub const BLOW_UP_LIMIT: f64 = 1e6;

const CONTOUR_POINTS: usize = 64;

/// In-place iterative radix-2 FFT of a fixed length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("FFT length {n} is not a power of two")));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(math::cos(a), math::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bit_reverse = (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        Ok(Self { n, twiddles, bit_reverse })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `X_k = sum_j x_j exp(-2 pi i jk/n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Inverse of [`Fft::forward`], including the `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "FFT buffer length");
        for i in 0..self.n {
            let j = self.bit_reverse[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len *= 2;
        }
    }
}

/// Angular wavenumbers in FFT order for a grid of `n` points over `length`,
/// with the Nyquist mode set to zero.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let base = 2.0 * PI / length;
    (0..n)
        .map(|j| {
            if j < n / 2 {
                base * j as f64
            } else if j == n / 2 {
                0.0
            } else {
                base * (j as f64 - n as f64)
            }
        })
        .collect()
}

/// 2/3-rule mask: keeps modes with `|j| <= n/3`.
pub fn dealias_mask(n: usize) -> Vec<bool> {
    (0..n)
        .map(|j| {
            let signed = if j <= n / 2 { j } else { n - j };
            3 * signed <= n
        })
        .collect()
}

/// Solver provenance carried alongside the data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceMetadata {
    pub problem: String,
    pub parameters: Vec<(String, f64)>,
    pub dt: f64,
    pub steps: u64,
}

/// Solution samples on an equispaced periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_lo: f64,
    pub x_hi: f64,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// Row-major by snapshot: `values[s * n_x + j]`.
    pub values: Vec<f64>,
    pub metadata: ReferenceMetadata,
}

pub const REFSOL_MAGIC: &str = "REFSOL v1";

impl ReferenceSolution {
    /// Builds a solution from raw arrays and checks its invariants.
    pub fn from_parts(
        problem: &str,
        x_lo: f64,
        x_hi: f64,
        n_x: usize,
        t: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let sol = Self {
            x_lo,
            x_hi,
            x: periodic_grid(x_lo, x_hi, n_x),
            t,
            values,
            metadata: ReferenceMetadata {
                problem: problem.to_string(),
                ..Default::default()
            },
        };
        sol.validate()?;
        Ok(sol)
    }

    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn n_snap(&self) -> usize {
        self.t.len()
    }

    pub fn snapshot(&self, s: usize) -> &[f64] {
        let n = self.n_x();
        &self.values[s * n..(s + 1) * n]
    }

    pub fn value(&self, s: usize, j: usize) -> f64 {
        self.values[s * self.n_x() + j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() || self.t.is_empty() {
            return Err(Error::Empty("reference grid"));
        }
        if !(self.x_lo.is_finite() && self.x_hi.is_finite() && self.x_lo < self.x_hi) {
            return Err(Error::InvalidArgument("reference domain must satisfy x0 < x1".into()));
        }
        if self.values.len() != self.x.len() * self.t.len() {
            return Err(Error::DimensionMismatch {
                context: "reference values",
                expected: self.x.len() * self.t.len(),
                found: self.values.len(),
            });
        }
        if self.t.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference solution"));
        }
        if self.t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("snapshot times must increase".into()));
        }
        Ok(())
    }

    /// Serializes to the REFSOL v1 layout: a text header line, a line of
    /// comma-separated snapshot times, then little-endian `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!(
            "{REFSOL_MAGIC} {} N_x={} N_snap={} x0={} x1={} t0={} t1={}\n",
            self.metadata.problem,
            self.n_x(),
            self.n_snap(),
            self.x_lo,
            self.x_hi,
            self.t[0],
            self.t[self.n_snap() - 1],
        )
        .into_bytes();
        let times: Vec<String> = self.t.iter().map(|t| format!("{t}")).collect();
        out.extend_from_slice(times.join(",").as_bytes());
        out.push(b'\n');
        out.reserve(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the layout written by [`ReferenceSolution::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let malformed = |what: &str| Error::InvalidArgument(format!("malformed REFSOL file: {what}"));
        let nl1 = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| malformed("missing header line"))?;
        let header = core::str::from_utf8(&bytes[..nl1]).map_err(|_| malformed("header is not UTF-8"))?;
        let rest = &bytes[nl1 + 1..];
        let nl2 = rest.iter().position(|&b| b == b'\n').ok_or_else(|| malformed("missing times line"))?;
        let times_line = core::str::from_utf8(&rest[..nl2]).map_err(|_| malformed("times line is not UTF-8"))?;
        let payload = &rest[nl2 + 1..];

        let body = header.strip_prefix(REFSOL_MAGIC).ok_or_else(|| malformed("bad magic"))?;
        let mut fields = body.split_whitespace();
        let problem = fields.next().ok_or_else(|| malformed("missing problem name"))?;
        let mut get = |key: &str| -> Result<&str> {
            let f = fields.next().ok_or_else(|| malformed(&format!("missing {key}")))?;
            f.strip_prefix(key)
                .and_then(|s| s.strip_prefix('='))
                .ok_or_else(|| malformed(&format!("expected {key}=")))
        };
        let n_x: usize = get("N_x")?.parse().map_err(|_| malformed("N_x"))?;
        let n_snap: usize = get("N_snap")?.parse().map_err(|_| malformed("N_snap"))?;
        let x0: f64 = get("x0")?.parse().map_err(|_| malformed("x0"))?;
        let x1: f64 = get("x1")?.parse().map_err(|_| malformed("x1"))?;
        let t0: f64 = get("t0")?.parse().map_err(|_| malformed("t0"))?;
        let t1: f64 = get("t1")?.parse().map_err(|_| malformed("t1"))?;

        let t: Vec<f64> = times_line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| malformed("snapshot times"))?;
        if t.len() != n_snap {
            return Err(Error::DimensionMismatch {
                context: "REFSOL snapshot times",
                expected: n_snap,
                found: t.len(),
            });
        }
        if t.first() != Some(&t0) || t.last() != Some(&t1) {
            return Err(malformed("t0/t1 disagree with the times line"));
        }
        let expected = n_x
            .checked_mul(n_snap)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| malformed("grid too large"))?;
        if payload.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "REFSOL payload has {} bytes, expected {expected} bytes ({n_snap} x {n_x} f64)",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_parts(problem, x0, x1, n_x, t, values)
    }
}

/// `n` equispaced points on `[lo, hi)`.
pub fn periodic_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let dx = (hi - lo) / n as f64;
    (0..n).map(|j| lo + j as f64 * dx).collect()
}

/// `count` equispaced snapshot times on `[0, horizon]`.
pub fn snapshot_times(horizon: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| horizon * i as f64 / (count - 1) as f64).collect(),
    }
}

fn problem_parameters(kind: &PdeKind) -> Vec<(String, f64)> {
    match *kind {
        PdeKind::CahnHilliard { r1, r2 } => vec![("r1".into(), r1), ("r2".into(), r2)],
        PdeKind::Kdv { lambda1, lambda2 } => vec![("lambda1".into(), lambda1), ("lambda2".into(), lambda2)],
        PdeKind::Advection { speed } => vec![("speed".into(), speed)],
    }
}

/// ETDRK4 coefficients for one step size.
struct EtdCoefficients {
    h: f64,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl EtdCoefficients {
    fn new(linear: &[Complex64], h: f64) -> Self {
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| {
                let a = PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64 * 2.0;
                Complex64::new(math::cos(a), math::sin(a))
            })
            .collect();
        let n = linear.len();
        let mut c = Self {
            h,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        let m = CONTOUR_POINTS as f64;
        for &l in linear {
            let hl = l * h;
            c.e.push(hl.exp());
            c.e2.push((hl * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::ZERO, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO);
            for r in &roots {
                let z = hl + r;
                let ez = z.exp();
                let z2 = z * z;
                let z3 = z2 * z;
                q += ((z * 0.5).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3;
            }
            c.q.push(q * (h / m));
            c.f1.push(f1 * (h / m));
            c.f2.push(f2 * (h / m));
            c.f3.push(f3 * (h / m));
        }
        c
    }
}

#[derive(Clone, Copy)]
enum Nonlinearity {
    None,
    Square,
    Cube,
}

/// Spectral discretization of one problem on one grid.
struct SpectralSystem {
    fft: Fft,
    linear: Vec<Complex64>,
    nl_factor: Vec<Complex64>,
    nonlinearity: Nonlinearity,
    scratch: Vec<Complex64>,
}

impl SpectralSystem {
    fn new(problem: &PdeProblem, n: usize) -> Result<Self> {
        let fft = Fft::new(n)?;
        let k = wavenumbers(n, problem.period());
        let mask = dealias_mask(n);
        let i = Complex64::i();
        let (linear, nl_factor, nonlinearity): (Vec<Complex64>, Vec<Complex64>, _) = match problem.kind {
            PdeKind::Kdv { lambda1, lambda2 } => (
                k.iter().map(|&k| i * (lambda2 * k * k * k)).collect(),
                k.iter().map(|&k| -i * (lambda1 * k * 0.5)).collect(),
                Nonlinearity::Square,
            ),
            PdeKind::CahnHilliard { r1, r2 } => (
                k.iter().map(|&k| Complex64::from(r2 * k * k - r1 * k * k * k * k)).collect(),
                k.iter().map(|&k| Complex64::from(-r2 * k * k)).collect(),
                Nonlinearity::Cube,
            ),
            PdeKind::Advection { speed } => (
                k.iter().map(|&k| -i * (speed * k)).collect(),
                vec![Complex64::ZERO; n],
                Nonlinearity::None,
            ),
        };
        let nl_factor = nl_factor
            .into_iter()
            .zip(mask)
            .map(|(f, keep)| if keep { f } else { Complex64::ZERO })
            .collect();
        Ok(Self {
            fft,
            linear,
            nl_factor,
            nonlinearity,
            scratch: vec![Complex64::ZERO; n],
        })
    }

    fn nonlinear(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        let p = match self.nonlinearity {
            Nonlinearity::None => {
                out.fill(Complex64::ZERO);
                return;
            }
            Nonlinearity::Square => 2,
            Nonlinearity::Cube => 3,
        };
        self.scratch.copy_from_slice(v);
        self.fft.inverse(&mut self.scratch);
        for s in self.scratch.iter_mut() {
            let u = s.re;
            *s = Complex64::from(if p == 2 { u * u } else { u * u * u });
        }
        self.fft.forward(&mut self.scratch);
        for ((o, s), f) in out.iter_mut().zip(&self.scratch).zip(&self.nl_factor) {
            *o = s * f;
        }
    }

    fn to_physical(&self, v: &[Complex64]) -> Vec<f64> {
        let mut buf = v.to_vec();
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

struct StepBuffers {
    nv: Vec<Complex64>,
    a: Vec<Complex64>,
    na: Vec<Complex64>,
    b: Vec<Complex64>,
    nb: Vec<Complex64>,
    c: Vec<Complex64>,
    nc: Vec<Complex64>,
}

fn etdrk4_step(sys: &mut SpectralSystem, co: &EtdCoefficients, v: &mut [Complex64], w: &mut StepBuffers) {
    let n = v.len();
    sys.nonlinear(v, &mut w.nv);
    for j in 0..n {
        w.a[j] = co.e2[j] * v[j] + co.q[j] * w.nv[j];
    }
    sys.nonlinear(&w.a, &mut w.na);
    for j in 0..n {
        w.b[j] = co.e2[j] * v[j] + co.q[j] * w.na[j];
    }
    sys.nonlinear(&w.b, &mut w.nb);
    for j in 0..n {
        w.c[j] = co.e2[j] * w.a[j] + co.q[j] * (w.nb[j] * 2.0 - w.nv[j]);
    }
    sys.nonlinear(&w.c, &mut w.nc);
    for j in 0..n {
        v[j] = co.e[j] * v[j] + co.f1[j] * w.nv[j] + co.f2[j] * (w.na[j] + w.nb[j]) * 2.0 + co.f3[j] * w.nc[j];
    }
}

/// Integrates `problem` from its initial condition and records the solution
/// at the requested times. Between consecutive snapshots the step is
/// shrunk to `delta / ceil(delta / dt)` so snapshots are hit exactly.
pub fn solve_reference(problem: &PdeProblem, n_x: usize, dt: f64, snapshots: &[f64]) -> Result<ReferenceSolution> {
    problem.validate()?;
    if n_x < 128 || !n_x.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("N_x = {n_x} must be a power of two >= 128")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    if snapshots.is_empty() {
        return Err(Error::Empty("snapshot times"));
    }
    if snapshots[0] < 0.0 || snapshots.windows(2).any(|w| w[0] >= w[1]) || snapshots.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("snapshot times must be finite, non-negative and increasing".into()));
    }

    let x = periodic_grid(problem.x_lo, problem.x_hi, n_x);
    let u0: Vec<f64> = x.iter().map(|&x| problem.initial.eval(x)).collect();
    let mut sys = SpectralSystem::new(problem, n_x)?;
    let mut v: Vec<Complex64> = u0.iter().map(|&u| Complex64::from(u)).collect();
    sys.fft.forward(&mut v);

    let zero = vec![Complex64::ZERO; n_x];
    let mut bufs = StepBuffers {
        nv: zero.clone(),
        a: zero.clone(),
        na: zero.clone(),
        b: zero.clone(),
        nb: zero.clone(),
        c: zero.clone(),
        nc: zero,
    };
    let mut coeffs: Option<EtdCoefficients> = None;
    let mut values = Vec::with_capacity(n_x * snapshots.len());
    let mut time = 0.0;
    let mut steps: u64 = 0;
    for &target in snapshots {
        let delta = target - time;
        if delta > 0.0 {
            let count = math::ceil(delta / dt - 1e-9).max(1.0) as u64;
            let h = delta / count as f64;
            if coeffs.as_ref().is_none_or(|c| c.h != h) {
                coeffs = Some(EtdCoefficients::new(&sys.linear, h));
            }
            let co = coeffs.as_ref().unwrap();
            for s in 1..=count {
                etdrk4_step(&mut sys, co, &mut v, &mut bufs);
                steps += 1;
                if steps % 64 == 0 || s == count {
                    let u = sys.to_physical(&v);
                    if u.iter().any(|u| !(u.abs() <= BLOW_UP_LIMIT)) {
                        return Err(Error::BlowUp {
                            time: time + s as f64 * h,
                        });
                    }
                }
            }
            time = target;
            values.extend(sys.to_physical(&v));
        } else {
            values.extend_from_slice(&u0);
        }
    }

    let mut sol = ReferenceSolution::from_parts(&problem.name, problem.x_lo, problem.x_hi, n_x, snapshots.to_vec(), values)?;
    sol.metadata.parameters = problem_parameters(&problem.kind);
    sol.metadata.dt = dt;
    sol.metadata.steps = steps;
    Ok(sol)
}

/// `sum_j u_j dx`, the periodic trapezoid rule.
pub fn mass(u: &[f64], length: f64) -> f64 {
    u.iter().sum::<f64>() * length / u.len() as f64
}

/// Spectral derivative of a periodic sample.
pub fn spectral_derivative(u: &[f64], length: f64) -> Result<Vec<f64>> {
    let fft = Fft::new(u.len())?;
    let k = wavenumbers(u.len(), length);
    let mut buf: Vec<Complex64> = u.iter().map(|&u| Complex64::from(u)).collect();
    fft.forward(&mut buf);
    for (b, k) in buf.iter_mut().zip(&k) {
        *b *= Complex64::new(0.0, *k);
    }
    fft.inverse(&mut buf);
    Ok(buf.into_iter().map(|c| c.re).collect())
}

/// Ginzburg-Landau free energy `int r2/4 (u^2-1)^2 + r1/2 u_x^2 dx`.
pub fn cahn_hilliard_energy(u: &[f64], length: f64, r1: f64, r2: f64) -> Result<f64> {
    let ux = spectral_derivative(u, length)?;
    let density: Vec<f64> = u
        .iter()
        .zip(&ux)
        .map(|(u, ux)| {
            let w = u * u - 1.0;
            0.25 * r2 * w * w + 0.5 * r1 * ux * ux
        })
        .collect();
    Ok(mass(&density, length))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let a = -2.0 * PI * (j * k) as f64 / n as f64;
                        v * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let x: Vec<Complex64> = (0..16).map(|j| Complex64::new((j as f64 * 0.7).sin(), (j as f64).cos() * 0.3)).collect();
        let mut y = x.clone();
        Fft::new(16).unwrap().forward(&mut y);
        for (a, b) in y.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
        Fft::new(16).unwrap().inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(Fft::new(12).is_err());
    }

    #[test]
    fn wavenumbers_and_mask() {
        let k = wavenumbers(8, 2.0 * PI);
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, 0.0, -3.0, -2.0, -1.0]);
        let m = dealias_mask(12);
        assert_eq!(m.iter().filter(|&&b| b).count(), 9);
        assert!(!m[6] && !m[5] && m[4] && m[8]);
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let x = periodic_grid(-1.0, 1.0, 128);
        let u: Vec<f64> = x.iter().map(|x| (PI * x).sin()).collect();
        let du = spectral_derivative(&u, 2.0).unwrap();
        for (x, d) in x.iter().zip(du) {
            assert!((d - PI * (PI * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_snapshot_is_sampled_condition() {
        let p = PdeProblem::cahn_hilliard_case1();
        let sol = solve_reference(&p, 128, 1e-3, &[0.0, 0.01]).unwrap();
        for (j, x) in sol.x.iter().enumerate() {
            let px = PI * x;
            assert!((sol.value(0, j) - (px.cos() - (-4.0 * px * px).exp())).abs() <= 1e-12);
        }
        assert_eq!(sol.metadata.steps, 10);
    }

    #[test]
    fn advection_matches_transport() {
        let p = PdeProblem::advection();
        let sol = solve_reference(&p, 128, 1e-2, &[0.0, 0.5]).unwrap();
        for (j, x) in sol.x.iter().enumerate() {
            assert!((sol.value(1, j) - (PI * (x - 0.5)).cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn argument_checks() {
        let p = PdeProblem::kdv();
        assert!(solve_reference(&p, 100, 1e-3, &[0.0]).is_err());
        assert!(solve_reference(&p, 128, 0.0, &[0.0]).is_err());
        assert!(solve_reference(&p, 128, 1e-3, &[0.2, 0.1]).is_err());
        assert!(solve_reference(&p, 128, 1e-3, &[]).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // anti-diffusive CH parameters grow without bound
        let mut p = PdeProblem::cahn_hilliard_case1();
        p.kind = PdeKind::CahnHilliard { r1: -0.02, r2: 1.0 };
        match solve_reference(&p, 128, 1e-4, &[0.0, 1.0]) {
            Err(Error::BlowUp { time }) => assert!(time > 0.0 && time <= 1.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn bytes_round_trip() {
        let sol = ReferenceSolution::from_parts(
            "kdv",
            -1.0,
            1.0,
            4,
            vec![0.0, 0.1, 0.30000000000000004],
            (0..12).map(|i| (i as f64 * 0.37).sin() / 3.0).collect(),
        )
        .unwrap();
        let bytes = sol.to_bytes();
        let back = ReferenceSolution::from_bytes(&bytes).unwrap();
        assert_eq!(back, sol);
        assert!(back.values.iter().zip(&sol.values).all(|(a, b)| a.to_bits() == b.to_bits()));

        let err = ReferenceSolution::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err().to_string();
        assert!(err.contains("expected 96 bytes"), "{err}");
        assert!(ReferenceSolution::from_bytes(b"REFSOL v2 kdv\n0\n").is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(ReferenceSolution::from_parts("x", 0.0, 1.0, 2, vec![0.0], vec![0.0, f64::NAN]).is_err());
        assert!(ReferenceSolution::from_parts("x", 0.0, 1.0, 2, vec![0.0], vec![0.0]).is_err());
    }
}
