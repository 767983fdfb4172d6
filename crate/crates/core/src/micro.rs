//! Finite-difference micro problem on `[-μ', μ']^2 x [0, η]`.
//!
//! The magnetization on a uniform grid evolves by
//! `m_t = -m x h(m)`, `h(m) = H(m) + α m x H(m)` with the five-point exchange
//! field `H` and Dirichlet data frozen at the initial values. Time stepping
//! uses the midpoint rule with a second-order extrapolated field, solved in
//! closed form per node.

use crate::geometry::TriMesh;
use crate::material::MaterialCoefficient;
use crate::{Error, Point, Result, Vec3};

/// Parameters of one micro problem. Lengths are absolute, not multiples of ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroConfig {
    pub epsilon: f64,
    /// Half-width of the averaging region.
    pub mu: f64,
    /// Half-width of the computational domain.
    pub mu_prime: f64,
    /// Final micro time.
    pub eta: f64,
    /// Grid points per ε.
    pub points_per_eps: usize,
    /// `C` in `Δτ <= C Δξ^2`.
    pub dt_safety: f64,
    /// Damping `α` of the micro dynamics.
    pub alpha_micro: f64,
}

/// Largest `C` for which `Δτ = C Δξ^2` is linearly stable, with margin `margin < 1`.
///
/// Linearizing about a state of magnitude `ρ` turns each Fourier mode of the
/// scheme into the two-step recurrence `w' = w + z (3w/2 - w_prev/2)` with
/// `z = Δτ a σ (-α ρ^2 + i ρ)`, `σ <= 8/Δξ^2`. The stable radius along each
/// ray is found by bisection and the worst case over `ρ in (0, 1]` is kept.
pub fn stable_dt_safety(alpha: f64, a_max: f64, margin: f64) -> f64 {
    use nalgebra::Complex;
    let stable = |z: Complex<f64>| {
        let b = Complex::new(1.0, 0.0) + z * 1.5;
        let disc = (b * b - z * 2.0).sqrt();
        ((b + disc) * 0.5).norm() <= 1.0 + 1e-13 && ((b - disc) * 0.5).norm() <= 1.0 + 1e-13
    };
    let mut best = f64::INFINITY;
    for k in 1..=40 {
        let rho = k as f64 / 40.0;
        let dir = Complex::new(-alpha * rho * rho, rho);
        let (mut lo, mut hi) = (0.0, 4.0 / dir.norm());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if stable(dir * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(lo / (8.0 * a_max));
    }
    margin * best
}

/// Rounds up while ignoring floating-point noise just above an integer.
fn ceil_tol(x: f64) -> usize {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(1.0) as usize
}

impl MicroConfig {
    /// Builds a config from multiples of ε (μ, μ') and ε² (η).
    pub fn from_factors(
        epsilon: f64,
        mu_factor: f64,
        mu_prime_factor: f64,
        eta_factor: f64,
        points_per_eps: usize,
        alpha_micro: f64,
        dt_safety: f64,
    ) -> Result<Self> {
        let cfg = Self {
            epsilon,
            mu: mu_factor * epsilon,
            mu_prime: mu_prime_factor * epsilon,
            eta: eta_factor * epsilon * epsilon,
            points_per_eps,
            dt_safety,
            alpha_micro,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.epsilon > 0.0) {
            return bad(format!("micro epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.mu > 0.0 && self.mu_prime >= self.mu) {
            return bad(format!("need 0 < mu <= mu_prime, got mu = {}, mu_prime = {}", self.mu, self.mu_prime));
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.points_per_eps < 2 {
            return bad(format!("need at least 2 points per epsilon, got {}", self.points_per_eps));
        }
        if !(self.dt_safety > 0.0) {
            return bad(format!("dt_safety must be positive, got {}", self.dt_safety));
        }
        if !(self.alpha_micro > 0.0 && self.alpha_micro <= 2.0) {
            return bad(format!("alpha_micro must lie in (0, 2], got {}", self.alpha_micro));
        }
        let n = 2.0 * self.mu_prime / (self.epsilon / self.points_per_eps as f64);
        let m = self.eta / (self.dt_safety * (self.epsilon / self.points_per_eps as f64).powi(2));
        if !(n.is_finite() && m.is_finite()) || n > 1e5 || m > 1e9 {
            return bad(format!("micro grid too large: {n:.0} intervals, {m:.0} steps"));
        }
        Ok(())
    }

    /// Number of grid intervals per direction, `N_mic = ceil(2μ'/(ε/P))`.
    pub fn n_mic(&self) -> usize {
        ceil_tol(2.0 * self.mu_prime * self.points_per_eps as f64 / self.epsilon)
    }

    /// Grid spacing `Δξ = 2μ'/N_mic` (at most `ε/P`).
    pub fn d_xi(&self) -> f64 {
        2.0 * self.mu_prime / self.n_mic() as f64
    }

    /// Number of time steps, `M_mic = ceil(η / (C Δξ^2))`.
    pub fn m_mic(&self) -> usize {
        ceil_tol(self.eta / (self.dt_safety * self.d_xi().powi(2)))
    }

    /// Time step `Δτ = η / M_mic <= C Δξ^2`, landing exactly on `η`.
    pub fn d_tau(&self) -> f64 {
        self.eta / self.m_mic() as f64
    }
}

/// Grid state of one micro problem. Node `(i, j)` sits at `ξ = (-μ' + iΔξ, -μ' + jΔξ)`,
/// i.e. at physical position `center + ξ`. Components are stored in separate
/// row-major arrays.
#[derive(Debug, Clone)]
pub struct MicroState {
    n: usize,
    d_xi: f64,
    mu_prime: f64,
    center: Point,
    m: [Vec<f64>; 3],
    norms0: Vec<f64>,
    /// `a` on the face between `(i, j)` and `(i + 1, j)`.
    a_x: Vec<f64>,
    /// `a` on the face between `(i, j)` and `(i, j + 1)`.
    a_y: Vec<f64>,
    steps: usize,
}

impl MicroState {
    /// Grid with values `f(ξ)` at the local coordinates of each node.
    pub fn from_fn(
        center: Point,
        coeff: &MaterialCoefficient,
        cfg: &MicroConfig,
        f: impl Fn(Point) -> Vec3,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_mic();
        let d_xi = cfg.d_xi();
        let w = n + 1;
        let xi = |i: usize| -cfg.mu_prime + i as f64 * d_xi;
        let mut m = [vec![0.0; w * w], vec![0.0; w * w], vec![0.0; w * w]];
        let mut norms0 = vec![0.0; w * w];
        let mut a_x = vec![0.0; w * w];
        let mut a_y = vec![0.0; w * w];
        for j in 0..w {
            for i in 0..w {
                let c = j * w + i;
                let local = Point::new(xi(i), xi(j));
                let v = f(local);
                for k in 0..3 {
                    m[k][c] = v[k];
                }
                norms0[c] = v.norm();
                let p = center + local;
                if i < n {
                    a_x[c] = coeff.eval(p + Point::new(0.5 * d_xi, 0.0));
                }
                if j < n {
                    a_y[c] = coeff.eval(p + Point::new(0.0, 0.5 * d_xi));
                }
            }
        }
        Ok(Self { n, d_xi, mu_prime: cfg.mu_prime, center, m, norms0, a_x, a_y, steps: 0 })
    }

    /// Number of intervals per direction; the grid has `(n + 1)^2` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_xi(&self) -> f64 {
        self.d_xi
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// Local coordinate of grid index `i` along either axis.
    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        -self.mu_prime + i as f64 * self.d_xi
    }

    #[inline]
    pub fn m(&self, i: usize, j: usize) -> Vec3 {
        self.at(j * (self.n + 1) + i)
    }

    #[inline(always)]
    fn at(&self, c: usize) -> Vec3 {
        Vec3::new(self.m[0][c], self.m[1][c], self.m[2][c])
    }

    /// Component arrays, row-major with row length `n + 1`.
    pub fn components(&self) -> [&[f64]; 3] {
        [&self.m[0], &self.m[1], &self.m[2]]
    }

    /// All nodal vectors, row-major.
    pub fn values(&self) -> Vec<Vec3> {
        (0..self.norms0.len()).map(|c| self.at(c)).collect()
    }

    #[inline]
    pub fn a_x(&self, i: usize, j: usize) -> f64 {
        self.a_x[j * (self.n + 1) + i]
    }

    #[inline]
    pub fn a_y(&self, i: usize, j: usize) -> f64 {
        self.a_y[j * (self.n + 1) + i]
    }

    /// Face coefficient arrays `(a_x, a_y)`, row-major like the components.
    pub fn face_coefficients(&self) -> (&[f64], &[f64]) {
        (&self.a_x, &self.a_y)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Steps taken so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `max | |m| - |m(0)| |` over all nodes.
    pub fn max_norm_drift(&self) -> f64 {
        self.norms0.iter().enumerate().map(|(c, n0)| (self.at(c).norm() - n0).abs()).fold(0.0, f64::max)
    }

    /// Discrete exchange energy `½ Σ_faces a |Δm|^2` (without the `Δξ` scaling).
    pub fn exchange_energy(&self) -> f64 {
        let w = self.n + 1;
        let mut e = 0.0;
        for comp in &self.m {
            for j in 0..w {
                let row = &comp[j * w..(j + 1) * w];
                let ax = &self.a_x[j * w..(j + 1) * w];
                for i in 0..self.n {
                    e += ax[i] * (row[i + 1] - row[i]).powi(2);
                }
                if j < self.n {
                    let next = &comp[(j + 1) * w..(j + 2) * w];
                    let ay = &self.a_y[j * w..(j + 1) * w];
                    for i in 0..w {
                        e += ay[i] * (next[i] - row[i]).powi(2);
                    }
                }
            }
        }
        0.5 * e
    }

    /// Five-point exchange field at an interior node.
    pub fn exchange_field(&self, i: usize, j: usize) -> Vec3 {
        let w = self.n + 1;
        let c = j * w + i;
        let mut h = Vec3::zeros();
        for k in 0..3 {
            let m = &self.m[k];
            let m0 = m[c];
            h[k] = self.a_x[c] * (m[c + 1] - m0)
                + self.a_x[c - 1] * (m[c - 1] - m0)
                + self.a_y[c] * (m[c + w] - m0)
                + self.a_y[c - w] * (m[c - w] - m0);
        }
        h / (self.d_xi * self.d_xi)
    }
}

/// Solves `x + x × b = r`, i.e. `(I - [b]_x) x = r` with `[b]_x v = b × v`.
#[inline(always)]
pub fn cayley_solve(r: Vec3, b: Vec3) -> Vec3 {
    (r - r.cross(&b) + b * r.dot(&b)) / (1.0 + b.norm_squared())
}

/// One midpoint update of a single node with the effective field `h`:
/// `m' = m - Δτ ((m' + m)/2) × h`.
#[inline(always)]
pub fn midpoint_update(m: Vec3, h: Vec3, d_tau: f64) -> Vec3 {
    let b = h * (0.5 * d_tau);
    cayley_solve(m - m.cross(&b), b)
}

/// Integrator state carried between steps: `h(m^{k-1})` and scratch for `h(m^k)`.
struct Stepper {
    h_prev: [Vec<f64>; 3],
    h_cur: [Vec<f64>; 3],
    scale: f64,
    alpha: f64,
    d_tau: f64,
}

impl Stepper {
    fn new(state: &MicroState, cfg: &MicroConfig) -> Self {
        let len = state.norms0.len();
        let zeros = || [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        Self {
            h_prev: zeros(),
            h_cur: zeros(),
            scale: 1.0 / (state.d_xi * state.d_xi),
            alpha: cfg.alpha_micro,
            d_tau: cfg.d_tau(),
        }
    }

    /// Writes `h(m)` for the interior of row `j` into `h_cur`.
    #[inline(always)]
    fn row_field(&mut self, state: &MicroState, j: usize) {
        let w = state.n + 1;
        let (lo, mid, hi) = ((j - 1) * w, j * w, (j + 1) * w);
        let ax = &state.a_x[mid..mid + w];
        let ay = &state.a_y[mid..mid + w];
        let ays = &state.a_y[lo..lo + w];
        let [mx, my, mz] = &state.m;
        let (xs, xc, xn) = (&mx[lo..lo + w], &mx[mid..mid + w], &mx[hi..hi + w]);
        let (ys, yc, yn) = (&my[lo..lo + w], &my[mid..mid + w], &my[hi..hi + w]);
        let (zs, zc, zn) = (&mz[lo..lo + w], &mz[mid..mid + w], &mz[hi..hi + w]);
        let [hx, hy, hz] = &mut self.h_cur;
        let (hx, hy, hz) = (&mut hx[mid..mid + w], &mut hy[mid..mid + w], &mut hz[mid..mid + w]);
        let (s, alpha) = (self.scale, self.alpha);
        for i in 1..w - 1 {
            let (ae, aw, an, as_) = (ax[i], ax[i - 1], ay[i], ays[i]);
            let (x0, y0, z0) = (xc[i], yc[i], zc[i]);
            let fx = s * (ae * (xc[i + 1] - x0) + aw * (xc[i - 1] - x0) + an * (xn[i] - x0) + as_ * (xs[i] - x0));
            let fy = s * (ae * (yc[i + 1] - y0) + aw * (yc[i - 1] - y0) + an * (yn[i] - y0) + as_ * (ys[i] - y0));
            let fz = s * (ae * (zc[i + 1] - z0) + aw * (zc[i - 1] - z0) + an * (zn[i] - z0) + as_ * (zs[i] - z0));
            hx[i] = fx + alpha * (y0 * fz - z0 * fy);
            hy[i] = fy + alpha * (z0 * fx - x0 * fz);
            hz[i] = fz + alpha * (x0 * fy - y0 * fx);
        }
    }

    /// Midpoint update of the interior of row `j` with the extrapolated field.
    #[inline(always)]
    fn row_update(&self, state: &mut MicroState, j: usize, first: bool) {
        let w = state.n + 1;
        let r = j * w;
        let half = 0.5 * self.d_tau;
        let [mx, my, mz] = &mut state.m;
        let (mx, my, mz) = (&mut mx[r..r + w], &mut my[r..r + w], &mut mz[r..r + w]);
        let [cx, cy, cz] = &self.h_cur;
        let [px, py, pz] = if first { &self.h_cur } else { &self.h_prev };
        let (cx, cy, cz) = (&cx[r..r + w], &cy[r..r + w], &cz[r..r + w]);
        let (px, py, pz) = (&px[r..r + w], &py[r..r + w], &pz[r..r + w]);
        for i in 1..w - 1 {
            let bx = half * (1.5 * cx[i] - 0.5 * px[i]);
            let by = half * (1.5 * cy[i] - 0.5 * py[i]);
            let bz = half * (1.5 * cz[i] - 0.5 * pz[i]);
            let (x, y, z) = (mx[i], my[i], mz[i]);
            // r = m - m × b
            let rx = x - (y * bz - z * by);
            let ry = y - (z * bx - x * bz);
            let rz = z - (x * by - y * bx);
            // m' = (r - r × b + (r·b) b) / (1 + |b|^2)
            let rb = rx * bx + ry * by + rz * bz;
            let inv = 1.0 / (1.0 + bx * bx + by * by + bz * bz);
            mx[i] = (rx - (ry * bz - rz * by) + rb * bx) * inv;
            my[i] = (ry - (rz * bx - rx * bz) + rb * by) * inv;
            mz[i] = (rz - (rx * by - ry * bx) + rb * bz) * inv;
        }
    }

    fn step(&mut self, state: &mut MicroState) {
        let n = state.n;
        let first = state.steps == 0;
        // Row j is updated once the field of row j + 1, which reads it, is known.
        for j in 1..n {
            self.row_field(state, j);
            if j > 1 {
                self.row_update(state, j - 1, first);
            }
        }
        self.row_update(state, n - 1, first);
        std::mem::swap(&mut self.h_prev, &mut self.h_cur);
        state.steps += 1;
    }
}

/// How often (in steps) the exchange energy is checked for growth.
const ENERGY_CHECK_INTERVAL: usize = 16;

/// Runs `M_mic` steps from `state`. The observer sees `(k, τ_k, state)` for
/// `k = 0..=M_mic`, including the initial state.
///
/// The scheme preserves nodal norms, so a violated step-size restriction shows
/// up as growing exchange energy rather than overflow: the run fails when the
/// energy exceeds twice its initial value.
pub fn evolve(
    mut state: MicroState,
    cfg: &MicroConfig,
    mut observer: impl FnMut(usize, f64, &MicroState),
) -> Result<MicroState> {
    let steps = cfg.m_mic();
    let d_tau = cfg.d_tau();
    let mut stepper = Stepper::new(&state, cfg);
    let e0 = state.exchange_energy();
    let limit = 2.0 * e0 + 1e-12 * state.norms0.len() as f64;
    observer(0, 0.0, &state);
    for k in 1..=steps {
        stepper.step(&mut state);
        if k % ENERGY_CHECK_INTERVAL == 0 || k == steps {
            let e = state.exchange_energy();
            if !e.is_finite() || e > limit {
                return Err(Error::Instability {
                    step: k,
                    reason: format!(
                        "micro exchange energy grew from {e0:.3e} to {e:.3e}; \
                         the time step {d_tau:.3e} violates the stability restriction"
                    ),
                });
            }
        }
        observer(k, k as f64 * d_tau, &state);
    }
    Ok(state)
}

/// Initial micro state on triangle `tri`: the triangle's affine interpolant of
/// `macro_field`, sampled around its barycenter. Patches that stick out of the
/// triangle use the affine extension and log a warning.
pub fn init_micro(
    mesh: &TriMesh,
    macro_field: &[Vec3],
    tri: usize,
    coeff: &MaterialCoefficient,
    cfg: &MicroConfig,
) -> Result<MicroState> {
    let el = mesh.p1_element(tri)?;
    let center = el.barycenter;
    let r = cfg.mu_prime;
    let fits = [(-r, -r), (r, -r), (r, r), (-r, r)]
        .iter()
        .all(|&(dx, dy)| el.barycentric(center + Point::new(dx, dy)).iter().all(|&l| l >= -crate::geometry::BARY_TOL));
    if !fits {
        log::warn!("micro patch of half-width {r:.3e} exceeds triangle {tri}; using the affine extension");
    }
    let vals = mesh.local_values(macro_field, tri);
    MicroState::from_fn(center, coeff, cfg, |xi| {
        let l = el.barycentric(center + xi);
        vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2]
    })
}

/// Builds and evolves the micro problem of triangle `tri`.
pub fn solve_micro(
    mesh: &TriMesh,
    macro_field: &[Vec3],
    tri: usize,
    coeff: &MaterialCoefficient,
    cfg: &MicroConfig,
    observer: impl FnMut(usize, f64, &MicroState),
) -> Result<MicroState> {
    let state = init_micro(mesh, macro_field, tri, coeff, cfg)?;
    evolve(state, cfg, observer)
}
