use super::kernel::KernelSplit;
use super::quadrature::{SphereQuadrature, VelocityGrid};
use crate::error::{Error, Result};
use crate::mixture::{collide_in_place, Configuration, MixtureParams, SpeciesKind};
use crate::scaling::{GradScaling, RealizedScaling};
use crate::vecops::norm2;

/// A real function on the phase space of a fixed particle population.
pub trait PhaseFunction: Send + Sync {
    fn eval(&self, z: &Configuration) -> f64;
}

impl<F: Fn(&Configuration) -> f64 + Send + Sync> PhaseFunction for F {
    fn eval(&self, z: &Configuration) -> f64 {
        self(z)
    }
}

/// Angular and velocity quadratures for the hierarchy operators; the
/// velocity grid extent is the truncation radius R.
#[derive(Debug, Clone)]
pub struct HierarchyQuadrature {
    pub sphere: SphereQuadrature,
    pub vgrid: VelocityGrid,
}

impl HierarchyQuadrature {
    pub fn new(sphere: SphereQuadrature, vgrid: VelocityGrid) -> Result<Self> {
        if sphere.dim != vgrid.dim() {
            return Err(Error::InvalidInput("sphere and velocity grid dimensions differ".into()));
        }
        Ok(HierarchyQuadrature { sphere, vgrid })
    }

    pub fn radius(&self) -> f64 {
        self.vgrid.extent
    }
}

/// The collision term 𝒞_{s,s+β}^α applied to a fixed `f_next`, evaluable at
/// configurations with population `s`.
pub struct CollisionTerm<'a> {
    f_next: &'a dyn PhaseFunction,
    s: [usize; 2],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    masses: (f64, f64),
    factor: f64,
    offset: f64,
    quad: &'a HierarchyQuadrature,
}

fn within(z: &Configuration, r2: f64) -> bool {
    SpeciesKind::ALL.iter().all(|&sp| z.velocities(sp).chunks(z.dim()).all(|v| norm2(v) <= r2))
}

impl<'a> CollisionTerm<'a> {
    pub fn prefactor(&self) -> f64 {
        self.factor
    }

    /// Per-target contributions (𝒞^{+,i}, 𝒞^{−,i}), prefactor included.
    pub fn terms(&self, z: &Configuration) -> Result<Vec<KernelSplit>> {
        if z.counts() != self.s {
            return Err(Error::InvalidInput(format!("operator expects population {:?}, got {:?}", self.s, z.counts())));
        }
        let d = z.dim();
        let r2 = self.quad.radius() * self.quad.radius();
        let (ma, mb) = self.masses;
        let sphere = &self.quad.sphere;
        let vgrid = &self.quad.vgrid;
        let slot = z.count(self.beta);
        let mut out = Vec::with_capacity(self.s[self.alpha.index()]);
        let mut zl = z.clone();
        zl.push(self.beta, &vec![0.0; d], &vec![0.0; d]);
        let mut zg = zl.clone();
        for i in 0..self.s[self.alpha.index()] {
            let xi = z.x(self.alpha, i).to_vec();
            let vi = z.v(self.alpha, i).to_vec();
            let (mut gain, mut loss) = (0.0, 0.0);
            for k in 0..vgrid.len() {
                let w = vgrid.node(k);
                let (mut g_acc, mut l_acc) = (0.0, 0.0);
                for q in 0..sphere.len() {
                    let th = sphere.node(q);
                    let un: f64 = (0..d).map(|c| (w[c] - vi[c]) * th[c]).sum();
                    if un <= 0.0 {
                        continue;
                    }
                    let wq = sphere.weights[q] * un;
                    // loss: adjoined at x_i − εθ, velocities unchanged
                    for c in 0..d {
                        zl.x_mut(self.beta, slot)[c] = xi[c] - self.offset * th[c];
                    }
                    zl.v_mut(self.beta, slot).copy_from_slice(w);
                    if within(&zl, r2) {
                        l_acc += wq * self.f_next.eval(&zl);
                    }
                    // gain: adjoined at x_i + εθ, pair velocities collided
                    for c in 0..d {
                        zg.x_mut(self.beta, slot)[c] = xi[c] + self.offset * th[c];
                    }
                    let mut va = vi.clone();
                    let mut vb = w.to_vec();
                    collide_in_place(&mut va, &mut vb, th, ma, mb);
                    zg.v_mut(self.alpha, i).copy_from_slice(&va);
                    zg.v_mut(self.beta, slot).copy_from_slice(&vb);
                    if within(&zg, r2) {
                        g_acc += wq * self.f_next.eval(&zg);
                    }
                }
                gain += vgrid.weights[k] * g_acc;
                loss += vgrid.weights[k] * l_acc;
            }
            zg.v_mut(self.alpha, i).copy_from_slice(&vi);
            out.push(KernelSplit { gain: self.factor * gain, loss: self.factor * loss });
        }
        Ok(out)
    }

    /// Σ_i 𝒞^{+,i} and Σ_i 𝒞^{−,i}.
    pub fn split(&self, z: &Configuration) -> Result<KernelSplit> {
        let t = self.terms(z)?;
        Ok(KernelSplit { gain: t.iter().map(|s| s.gain).sum(), loss: t.iter().map(|s| s.loss).sum() })
    }

    pub fn try_eval(&self, z: &Configuration) -> Result<f64> {
        self.split(z).map(|s| s.value())
    }
}

impl PhaseFunction for CollisionTerm<'_> {
    /// NaN when `z` does not have population `s`.
    fn eval(&self, z: &Configuration) -> f64 {
        self.try_eval(z).unwrap_or(f64::NAN)
    }
}

/// Truncated Boltzmann-hierarchy term with constant A_β^α and zero offset.
#[allow(clippy::too_many_arguments)]
pub fn apply_boltzmann_hierarchy_op<'a>(
    f_next: &'a dyn PhaseFunction,
    s: [usize; 2],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    scaling: &GradScaling,
    params: &MixtureParams,
    quad: &'a HierarchyQuadrature,
) -> Result<CollisionTerm<'a>> {
    if params.dim != quad.vgrid.dim() || scaling.dim != params.dim {
        return Err(Error::InvalidInput("dimension mismatch between scaling, parameters and quadrature".into()));
    }
    Ok(CollisionTerm {
        f_next,
        s,
        alpha,
        beta,
        masses: (params.mass_of(alpha), params.mass_of(beta)),
        factor: scaling.kernel_constant(alpha, beta),
        offset: 0.0,
        quad,
    })
}

/// Truncated BBGKY term: prefactor (N_β − s_β − added_β) ε_(α,β)^{d−1} and
/// adjoined particle at x_i ± ε_(α,β)θ.
#[allow(clippy::too_many_arguments)]
pub fn apply_bbgky_hierarchy_op<'a>(
    f_next: &'a dyn PhaseFunction,
    s: [usize; 2],
    added: [usize; 2],
    alpha: SpeciesKind,
    beta: SpeciesKind,
    realized: &RealizedScaling,
    masses: [f64; 2],
    quad: &'a HierarchyQuadrature,
) -> Result<CollisionTerm<'a>> {
    if realized.scaling.dim != quad.vgrid.dim() {
        return Err(Error::InvalidInput("dimension mismatch between scaling and quadrature".into()));
    }
    Ok(CollisionTerm {
        f_next,
        s,
        alpha,
        beta,
        masses: (masses[alpha.index()], masses[beta.index()]),
        factor: realized.bbgky_prefactor(s, added, alpha, beta)?,
        offset: realized.interaction_distance(alpha, beta),
        quad,
    })
}

/// max over samples of e^{γE(Z)}|f(Z)|.
pub fn weighted_sup_norm(samples: &[(Configuration, f64)], gamma: f64, params: &MixtureParams) -> f64 {
    samples
        .iter()
        .map(|(z, f)| (gamma * crate::mixture::energy(z, params)).exp() * f.abs())
        .fold(0.0, f64::max)
}
