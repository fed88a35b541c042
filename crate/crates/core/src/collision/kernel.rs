use rayon::prelude::*;

use super::field::VelocityField;
use super::quadrature::{SphereQuadrature, VelocityGrid};
use crate::error::{Error, Result};
use crate::mixture::{collide_in_place, MixtureParams, SpeciesKind};

/// Gain and loss parts of Q_β^α(G, H)(v).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelSplit {
    pub gain: f64,
    pub loss: f64,
}

impl KernelSplit {
    pub fn value(&self) -> f64 {
        self.gain - self.loss
    }
}

fn check(sphere: &SphereQuadrature, vgrid: &VelocityGrid, v: &[f64]) -> Result<()> {
    if sphere.dim != vgrid.dim() || v.len() != vgrid.dim() {
        return Err(Error::InvalidInput("quadrature dimensions disagree".into()));
    }
    Ok(())
}

/// Core loop with G(v) and H at the quadrature nodes precomputed.
#[allow(clippy::too_many_arguments)]
fn split_core(
    g: &dyn VelocityField,
    h: &dyn VelocityField,
    g_v: f64,
    h_w: &[f64],
    v: &[f64],
    masses: (f64, f64),
    sphere: &SphereQuadrature,
    vgrid: &VelocityGrid,
) -> KernelSplit {
    let d = v.len();
    let (ma, mb) = masses;
    let mut vs = [0.0; 8];
    let mut ws = [0.0; 8];
    let mut gain = 0.0;
    let mut loss = 0.0;
    for (k, &hw) in h_w.iter().enumerate() {
        let w = vgrid.node(k);
        let mut g_acc = 0.0;
        let mut l_acc = 0.0;
        for q in 0..sphere.len() {
            let th = sphere.node(q);
            let mut un = 0.0;
            for c in 0..d {
                un += (w[c] - v[c]) * th[c];
            }
            if un <= 0.0 {
                continue;
            }
            let wq = sphere.weights[q] * un;
            vs[..d].copy_from_slice(v);
            ws[..d].copy_from_slice(w);
            collide_in_place(&mut vs[..d], &mut ws[..d], th, ma, mb);
            g_acc += wq * g.eval(&vs[..d]) * h.eval(&ws[..d]);
            l_acc += wq;
        }
        gain += vgrid.weights[k] * g_acc;
        loss += vgrid.weights[k] * l_acc * hw;
    }
    KernelSplit { gain, loss: loss * g_v }
}

/// Quadrature of Q_β^α(G, H)(v), split into gain and loss.
#[allow(clippy::too_many_arguments)]
pub fn q_kernel_split(
    g: &dyn VelocityField,
    h: &dyn VelocityField,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    v: &[f64],
    params: &MixtureParams,
    sphere: &SphereQuadrature,
    vgrid: &VelocityGrid,
) -> Result<KernelSplit> {
    check(sphere, vgrid, v)?;
    if v.len() > 8 {
        return Err(Error::InvalidInput("q_kernel supports d <= 8".into()));
    }
    let h_w: Vec<f64> = (0..vgrid.len()).map(|k| h.eval(vgrid.node(k))).collect();
    let masses = (params.mass_of(alpha), params.mass_of(beta));
    Ok(split_core(g, h, g.eval(v), &h_w, v, masses, sphere, vgrid))
}

/// Quadrature of Q_β^α(G, H)(v) = ∫∫ ((w − v)·θ)_+ [G(v*)H(w*) − G(v)H(w)] dθ dw.
#[allow(clippy::too_many_arguments)]
pub fn q_kernel(
    g: &dyn VelocityField,
    h: &dyn VelocityField,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    v: &[f64],
    params: &MixtureParams,
    sphere: &SphereQuadrature,
    vgrid: &VelocityGrid,
) -> Result<f64> {
    q_kernel_split(g, h, alpha, beta, v, params, sphere, vgrid).map(|s| s.value())
}

/// Q_β^α(G, H) at a list of velocities (flat, `d` per point), in parallel.
#[allow(clippy::too_many_arguments)]
pub fn q_kernel_many(
    g: &dyn VelocityField,
    h: &dyn VelocityField,
    alpha: SpeciesKind,
    beta: SpeciesKind,
    points: &[f64],
    params: &MixtureParams,
    sphere: &SphereQuadrature,
    vgrid: &VelocityGrid,
) -> Result<Vec<KernelSplit>> {
    let d = vgrid.dim();
    if sphere.dim != d || points.len() % d != 0 || d > 8 {
        return Err(Error::InvalidInput("quadrature dimensions disagree".into()));
    }
    let h_w: Vec<f64> = (0..vgrid.len()).map(|k| h.eval(vgrid.node(k))).collect();
    let masses = (params.mass_of(alpha), params.mass_of(beta));
    Ok(points
        .par_chunks(d)
        .map(|v| split_core(g, h, g.eval(v), &h_w, v, masses, sphere, vgrid))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::field::GridFunction;
    use crate::collision::quadrature::Lattice;
    use crate::vecops::{dot, norm2};

    fn params() -> MixtureParams {
        MixtureParams::new(2, [1.0, 3.0], [0.01, 0.01]).unwrap()
    }

    #[test]
    fn zero_g_gives_zero() {
        let sphere = SphereQuadrature::default_for(2).unwrap();
        let vg = VelocityGrid::new(2, 4.0, 17).unwrap();
        let g = |_: &[f64]| 0.0;
        let h = |v: &[f64]| (-norm2(v)).exp();
        let q = q_kernel(&g, &h, SpeciesKind::A, SpeciesKind::B, &[0.3, 0.1], &params(), &sphere, &vg).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn analytic_maxwellians_annihilate() {
        let p = params();
        let sphere = SphereQuadrature::default_for(2).unwrap();
        let vg = VelocityGrid::new(2, 5.0, 21).unwrap();
        for (a, b) in [(SpeciesKind::A, SpeciesKind::B), (SpeciesKind::B, SpeciesKind::A)] {
            let (ma, mb) = (p.mass_of(a), p.mass_of(b));
            let g = move |v: &[f64]| (-0.5 * ma * norm2(v)).exp();
            let h = move |v: &[f64]| (-0.5 * mb * norm2(v)).exp();
            let s = q_kernel_split(&g, &h, a, b, &[0.4, -0.2], &p, &sphere, &vg).unwrap();
            assert!(s.gain > 0.1);
            assert!(s.value().abs() < 1e-12 * s.gain);
        }
    }

    #[test]
    fn starred_velocities_conserve() {
        // the per-node law used inside the kernel
        let (ma, mb) = (1.0, 10.0);
        let mut v = [0.3, -1.2];
        let mut w = [-0.7, 0.4];
        let th = [0.6, 0.8];
        let (p0, e0) = ([ma * v[0] + mb * w[0], ma * v[1] + mb * w[1]], ma * dot(&v, &v) + mb * dot(&w, &w));
        collide_in_place(&mut v, &mut w, &th, ma, mb);
        assert!((ma * v[0] + mb * w[0] - p0[0]).abs() < 1e-12);
        assert!((ma * v[1] + mb * w[1] - p0[1]).abs() < 1e-12);
        assert!((ma * dot(&v, &v) + mb * dot(&w, &w) - e0).abs() < 1e-12 * e0);
    }

    #[test]
    fn grid_sampled_residual_shrinks_under_refinement() {
        let p = params();
        let sphere = SphereQuadrature::default_for(2).unwrap();
        let rb = 6.0 / 3f64.sqrt();
        let res = |n: usize| {
            let g = GridFunction::sample(Lattice::symmetric(2, 6.0, n), |v| (-0.5 * norm2(v)).exp());
            let h = GridFunction::sample(Lattice::symmetric(2, rb, n), |v| (-1.5 * norm2(v)).exp());
            let vg = VelocityGrid::new(2, rb, n).unwrap();
            q_kernel(&g, &h, SpeciesKind::A, SpeciesKind::B, &[0.35, -0.55], &p, &sphere, &vg).unwrap().abs()
        };
        let (r1, r2) = (res(25), res(49));
        assert!(r2 < 1e-3, "{r2}");
        assert!(r1 / r2 >= 2.0, "{r1} {r2}");
    }

    #[test]
    fn many_matches_single() {
        let p = params();
        let sphere = SphereQuadrature::default_for(2).unwrap();
        let vg = VelocityGrid::new(2, 4.0, 13).unwrap();
        let g = |v: &[f64]| (-norm2(v)).exp() * (1.0 + v[0]);
        let h = |v: &[f64]| (-0.7 * norm2(v)).exp();
        let pts = [0.1, 0.2, -0.5, 0.9];
        let many = q_kernel_many(&g, &h, SpeciesKind::A, SpeciesKind::B, &pts, &p, &sphere, &vg).unwrap();
        for (i, s) in many.iter().enumerate() {
            let one = q_kernel(&g, &h, SpeciesKind::A, SpeciesKind::B, &pts[2 * i..2 * i + 2], &p, &sphere, &vg).unwrap();
            assert_eq!(s.value(), one);
        }
    }
}
