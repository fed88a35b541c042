use crate::collision::{homogeneous_taylor, GridDensityPair, PdeConfig, VelocityField};
use crate::error::{Error, Result};
use crate::mixture::SpeciesKind;

/// One factor φ_i of a product test function, attached to a particle of `species`.
pub struct TestFactor<'a> {
    pub species: SpeciesKind,
    pub phi: &'a dyn Fn(&[f64]) -> f64,
}

/// Zeroes the data outside the velocity balls of `cfg`.
pub fn truncate_to_ball(g: &GridDensityPair, cfg: &PdeConfig) -> GridDensityPair {
    let mut out = g.clone();
    let nx = g.space_len();
    for s in 0..2 {
        let mut keep = vec![false; g.velocity[s].len()];
        for &i in &cfg.vgrids[s].lattice_index {
            keep[i] = true;
        }
        for (iv, k) in keep.iter().enumerate() {
            if !k {
                out.values[s][iv * nx..(iv + 1) * nx].iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
    out
}

/// Order-k terms I_{s,k,R,δ}(t), k = 0..=n, of the observable
/// ∫_{B_R^{|s|}} Π φ_i(v_i) f^{(s)}(t, V_s) dV_s for spatially homogeneous
/// tensorized data. The free flow acts trivially, so the order-k iterate is
/// |𝒯_{k,δ}(t)| times the k-fold truncated collision operator applied to the
/// data; for tensorized data this is the order-k coefficient of the product
/// of the one-particle Taylor series. R is the extent of the grids in `cfg`.
pub fn homogeneous_series_terms(
    initial: &GridDensityPair,
    cfg: &PdeConfig,
    factors: &[TestFactor<'_>],
    t: f64,
    delta: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if factors.is_empty() {
        return Err(Error::InvalidInput("need at least one test factor".into()));
    }
    if !(t >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidInput("need t ≥ 0 and δ ≥ 0".into()));
    }
    let data = truncate_to_ball(initial, cfg);
    let taylor = homogeneous_taylor(&data, cfg, n)?;
    // c[i][k] = ∫ φ_i a_k
    let coeffs: Vec<Vec<f64>> = factors
        .iter()
        .map(|f| {
            let s = f.species.index();
            taylor
                .iter()
                .map(|a| {
                    let field = a.field(s, 0);
                    cfg.vgrids[s].integrate(|v| (f.phi)(v) * VelocityField::eval(&field, v))
                })
                .collect()
        })
        .collect();
    let mut prod = coeffs[0].clone();
    for c in &coeffs[1..] {
        let mut next = vec![0.0; n + 1];
        for (i, p) in prod.iter().enumerate() {
            for (j, q) in c.iter().enumerate().take(n + 1 - i) {
                next[i + j] += p * q;
            }
        }
        prod = next;
    }
    Ok(prod
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k == 0 {
                return *c;
            }
            let l = t - (k + 1) as f64 * delta;
            if l <= 0.0 {
                0.0
            } else {
                c * l.powi(k as i32)
            }
        })
        .collect())
}
