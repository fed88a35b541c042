use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{classify_boundary, BoundaryKind, Configuration, MixtureParams, ParticleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactKind {
    Contact,
    GrazingContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventPrediction {
    pub time: f64,
    pub pair: (ParticleId, ParticleId),
    pub kind: ContactKind,
}

/// Smallest t ≥ 0 with |x + t v| = σ, and whether the contact is tangential.
///
/// `tol` is relative: overlap is |x| < σ(1 − tol); grazing is a normal
/// relative speed at contact below `tol·|v|`.
pub fn time_to_contact(x_rel: &[f64], v_rel: &[f64], sigma: f64, tol: f64) -> Result<Option<(f64, bool)>> {
    let (mut a, mut b, mut xx) = (0.0, 0.0, 0.0);
    for k in 0..x_rel.len() {
        a += v_rel[k] * v_rel[k];
        b += x_rel[k] * v_rel[k];
        xx += x_rel[k] * x_rel[k];
    }
    let lo = sigma * (1.0 - tol);
    if xx < lo * lo {
        return Err(Error::InvalidState(format!("overlap: |x_rel| = {} < sigma = {sigma}", xx.sqrt())));
    }
    Ok(contact_root(a, b, xx - sigma * sigma, sigma, tol))
}

/// Root of a t² + 2 b t + c = 0 in citardauq form; `None` when receding or missing.
#[inline]
pub(crate) fn contact_root(a: f64, b: f64, c: f64, sigma: f64, tol: f64) -> Option<(f64, bool)> {
    if b >= 0.0 || a == 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if c <= 0.0 { 0.0 } else { c / (-b + sq) };
    // normal relative speed at contact is sqrt(disc)/σ
    let grazing = sq <= tol * sigma * a.sqrt();
    Some((t, grazing))
}

/// Earliest contact among all interacting pairs under free flow.
///
/// A start on a simple pre-collisional boundary is resolved by the impact
/// operator first, so the returned time refers to the post-impact state.
pub fn next_event(z: &Configuration, params: &MixtureParams, tol: f64) -> Result<Option<EventPrediction>> {
    let class = classify_boundary(z, params, tol)?;
    let z = match class.kind {
        BoundaryKind::Interior | BoundaryKind::SimplePostCollisional => z.clone(),
        BoundaryKind::SimplePreCollisional => crate::mixture::impact_operator_with_tol(z, params, tol)?,
        BoundaryKind::SimpleGrazing | BoundaryKind::MultipleCollision => {
            return Err(Error::Pathology(format!("pathological start: {:?}", class.kind)))
        }
    };
    let d = z.dim();
    let mut best: Option<EventPrediction> = None;
    let mut xr = vec![0.0; d];
    let mut vr = vec![0.0; d];
    for (a, b) in z.pairs() {
        for k in 0..d {
            xr[k] = z.x(a.0, a.1)[k] - z.x(b.0, b.1)[k];
            vr[k] = z.v(a.0, a.1)[k] - z.v(b.0, b.1)[k];
        }
        let sigma = params.interaction_distance(a.0, b.0);
        if let Some((t, grazing)) = time_to_contact(&xr, &vr, sigma, tol)? {
            if best.map_or(true, |e| t < e.time) {
                let kind = if grazing { ContactKind::GrazingContact } else { ContactKind::Contact };
                best = Some(EventPrediction { time: t, pair: (a, b), kind });
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::SpeciesKind;

    /// Bisection on |x + t v| − σ over [0, t_max]; assumes a sign change.
    fn bisect(x: &[f64], v: &[f64], sigma: f64, t_max: f64) -> f64 {
        let f = |t: f64| x.iter().zip(v).map(|(a, b)| (a + t * b).powi(2)).sum::<f64>().sqrt() - sigma;
        let (mut lo, mut hi) = (0.0, t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn head_on() {
        let (t, g) = time_to_contact(&[2.0, 0.0], &[-1.0, 0.0], 1.0, 1e-9).unwrap().unwrap();
        assert_eq!(t, 1.0);
        assert!(!g);
        assert!((bisect(&[2.0, 0.0], &[-1.0, 0.0], 1.0, 1.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn receding() {
        assert_eq!(time_to_contact(&[2.0, 0.0], &[1.0, 0.0], 1.0, 1e-9).unwrap(), None);
    }

    #[test]
    fn tangent() {
        let (t, g) = time_to_contact(&[2.0, 1.0], &[-1.0, 0.0], 1.0, 1e-9).unwrap().unwrap();
        assert_eq!(t, 2.0);
        assert!(g);
    }

    #[test]
    fn overlap_is_error() {
        assert!(time_to_contact(&[0.5, 0.0], &[-1.0, 0.0], 1.0, 1e-9).is_err());
    }

    #[test]
    fn oblique_matches_bisection() {
        let x = [3.0, 0.7];
        let v = [-1.3, -0.1];
        let (t, g) = time_to_contact(&x, &v, 1.0, 1e-9).unwrap().unwrap();
        assert!(!g);
        assert!((t - bisect(&x, &v, 1.0, t + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn next_event_picks_earliest() {
        let p = MixtureParams::new(2, [1.0, 1.0], [1.0, 1.0]).unwrap();
        let mut z = Configuration::new(2);
        z.push(SpeciesKind::A, &[0.0, 0.0], &[1.0, 0.0]);
        z.push(SpeciesKind::B, &[3.0, 0.0], &[0.0, 0.0]);
        z.push(SpeciesKind::A, &[0.0, 10.0], &[0.0, 0.0]);
        z.push(SpeciesKind::B, &[0.0, 12.0], &[0.0, -3.0]);
        let e = next_event(&z, &p, 1e-9).unwrap().unwrap();
        assert!((e.time - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.pair, ((SpeciesKind::A, 1), (SpeciesKind::B, 1)));

        let mut r = Configuration::new(2);
        r.push(SpeciesKind::A, &[0.0, 0.0], &[-1.0, 0.0]);
        r.push(SpeciesKind::B, &[3.0, 0.0], &[1.0, 0.0]);
        r.push(SpeciesKind::B, &[3.0, 30.0], &[0.0, 0.0]);
        assert!(next_event(&r, &p, 1e-9).unwrap().is_none());
    }
}
