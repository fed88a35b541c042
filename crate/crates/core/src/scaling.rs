//! Boltzmann–Grad parameter algebra for two species.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{MixtureParams, SpeciesKind};

/// Relative tolerance on the integrality of N₁ = (c₁/c₂) b^{1−d} N₂.
pub const DEFAULT_INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradScaling {
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub c1: f64,
    pub c2: f64,
    pub c12: f64,
    pub c21: f64,
}

/// A scaling evaluated at concrete particle numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedScaling {
    pub scaling: GradScaling,
    pub n1: usize,
    pub n2: usize,
    pub eps1: f64,
    pub eps2: f64,
}

impl GradScaling {
    pub fn new(c1: f64, c2: f64, b: f64, dim: usize) -> Result<Self> {
        let s = GradScaling { c1, c2, b, dim };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dim < 2 {
            return Err(Error::InvalidInput(format!("dim must be >= 2, got {}", self.dim)));
        }
        Ok(())
    }

    fn dm1(&self) -> i32 {
        self.dim as i32 - 1
    }

    /// Exact (real-valued) N₁ corresponding to `n2`.
    pub fn n1_exact(&self, n2: usize) -> f64 {
        self.c1 / self.c2 * self.b.powi(1 - self.dim as i32) * n2 as f64
    }

    pub fn realize(&self, n2: usize) -> Result<RealizedScaling> {
        self.realize_with_tol(n2, DEFAULT_INTEGRALITY_TOL)
    }

    pub fn realize_with_tol(&self, n2: usize, rel_tol: f64) -> Result<RealizedScaling> {
        self.validate()?;
        if n2 == 0 {
            return Err(Error::ScalingInfeasible("N2 must be positive".into()));
        }
        let n1f = self.n1_exact(n2);
        let n1 = n1f.round();
        if n1 < 1.0 || (n1f - n1).abs() > (rel_tol * n1f).min(0.5) {
            return Err(Error::ScalingInfeasible(format!(
                "N1 = (c1/c2) b^(1-d) N2 = {n1f} is not an integer"
            )));
        }
        let eps2 = (self.c2 / n2 as f64).powf(1.0 / self.dm1() as f64);
        let eps1 = self.b * eps2;
        Ok(RealizedScaling { scaling: *self, n1: n1 as usize, n2, eps1, eps2 })
    }

    pub fn limit_constants(&self) -> LimitConstants {
        LimitConstants {
            c1: self.c1,
            c2: self.c2,
            c12: self.c2 * ((1.0 + self.b) / 2.0).powi(self.dm1()),
            c21: self.c1 * ((1.0 + 1.0 / self.b) / 2.0).powi(self.dm1()),
        }
    }

    /// A_β^α for the collision of a tagged α-particle with an adjoined β-particle.
    pub fn kernel_constant(&self, alpha: SpeciesKind, beta: SpeciesKind) -> f64 {
        let k = self.limit_constants();
        match (alpha, beta) {
            (SpeciesKind::A, SpeciesKind::A) => k.c1,
            (SpeciesKind::B, SpeciesKind::B) => k.c2,
            (SpeciesKind::B, SpeciesKind::A) => k.c21,
            (SpeciesKind::A, SpeciesKind::B) => k.c12,
        }
    }

    /// All four kernel constants indexed `[alpha][beta]`.
    pub fn kernel_table(&self) -> [[f64; 2]; 2] {
        let mut t = [[0.0; 2]; 2];
        for a in SpeciesKind::ALL {
            for b in SpeciesKind::ALL {
                t[a.index()][b.index()] = self.kernel_constant(a, b);
            }
        }
        t
    }
}

impl RealizedScaling {
    pub fn counts(&self) -> [usize; 2] {
        [self.n1, self.n2]
    }

    pub fn diameters(&self) -> [f64; 2] {
        [self.eps1, self.eps2]
    }

    pub fn max_eps(&self) -> f64 {
        self.eps1.max(self.eps2)
    }

    pub fn interaction_distance(&self, a: SpeciesKind, b: SpeciesKind) -> f64 {
        let e = self.diameters();
        0.5 * (e[a.index()] + e[b.index()])
    }

    pub fn mixture_params(&self, mass: [f64; 2]) -> Result<MixtureParams> {
        MixtureParams::new(self.scaling.dim, mass, self.diameters())
    }

    /// (N_β − s_β − β̃^β) ε_(α,β)^{d−1}.
    pub fn bbgky_prefactor(&self, s: [usize; 2], added: [usize; 2], alpha: SpeciesKind, beta: SpeciesKind) -> Result<f64> {
        let bi = beta.index();
        let available = self.counts()[bi];
        let used = s[bi] + added[bi];
        if available <= used {
            return Err(Error::ExhaustedReservoir { available, requested: used + 1 });
        }
        let eps = self.interaction_distance(alpha, beta);
        Ok((available - used) as f64 * eps.powi(self.scaling.dim as i32 - 1))
    }

    /// Constant C in 0 < 1 − A^N/A^∞ ≤ C max(ε)^{d−1}, uniform over α and
    /// over adjunction stages up to `added`.
    pub fn prefactor_defect_constant(&self, s: [usize; 2], added: [usize; 2]) -> f64 {
        let cmin = self.scaling.c1.min(self.scaling.c2);
        ((s[0] + s[1] + added[0] + added[1]) as f64) / cmin
    }
}
