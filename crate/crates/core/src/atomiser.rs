//! Initial data and their atomisation into equal-mass particles.
//!
//! Initial densities are restricted to non-negative, compactly supported
//! piecewise-constant functions. Their cumulative mass function is then
//! piecewise linear and the equal-mass quantile inversion used to place the
//! particles is exact in closed form, which keeps quadrature error out of
//! the verification chain. Arbitrary BV data can be pre-sampled into this
//! form outside the library.

use crate::density::DensityField;
use crate::error::{FtlError, Result};

/// Non-negative piecewise-constant density with compact support.
///
/// `values[i]` lives on `[breakpoints[i], breakpoints[i+1])`. Construction
/// trims leading and trailing zero cells, so the first and last cells carry
/// positive value and the stored hull equals the convex hull of the support.
#[derive(Debug, Clone)]
pub struct InitialDatum {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl InitialDatum {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(FtlError::InvalidInput(format!(
                "need k+1 breakpoints for k >= 1 values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FtlError::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(FtlError::InvalidInput("breakpoints must be finite".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FtlError::InvalidInput(
                "density values must be finite and non-negative".into(),
            ));
        }

        // Trim zero cells at both ends so the hull touches positive mass.
        let first = values.iter().position(|&v| v > 0.0).ok_or_else(|| {
            FtlError::InvalidInput("datum must carry positive mass somewhere".into())
        })?;
        let last = values.iter().rposition(|&v| v > 0.0).unwrap();
        let values: Vec<f64> = values[first..=last].to_vec();
        let breakpoints: Vec<f64> = breakpoints[first..=last + 1].to_vec();

        let mut cum = Vec::with_capacity(breakpoints.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for (i, v) in values.iter().enumerate() {
            acc += v * (breakpoints[i + 1] - breakpoints[i]);
            cum.push(acc);
        }
        Ok(Self {
            breakpoints,
            values,
            cum,
        })
    }

    /// Two-state datum with jump at `x0`, truncated to the hull
    /// `[x0 - w, x0 + w]` with `w = 1/(rho_l + rho_r)` so that the total
    /// mass is exactly one without rescaling the states.
    pub fn riemann(rho_l: f64, rho_r: f64, x0: f64) -> Result<Self> {
        if !(rho_l >= 0.0 && rho_r >= 0.0) || rho_l + rho_r <= 0.0 {
            return Err(FtlError::InvalidInput(
                "riemann datum needs non-negative states with positive sum".into(),
            ));
        }
        if !x0.is_finite() {
            return Err(FtlError::InvalidInput("x0 must be finite".into()));
        }
        let w = 1.0 / (rho_l + rho_r);
        Self::new(vec![x0 - w, x0, x0 + w], vec![rho_l, rho_r])
    }

    /// Piecewise-constant sampling of a smooth unit-mass bump on `[-1, 1]`.
    pub fn bump() -> Self {
        const CELLS: usize = 40;
        let mut breakpoints = Vec::with_capacity(CELLS + 1);
        let mut values = Vec::with_capacity(CELLS);
        for j in 0..=CELLS {
            breakpoints.push(-1.0 + 2.0 * j as f64 / CELLS as f64);
        }
        for j in 0..CELLS {
            let mid = 0.5 * (breakpoints[j] + breakpoints[j + 1]);
            let c = (std::f64::consts::FRAC_PI_2 * mid).cos();
            values.push(c * c);
        }
        Self::new(breakpoints, values)
            .expect("bump construction is valid")
            .normalize()
            .expect("bump has positive mass")
    }

    /// Two separated blocks of equal mass with an interior vacuum.
    pub fn two_blocks() -> Self {
        Self::new(vec![0.0, 0.4, 1.4, 2.4], vec![1.25, 0.0, 0.5])
            .expect("two-block construction is valid")
    }

    /// Parse the plain-text datum format: one `breakpoint value` pair per
    /// line, density constant on `[this breakpoint, next breakpoint)`, value
    /// of the last row ignored. Blank lines and `#` comments are skipped.
    pub fn from_rows(text: &str) -> Result<Self> {
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let b: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad_row(lineno))?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad_row(lineno))?;
            if parts.next().is_some() {
                return Err(bad_row(lineno));
            }
            breakpoints.push(b);
            values.push(v);
        }
        if breakpoints.len() < 2 {
            return Err(FtlError::InvalidInput(
                "datum file needs at least two rows".into(),
            ));
        }
        values.pop();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x_min(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Sup-norm of the datum; the validity ceiling for velocity models.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Total variation, counting the jumps from and to the vacuum at the
    /// support hull.
    pub fn total_variation(&self) -> f64 {
        let interior: f64 = self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        self.values[0] + interior + self.values.last().unwrap()
    }

    /// Cumulative mass up to `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.x_min() {
            return 0.0;
        }
        if x >= self.x_max() {
            return self.mass();
        }
        let idx = self.breakpoints.partition_point(|&b| b <= x) - 1;
        let idx = idx.min(self.values.len() - 1);
        self.cum[idx] + self.values[idx] * (x - self.breakpoints[idx])
    }

    /// Rescale so the total mass is one; breakpoints unchanged.
    pub fn normalize(self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(FtlError::InvalidInput(format!(
                "cannot normalize datum with mass {mass}"
            )));
        }
        let values = self.values.iter().map(|v| v / mass).collect();
        Self::new(self.breakpoints, values)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.mass() - 1.0).abs() <= tol
    }

    /// View as a density field at `t = 0` (for distance computations).
    pub fn as_field(&self) -> DensityField {
        DensityField::new(self.breakpoints.clone(), self.values.clone(), 0.0)
            .expect("a valid datum is a valid field")
    }
}

fn bad_row(lineno: usize) -> FtlError {
    FtlError::InvalidInput(format!(
        "datum file line {}: expected `breakpoint value`",
        lineno + 1
    ))
}

/// The `n + 1` particle positions splitting a unit-mass datum into `n`
/// sub-intervals of mass `1/n` each.
#[derive(Debug, Clone)]
pub struct ParticleConfiguration {
    positions: Vec<f64>,
    n: usize,
}

impl ParticleConfiguration {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mass carried by each particle interval.
    pub fn ell(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn min_gap(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Place `n + 1` particles at the equal-mass quantiles of a normalized
/// datum by exact inversion of its piecewise-linear cumulative mass.
///
/// Plateaus of the cumulative function (interior vacuum) are inverted by
/// taking the supremum, so a particle whose mass level is reached at the
/// start of a vacuum region sits at the region's right end. The endpoint
/// particles are pinned to the support hull.
pub fn atomise(datum: &InitialDatum, n: usize) -> Result<ParticleConfiguration> {
    if n == 0 {
        return Err(FtlError::InvalidInput("need at least one interval".into()));
    }
    if !datum.is_normalized(1e-9) {
        return Err(FtlError::InvalidInput(format!(
            "atomise needs a unit-mass datum, got mass {}",
            datum.mass()
        )));
    }

    let cells = datum.values.len();
    let mut positions = Vec::with_capacity(n + 1);
    positions.push(datum.x_min());
    let mut j = 0usize;
    for i in 1..n {
        let target = i as f64 / n as f64;
        // Walk past every cell whose full mass keeps the cumulative at or
        // below the target; the `<=` realises the supremum over plateaus.
        while j < cells && datum.cum[j + 1] <= target {
            j += 1;
        }
        if j == cells {
            positions.push(datum.x_max());
            continue;
        }
        debug_assert!(datum.values[j] > 0.0);
        positions.push(datum.breakpoints[j] + (target - datum.cum[j]) / datum.values[j]);
    }
    positions.push(datum.x_max());

    if positions.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FtlError::InvalidInput(
            "atomisation produced non-increasing particle positions".into(),
        ));
    }
    Ok(ParticleConfiguration { positions, n })
}

/// Discrete density of a configuration: `ell / gap` per interval, total
/// mass one.
pub fn discrete_initial_density(config: &ParticleConfiguration) -> DensityField {
    let ell = config.ell();
    let values: Vec<f64> = config
        .positions
        .windows(2)
        .map(|w| ell / (w[1] - w[0]))
        .collect();
    DensityField::new(config.positions.clone(), values, 0.0)
        .expect("a valid configuration yields a valid field")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform01() -> InitialDatum {
        InitialDatum::new(vec![0.0, 1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn normalize_scales_values() {
        let d = InitialDatum::new(vec![0.0, 1.0], vec![2.0]).unwrap();
        let d = d.normalize().unwrap();
        assert_eq!(d.values(), &[1.0]);

        // Already-unit-mass datum is unchanged.
        let d = uniform01().normalize().unwrap();
        assert_eq!(d.values(), &[1.0]);
        assert_eq!(d.breakpoints(), &[0.0, 1.0]);

        // Mass exactly one across several cells stays untouched.
        let d = InitialDatum::new(vec![0.0, 0.25, 1.0], vec![4.0, 0.0]).unwrap();
        let mass: f64 = d.mass();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-15);
        let d = d.normalize().unwrap();
        assert_eq!(d.values()[0], 4.0);
    }

    #[test]
    fn zero_mass_rejected() {
        assert!(InitialDatum::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn trimming_zero_edges() {
        let d = InitialDatum::new(vec![-1.0, 0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.x_min(), 0.0);
        assert_eq!(d.x_max(), 1.0);
    }

    #[test]
    fn atomise_uniform() {
        let cfg = atomise(&uniform01(), 4).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (p, e) in cfg.positions().iter().zip(expect) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn atomise_vacuum_places_particle_at_right_edge() {
        // Mass 1/2 on [0, 0.5], vacuum on (0.5, 1.5), mass 1/2 on [1.5, 2].
        let d = InitialDatum::new(vec![0.0, 0.5, 1.5, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        let cfg = atomise(&d, 2).unwrap();
        assert_eq!(cfg.positions(), &[0.0, 1.5, 2.0]);
    }

    #[test]
    fn atomise_single_interval_keeps_hull() {
        let d = InitialDatum::new(vec![0.0, 0.5, 1.5, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        let cfg = atomise(&d, 1).unwrap();
        assert_eq!(cfg.positions(), &[0.0, 2.0]);
    }

    #[test]
    fn atomise_rejects_bad_input() {
        assert!(atomise(&uniform01(), 0).is_err());
        let unnormalized = InitialDatum::new(vec![0.0, 1.0], vec![2.0]).unwrap();
        assert!(atomise(&unnormalized, 4).is_err());
    }

    #[test]
    fn interval_masses_are_equal() {
        let d = InitialDatum::new(vec![0.0, 0.2, 0.5, 0.9, 2.0], vec![1.5, 0.4, 0.75, 0.25])
            .unwrap()
            .normalize()
            .unwrap();
        for n in [1, 2, 3, 7, 50] {
            let cfg = atomise(&d, n).unwrap();
            let ell = cfg.ell();
            for w in cfg.positions().windows(2) {
                let mass = d.cdf(w[1]) - d.cdf(w[0]);
                assert_abs_diff_eq!(mass, ell, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn discrete_density_values() {
        let cfg = atomise(&uniform01(), 4).unwrap();
        let f = discrete_initial_density(&cfg);
        assert!(f.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        // gaps {0.5, 0.25, 0.25} with n = 3.
        let cfg = ParticleConfiguration {
            positions: vec![0.0, 0.5, 0.75, 1.0],
            n: 3,
        };
        let f = discrete_initial_density(&cfg);
        assert_abs_diff_eq!(f.values()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.values()[1], 4.0 / 3.0, epsilon = 1e-15);

        // n = 1 on hull [0, 2].
        let cfg = ParticleConfiguration {
            positions: vec![0.0, 2.0],
            n: 1,
        };
        assert_eq!(discrete_initial_density(&cfg).values(), &[0.5]);
    }

    #[test]
    fn discrete_density_conserves_mass_and_ceiling() {
        let d = InitialDatum::two_blocks().normalize().unwrap();
        for n in [1, 2, 5, 37, 200] {
            let cfg = atomise(&d, n).unwrap();
            let f = discrete_initial_density(&cfg);
            assert_abs_diff_eq!(f.mass(), 1.0, epsilon = 1e-12);
            assert!(f.sup_norm() <= d.sup_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn discrete_density_tv_below_datum_tv() {
        for d in [
            InitialDatum::two_blocks().normalize().unwrap(),
            InitialDatum::bump(),
            InitialDatum::riemann(0.2, 0.8, 0.0).unwrap(),
        ] {
            for n in [3, 10, 64, 311] {
                let cfg = atomise(&d, n).unwrap();
                let f = discrete_initial_density(&cfg);
                let tv_n = crate::diagnostics::total_variation(&f);
                assert!(
                    tv_n <= d.total_variation() + 1e-10,
                    "TV {} exceeds datum TV {} at n={}",
                    tv_n,
                    d.total_variation(),
                    n
                );
            }
        }
    }

    #[test]
    fn discrete_density_l1_converges_to_datum() {
        let d = InitialDatum::bump();
        let datum_field = d.as_field();
        let err = |n: usize| {
            let f = discrete_initial_density(&atomise(&d, n).unwrap());
            crate::density::l1_distance(&f, &datum_field)
        };
        let coarse = err(10);
        let fine = err(1000);
        assert!(fine < coarse, "L1 error should shrink: {coarse} -> {fine}");
        assert!(fine < 2e-3, "fine-level error too large: {fine}");
    }

    #[test]
    fn named_data_are_unit_mass() {
        for d in [
            InitialDatum::riemann(0.2, 0.8, 0.0).unwrap(),
            InitialDatum::riemann(0.8, 0.2, 0.0).unwrap(),
            InitialDatum::riemann(0.0, 0.5, 1.0).unwrap(),
            InitialDatum::bump(),
            InitialDatum::two_blocks(),
        ] {
            assert!(d.is_normalized(1e-12), "mass = {}", d.mass());
        }
        // Degenerate riemann side collapses to a single block.
        let d = InitialDatum::riemann(0.0, 0.5, 1.0).unwrap();
        assert_eq!(d.x_min(), 1.0);
        assert_abs_diff_eq!(d.x_max(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn datum_file_roundtrip() {
        let text = "# piecewise constant rows\n0.0 1.0\n0.5 0.0\n1.5 1.0\n2.0 0.0\n";
        let d = InitialDatum::from_rows(text).unwrap();
        assert_eq!(d.breakpoints(), &[0.0, 0.5, 1.5, 2.0]);
        assert_eq!(d.values(), &[1.0, 0.0, 1.0]);
        assert!(InitialDatum::from_rows("0.0\n1.0 2.0\n").is_err());
        assert!(InitialDatum::from_rows("").is_err());
    }
}
