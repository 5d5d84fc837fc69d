//! Wind turbine physics: air density at hub height, rotor-equivalent wind speed
//! over a sheared and veered profile, and the wake-adjusted normalized power curve.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Specific gas constant of dry air, J/(kg·K).
pub const R_DRY: f64 = 287.058;
/// Specific gas constant of water vapour, J/(kg·K).
pub const R_VAPOUR: f64 = 461.495;
/// Betz limit on the power coefficient.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

#[derive(Debug, Error, PartialEq)]
pub enum TurbineError {
    #[error("invalid turbine spec: {0}")]
    InvalidSpec(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("air density {0:.4} kg/m3 outside [0.5, 2.0]")]
    ImplausibleDensity(f64),
    #[error("rotor disk [{bottom}, {top}] m not covered by profile levels [{lowest}, {highest}] m")]
    RotorNotCovered {
        bottom: f64,
        top: f64,
        lowest: f64,
        highest: f64,
    },
    #[error("speed {0} m/s outside the power coefficient table")]
    OutsideCpCurve(f64),
}

/// How the Region III plateau relates to the wake loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateauMode {
    /// Normalized output is clipped at 1 after the wake loss is applied.
    #[default]
    Unity,
    /// The wake loss also scales the rated plateau: output clips at 1 − δ.
    WakeDerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineSpec {
    pub rotor_diameter_m: f64,
    pub hub_height_m: f64,
    pub rated_power_mw: f64,
    pub cut_in_mps: f64,
    pub rated_speed_mps: f64,
    pub cut_out_mps: f64,
    /// (speed m/s, power coefficient), speeds strictly increasing.
    pub cp_curve: Vec<(f64, f64)>,
    pub wake_loss: f64,
    #[serde(default)]
    pub plateau_mode: PlateauMode,
}

impl Default for TurbineSpec {
    /// A 5 MW offshore-class machine: 3 / 11.4 / 25 m/s, 120 m rotor on a 100 m hub,
    /// 15 % wake loss. The coefficient table is an approximation, not a reference.
    fn default() -> Self {
        Self {
            rotor_diameter_m: 120.0,
            hub_height_m: 100.0,
            rated_power_mw: 5.0,
            cut_in_mps: 3.0,
            rated_speed_mps: 11.4,
            cut_out_mps: 25.0,
            cp_curve: vec![
                (3.0, 0.214),
                (4.0, 0.401),
                (5.0, 0.463),
                (6.0, 0.501),
                (7.0, 0.501),
                (8.0, 0.499),
                (9.0, 0.501),
                (10.0, 0.498),
                (11.0, 0.489),
                (11.4, 0.487),
                (12.0, 0.418),
                (14.0, 0.263),
                (16.0, 0.176),
                (18.0, 0.124),
                (20.0, 0.090),
                (22.0, 0.068),
                (24.0, 0.052),
                (25.0, 0.046),
            ],
            wake_loss: 0.15,
            plateau_mode: PlateauMode::Unity,
        }
    }
}

impl TurbineSpec {
    pub fn validate(&self) -> Result<(), TurbineError> {
        let bad = |m: &str| Err(TurbineError::InvalidSpec(m.to_string()));
        if !(self.rotor_diameter_m > 0.0 && self.hub_height_m > 0.0 && self.rated_power_mw > 0.0) {
            return bad("rotor diameter, hub height and rated power must be positive");
        }
        if !(0.0 < self.cut_in_mps && self.cut_in_mps < self.rated_speed_mps && self.rated_speed_mps < self.cut_out_mps) {
            return bad("need 0 < cut_in < rated_speed < cut_out");
        }
        if !(0.0..1.0).contains(&self.wake_loss) {
            return bad("wake loss must lie in [0, 1)");
        }
        if self.cp_curve.is_empty() {
            return bad("empty power coefficient table");
        }
        if self.cp_curve.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("power coefficient speeds must be strictly increasing");
        }
        if self.cp_curve.iter().any(|&(_, c)| !(0.0..=0.593).contains(&c)) {
            return bad("power coefficients must lie in [0, 0.593]");
        }
        Ok(())
    }

    pub fn rotor_area_m2(&self) -> f64 {
        PI * (self.rotor_diameter_m / 2.0).powi(2)
    }

    pub fn rated_power_w(&self) -> f64 {
        self.rated_power_mw * 1e6
    }

    /// Linear interpolation in the coefficient table.
    pub fn power_coefficient(&self, speed: f64) -> Result<f64, TurbineError> {
        let curve = &self.cp_curve;
        let (first, last) = (curve[0].0, curve[curve.len() - 1].0);
        if !(first..=last).contains(&speed) {
            return Err(TurbineError::OutsideCpCurve(speed));
        }
        let i = curve.partition_point(|&(s, _)| s <= speed);
        if i >= curve.len() {
            return Ok(curve[curve.len() - 1].1);
        }
        let (s0, c0) = curve[i - 1];
        let (s1, c1) = curve[i];
        Ok(c0 + (c1 - c0) * (speed - s0) / (s1 - s0))
    }

    /// Normalized level of the Region III plateau.
    pub fn plateau(&self) -> f64 {
        match self.plateau_mode {
            PlateauMode::Unity => 1.0,
            PlateauMode::WakeDerated => 1.0 - self.wake_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::I, Region::II, Region::III, Region::IV];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Half-open classification: [0, cut_in) → I, [cut_in, rated) → II,
/// [rated, cut_out) → III, [cut_out, ∞) → IV.
pub fn classify_region(speed: f64, spec: &TurbineSpec) -> Region {
    if speed < spec.cut_in_mps {
        Region::I
    } else if speed < spec.rated_speed_mps {
        Region::II
    } else if speed < spec.cut_out_mps {
        Region::III
    } else {
        Region::IV
    }
}

/// Saturation vapour pressure over water (Magnus form), Pa.
pub fn saturation_vapour_pressure(temperature_c: f64) -> f64 {
    610.94 * (17.625 * temperature_c / (temperature_c + 243.04)).exp()
}

/// Moist air density from the partial pressures of dry air and vapour.
pub fn air_density(pressure_pa: f64, temperature_c: f64, relative_humidity: f64) -> Result<f64, TurbineError> {
    if !(pressure_pa > 0.0) {
        return Err(TurbineError::InvalidInput(format!("pressure {pressure_pa} Pa")));
    }
    if !(0.0..=100.0).contains(&relative_humidity) {
        return Err(TurbineError::InvalidInput(format!("relative humidity {relative_humidity} %")));
    }
    if !(temperature_c > -100.0) {
        return Err(TurbineError::InvalidInput(format!("temperature {temperature_c} C")));
    }
    let t_k = temperature_c + 273.15;
    let p_v = relative_humidity / 100.0 * saturation_vapour_pressure(temperature_c);
    let p_d = pressure_pa - p_v;
    let rho = p_d / (R_DRY * t_k) + p_v / (R_VAPOUR * t_k);
    if !(0.5..=2.0).contains(&rho) {
        return Err(TurbineError::ImplausibleDensity(rho));
    }
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileLevel {
    pub height_m: f64,
    pub speed_mps: f64,
    pub direction_deg: f64,
}

/// Measured wind speed and direction at several heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindProfile {
    pub levels: Vec<ProfileLevel>,
    pub hub_direction_deg: f64,
}

fn wrap180(d: f64) -> f64 {
    let r = (d + 180.0).rem_euclid(360.0) - 180.0;
    if r == -180.0 {
        180.0
    } else {
        r
    }
}

impl WindProfile {
    /// Builds a profile whose hub direction is interpolated at `hub_height_m`.
    pub fn new(levels: Vec<ProfileLevel>, hub_height_m: f64) -> Result<Self, TurbineError> {
        let mut p = Self {
            levels,
            hub_direction_deg: 0.0,
        };
        p.validate_levels()?;
        let (lo, hi) = p.span();
        if !(lo..=hi).contains(&hub_height_m) {
            return Err(TurbineError::InvalidInput(format!(
                "hub height {hub_height_m} m not bracketed by [{lo}, {hi}] m"
            )));
        }
        p.hub_direction_deg = p.interpolate(hub_height_m).1;
        Ok(p)
    }

    /// Same speed and direction at every level.
    pub fn uniform(heights: &[f64], speed: f64, direction_deg: f64) -> Self {
        Self {
            levels: heights
                .iter()
                .map(|&h| ProfileLevel {
                    height_m: h,
                    speed_mps: speed,
                    direction_deg,
                })
                .collect(),
            hub_direction_deg: direction_deg,
        }
    }

    fn validate_levels(&self) -> Result<(), TurbineError> {
        if self.levels.is_empty() {
            return Err(TurbineError::InvalidInput("empty wind profile".into()));
        }
        if self.levels.windows(2).any(|w| w[1].height_m <= w[0].height_m) {
            return Err(TurbineError::InvalidInput("profile heights must be strictly increasing".into()));
        }
        if self.levels.iter().any(|l| !(l.speed_mps >= 0.0)) {
            return Err(TurbineError::InvalidInput("negative profile speed".into()));
        }
        Ok(())
    }

    fn span(&self) -> (f64, f64) {
        (self.levels[0].height_m, self.levels[self.levels.len() - 1].height_m)
    }

    /// Linear interpolation of speed and (shortest-arc) direction at height `z`.
    pub fn interpolate(&self, z: f64) -> (f64, f64) {
        let lv = &self.levels;
        if z <= lv[0].height_m {
            return (lv[0].speed_mps, lv[0].direction_deg);
        }
        if z >= lv[lv.len() - 1].height_m {
            let l = lv[lv.len() - 1];
            return (l.speed_mps, l.direction_deg);
        }
        let i = lv.partition_point(|l| l.height_m <= z);
        let (a, b) = (lv[i - 1], lv[i]);
        let w = (z - a.height_m) / (b.height_m - a.height_m);
        let speed = a.speed_mps + w * (b.speed_mps - a.speed_mps);
        let dir = a.direction_deg + w * wrap180(b.direction_deg - a.direction_deg);
        (speed, dir.rem_euclid(360.0))
    }
}

/// One horizontal slice of the rotor disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotorSlice {
    pub z_low_m: f64,
    pub z_high_m: f64,
    pub area_m2: f64,
    /// Area-weighted mean of the cubed, direction-projected speed over the slice.
    pub mean_cube: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewsBreakdown {
    pub slices: Vec<RotorSlice>,
    pub rotor_area_m2: f64,
    pub v_equ_mps: f64,
}

/// Area of the disk of radius `r` between heights `y0 < y1` relative to its centre.
fn segment_area(r: f64, y0: f64, y1: f64) -> f64 {
    let f = |y: f64| {
        let y = y.clamp(-r, r);
        y * (r * r - y * y).max(0.0).sqrt() + r * r * (y / r).asin()
    };
    f(y1) - f(y0)
}

const GAUSS_NODES: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Rotor-equivalent wind speed with slice-area weights and hub-direction projection.
///
/// The disk is cut into horizontal slices at the midpoints between measurement
/// heights. Each slice contributes its area fraction times the mean of
/// `max(0, v·cos(θ − θ_hub))³` over the slice, with `v` and `θ` interpolated
/// linearly between levels.
pub fn rotor_equivalent_wind_speed(profile: &WindProfile, spec: &TurbineSpec) -> Result<f64, TurbineError> {
    rews_breakdown(profile, spec).map(|b| b.v_equ_mps)
}

pub fn rews_breakdown(profile: &WindProfile, spec: &TurbineSpec) -> Result<RewsBreakdown, TurbineError> {
    profile.validate_levels()?;
    let r = spec.rotor_diameter_m / 2.0;
    let hub = spec.hub_height_m;
    let (bottom, top) = (hub - r, hub + r);
    let (lowest, highest) = profile.span();
    let tol = 1e-9 * spec.rotor_diameter_m;
    if lowest > bottom + tol || highest < top - tol {
        return Err(TurbineError::RotorNotCovered {
            bottom,
            top,
            lowest,
            highest,
        });
    }

    let heights: Vec<f64> = profile.levels.iter().map(|l| l.height_m).collect();
    let mut cuts = vec![bottom];
    cuts.extend(
        heights
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .filter(|&m| m > bottom && m < top),
    );
    cuts.push(top);

    let projected_cube = |z: f64| {
        let (v, d) = profile.interpolate(z);
        let proj = v * (d - profile.hub_direction_deg).to_radians().cos();
        proj.max(0.0).powi(3)
    };

    let mut slices = Vec::with_capacity(cuts.len() - 1);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (z0, z1) = (w[0], w[1]);
        // integrate in φ with y = r sin φ so the chord weight becomes smooth
        let mut breaks = vec![z0];
        breaks.extend(heights.iter().copied().filter(|&h| h > z0 && h < z1));
        breaks.push(z1);
        let mut integral = 0.0;
        for b in breaks.windows(2) {
            let p0 = ((b[0] - hub) / r).clamp(-1.0, 1.0).asin();
            let p1 = ((b[1] - hub) / r).clamp(-1.0, 1.0).asin();
            let pieces = 2;
            let step = (p1 - p0) / pieces as f64;
            for k in 0..pieces {
                let a = p0 + k as f64 * step;
                let mid = a + 0.5 * step;
                for &(x, wgt) in &GAUSS_NODES {
                    let phi = mid + 0.5 * step * x;
                    let c = phi.cos();
                    integral += 0.5 * step * wgt * 2.0 * r * r * c * c * projected_cube(hub + r * phi.sin());
                }
            }
        }
        let area = segment_area(r, z0 - hub, z1 - hub);
        total += integral;
        slices.push(RotorSlice {
            z_low_m: z0,
            z_high_m: z1,
            area_m2: area,
            mean_cube: if area > 0.0 { integral / area } else { 0.0 },
        });
    }
    let rotor_area = spec.rotor_area_m2();
    Ok(RewsBreakdown {
        v_equ_mps: (total / rotor_area).max(0.0).cbrt(),
        slices,
        rotor_area_m2: rotor_area,
    })
}

/// Normalized wake-adjusted output at rotor-equivalent speed `v_equ`.
///
/// Zero in Regions I and IV, the plateau in Region III, and
/// `(1 − δ)·½·ρ·A·V³·Cp / rated` clipped at the plateau in Region II.
pub fn modified_power_curve(v_equ: f64, rho_hub: f64, spec: &TurbineSpec) -> Result<f64, TurbineError> {
    if !(v_equ >= 0.0) {
        return Err(TurbineError::InvalidInput(format!("negative speed {v_equ}")));
    }
    if !(0.5..=2.0).contains(&rho_hub) {
        return Err(TurbineError::ImplausibleDensity(rho_hub));
    }
    match classify_region(v_equ, spec) {
        Region::I | Region::IV => Ok(0.0),
        Region::III => Ok(spec.plateau()),
        Region::II => {
            let cp = spec.power_coefficient(v_equ)?;
            let mechanical = 0.5 * rho_hub * spec.rotor_area_m2() * v_equ.powi(3) * cp / spec.rated_power_w();
            let norm = match spec.plateau_mode {
                PlateauMode::Unity => ((1.0 - spec.wake_loss) * mechanical).min(1.0),
                PlateauMode::WakeDerated => (1.0 - spec.wake_loss) * mechanical.min(1.0),
            };
            Ok(norm.max(0.0))
        }
    }
}

/// All inputs of the farm power chain for one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub pressure_pa: f64,
    pub humidity_pct: f64,
    pub temperature_c: f64,
    pub profile: WindProfile,
}

/// Normalized farm output for a record (density → REWS → curve).
pub fn normalized_power(record: &WeatherRecord, spec: &TurbineSpec) -> Result<f64, TurbineError> {
    let rho = air_density(record.pressure_pa, record.temperature_c, record.humidity_pct)?;
    let v = rotor_equivalent_wind_speed(&record.profile, spec)?;
    modified_power_curve(v, rho, spec)
}

/// Farm output in MW.
pub fn farm_power(record: &WeatherRecord, spec: &TurbineSpec, farm_capacity_mw: f64) -> Result<f64, TurbineError> {
    Ok(normalized_power(record, spec)? * farm_capacity_mw)
}
