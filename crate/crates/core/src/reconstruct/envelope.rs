use std::sync::OnceLock;

use super::spline::{spline_fit, Spline};
use crate::error::{Result, SietError};
use crate::funcspace::{
    sample_function, BumpConstruction, GridFunction, NoiseLaw, RealFunction, SampledFunction, SmoothnessClass,
    DEFAULT_GRID_SIZE,
};

/// Pointwise bounds on the functions of the class that agree with the
/// samples. Exact for `lambda = 1`; a calibrated band around the spline
/// otherwise.
#[derive(Clone, Debug)]
pub struct EnvelopePair {
    pub lower: GridFunction,
    pub upper: GridFunction,
    pub exact: bool,
    /// Half-width `delta_m` of the band (zero when exact).
    pub margin: f64,
    shape: Shape,
}

#[derive(Clone, Debug)]
enum Shape {
    Cones { xs: Vec<f64>, ts: Vec<f64>, k: f64 },
    Band { spline: Spline, delta: f64 },
    Pinned(GridFunction),
}

/// One side of an envelope, evaluated exactly rather than through the grid.
#[derive(Clone, Copy, Debug)]
pub struct EnvelopeSide<'a> {
    shape: &'a Shape,
    upper: bool,
}

impl RealFunction for EnvelopeSide<'_> {
    fn eval(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Cones { xs, ts, k } => {
                let cone = |(xi, ti): (&f64, &f64)| {
                    if self.upper {
                        ti + k * (x - xi).abs()
                    } else {
                        ti - k * (x - xi).abs()
                    }
                };
                let it = xs.iter().zip(ts).map(cone);
                if self.upper {
                    it.fold(f64::INFINITY, f64::min)
                } else {
                    it.fold(f64::NEG_INFINITY, f64::max)
                }
            }
            Shape::Pinned(g) => g.eval(x),
            Shape::Band { spline, delta } => {
                let s = spline.eval(x);
                if self.upper {
                    s + delta
                } else {
                    s - delta
                }
            }
        }
    }
}

impl EnvelopePair {
    pub fn lower_exact(&self) -> EnvelopeSide<'_> {
        EnvelopeSide {
            shape: &self.shape,
            upper: false,
        }
    }

    pub fn upper_exact(&self) -> EnvelopeSide<'_> {
        EnvelopeSide {
            shape: &self.shape,
            upper: true,
        }
    }

    /// Envelope whose two sides coincide with `f`, for callers that want to
    /// run the set-valued solvers on a fully pinned function.
    pub fn pinned(f: &GridFunction) -> Self {
        Self {
            lower: f.clone(),
            upper: f.clone(),
            exact: true,
            margin: 0.0,
            shape: Shape::Pinned(f.clone()),
        }
    }
}

/// Lower and upper envelopes of the class members consistent with
/// noiseless samples.
pub fn lower_envelope(s: &SampledFunction, cls: &SmoothnessClass) -> Result<EnvelopePair> {
    if !s.is_noiseless() {
        return Err(SietError::InvalidInput("envelopes need noiseless samples".into()));
    }
    if cls.lambda() == 1 {
        let shape = Shape::Cones {
            xs: s.xs().to_vec(),
            ts: s.values().to_vec(),
            k: cls.k_bound(),
        };
        let lower = grid_of(&shape, false)?;
        let upper = grid_of(&shape, true)?;
        return Ok(EnvelopePair {
            lower,
            upper,
            exact: true,
            margin: 0.0,
            shape,
        });
    }
    let spline = spline_fit(s, cls)?;
    let delta = band_margin(s.m(), cls);
    let shape = Shape::Band {
        spline: spline.clone(),
        delta,
    };
    // Piecewise-linear tabulation of a C^2 curve errs by at most
    // h^2 / 8 * max|s''|; widen the tabulated band by that much so the grid
    // versions stay conservative.
    let h = 1.0 / (DEFAULT_GRID_SIZE - 1) as f64;
    let curv = (0..DEFAULT_GRID_SIZE)
        .map(|j| spline.derivative(j as f64 * h, 2).abs())
        .fold(0.0, f64::max);
    let grid_slack = h * h / 8.0 * curv;
    let centre = spline.to_grid(DEFAULT_GRID_SIZE)?;
    Ok(EnvelopePair {
        lower: centre.map(|v| v - delta - grid_slack)?,
        upper: centre.map(|v| v + delta + grid_slack)?,
        exact: false,
        margin: delta,
        shape,
    })
}

fn grid_of(shape: &Shape, upper: bool) -> Result<GridFunction> {
    GridFunction::from_fn(DEFAULT_GRID_SIZE, EnvelopeSide { shape, upper })
}

/// `delta_m = 2 c_cal K m^(-lambda)`.
pub fn band_margin(m: usize, cls: &SmoothnessClass) -> f64 {
    2.0 * calibration_constant(cls.lambda()) * cls.k_bound() * (m as f64).powi(-(cls.lambda() as i32))
}

const CAL_SIZES: [usize; 5] = [9, 17, 33, 65, 129];
const CAL_CHECK_GRID: usize = 4097;
const CAL_SAFETY: f64 = 2.0;

/// Empirical constant `c_cal` for the spline error `sup|g - s_g| <= c K m^-lambda`,
/// measured over a family of smooth-plus-bump functions in the unit ball and
/// inflated by a safety factor of 2. Computed once per order.
pub fn calibration_constant(lambda: u32) -> f64 {
    static CACHE: [OnceLock<f64>; 8] = [const { OnceLock::new() }; 8];
    match CACHE.get(lambda as usize) {
        Some(cell) => *cell.get_or_init(|| calibrate(lambda)),
        None => calibrate(lambda),
    }
}

fn calibrate(lambda: u32) -> f64 {
    let cls = SmoothnessClass::new(lambda, 1.0).expect("lambda >= 1");
    let mut worst: f64 = 0.0;
    for &m in &CAL_SIZES {
        if m < lambda as usize + 1 {
            continue;
        }
        let bump = BumpConstruction::new(m, &cls, 0.5).expect("valid bump");
        for j in 1..=4 {
            for phase in [0.0, 0.3] {
                let w = 2.0 * std::f64::consts::PI * j as f64;
                let g = |x: f64| 0.5 * (w * x + phase).sin() / w.powi(lambda as i32) + bump.eval(x);
                let s = sample_function(&g, m, 0.0, 0, NoiseLaw::Gaussian).expect("valid design");
                let sp = spline_fit(&s, &cls).expect("noiseless samples");
                let err = (0..CAL_CHECK_GRID)
                    .map(|i| {
                        let x = i as f64 / (CAL_CHECK_GRID - 1) as f64;
                        (g(x) - sp.eval(x)).abs()
                    })
                    .fold(0.0, f64::max);
                worst = worst.max(err * (m as f64).powi(lambda as i32));
            }
        }
    }
    CAL_SAFETY * worst
}
