//! The profile `psi1`: equal to `delta` near the boundary, a single maximum
//! inside `omega0`, slopes bounded away from zero elsewhere.
//!
//! The slope `psi1'` is piecewise constant or a degree-9 smoothstep blend
//! between constants, so `psi1` is a piecewise polynomial of degree 10 and
//! every derivative is exact.

use serde::Serialize;

use crate::mesh::{Interval, Mesh1D, RegionMasks};
use crate::{Error, Result};

/// `S(t) = t^5 (126 - 420 t + 540 t^2 - 315 t^3 + 70 t^4)`, the smoothstep
/// with four vanishing derivatives at both ends.
pub fn smoothstep9(t: f64) -> [f64; 4] {
    let t = t.clamp(0.0, 1.0);
    let s = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t2 * t2;
    let v = t4 * t * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))));
    let d1 = 630.0 * t4 * s.powi(4);
    let d2 = 2520.0 * t3 * s.powi(3) * (1.0 - 2.0 * t);
    let d3 = 2520.0 * t2 * s * s * (3.0 * s * s - 8.0 * t * s + 3.0 * t2);
    [v, d1, d2, d3]
}

/// Antiderivative of `S` vanishing at 0.
fn smoothstep9_integral(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(6) * (21.0 + t * (-60.0 + t * (67.5 + t * (-35.0 + 7.0 * t))))
}

/// `max S' = S'(1/2)`.
const S1_MAX: f64 = 630.0 / 256.0;
/// `max |S''|`, attained at `t = 1/2 -+ sqrt(1/28)`.
fn s2_max() -> f64 {
    let t = 0.5 - (1.0f64 / 28.0).sqrt();
    smoothstep9(t)[2].abs()
}

/// Slope goes from `u` to `v` over `[x0, x0 + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Piece {
    x0: f64,
    len: f64,
    u: f64,
    v: f64,
    base: f64,
}

impl Piece {
    fn eval(&self, x: f64) -> [f64; 4] {
        let t = (x - self.x0) / self.len;
        let d = self.v - self.u;
        if d == 0.0 {
            return [self.base + self.u * (x - self.x0), self.u, 0.0, 0.0];
        }
        let s = smoothstep9(t);
        [
            self.base + self.len * (self.u * t + d * smoothstep9_integral(t)),
            self.u + d * s[0],
            d * s[1] / self.len,
            d * s[2] / (self.len * self.len),
        ]
    }

    fn end_value(&self) -> f64 {
        self.base + self.len * (self.u + 0.5 * (self.v - self.u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psi1 {
    pieces: Vec<Piece>,
    pub r0: f64,
    pub omega0: Interval,
    /// Location of the maximum.
    pub peak: f64,
    pub slope_left: f64,
    pub slope_right: f64,
    /// `min |psi1'|` off `omega0`.
    pub varpi0: f64,
}

/// Exact sup norms of `psi1` and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Psi1Norms {
    pub sup: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
}

impl Psi1 {
    /// `[psi1, psi1', psi1'', psi1''']` at `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        let piece = self.pieces.iter().rev().find(|p| x >= p.x0).unwrap_or(&self.pieces[0]);
        piece.eval(x)
    }

    pub fn values(&self, mesh: &Mesh1D) -> Vec<f64> {
        mesh.nodes.iter().map(|&x| self.eval(x)[0]).collect()
    }

    pub fn norms(&self) -> Psi1Norms {
        let sup = self.eval(self.peak)[0];
        let sup_d1 = self.pieces.iter().map(|p| p.u.abs().max(p.v.abs())).fold(0.0, f64::max);
        let sup_d2 = self.pieces.iter().map(|p| (p.v - p.u).abs() * S1_MAX / p.len).fold(0.0, f64::max);
        Psi1Norms { sup, sup_d1, sup_d2 }
    }

    /// `max |psi1''' |`, for completeness of the derivative tests.
    pub fn sup_d3(&self) -> f64 {
        let m = s2_max();
        self.pieces.iter().map(|p| (p.v - p.u).abs() * m / (p.len * p.len)).fold(0.0, f64::max)
    }

    /// `max |psi1' delta' - psi1|` over the mesh nodes.
    pub fn d_const(&self, mesh: &Mesh1D) -> f64 {
        mesh.nodes
            .iter()
            .map(|&x| {
                let [v, d1, ..] = self.eval(x);
                let dd = if x < 0.5 { 1.0 } else { -1.0 };
                (d1 * dd - v).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Build `psi1` for boundary layer `r0` and core `omega0`.
///
/// Slopes: `1` on the layers, blended to `s_L` (resp. `-s_R`) across the
/// run-up to `omega0`, then to `0` at the centre of `omega0`. One of `s_L`,
/// `s_R` is `1`, the other is fixed by `psi1(1) = 0`. Since `psi1 = delta` on
/// the layers, no slope target above `1` is feasible.
pub fn build_psi1_from(r0: f64, omega0: Interval, varpi0_target: f64) -> Result<Psi1> {
    let (a0, b0) = (omega0.lo, omega0.hi);
    if !(r0 > 0.0 && r0 < a0 && a0 < b0 && b0 < 1.0 - r0) {
        return Err(Error::R0Overlap { r0, limit: a0.min(1.0 - b0) });
    }
    if varpi0_target > 1.0 {
        return Err(Error::InfeasibleSlope { target: varpi0_target, max_feasible: 1.0 });
    }
    if !(varpi0_target > 0.0) {
        return Err(Error::InvalidParameter(format!("varpi0 target must be positive, got {varpi0_target}")));
    }
    let p = 0.5 * (a0 + b0);
    // s_L (p - r0) - s_R (1 - r0 - p) = 1 - a0 - b0
    let (left, right) = (p - r0, 1.0 - r0 - p);
    let c = 1.0 - a0 - b0;
    let (sl, sr) = if c >= 0.0 { ((right + c) / left, 1.0) } else { (1.0, (left - c) / right) };

    let spans = [
        (0.0, r0, 1.0, 1.0),
        (r0, a0, 1.0, sl),
        (a0, p, sl, 0.0),
        (p, b0, 0.0, -sr),
        (b0, 1.0 - r0, -sr, -1.0),
        (1.0 - r0, 1.0, -1.0, -1.0),
    ];
    let mut pieces = Vec::with_capacity(spans.len());
    let mut base = 0.0;
    for (lo, hi, u, v) in spans {
        let piece = Piece { x0: lo, len: hi - lo, u, v, base };
        base = piece.end_value();
        pieces.push(piece);
    }
    // Pin the right layer to delta exactly.
    let n = pieces.len();
    pieces[n - 1].base = r0;
    Ok(Psi1 { pieces, r0, omega0, peak: p, slope_left: sl, slope_right: sr, varpi0: 1.0f64.min(sl).min(sr) })
}

/// Node values of `psi1` together with the profile itself.
pub fn build_psi1(mesh: &Mesh1D, masks: &RegionMasks, varpi0_target: f64) -> Result<(Vec<f64>, Psi1)> {
    let psi1 = build_psi1_from(masks.r0, masks.omega0_iv, varpi0_target)?;
    Ok((psi1.values(mesh), psi1))
}
