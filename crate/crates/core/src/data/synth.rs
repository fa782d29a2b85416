//! Procedural image pairs with exact ground-truth flow.
//!
//! The second frame carries the texture; the first frame is obtained by
//! backward warping it, `I1(p) = I2(p + gt(p))`, so `gt` is exactly the
//! displacement of every first-frame pixel into the second frame. Pixels
//! whose source lies outside the second frame are masked invalid.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FlowField, Image};
use crate::error::{Error, Result};

/// Smallest supported image side.
pub const MIN_SIDE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Texture {
    /// Uniform noise box-blurred twice, then stretched to `[0, 1]`.
    SmoothedNoise,
    /// Sum of randomly oriented sinusoids per channel.
    SinusoidMixture,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Motion {
    /// Same displacement everywhere; random direction, magnitude drawn from
    /// the magnitude range.
    Constant,
    /// Exactly this displacement everywhere (ignores the magnitude range).
    Translate(f64, f64),
    /// Translation plus a random linear part about the image centre.
    Affine,
    /// Smooth sinusoidal displacement field.
    Sinusoidal,
}

impl fmt::Display for Texture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Texture::SmoothedNoise => "noise",
            Texture::SinusoidMixture => "sinusoid",
        })
    }
}

impl FromStr for Texture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(Texture::SmoothedNoise),
            "sinusoid" => Ok(Texture::SinusoidMixture),
            _ => Err(Error::Config(format!("unknown texture `{s}` (noise|sinusoid)"))),
        }
    }
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Motion::Constant => f.write_str("constant"),
            Motion::Translate(u, v) => write!(f, "translate:{u}:{v}"),
            Motion::Affine => f.write_str("affine"),
            Motion::Sinusoidal => f.write_str("sinusoidal"),
        }
    }
}

impl FromStr for Motion {
    type Err = Error;
    /// `constant`, `affine`, `sinusoidal` or `translate:<u>:<v>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Motion::Constant),
            "affine" => Ok(Motion::Affine),
            "sinusoidal" => Ok(Motion::Sinusoidal),
            _ => {
                let bad = || Error::Config(format!("unknown motion `{s}` (constant|affine|sinusoidal|translate:U:V)"));
                let rest = s.strip_prefix("translate:").ok_or_else(bad)?;
                let (u, v) = rest.split_once(':').ok_or_else(bad)?;
                let u: f64 = u.trim().parse().map_err(|_| bad())?;
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                Ok(Motion::Translate(u, v))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub texture: Texture,
    pub motion: Motion,
    /// Largest displacement magnitude of a field is drawn from this range.
    pub magnitude: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            height: 64,
            width: 64,
            texture: Texture::SmoothedNoise,
            motion: Motion::Constant,
            magnitude: (0.0, 4.0),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < MIN_SIDE || self.width < MIN_SIDE {
            return Err(Error::Config(format!(
                "synthetic size {}×{} below minimum {MIN_SIDE}×{MIN_SIDE}",
                self.height, self.width
            )));
        }
        let (lo, hi) = self.magnitude;
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || hi < lo {
            return Err(Error::Config(format!("invalid magnitude range [{lo}, {hi}]")));
        }
        if let Motion::Translate(u, v) = self.motion {
            if !u.is_finite() || !v.is_finite() {
                return Err(Error::Config("translation must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPair {
    pub image1: Image,
    pub image2: Image,
    pub flow: FlowField,
}

/// Generates one pair. Deterministic in `spec` (including its seed).
pub fn gen_pair(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let texture = match spec.texture {
        Texture::SmoothedNoise => smoothed_noise(h, w, &mut rng),
        Texture::SinusoidMixture => sinusoid_mixture(h, w, &mut rng),
    };
    let (u, v) = motion_field(spec, &mut rng);

    let n = h * w;
    let mut image1 = vec![0.0f32; 3 * n];
    let mut valid = vec![true; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = x as f64 + u[i];
            let sy = y as f64 + v[i];
            valid[i] = sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64;
            for c in 0..3 {
                image1[c * n + i] = bilinear(&texture[c * n..(c + 1) * n], h, w, sx, sy) as f32;
            }
        }
    }
    let image2: Vec<f32> = texture.iter().map(|&t| t as f32).collect();
    let mut data = Vec::with_capacity(2 * n);
    data.extend(u.iter().map(|&x| x as f32));
    data.extend(v.iter().map(|&x| x as f32));
    Ok(SyntheticPair {
        image1: Image::new(h, w, image1)?,
        image2: Image::new(h, w, image2)?,
        flow: FlowField::new(h, w, data)?.with_valid(valid)?,
    })
}

/// Bilinear read with zero outside the plane. Integer coordinates return
/// the stored value exactly.
fn bilinear(plane: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let at = |yy: f64, xx: f64| -> f64 {
        if xx < 0.0 || yy < 0.0 || xx >= w as f64 || yy >= h as f64 {
            0.0
        } else {
            plane[yy as usize * w + xx as usize]
        }
    };
    let top = at(y0, x0) * (1.0 - fx) + if fx > 0.0 { at(y0, x0 + 1.0) * fx } else { 0.0 };
    if fy == 0.0 {
        return top;
    }
    let bottom = at(y0 + 1.0, x0) * (1.0 - fx) + if fx > 0.0 { at(y0 + 1.0, x0 + 1.0) * fx } else { 0.0 };
    top * (1.0 - fy) + bottom * fy
}

fn stretch(plane: &mut [f64]) {
    let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    for v in plane {
        *v = (*v - lo) / span;
    }
}

fn box_blur(src: &[f64], h: usize, w: usize, r: usize) -> Vec<f64> {
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let r = r as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| src[y * w + clamp(x as isize + d, w)]).sum();
            tmp[y * w + x] = s / (2 * r + 1) as f64;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| tmp[clamp(y as isize + d, h) * w + x]).sum();
            out[y * w + x] = s / (2 * r + 1) as f64;
        }
    }
    out
}

fn smoothed_noise(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * h * w);
    for _ in 0..3 {
        let noise: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
        let mut plane = box_blur(&box_blur(&noise, h, w, 1), h, w, 1);
        stretch(&mut plane);
        out.extend(plane);
    }
    out
}

fn sinusoid_mixture(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * h * w);
    for _ in 0..3 {
        let waves: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| {
                let theta = rng.gen::<f64>() * TAU;
                let period = rng.gen_range(3.0..12.0);
                let k = TAU / period;
                (k * theta.cos(), k * theta.sin(), rng.gen::<f64>() * TAU)
            })
            .collect();
        let mut plane: Vec<f64> = (0..h * w)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                waves.iter().map(|&(kx, ky, ph)| (kx * x + ky * y + ph).sin()).sum()
            })
            .collect();
        stretch(&mut plane);
        out.extend(plane);
    }
    out
}

/// Returns `(u, v)` planes.
fn motion_field(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (spec.height, spec.width);
    let n = h * w;
    let (lo, hi) = spec.magnitude;
    let target = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let (cx, cy) = ((w - 1) as f64 / 2.0, (h - 1) as f64 / 2.0);
    let (mut u, mut v) = match spec.motion {
        Motion::Translate(du, dv) => return (vec![du; n], vec![dv; n]),
        Motion::Constant => {
            let theta = rng.gen::<f64>() * TAU;
            return (vec![target * theta.cos(); n], vec![target * theta.sin(); n]);
        }
        Motion::Affine => {
            let theta = rng.gen::<f64>() * TAU;
            let t = (theta.cos(), theta.sin());
            let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) / (w.max(h) as f64));
            let mut u = vec![0.0; n];
            let mut v = vec![0.0; n];
            for i in 0..n {
                let (x, y) = ((i % w) as f64 - cx, (i / w) as f64 - cy);
                u[i] = t.0 + a[0] * x + a[1] * y;
                v[i] = t.1 + a[2] * x + a[3] * y;
            }
            (u, v)
        }
        Motion::Sinusoidal => {
            let mut params = || {
                let theta = rng.gen::<f64>() * TAU;
                let k = TAU / rng.gen_range(w.min(h) as f64 / 2.0..2.0 * w.max(h) as f64);
                (k * theta.cos(), k * theta.sin(), rng.gen::<f64>() * TAU, rng.gen_range(-0.5..0.5))
            };
            let pu = params();
            let pv = params();
            let field = |p: (f64, f64, f64, f64), i: usize| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                p.3 + (p.0 * x + p.1 * y + p.2).sin()
            };
            ((0..n).map(|i| field(pu, i)).collect(), (0..n).map(|i| field(pv, i)).collect())
        }
    };
    // Rescale so the largest displacement equals the drawn magnitude.
    let peak = u.iter().zip(&v).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
    let s = if peak > 0.0 { target / peak } else { 0.0 };
    for (a, b) in u.iter_mut().zip(v.iter_mut()) {
        *a *= s;
        *b *= s;
    }
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_motion_is_identity() {
        let spec = SyntheticSpec {
            magnitude: (0.0, 0.0),
            ..Default::default()
        };
        let p = gen_pair(&spec).unwrap();
        assert_eq!(p.image1, p.image2);
        assert!(p.flow.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn integer_translation_shifts_columns() {
        let spec = SyntheticSpec {
            motion: Motion::Translate(2.0, 0.0),
            height: 16,
            width: 20,
            ..Default::default()
        };
        let p = gen_pair(&spec).unwrap();
        let (h, w) = (16, 20);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w - 2 {
                    let i = c * h * w + y * w + x;
                    assert_eq!(p.image1.data[i], p.image2.data[i + 2]);
                }
            }
        }
        let valid = p.flow.valid.as_ref().unwrap();
        assert!(!valid[w - 1] && !valid[w - 2] && valid[w - 3]);
    }

    #[test]
    fn magnitude_bound_and_determinism() {
        for motion in [Motion::Constant, Motion::Affine, Motion::Sinusoidal] {
            for texture in [Texture::SmoothedNoise, Texture::SinusoidMixture] {
                let spec = SyntheticSpec {
                    motion,
                    texture,
                    magnitude: (1.0, 3.0),
                    seed: 7,
                    ..Default::default()
                };
                let a = gen_pair(&spec).unwrap();
                assert_eq!(a, gen_pair(&spec).unwrap());
                let peak = (0..a.flow.pixels())
                    .map(|i| {
                        let (u, v) = a.flow.at(i);
                        f64::from(u.hypot(v))
                    })
                    .fold(0.0, f64::max);
                assert!((1.0 - 1e-5..=3.0 + 1e-5).contains(&peak), "{motion} {peak}");
                assert!(a.image1.data.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn rejects_small_or_bad_specs() {
        let small = SyntheticSpec { height: 8, ..Default::default() };
        assert!(matches!(gen_pair(&small), Err(Error::Config(_))));
        let bad = SyntheticSpec { magnitude: (2.0, 1.0), ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!("translate:2:-1".parse::<Motion>().unwrap(), Motion::Translate(2.0, -1.0));
        assert!("wobble".parse::<Motion>().is_err());
    }
}
