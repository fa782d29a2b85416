//! Flow-to-colour rendering: direction sets the hue, magnitude the
//! saturation, so zero flow is white.

use std::f64::consts::PI;

use super::{FlowField, Image};

/// Hue in degrees `[0, 360)` of a displacement; `0°` points right (+u),
/// `90°` down (+v).
pub fn flow_hue(u: f64, v: f64) -> f64 {
    let deg = v.atan2(u) * 180.0 / PI;
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

/// Renders `flow`. Magnitudes are divided by `cap`, or by the field's
/// largest magnitude when `cap` is `None`; saturation is clamped to 1.
pub fn flow_to_color(flow: &FlowField, cap: Option<f64>) -> Image {
    let n = flow.pixels();
    let mag = |i: usize| {
        let (u, v) = flow.at(i);
        f64::from(u).hypot(f64::from(v))
    };
    let norm = cap.unwrap_or_else(|| (0..n).map(mag).fold(0.0, f64::max));
    let mut data = vec![1.0f32; 3 * n];
    if norm <= 0.0 || !norm.is_finite() {
        return Image::new(flow.height, flow.width, data).expect("shape");
    }
    for i in 0..n {
        let (u, v) = flow.at(i);
        let sat = (mag(i) / norm).min(1.0);
        let rgb = hsv_to_rgb(flow_hue(f64::from(u), f64::from(v)), sat, 1.0);
        for c in 0..3 {
            data[c * n + i] = rgb[c] as f32;
        }
    }
    Image::new(flow.height, flow.width, data).expect("shape")
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_white() {
        let img = flow_to_color(&FlowField::zeros(3, 4), None);
        assert!(img.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn opposite_vectors_have_complementary_hues() {
        let a = flow_hue(1.0, 2.0);
        let b = flow_hue(-1.0, -2.0);
        assert!(((a - b).abs() - 180.0).abs() < 1e-9);
        let f = FlowField::new(1, 2, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let img = flow_to_color(&f, None);
        // red vs cyan
        assert_eq!([img.data[0], img.data[2], img.data[4]], [1.0, 0.0, 0.0]);
        assert_eq!([img.data[1], img.data[3], img.data[5]], [0.0, 1.0, 1.0]);
    }

    #[test]
    fn cap_controls_saturation() {
        let f = FlowField::constant(1, 1, 2.0, 0.0);
        let half = flow_to_color(&f, Some(4.0));
        assert_eq!([half.data[0], half.data[1], half.data[2]], [1.0, 0.5, 0.5]);
        let full = flow_to_color(&f, Some(1.0));
        assert_eq!([full.data[0], full.data[1], full.data[2]], [1.0, 0.0, 0.0]);
    }
}
