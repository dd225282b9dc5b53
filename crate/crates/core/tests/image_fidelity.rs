use meshfid_core::image_fidelity::{bm, mse, perceptual_diff, ViewParams};
use meshfid_core::render::GrayImage;

fn patch_pair() -> (GrayImage, GrayImage) {
    let a = GrayImage::filled(32, 32, 0.5);
    let mut b = a.clone();
    for y in 12..20 {
        for x in 10..18 {
            b.set(x, y, 0.6);
        }
    }
    (a, b)
}

/// Steps 1-5 evaluated pixel by pixel with a full 2-D kernel and no
/// intermediate buffers beyond the Gaussian levels.
fn reference(a: &GrayImage, b: &GrayImage, ppd: f64, lmax: f64) -> Vec<f64> {
    let (w, h) = a.dimensions();
    let taps = [1.0, 4.0, 6.0, 4.0, 1.0];
    let levels = |img: &GrayImage| {
        let mut g: Vec<Vec<f64>> = vec![img.pixels().iter().map(|v| (v * lmax / 100.0).cbrt()).collect()];
        for k in 0..5 {
            let d = 1i64 << k;
            let prev = &g[k];
            let mut next = vec![0.0; w * h];
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let mut s = 0.0;
                    for (j, ty) in taps.iter().enumerate() {
                        for (i, tx) in taps.iter().enumerate() {
                            let xx = (x + (i as i64 - 2) * d).clamp(0, w as i64 - 1) as usize;
                            let yy = (y + (j as i64 - 2) * d).clamp(0, h as i64 - 1) as usize;
                            s += tx * ty / 256.0 * prev[yy * w + xx];
                        }
                    }
                    next[y as usize * w + x as usize] = s;
                }
            }
            g.push(next);
        }
        g
    };
    let (ga, gb) = (levels(a), levels(b));
    let mut out = Vec::new();
    for p in 0..w * h {
        let mut sum4 = 0.0;
        for k in 0..5 {
            let f = 0.4 / 2f64.powi(k as i32) * ppd;
            let s = 100.0 * (f / 4.0) * (1.0 - f / 4.0).exp();
            let ca = s * (ga[k][p] - ga[k + 1][p]) / (ga[k + 1][p] + 0.05);
            let cb = s * (gb[k][p] - gb[k + 1][p]) / (gb[k + 1][p] + 0.05);
            let te = f64::max(1.0, ca.abs().min(cb.abs()).powf(0.7));
            sum4 += ((ca - cb).abs() / te).powi(4);
        }
        out.push(1.0 - (-sum4.powf(0.25).powf(3.5)).exp());
    }
    out
}

#[test]
fn patch_pair_matches_reference() {
    let (a, b) = patch_pair();
    for vp in [ViewParams::default(), ViewParams { pixels_per_degree: 12.0, max_luminance: 80.0 }] {
        let d = perceptual_diff(&a, &b, &vp).unwrap();
        let r = reference(&a, &b, vp.pixels_per_degree, vp.max_luminance);
        let mut worst: f64 = 0.0;
        for (x, y) in d.values().iter().zip(&r) {
            worst = worst.max((x - y).abs());
        }
        assert!(worst < 1e-12, "max deviation {worst}");
        assert!(d.get(14, 15) > 0.5, "patch should be visible: {}", d.get(14, 15));
        assert!(d.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn shifting_both_images_keeps_measures() {
    let vp = ViewParams::default();
    let place = |ox: usize, oy: usize, bright: f64| {
        let mut img = GrayImage::new(160, 160);
        for y in 0..24 {
            for x in 0..24 {
                let v = if (x / 3 + y / 5) % 2 == 0 { 0.7 } else { 0.4 };
                img.set(ox + x, oy + y, if x > 12 && y > 12 { bright } else { v });
            }
        }
        img
    };
    let (a0, b0) = (place(66, 66, 0.7), place(66, 66, 0.95));
    let (a1, b1) = (place(71, 63, 0.7), place(71, 63, 0.95));
    let m0 = mse(&a0, &b0, false).unwrap();
    let m1 = mse(&a1, &b1, false).unwrap();
    assert_eq!(m0, m1);
    let p0 = bm(&a0, &b0, &vp).unwrap();
    let p1 = bm(&a1, &b1, &vp).unwrap();
    assert!(p0 > 0.0);
    assert!((p0 - p1).abs() <= 1e-12 * p0, "{p0} vs {p1}");
}
