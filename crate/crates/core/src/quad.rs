//! Quadrature rules: composite Gauss–Legendre panels and an adaptive
//! Gauss–Kronrod (7, 15) integrator.

#![allow(clippy::excessive_precision)]

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre reference rule on `[-1, 1]`, reused across panels.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pairs: Vec<(f64, f64)>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("order clamped to at least one");
        let rule = GaussLegendre::new(order);
        Self {
            pairs: rule.as_node_weight_pairs().to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Nodes and weights of panel `i` out of `panels` equal panels on `[a, b]`.
    pub fn panel(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        i: usize,
    ) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = (b - a) / panels as f64;
        let lo = a + h * i as f64;
        let half = 0.5 * h;
        let mid = lo + half;
        self.pairs
            .iter()
            .map(move |&(x, w)| (mid + half * x, half * w))
    }

    /// Composite rule with `panels` equal panels.
    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..panels {
            total += self
                .panel(a, b, panels, i)
                .map(|(x, w)| w * f(x))
                .sum::<f64>();
        }
        total
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive bisection with a G7K15 pair. Returns `(value, error estimate)`.
pub fn adaptive_gk15(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (f64, f64) {
    let mut intervals = vec![(a, b, gk15(&mut f, a, b))];
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return (total, err);
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&mut f, lo, mid)));
        intervals.push((mid, hi, gk15(&mut f, mid, hi)));
    }
    let total = intervals.iter().map(|iv| iv.2 .0).sum();
    let err = intervals.iter().map(|iv| iv.2 .1).sum();
    (total, err)
}
