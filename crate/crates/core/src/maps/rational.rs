use super::{check_finite, check_points, pole_series, symmetrize, MapOptions, Reduction};
use crate::{CertifiedSeries, Error, LaurentSeries, Result, C64};

/// `z = r w + u0 + sum u_j/(w - w_j)`,
/// `zbar = r/w + ubar0 + sum ubar_j/(1/w - wbar_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    r: C64,
    u0: C64,
    ubar0: C64,
    /// `(u_j, w_j)`
    poles: Vec<(C64, C64)>,
    /// `(ubar_j, wbar_j)`
    poles_bar: Vec<(C64, C64)>,
    opts: MapOptions,
}

impl RationalMap {
    pub fn new(
        r: C64,
        u0: C64,
        ubar0: C64,
        poles: Vec<(C64, C64)>,
        poles_bar: Vec<(C64, C64)>,
        opts: MapOptions,
    ) -> Result<Self> {
        if poles.is_empty() || poles.len() != poles_bar.len() {
            return Err(Error::InvalidMap(
                "poles and barred poles need the same nonzero count".into(),
            ));
        }
        let n = poles.len();
        let mut p = vec![r, u0, ubar0];
        p.extend(poles.iter().map(|q| q.0));
        p.extend(poles.iter().map(|q| q.1));
        p.extend(poles_bar.iter().map(|q| q.0));
        p.extend(poles_bar.iter().map(|q| q.1));
        Self::from_params(n, &p, opts)
    }

    pub(crate) fn from_params(n: usize, p: &[C64], opts: MapOptions) -> Result<Self> {
        if n == 0 || p.len() != 4 * n + 3 {
            return Err(Error::InvalidMap("parameter count".into()));
        }
        check_finite(p)?;
        let mut p = p.to_vec();
        if opts.real_structure {
            symmetrize(&mut p, &pairs(n))?;
        }
        let w: Vec<C64> = p[3 + n..3 + 2 * n].to_vec();
        let wbar: Vec<C64> = p[3 + 3 * n..3 + 4 * n].to_vec();
        check_points(&w, "pole", opts.physical)?;
        check_points(&wbar, "barred pole", opts.physical)?;
        Ok(Self {
            r: p[0],
            u0: p[1],
            ubar0: p[2],
            poles: (0..n).map(|j| (p[3 + j], w[j])).collect(),
            poles_bar: (0..n).map(|j| (p[3 + 2 * n + j], wbar[j])).collect(),
            opts,
        })
    }

    pub(crate) fn rebuild(&self, p: &[C64], opts: MapOptions) -> Result<Self> {
        Self::from_params(self.order(), p, opts)
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn r(&self) -> C64 {
        self.r
    }

    pub fn u0(&self) -> C64 {
        self.u0
    }

    pub fn ubar0(&self) -> C64 {
        self.ubar0
    }

    pub fn poles(&self) -> &[(C64, C64)] {
        &self.poles
    }

    pub fn poles_bar(&self) -> &[(C64, C64)] {
        &self.poles_bar
    }

    pub fn mirror(&self) -> Self {
        Self {
            r: self.r,
            u0: self.ubar0,
            ubar0: self.u0,
            poles: self.poles_bar.clone(),
            poles_bar: self.poles.clone(),
            opts: self.opts,
        }
    }
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = vec![(1, 2)];
    v.extend((0..n).map(|j| (3 + j, 3 + 2 * n + j)));
    v.extend((0..n).map(|j| (3 + n + j, 3 + 3 * n + j)));
    v
}

impl Reduction for RationalMap {
    fn dim(&self) -> usize {
        4 * self.order() + 3
    }

    fn params(&self) -> Vec<C64> {
        let mut p = vec![self.r, self.u0, self.ubar0];
        p.extend(self.poles.iter().map(|q| q.0));
        p.extend(self.poles.iter().map(|q| q.1));
        p.extend(self.poles_bar.iter().map(|q| q.0));
        p.extend(self.poles_bar.iter().map(|q| q.1));
        p
    }

    fn options(&self) -> MapOptions {
        self.opts
    }

    fn z(&self, w: C64) -> C64 {
        self.r * w + self.u0 + self.poles.iter().map(|(u, p)| u / (w - p)).sum::<C64>()
    }

    fn z_w(&self, w: C64) -> C64 {
        self.r - self.poles.iter().map(|(u, p)| u / ((w - p) * (w - p))).sum::<C64>()
    }

    fn zbar(&self, w: C64) -> C64 {
        let y = w.inv();
        self.r * y + self.ubar0 + self.poles_bar.iter().map(|(u, p)| u / (y - p)).sum::<C64>()
    }

    fn zbar_w(&self, w: C64) -> C64 {
        let y = w.inv();
        let dy = self.r - self.poles_bar.iter().map(|(u, p)| u / ((y - p) * (y - p))).sum::<C64>();
        -dy * y * y
    }

    fn grad_z(&self, w: C64) -> Vec<C64> {
        let n = self.order();
        let mut g = vec![C64::new(0.0, 0.0); 4 * n + 3];
        g[0] = w;
        g[1] = C64::new(1.0, 0.0);
        for (j, (u, p)) in self.poles.iter().enumerate() {
            let d = (w - p).inv();
            g[3 + j] = d;
            g[3 + n + j] = u * d * d;
        }
        g
    }

    fn grad_zbar(&self, w: C64) -> Vec<C64> {
        let n = self.order();
        let y = w.inv();
        let mut g = vec![C64::new(0.0, 0.0); 4 * n + 3];
        g[0] = y;
        g[2] = C64::new(1.0, 0.0);
        for (j, (u, p)) in self.poles_bar.iter().enumerate() {
            let d = (y - p).inv();
            g[3 + 2 * n + j] = d;
            g[3 + 3 * n + j] = u * d * d;
        }
        g
    }

    fn z_singularities(&self) -> Vec<C64> {
        self.poles.iter().map(|q| q.1).collect()
    }

    fn zbar_singularities(&self) -> Vec<C64> {
        self.poles_bar.iter().map(|q| q.1.inv()).collect()
    }

    fn z_singular_at_zero(&self) -> bool {
        false
    }

    fn expand_z(&self, lo: i32) -> CertifiedSeries {
        let mut terms = vec![(1, self.r), (0, self.u0)];
        for &(u, p) in &self.poles {
            terms.extend(pole_series(u, p, false, lo));
        }
        CertifiedSeries::truncated(LaurentSeries::from_terms(&terms).unwrap_or_default(), lo)
    }

    fn expand_z_dot(&self, dot: &[C64], lo: i32) -> CertifiedSeries {
        let n = self.order();
        let mut terms = vec![(1, dot[0]), (0, dot[1])];
        for (j, &(u, p)) in self.poles.iter().enumerate() {
            terms.extend(pole_series(dot[3 + j], p, false, lo));
            terms.extend(pole_series(u * dot[3 + n + j], p, true, lo));
        }
        CertifiedSeries::truncated(LaurentSeries::from_terms(&terms).unwrap_or_default(), lo)
    }

    fn conj_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MapPair;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample() -> RationalMap {
        RationalMap::new(
            c(1.0, 0.0),
            c(0.1, 0.0),
            c(0.1, 0.0),
            vec![(c(0.2, 0.0), c(0.3, 0.1))],
            vec![(c(0.2, 0.0), c(0.3, -0.1))],
            MapOptions::physical_real(),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_value() {
        let m = RationalMap::new(
            c(1.5, 0.0),
            c(0.25, 0.0),
            c(0.25, 0.0),
            vec![(c(1.0, 0.0), c(0.5, 0.0))],
            vec![(c(1.0, 0.0), c(0.5, 0.0))],
            MapOptions::formal(),
        )
        .unwrap();
        let v = MapPair::from(m).eval_z(c(2.0, 0.0)).unwrap();
        assert!((v - c(3.0 + 0.25 + 1.0 / 1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn geometric_expansion_of_pole() {
        let m = RationalMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![(c(1.0, 0.0), c(0.3, 0.0))],
            vec![(c(1.0, 0.0), c(0.3, 0.0))],
            MapOptions::formal(),
        )
        .unwrap();
        let s = MapPair::from(m).expand_z_at_infinity(-20, 1).unwrap();
        for k in 0..19 {
            assert!((s.coeff(-k - 1) - c(0.3f64.powi(k), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn series_matches_closed_form_outside() {
        let m = MapPair::from(sample());
        let s = m.expand_z_at_infinity(-60, 1).unwrap();
        for k in 0..12 {
            let w = C64::from_polar(3.0, 0.5 * k as f64);
            assert!((s.eval(w).unwrap() - m.eval_z(w).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn pole_evaluation_is_refused() {
        let m = MapPair::from(sample());
        assert!(matches!(m.eval_z(c(0.3, 0.1)), Err(Error::SingularPoint(_))));
        assert!(matches!(
            m.eval_zbar(c(0.3, 0.1).conj().inv()),
            Err(Error::SingularPoint(_))
        ));
    }

    #[test]
    fn rejects_repeated_poles_and_outside_poles() {
        let r = RationalMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![(c(0.1, 0.0), c(0.3, 0.0)), (c(0.1, 0.0), c(0.3, 0.0))],
            vec![(c(0.1, 0.0), c(0.2, 0.0)), (c(0.1, 0.0), c(0.4, 0.0))],
            MapOptions::formal(),
        );
        assert!(r.is_err());
        let r = RationalMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![(c(0.1, 0.0), c(1.3, 0.0))],
            vec![(c(0.1, 0.0), c(1.3, 0.0))],
            MapOptions::physical_real(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = sample();
        let w = c(0.8, 0.9);
        let h = 1e-6;
        let dz = (m.z(w + h) - m.z(w - h)) / (2.0 * h);
        let dzb = (m.zbar(w + h) - m.zbar(w - h)) / (2.0 * h);
        assert!((dz - m.z_w(w)).norm() < 1e-8);
        assert!((dzb - m.zbar_w(w)).norm() < 1e-8);
        let p = m.params();
        let g = m.grad_z(w);
        let gb = m.grad_zbar(w);
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] += h;
            let a = RationalMap::from_params(1, &q, MapOptions::formal()).unwrap();
            q[i] -= 2.0 * h;
            let b = RationalMap::from_params(1, &q, MapOptions::formal()).unwrap();
            assert!(((a.z(w) - b.z(w)) / (2.0 * h) - g[i]).norm() < 1e-8);
            assert!(((a.zbar(w) - b.zbar(w)) / (2.0 * h) - gb[i]).norm() < 1e-8);
        }
    }
}
