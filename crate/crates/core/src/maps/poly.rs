use super::{check_finite, symmetrize, MapOptions, Reduction};
use crate::{CertifiedSeries, Error, LaurentSeries, Result, C64};

/// `z = r w + sum_{k=0}^N u_k w^{-k}`, `zbar = r/w + sum_{k=0}^N ubar_k w^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap {
    r: C64,
    u: Vec<C64>,
    ubar: Vec<C64>,
    opts: MapOptions,
}

impl PolyMap {
    pub fn new(r: C64, u: Vec<C64>, ubar: Vec<C64>, opts: MapOptions) -> Result<Self> {
        if u.is_empty() || u.len() != ubar.len() {
            return Err(Error::InvalidMap("u and ubar need the same nonzero length N+1".into()));
        }
        let n1 = u.len();
        let mut p = Vec::with_capacity(2 * n1 + 1);
        p.push(r);
        p.extend(u);
        p.extend(ubar);
        Self::from_params(n1 - 1, &p, opts)
    }

    /// The disk `z = r w`.
    pub fn circle(r: f64) -> Self {
        Self {
            r: C64::new(r, 0.0),
            u: vec![C64::new(0.0, 0.0)],
            ubar: vec![C64::new(0.0, 0.0)],
            opts: MapOptions::physical_real(),
        }
    }

    pub(crate) fn from_params(n: usize, p: &[C64], opts: MapOptions) -> Result<Self> {
        if p.len() != 2 * n + 3 {
            return Err(Error::InvalidMap("parameter count".into()));
        }
        check_finite(p)?;
        let mut p = p.to_vec();
        if opts.real_structure {
            symmetrize(&mut p, &pairs(n))?;
        }
        Ok(Self {
            r: p[0],
            u: p[1..n + 2].to_vec(),
            ubar: p[n + 2..].to_vec(),
            opts,
        })
    }

    pub(crate) fn rebuild(&self, p: &[C64], opts: MapOptions) -> Result<Self> {
        Self::from_params(self.order(), p, opts)
    }

    pub fn order(&self) -> usize {
        self.u.len() - 1
    }

    pub fn r(&self) -> C64 {
        self.r
    }

    pub fn u(&self) -> &[C64] {
        &self.u
    }

    pub fn ubar(&self) -> &[C64] {
        &self.ubar
    }

    pub fn mirror(&self) -> Self {
        Self {
            r: self.r,
            u: self.ubar.clone(),
            ubar: self.u.clone(),
            opts: self.opts,
        }
    }

    /// Exact Laurent polynomial of `zbar` in `w`.
    pub fn zbar_series(&self) -> LaurentSeries {
        let mut terms = vec![(-1, self.r)];
        terms.extend(self.ubar.iter().enumerate().map(|(k, &c)| (k as i32, c)));
        LaurentSeries::from_terms(&terms).unwrap_or_default()
    }

    /// Exact Laurent polynomial of `z` in `w`.
    pub fn z_series(&self) -> LaurentSeries {
        let mut terms = vec![(1, self.r)];
        terms.extend(self.u.iter().enumerate().map(|(k, &c)| (-(k as i32), c)));
        LaurentSeries::from_terms(&terms).unwrap_or_default()
    }
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..=n).map(|k| (1 + k, n + 2 + k)).collect()
}

impl Reduction for PolyMap {
    fn dim(&self) -> usize {
        2 * self.order() + 3
    }

    fn params(&self) -> Vec<C64> {
        let mut p = vec![self.r];
        p.extend(&self.u);
        p.extend(&self.ubar);
        p
    }

    fn options(&self) -> MapOptions {
        self.opts
    }

    fn z(&self, w: C64) -> C64 {
        let y = w.inv();
        let mut acc = C64::new(0.0, 0.0);
        for c in self.u.iter().rev() {
            acc = acc * y + c;
        }
        self.r * w + acc
    }

    fn z_w(&self, w: C64) -> C64 {
        let y = w.inv();
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.u.iter().enumerate().skip(1).rev() {
            acc = acc * y + c * k as f64;
        }
        // acc = sum k u_k y^{k-1}
        self.r - acc * y * y
    }

    fn zbar(&self, w: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for c in self.ubar.iter().rev() {
            acc = acc * w + c;
        }
        self.r / w + acc
    }

    fn zbar_w(&self, w: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.ubar.iter().enumerate().skip(1).rev() {
            acc = acc * w + c * k as f64;
        }
        -self.r / (w * w) + acc
    }

    fn grad_z(&self, w: C64) -> Vec<C64> {
        let n = self.order();
        let mut g = vec![C64::new(0.0, 0.0); 2 * n + 3];
        g[0] = w;
        let y = w.inv();
        let mut yk = C64::new(1.0, 0.0);
        for slot in g.iter_mut().skip(1).take(n + 1) {
            *slot = yk;
            yk *= y;
        }
        g
    }

    fn grad_zbar(&self, w: C64) -> Vec<C64> {
        let n = self.order();
        let mut g = vec![C64::new(0.0, 0.0); 2 * n + 3];
        g[0] = w.inv();
        let mut wk = C64::new(1.0, 0.0);
        for slot in g.iter_mut().skip(n + 2) {
            *slot = wk;
            wk *= w;
        }
        g
    }

    fn z_singularities(&self) -> Vec<C64> {
        Vec::new()
    }

    fn zbar_singularities(&self) -> Vec<C64> {
        Vec::new()
    }

    fn z_singular_at_zero(&self) -> bool {
        self.u.iter().skip(1).any(|c| *c != C64::new(0.0, 0.0))
    }

    fn expand_z(&self, _lo: i32) -> CertifiedSeries {
        CertifiedSeries::exact(self.z_series())
    }

    fn expand_z_dot(&self, dot: &[C64], _lo: i32) -> CertifiedSeries {
        let n = self.order();
        let mut terms = vec![(1, dot[0])];
        terms.extend((0..=n).map(|k| (-(k as i32), dot[1 + k])));
        CertifiedSeries::exact(LaurentSeries::from_terms(&terms).unwrap_or_default())
    }

    fn conj_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MapPair;

    #[test]
    fn constant_term_only() {
        let m = PolyMap::new(
            C64::new(1.0, 0.0),
            vec![C64::new(0.5, 0.0)],
            vec![C64::new(0.5, 0.0)],
            MapOptions::formal(),
        )
        .unwrap();
        let s = MapPair::from(m).expand_z_at_infinity(-2, 1).unwrap();
        assert_eq!(s.coeff(1), C64::new(1.0, 0.0));
        assert_eq!(s.coeff(0), C64::new(0.5, 0.0));
        assert_eq!(s.coeff(-1), C64::new(0.0, 0.0));
    }

    #[test]
    fn zbar_of_circle() {
        let m = MapPair::from(PolyMap::circle(2.0));
        let s = m.expand_zbar_at_zero(-3, 3).unwrap().trim();
        assert_eq!(s, LaurentSeries::monomial(-1, C64::new(2.0, 0.0)));
    }

    #[test]
    fn dimension_count() {
        for n in 0..5 {
            let m = PolyMap::new(
                C64::new(1.0, 0.0),
                vec![C64::new(0.0, 0.0); n + 1],
                vec![C64::new(0.0, 0.0); n + 1],
                MapOptions::formal(),
            )
            .unwrap();
            assert_eq!(MapPair::from(m).dim(), 2 * n + 3);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = PolyMap::new(
            C64::new(1.1, 0.2),
            vec![C64::new(0.1, 0.0), C64::new(0.2, 0.1), C64::new(-0.1, 0.3)],
            vec![C64::new(0.3, 0.0), C64::new(-0.2, 0.1), C64::new(0.1, 0.1)],
            MapOptions::formal(),
        )
        .unwrap();
        let w = C64::new(0.8, 0.9);
        let h = 1e-6;
        let dz = (m.z(w + h) - m.z(w - h)) / (2.0 * h);
        let dzb = (m.zbar(w + h) - m.zbar(w - h)) / (2.0 * h);
        assert!((dz - m.z_w(w)).norm() < 1e-8);
        assert!((dzb - m.zbar_w(w)).norm() < 1e-8);
    }
}
