//! Primal-dual interior-point solver for block-angular convex QPs.
//!
//! The problems built by the dispatch and portfolio modules share one shape:
//! a handful of global variables (the invested capacities) coupled to many
//! independent per-scenario blocks. The Newton system is solved by a Schur
//! complement onto the global variables, so each block is factored on its own.
//!
//! ```text
//! minimize    cg' g + sum_k ( 1/2 x_k' diag(P_k) x_k + c_k' x_k )
//! subject to  A_k [g; x_k] = b_k,   G_k [g; x_k] <= h_k,   G_0 g <= h_0
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Dense, Ldl};
use crate::scalar::Scalar;

/// Sparse constraint row split into global and block-local coefficients.
#[derive(Debug, Clone, Default)]
pub(crate) struct Row<F> {
    pub global: Vec<(usize, F)>,
    pub local: Vec<(usize, F)>,
}

impl<F: Scalar> Row<F> {
    pub fn local(entries: Vec<(usize, F)>) -> Self {
        Row {
            global: Vec::new(),
            local: entries,
        }
    }

    fn eval(&self, g: &[F], x: &[F]) -> F {
        let a: F = self.global.iter().map(|&(j, v)| v * g[j]).sum();
        let b: F = self.local.iter().map(|&(j, v)| v * x[j]).sum();
        a + b
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct QpBlock<F> {
    pub n: usize,
    /// Diagonal Hessian entries.
    pub quad: Vec<F>,
    pub lin: Vec<F>,
    pub eq: Vec<(Row<F>, F)>,
    /// Rows read as `row . z <= rhs`.
    pub ineq: Vec<(Row<F>, F)>,
}

impl<F: Scalar> QpBlock<F> {
    pub fn new(n: usize) -> Self {
        QpBlock {
            n,
            quad: vec![F::zero(); n],
            lin: vec![F::zero(); n],
            eq: Vec::new(),
            ineq: Vec::new(),
        }
    }

    pub fn objective(&self, x: &[F]) -> F {
        x.iter()
            .zip(&self.quad)
            .zip(&self.lin)
            .map(|((&xi, &p), &c)| F::lit(0.5) * p * xi * xi + c * xi)
            .sum()
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BlockQp<F> {
    pub n_global: usize,
    pub global_lin: Vec<F>,
    pub global_ineq: Vec<(Vec<(usize, F)>, F)>,
    pub blocks: Vec<QpBlock<F>>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution<F> {
    pub global: Vec<F>,
    pub blocks: Vec<Vec<F>>,
    pub objective: F,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings<F> {
    pub tol: F,
    pub max_iter: usize,
}

impl<F: Scalar> Default for IpmSettings<F> {
    fn default() -> Self {
        IpmSettings {
            tol: F::solver_tol(),
            max_iter: 120,
        }
    }
}

/// Primal and dual iterate for one block.
#[derive(Debug, Clone)]
struct BlockState<F> {
    x: Vec<F>,
    y: Vec<F>,
    s: Vec<F>,
    z: Vec<F>,
}

#[derive(Debug, Clone)]
struct State<F> {
    g: Vec<F>,
    sg: Vec<F>,
    zg: Vec<F>,
    blocks: Vec<BlockState<F>>,
}

#[derive(Debug, Clone)]
struct Residuals<F> {
    dual_g: Vec<F>,
    dual: Vec<Vec<F>>,
    prim_eq: Vec<Vec<F>>,
    prim_in_g: Vec<F>,
    prim_in: Vec<Vec<F>>,
}

/// Right-hand sides of the complementarity equations `Z ds + S dz = -rc`.
#[derive(Debug, Clone)]
struct Compl<F> {
    g: Vec<F>,
    blocks: Vec<Vec<F>>,
}

#[derive(Debug, Clone)]
struct Step<F> {
    g: Vec<F>,
    sg: Vec<F>,
    zg: Vec<F>,
    blocks: Vec<BlockState<F>>,
}

struct BlockFactor<F> {
    lu: Ldl<F>,
    /// Coupling `B_k` stored column-major: `n_global` columns of length `n + m`.
    coupling: Vec<Vec<F>>,
    /// `K_k^{-1} B_k`, same layout.
    solved_coupling: Vec<Vec<F>>,
}

struct Factor<F> {
    blocks: Vec<BlockFactor<F>>,
    schur: Option<Ldl<F>>,
}

/// Barrier weight `z / s`, capped so that slacks collapsing onto an active
/// bound cannot overflow the reduced system.
fn weight<F: Scalar>(z: F, s: F) -> F {
    let cap = F::epsilon().powi(-2);
    if s * cap > z {
        z / s
    } else {
        cap
    }
}

impl<F: Scalar> BlockQp<F> {
    pub fn objective(&self, g: &[F], xs: &[Vec<F>]) -> F {
        let glob: F = self.global_lin.iter().zip(g).map(|(&c, &v)| c * v).sum();
        glob + self
            .blocks
            .iter()
            .zip(xs)
            .map(|(b, x)| b.objective(x))
            .sum::<F>()
    }

    fn validate(&self) -> Result<()> {
        if self.global_lin.len() != self.n_global {
            return Err(Error::invalid("global objective length mismatch"));
        }
        for b in &self.blocks {
            if b.quad.len() != b.n || b.lin.len() != b.n {
                return Err(Error::invalid("block objective length mismatch"));
            }
            for (row, _) in b.eq.iter().chain(b.ineq.iter()) {
                if row.global.iter().any(|&(j, _)| j >= self.n_global)
                    || row.local.iter().any(|&(j, _)| j >= b.n)
                {
                    return Err(Error::invalid("constraint index out of range"));
                }
            }
        }
        Ok(())
    }

    fn residuals(&self, st: &State<F>) -> Residuals<F> {
        let mut dual_g = self.global_lin.clone();
        for ((row, _), &z) in self.global_ineq.iter().zip(&st.zg) {
            for &(j, v) in row {
                dual_g[j] = dual_g[j] + v * z;
            }
        }
        let prim_in_g = self
            .global_ineq
            .iter()
            .zip(&st.sg)
            .map(|((row, h), &s)| {
                let a: F = row.iter().map(|&(j, v)| v * st.g[j]).sum();
                a + s - *h
            })
            .collect();

        let mut dual = Vec::with_capacity(self.blocks.len());
        let mut prim_eq = Vec::with_capacity(self.blocks.len());
        let mut prim_in = Vec::with_capacity(self.blocks.len());
        for (b, bs) in self.blocks.iter().zip(&st.blocks) {
            let mut d: Vec<F> = (0..b.n).map(|j| b.quad[j] * bs.x[j] + b.lin[j]).collect();
            let mut pe = Vec::with_capacity(b.eq.len());
            for ((row, rhs), &y) in b.eq.iter().zip(&bs.y) {
                for &(j, v) in &row.local {
                    d[j] = d[j] + v * y;
                }
                for &(j, v) in &row.global {
                    dual_g[j] = dual_g[j] + v * y;
                }
                pe.push(row.eval(&st.g, &bs.x) - *rhs);
            }
            let mut pi = Vec::with_capacity(b.ineq.len());
            for (((row, rhs), &z), &s) in b.ineq.iter().zip(&bs.z).zip(&bs.s) {
                for &(j, v) in &row.local {
                    d[j] = d[j] + v * z;
                }
                for &(j, v) in &row.global {
                    dual_g[j] = dual_g[j] + v * z;
                }
                pi.push(row.eval(&st.g, &bs.x) + s - *rhs);
            }
            dual.push(d);
            prim_eq.push(pe);
            prim_in.push(pi);
        }
        Residuals {
            dual_g,
            dual,
            prim_eq,
            prim_in_g,
            prim_in,
        }
    }

    fn factor(&self, st: &State<F>) -> Result<Factor<F>> {
        let ng = self.n_global;
        let reg = F::epsilon().sqrt() * F::lit(1e-1);
        let blocks: Result<Vec<BlockFactor<F>>> = self
            .blocks
            .par_iter()
            .zip(st.blocks.par_iter())
            .map(|(b, bs)| {
                let n = b.n;
                let m = b.eq.len();
                let mut k = Dense::zeros(n + m);
                let mut coupling = vec![vec![F::zero(); n + m]; ng];
                for j in 0..n {
                    k.add(j, j, b.quad[j] + reg);
                }
                for (((row, _), &z), &s) in b.ineq.iter().zip(&bs.z).zip(&bs.s) {
                    let w = weight(z, s);
                    for &(i, vi) in &row.local {
                        for &(j, vj) in &row.local {
                            k.add(i, j, w * vi * vj);
                        }
                        for &(gj, vg) in &row.global {
                            coupling[gj][i] = coupling[gj][i] + w * vi * vg;
                        }
                    }
                }
                for (r, (row, _)) in b.eq.iter().enumerate() {
                    for &(j, v) in &row.local {
                        k.set(n + r, j, v);
                        k.set(j, n + r, v);
                    }
                    for &(gj, vg) in &row.global {
                        coupling[gj][n + r] = vg;
                    }
                    k.set(n + r, n + r, -reg);
                }
                let lu = Ldl::factor(k, n)?;
                if lu.bumped > 0 {
                    log::trace!("{} block pivots regularized", lu.bumped);
                }
                let solved_coupling = coupling.iter().map(|c| lu.solve(c)).collect();
                Ok(BlockFactor {
                    lu,
                    coupling,
                    solved_coupling,
                })
            })
            .collect();
        let blocks = blocks?;

        let schur = if ng > 0 {
            let mut s = Dense::zeros(ng);
            for j in 0..ng {
                s.add(j, j, reg);
            }
            for ((row, _), (&z, &sl)) in self.global_ineq.iter().zip(st.zg.iter().zip(&st.sg)) {
                let w = weight(z, sl);
                for &(i, vi) in row {
                    for &(j, vj) in row {
                        s.add(i, j, w * vi * vj);
                    }
                }
            }
            for (b, bs) in self.blocks.iter().zip(&st.blocks) {
                for (((row, _), &z), &sl) in b.ineq.iter().zip(&bs.z).zip(&bs.s) {
                    if row.global.is_empty() {
                        continue;
                    }
                    let w = weight(z, sl);
                    for &(i, vi) in &row.global {
                        for &(j, vj) in &row.global {
                            s.add(i, j, w * vi * vj);
                        }
                    }
                }
            }
            for bf in &blocks {
                for i in 0..ng {
                    for j in 0..ng {
                        let v: F = bf.coupling[i]
                            .iter()
                            .zip(&bf.solved_coupling[j])
                            .map(|(&a, &b)| a * b)
                            .sum();
                        s.add(i, j, -v);
                    }
                }
            }
            Some(Ldl::factor(s, ng)?)
        } else {
            None
        };
        Ok(Factor { blocks, schur })
    }

    /// Newton direction for residuals `res` and complementarity terms `rc`.
    fn direction(&self, st: &State<F>, fac: &Factor<F>, res: &Residuals<F>, rc: &Compl<F>) -> Step<F> {
        let ng = self.n_global;
        // d = S^{-1} (Z r_i - r_c) per inequality row
        let dg: Vec<F> = (0..self.global_ineq.len())
            .map(|i| (st.zg[i] * res.prim_in_g[i] - rc.g[i]) / st.sg[i])
            .collect();
        let dk: Vec<Vec<F>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let bs = &st.blocks[k];
                (0..b.ineq.len())
                    .map(|i| (bs.z[i] * res.prim_in[k][i] - rc.blocks[k][i]) / bs.s[i])
                    .collect()
            })
            .collect();

        let mut rhs_g: Vec<F> = res.dual_g.iter().map(|&v| -v).collect();
        for ((row, _), &d) in self.global_ineq.iter().zip(&dg) {
            for &(j, v) in row {
                rhs_g[j] = rhs_g[j] - v * d;
            }
        }
        let mut u = Vec::with_capacity(self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            let n = b.n;
            let mut r = vec![F::zero(); n + b.eq.len()];
            for j in 0..n {
                r[j] = -res.dual[k][j];
            }
            for ((row, _), &d) in b.ineq.iter().zip(&dk[k]) {
                for &(j, v) in &row.local {
                    r[j] = r[j] - v * d;
                }
                for &(j, v) in &row.global {
                    rhs_g[j] = rhs_g[j] - v * d;
                }
            }
            for (i, &p) in res.prim_eq[k].iter().enumerate() {
                r[n + i] = -p;
            }
            let uk = fac.blocks[k].lu.solve(&r);
            for (j, rg) in rhs_g.iter_mut().enumerate() {
                let v: F = fac.blocks[k].coupling[j]
                    .iter()
                    .zip(&uk)
                    .map(|(&a, &b)| a * b)
                    .sum();
                *rg = *rg - v;
            }
            u.push(uk);
        }
        let dgv = match &fac.schur {
            Some(lu) => lu.solve(&rhs_g),
            None => Vec::new(),
        };

        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            let n = b.n;
            let mut sol = u[k].clone();
            for j in 0..ng {
                let col = &fac.blocks[k].solved_coupling[j];
                for (v, &c) in sol.iter_mut().zip(col) {
                    *v = *v - c * dgv[j];
                }
            }
            let dy = sol[n..].to_vec();
            sol.truncate(n);
            let dx = sol;
            let bs = &st.blocks[k];
            let mut ds = Vec::with_capacity(b.ineq.len());
            let mut dz = Vec::with_capacity(b.ineq.len());
            for (i, (row, _)) in b.ineq.iter().enumerate() {
                let gdx = row.eval(&dgv, &dx);
                ds.push(-res.prim_in[k][i] - gdx);
                dz.push(dk[k][i] + weight(bs.z[i], bs.s[i]) * gdx);
            }
            blocks.push(BlockState {
                x: dx,
                y: dy,
                s: ds,
                z: dz,
            });
        }
        let mut sg = Vec::with_capacity(self.global_ineq.len());
        let mut zg = Vec::with_capacity(self.global_ineq.len());
        for (i, (row, _)) in self.global_ineq.iter().enumerate() {
            let gdx: F = row.iter().map(|&(j, v)| v * dgv[j]).sum();
            sg.push(-res.prim_in_g[i] - gdx);
            zg.push(dg[i] + weight(st.zg[i], st.sg[i]) * gdx);
        }
        Step {
            g: dgv,
            sg,
            zg,
            blocks,
        }
    }

    pub fn solve(&self, settings: &IpmSettings<F>) -> Result<QpSolution<F>> {
        self.validate()?;
        let one = F::one();
        let mut st = State {
            g: vec![F::zero(); self.n_global],
            sg: self
                .global_ineq
                .iter()
                .map(|(_, h)| h.max(one))
                .collect(),
            zg: vec![one; self.global_ineq.len()],
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockState {
                    x: vec![F::zero(); b.n],
                    y: vec![F::zero(); b.eq.len()],
                    s: b.ineq.iter().map(|(_, h)| h.max(one)).collect(),
                    z: vec![one; b.ineq.len()],
                })
                .collect(),
        };
        let m_total: usize =
            self.global_ineq.len() + self.blocks.iter().map(|b| b.ineq.len()).sum::<usize>();
        let m_f = F::from_usize_lossy(m_total.max(1));

        let scale_c = self
            .blocks
            .iter()
            .flat_map(|b| b.lin.iter())
            .chain(self.global_lin.iter())
            .fold(F::zero(), |m, v| m.max(v.abs()));
        let scale_b = self
            .blocks
            .iter()
            .flat_map(|b| b.eq.iter().chain(b.ineq.iter()).map(|(_, h)| *h))
            .chain(self.global_ineq.iter().map(|(_, h)| *h))
            .fold(F::zero(), |m, v| m.max(v.abs()));

        let mut last = (F::infinity(), F::infinity(), F::infinity());
        let loose = settings.tol.sqrt();
        // Last iterate within the loose tolerance, kept in case the
        // iteration later breaks down numerically.
        let mut fallback: Option<(State<F>, usize)> = None;
        for iter in 0..settings.max_iter {
            let res = self.residuals(&st);
            let gap = self.gap(&st);
            let pres = res
                .prim_eq
                .iter()
                .chain(res.prim_in.iter())
                .chain(std::iter::once(&res.prim_in_g))
                .fold(F::zero(), |m, v| m.max(crate::scalar::norm_inf(v)));
            let dres = res
                .dual
                .iter()
                .chain(std::iter::once(&res.dual_g))
                .fold(F::zero(), |m, v| m.max(crate::scalar::norm_inf(v)));
            let obj = self.objective(
                &st.g,
                &st.blocks.iter().map(|b| b.x.clone()).collect::<Vec<_>>(),
            );
            let pres_rel = pres / (one + scale_b);
            let dres_rel = dres / (one + scale_c);
            let gap_rel = gap / (one + obj.abs());
            if !(pres_rel.is_finite() && dres_rel.is_finite() && gap_rel.is_finite()) {
                return self.broke_down(fallback, "non-finite residuals");
            }
            last = (pres_rel, dres_rel, gap_rel);
            if pres_rel <= settings.tol && dres_rel <= settings.tol && gap_rel <= settings.tol {
                return Ok(self.finish(st, iter));
            }

            if pres_rel <= loose && dres_rel <= loose && gap_rel <= loose {
                fallback = Some((st.clone(), iter));
            }
            let fac = match self.factor(&st) {
                Ok(f) => f,
                Err(e) => return self.broke_down(fallback, &e.to_string()),
            };
            let mu = gap / m_f;

            // predictor
            let rc_aff = self.compl(&st, None, F::zero());
            let aff = self.direction(&st, &fac, &res, &rc_aff);
            let a_aff = self.max_step(&st, &aff);
            let mu_aff = self.gap_after(&st, &aff, a_aff) / m_f;
            let sigma = (mu_aff / mu).powi(3).min(one);

            // corrector
            let rc = self.compl(&st, Some(&aff), sigma * mu);
            let step = self.direction(&st, &fac, &res, &rc);
            let a = (F::lit(0.99) * self.max_step(&st, &step)).min(one);
            self.apply(&mut st, &step, a);
        }
        let (p, d, g) = last;
        if let Some((st, iter)) = fallback {
            log::debug!("interior point stopped at loose tolerance: p={p} d={d} gap={g}");
            return Ok(self.finish(st, iter));
        }
        Err(Error::NotConverged {
            iterations: settings.max_iter,
            detail: format!(
                "interior point residuals primal={:e} dual={:e} gap={:e}",
                p.as_f64(),
                d.as_f64(),
                g.as_f64()
            ),
        })
    }

    fn finish(&self, st: State<F>, iterations: usize) -> QpSolution<F> {
        let blocks: Vec<Vec<F>> = st.blocks.into_iter().map(|b| b.x).collect();
        let objective = self.objective(&st.g, &blocks);
        QpSolution {
            global: st.g,
            blocks,
            objective,
            iterations,
        }
    }

    fn broke_down(&self, fallback: Option<(State<F>, usize)>, why: &str) -> Result<QpSolution<F>> {
        match fallback {
            Some((st, iter)) => {
                log::debug!("interior point stopped at loose tolerance after {why}");
                Ok(self.finish(st, iter))
            }
            None => Err(Error::Degenerate(format!("interior point broke down: {why}"))),
        }
    }

    fn gap(&self, st: &State<F>) -> F {
        let g: F = st.sg.iter().zip(&st.zg).map(|(&s, &z)| s * z).sum();
        g + st
            .blocks
            .iter()
            .map(|b| b.s.iter().zip(&b.z).map(|(&s, &z)| s * z).sum::<F>())
            .sum::<F>()
    }

    fn gap_after(&self, st: &State<F>, d: &Step<F>, a: F) -> F {
        let pair = |s: &[F], z: &[F], ds: &[F], dz: &[F]| -> F {
            (0..s.len())
                .map(|i| (s[i] + a * ds[i]) * (z[i] + a * dz[i]))
                .sum()
        };
        let mut g = pair(&st.sg, &st.zg, &d.sg, &d.zg);
        for (b, db) in st.blocks.iter().zip(&d.blocks) {
            g = g + pair(&b.s, &b.z, &db.s, &db.z);
        }
        g
    }

    fn compl(&self, st: &State<F>, aff: Option<&Step<F>>, target: F) -> Compl<F> {
        let f = |s: &[F], z: &[F], ds: Option<(&[F], &[F])>| -> Vec<F> {
            (0..s.len())
                .map(|i| {
                    let corr = ds.map_or(F::zero(), |(a, b)| a[i] * b[i]);
                    s[i] * z[i] + corr - target
                })
                .collect()
        };
        Compl {
            g: f(&st.sg, &st.zg, aff.map(|a| (a.sg.as_slice(), a.zg.as_slice()))),
            blocks: st
                .blocks
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    f(
                        &b.s,
                        &b.z,
                        aff.map(|a| (a.blocks[k].s.as_slice(), a.blocks[k].z.as_slice())),
                    )
                })
                .collect(),
        }
    }

    fn max_step(&self, st: &State<F>, d: &Step<F>) -> F {
        let mut a = F::one();
        let mut scan = |v: &[F], dv: &[F]| {
            for (&x, &dx) in v.iter().zip(dv) {
                if dx < F::zero() {
                    a = a.min(-x / dx);
                }
            }
        };
        scan(&st.sg, &d.sg);
        scan(&st.zg, &d.zg);
        for (b, db) in st.blocks.iter().zip(&d.blocks) {
            scan(&b.s, &db.s);
            scan(&b.z, &db.z);
        }
        a
    }

    fn apply(&self, st: &mut State<F>, d: &Step<F>, a: F) {
        let upd = |v: &mut [F], dv: &[F]| {
            for (x, &dx) in v.iter_mut().zip(dv) {
                *x = *x + a * dx;
            }
        };
        upd(&mut st.g, &d.g);
        upd(&mut st.sg, &d.sg);
        upd(&mut st.zg, &d.zg);
        for (b, db) in st.blocks.iter_mut().zip(&d.blocks) {
            upd(&mut b.x, &db.x);
            upd(&mut b.y, &db.y);
            upd(&mut b.s, &db.s);
            upd(&mut b.z, &db.z);
        }
    }
}
